//! End-to-end CLI checks: subcommand wiring, exit codes, and byte-level
//! output determinism.

use std::path::Path;
use std::process::Command;

fn mnli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mnli"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn regret_config(out: &Path) -> String {
    format!(
        r#"{{
  "instance": {{
    "n_products": 2,
    "attractions": [1.0, 0.4],
    "v_bounds": [0.1, 1.0],
    "unit_profits": [1.0, 0.22],
    "per_product_caps": [1, 1],
    "total_cap": 2,
    "max_assortment": 2,
    "arrival": {{"kind": "deterministic", "mean": 2}}
  }},
  "policies": [{{"kind": "proposed"}}, {{"kind": "greedy"}}],
  "horizon": 60,
  "replications": 2,
  "base_seed": 9,
  "outputs": "{}",
  "mode": "regret"
}}"#,
        out.display()
    )
}

#[test]
fn simulate_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let cfg_a = dir.path().join("a.json");
    let cfg_b = dir.path().join("b.json");
    write(&cfg_a, &regret_config(&out_a));
    write(&cfg_b, &regret_config(&out_b));

    for cfg in [&cfg_a, &cfg_b] {
        let status = mnli().args(["simulate", "--config"]).arg(cfg).output().unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    }

    let mut names: Vec<_> = std::fs::read_dir(&out_a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        let a = std::fs::read(out_a.join(&name)).unwrap();
        let b = std::fs::read(out_b.join(&name)).unwrap();
        assert_eq!(a, b, "output {name:?} differs between identical runs");
    }
}

#[test]
fn trace_files_have_schema_header_and_consistent_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("cfg.json");
    write(&cfg, &regret_config(&out));
    let status = mnli().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert!(status.status.success());

    let read_cum = |path: &Path, col: usize| -> Vec<f64> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .skip(2)
            .map(|l| l.split(',').nth(col).unwrap().parse::<f64>().unwrap())
            .collect()
    };
    let header = std::fs::read_to_string(out.join("trace_proposed_0.csv")).unwrap();
    assert!(header.starts_with("# schema: mnli.trace.v1"));

    // the mean curve equals the pointwise average of the per-run curves
    let a = read_cum(&out.join("trace_proposed_0.csv"), 5);
    let b = read_cum(&out.join("trace_proposed_1.csv"), 5);
    let mean = read_cum(&out.join("mean_regret_proposed.csv"), 1);
    for i in 0..mean.len() {
        assert!((mean[i] - 0.5 * (a[i] + b[i])).abs() < 1e-12);
    }
    // cumulative regret never decreases beyond the DP tolerance
    for curve in [&a, &b] {
        let mut prev = 0.0;
        for &c in curve {
            assert!(c - prev >= -1e-9);
            prev = c;
        }
    }
}

#[test]
fn single_cycle_single_replication_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg_path = dir.path().join("cfg.json");
    let mut cfg: serde_json::Value = serde_json::from_str(&regret_config(&out)).unwrap();
    cfg["horizon"] = 1.into();
    cfg["replications"] = 1.into();
    cfg["policies"] = serde_json::json!([{ "kind": "greedy" }]);
    write(&cfg_path, &cfg.to_string());
    let output = mnli().args(["simulate", "--config"]).arg(&cfg_path).output().unwrap();
    assert!(output.status.success());

    let trace = std::fs::read_to_string(out.join("trace_greedy_0.csv")).unwrap();
    assert_eq!(trace.lines().count(), 3); // schema + header + one row
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let row_regret: f64 = trace.lines().last().unwrap().split(',').nth(5).unwrap().parse().unwrap();
    let mean = summary["policies"][0]["mean_final_regret"].as_f64().unwrap();
    assert!((mean - row_regret).abs() < 1e-15);
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write(&cfg, "{ not json");
    let output = mnli().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(2));

    // structurally valid JSON but an invalid instance (profits not normalized)
    let bad_instance = r#"{
      "instance": {
        "n_products": 1, "attractions": [0.5], "v_bounds": [0.1, 1.0],
        "unit_profits": [0.5], "per_product_caps": [1], "total_cap": 1,
        "max_assortment": 1, "arrival": {"kind": "deterministic", "mean": 1}
      },
      "policies": [{"kind": "greedy"}],
      "horizon": 5, "replications": 1, "base_seed": 0,
      "outputs": "/tmp/unused", "mode": "regret"
    }"#;
    write(&cfg, bad_instance);
    let output = mnli().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn resource_limits_exit_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let req = dir.path().join("eval.json");
    // prod(u_i + 1) far beyond the default state budget
    write(
        &req,
        r#"{
          "query": {
            "decision": [300, 300, 300],
            "attractions": [0.5, 0.5, 0.5],
            "profits": [1.0, 1.0, 1.0],
            "arrival": {"kind": "deterministic", "mean": 2}
          },
          "method": "exact"
        }"#,
    );
    let output = mnli().args(["evaluate", "--config"]).arg(&req).output().unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn evaluate_returns_the_closed_form_value() {
    let dir = tempfile::tempdir().unwrap();
    let req = dir.path().join("eval.json");
    write(
        &req,
        r#"{
          "query": {
            "decision": [1, 0],
            "attractions": [1.0, 1.0],
            "profits": [1.0, 0.22],
            "arrival": {"kind": "deterministic", "mean": 2}
          }
        }"#,
    );
    let output = mnli().args(["evaluate", "--config"]).arg(&req).output().unwrap();
    assert!(output.status.success());
    let response: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert!((response["value"].as_f64().unwrap() - 0.75).abs() < 1e-9);
}

#[test]
fn optimize_solves_the_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let req = dir.path().join("opt.json");
    write(
        &req,
        r#"{
          "instance": {
            "n_products": 2, "attractions": [1.0, 1.0], "v_bounds": [0.1, 1.0],
            "unit_profits": [1.0, 0.22], "per_product_caps": [1, 1], "total_cap": 2,
            "max_assortment": 2, "arrival": {"kind": "deterministic", "mean": 2}
          },
          "oracle": {"kind": "exact"}
        }"#,
    );
    let output = mnli().args(["optimize", "--config"]).arg(&req).output().unwrap();
    assert!(output.status.success());
    let response: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(response["decision"], serde_json::json!([1, 0]));
    assert!((response["value"].as_f64().unwrap() - 0.75).abs() < 1e-9);
    assert_eq!(response["evaluations"], 4);
}

#[test]
fn estimate_bench_initial_estimate_anchors_the_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("cfg.json");
    // truth fed as the initial estimate: the error curve starts at zero
    write(
        &cfg,
        &format!(
            r#"{{
      "instance": {{
        "n_products": 2, "attractions": [0.8, 0.4], "v_bounds": [0.1, 1.0],
        "unit_profits": [1.0, 0.7], "per_product_caps": [3, 3], "total_cap": 4,
        "max_assortment": 2, "arrival": {{"kind": "deterministic", "mean": 2}}
      }},
      "horizon": 30, "replications": 2, "base_seed": 5,
      "outputs": "{}", "mode": "estimator-benchmark",
      "initial_estimate": [0.8, 0.4]
    }}"#,
            out.display()
        ),
    );
    let output = mnli().args(["estimate-bench", "--config"]).arg(&cfg).output().unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let csv = std::fs::read_to_string(out.join("estimator_errors.csv")).unwrap();
    let first_row = csv.lines().nth(2).unwrap();
    let fields: Vec<&str> = first_row.split(',').collect();
    assert_eq!(fields[0], "0");
    for v in &fields[1..] {
        assert_eq!(v.parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn reduce_audit_reports_equality() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        &format!(
            r#"{{
      "instance": {{
        "n_products": 2, "attractions": [1.0, 0.4], "v_bounds": [0.1, 1.0],
        "unit_profits": [1.0, 0.22], "per_product_caps": [4, 4], "total_cap": 4,
        "max_assortment": 2, "arrival": {{"kind": "deterministic", "mean": 2}}
      }},
      "policies": [{{"kind": "proposed"}}],
      "horizon": 25, "replications": 3, "base_seed": 17,
      "outputs": "{}", "mode": "reduction-audit"
    }}"#,
            out.display()
        ),
    );
    let output = mnli().args(["reduce-audit", "--config"]).arg(&cfg).output().unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    for run in summary["runs"].as_array().unwrap() {
        assert_eq!(run["realized_equal"], true);
        assert!(run["optimum_gap"].as_f64().unwrap() <= 1e-9);
    }
    assert!(out.join("paired_0.csv").exists());
}

#[test]
fn estimator_trace_emission() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg_path = dir.path().join("cfg.json");
    let mut cfg: serde_json::Value = serde_json::from_str(&regret_config(&out)).unwrap();
    cfg["emit_estimator_trace"] = true.into();
    cfg["policies"] = serde_json::json!([{ "kind": "proposed" }]);
    cfg["replications"] = 1.into();
    write(&cfg_path, &cfg.to_string());
    let output = mnli().args(["simulate", "--config"]).arg(&cfg_path).output().unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));

    let text = std::fs::read_to_string(out.join("estimator_proposed_0.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "# schema: mnli.estimator-trace.v1");
    assert_eq!(
        lines.next().unwrap(),
        "epoch,product,t_count,mu_bar,mu_lcb,mu_ucb,v_lcb,v_ucb,r_hat"
    );
    // two products per closed epoch, epochs increasing
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(!rows.is_empty());
    assert!(rows.len().is_multiple_of(2));
    for pair in rows.chunks(2) {
        assert_eq!(pair[0][0], pair[1][0]);
        assert_eq!(pair[0][1], "1");
        assert_eq!(pair[1][1], "2");
        let r_hat: f64 = pair[0][8].parse().unwrap();
        assert!((0.0..=1.0).contains(&r_hat));
    }
}

#[test]
fn subcommand_and_mode_must_match() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("cfg.json");
    write(&cfg, &regret_config(&out));
    let output = mnli().args(["estimate-bench", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}
