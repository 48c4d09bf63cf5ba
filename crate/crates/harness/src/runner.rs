//! Replicated policy runs, clairvoyant baselines, aggregation, and the
//! reduction audit driver.
//!
//! Replications fan out over the rayon pool with seed `base_seed + rep`;
//! results are collected by index, so aggregation and all emitted files are
//! deterministic regardless of completion order.

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use mnli_core::estimate::{EpochRecord, EstimatorState};
use mnli_core::policy::{clairvoyant, run_policy_observed};
use mnli_core::profit::CostStructure;
use mnli_core::reduce::{run_reduction, ReductionAudit};
use mnli_core::{Instance, InventoryDecision, RegretTrace};

use crate::config::{ExperimentConfig, Mode};
use crate::io;

/// Memo of clairvoyant solutions keyed by (instance, costs) JSON. The exact
/// solve enumerates the whole feasible set, so repeated lookups matter when
/// many runs share an instance.
#[derive(Default)]
pub struct ClairvoyantCache {
    memo: Mutex<HashMap<String, (InventoryDecision, f64)>>,
}

impl ClairvoyantCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(
        &self,
        instance: &Instance,
        costs: Option<&CostStructure>,
    ) -> Result<(InventoryDecision, f64)> {
        let key = format!(
            "{}|{}",
            serde_json::to_string(instance)?,
            serde_json::to_string(&costs)?
        );
        if let Some(hit) = self.memo.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let solved = clairvoyant(instance, costs)?;
        self.memo
            .lock()
            .unwrap()
            .insert(key, solved.clone());
        Ok(solved)
    }
}

/// Aggregate of one policy across replications.
#[derive(Debug, Clone, Serialize)]
pub struct PolicySummary {
    pub policy: String,
    pub replications: usize,
    pub mean_final_regret: f64,
    pub std_final_regret: f64,
    pub mean_epochs: f64,
    pub mean_exploratory_cycles: f64,
    pub final_regrets: Vec<f64>,
    pub clairvoyant_value: f64,
    pub clairvoyant_decision: InventoryDecision,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub schema: String,
    pub horizon: usize,
    pub replications: usize,
    pub base_seed: u64,
    pub policies: Vec<PolicySummary>,
}

/// Summary plus the per-policy mean regret curves (also written to disk).
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub summary: ExperimentSummary,
    /// `(policy label, mean cumulative regret per cycle)`.
    pub mean_curves: Vec<(String, Vec<f64>)>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Runs every configured policy for the configured number of replications
/// and writes per-run traces, per-policy mean regret curves, and a summary.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.mode != Mode::Regret {
        bail!("run_experiment requires mode \"regret\"");
    }
    std::fs::create_dir_all(&cfg.outputs)
        .with_context(|| format!("cannot create {}", cfg.outputs.display()))?;

    let cache = ClairvoyantCache::new();
    let mut summaries = Vec::new();
    let mut mean_curves = Vec::new();

    for (p_idx, spec) in cfg.policies.iter().enumerate() {
        let label = spec.label(p_idx, &cfg.policies);
        let baseline = cache.solve(&cfg.instance, spec.costs.as_ref())?;
        let policy_cfg = spec.to_policy_config();

        let traces: Vec<RegretTrace> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = cfg.base_seed + rep as u64;
                run_trace(cfg, &policy_cfg, &label, rep, seed, &baseline)
            })
            .collect::<Result<_>>()?;

        for (rep, trace) in traces.iter().enumerate() {
            let path = cfg.outputs.join(format!("trace_{label}_{rep}.csv"));
            io::write_trace_csv(&path, trace)?;
        }

        // pointwise mean of the per-run cumulative regrets
        let mut curve = vec![0.0f64; cfg.horizon];
        for trace in &traces {
            for (t, rec) in trace.records.iter().enumerate() {
                curve[t] += rec.cum_regret;
            }
        }
        for value in curve.iter_mut() {
            *value /= cfg.replications as f64;
        }
        io::write_mean_curve_csv(&cfg.outputs.join(format!("mean_regret_{label}.csv")), &curve)?;
        mean_curves.push((label.clone(), curve));

        let finals: Vec<f64> = traces.iter().map(|t| t.summary.final_regret).collect();
        summaries.push(PolicySummary {
            policy: label,
            replications: cfg.replications,
            mean_final_regret: mean(&finals),
            std_final_regret: sample_std(&finals),
            mean_epochs: mean(&traces.iter().map(|t| t.summary.epochs as f64).collect::<Vec<_>>()),
            mean_exploratory_cycles: mean(
                &traces
                    .iter()
                    .map(|t| t.summary.exploratory_cycles as f64)
                    .collect::<Vec<_>>(),
            ),
            final_regrets: finals,
            clairvoyant_value: baseline.1,
            clairvoyant_decision: baseline.0.clone(),
        });
    }

    let summary = ExperimentSummary {
        schema: "mnli.summary.v1".to_string(),
        horizon: cfg.horizon,
        replications: cfg.replications,
        base_seed: cfg.base_seed,
        policies: summaries,
    };
    io::write_json(&cfg.outputs.join("summary.json"), &summary)?;
    Ok(ExperimentOutput {
        summary,
        mean_curves,
    })
}

/// One seeded policy run, optionally mirroring the estimator evolution into
/// a per-epoch trace file.
fn run_trace(
    cfg: &ExperimentConfig,
    policy_cfg: &mnli_core::PolicyConfig,
    label: &str,
    rep: usize,
    seed: u64,
    baseline: &(InventoryDecision, f64),
) -> Result<RegretTrace> {
    if !cfg.emit_estimator_trace {
        let trace = mnli_core::policy::run_policy_observed(
            &cfg.instance,
            policy_cfg,
            cfg.horizon,
            seed,
            Some(baseline.clone()),
            |_, _, _| {},
        )?;
        return Ok(trace);
    }

    // Mirror the policy's epoching from the observed stream: an epoch
    // closes exactly when all products assorted by its decision have sold.
    let path = cfg.outputs.join(format!("estimator_{label}_{rep}.csv"));
    let mut writer = io::estimator_trace_writer(&path)?;
    let mut mirror = EstimatorState::new(
        cfg.instance.n_products(),
        cfg.instance.v_bounds(),
        cfg.instance.unit_profits().to_vec(),
    )
    .map_err(anyhow::Error::from)?;
    let mut record: Option<EpochRecord> = None;
    let mut epoch_index = 0usize;

    let trace = run_policy_observed(
        &cfg.instance,
        policy_cfg,
        cfg.horizon,
        seed,
        Some(baseline.clone()),
        |cycle, decision, outcome| {
            let rec = record.get_or_insert_with(|| {
                epoch_index += 1;
                EpochRecord::new(epoch_index, decision.clone())
            });
            rec.ingest_cycle(cycle, outcome).expect("mirrored stream");
            if rec.is_closed() {
                mirror.close_epoch(rec).expect("mirrored close");
                io::write_estimator_rows(&mut writer, epoch_index, &mirror)
                    .expect("estimator trace write");
                record = None;
            }
        },
    )?;
    writer.flush()?;
    Ok(trace)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionRunReport {
    pub seed: u64,
    pub inventory_realized: f64,
    pub bandit_realized: f64,
    pub realized_equal: bool,
    pub inventory_optimum: f64,
    pub bandit_optimum: f64,
    pub optimum_gap: f64,
    pub inventory_clairvoyant_gap: f64,
    pub bandit_clairvoyant_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionSummary {
    pub schema: String,
    pub horizon: usize,
    pub replications: usize,
    pub runs: Vec<ReductionRunReport>,
}

/// Runs the reduction pairing for each replication and writes the paired
/// customer logs plus an equality report.
pub fn run_reduction_audit(cfg: &ExperimentConfig) -> Result<ReductionSummary> {
    if cfg.mode != Mode::ReductionAudit {
        bail!("run_reduction_audit requires mode \"reduction-audit\"");
    }
    std::fs::create_dir_all(&cfg.outputs)?;
    let spec = &cfg.policies[0];
    let policy_cfg = spec.to_policy_config();

    let audits: Vec<(u64, ReductionAudit)> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let seed = cfg.base_seed + rep as u64;
            let audit = run_reduction(&cfg.instance, &policy_cfg, cfg.horizon, seed)?;
            Ok((seed, audit))
        })
        .collect::<Result<_>>()?;

    let mut runs = Vec::new();
    for (rep, (seed, audit)) in audits.iter().enumerate() {
        let path: PathBuf = cfg.outputs.join(format!("paired_{rep}.csv"));
        io::write_paired_trace_csv(&path, audit)?;
        runs.push(ReductionRunReport {
            seed: *seed,
            inventory_realized: audit.inventory_realized,
            bandit_realized: audit.bandit_realized,
            realized_equal: audit.inventory_realized.to_bits() == audit.bandit_realized.to_bits(),
            inventory_optimum: audit.inventory_optimum,
            bandit_optimum: audit.bandit_optimum,
            optimum_gap: (audit.inventory_optimum
                - audit.bandit_horizon as f64 / cfg.horizon as f64 * audit.bandit_optimum)
                .abs(),
            inventory_clairvoyant_gap: audit.inventory_clairvoyant_gap(),
            bandit_clairvoyant_gap: audit.bandit_clairvoyant_gap(),
        });
    }
    let summary = ReductionSummary {
        schema: "mnli.reduction.v1".to_string(),
        horizon: cfg.horizon,
        replications: cfg.replications,
        runs,
    };
    io::write_json(&cfg.outputs.join("reduction_summary.json"), &summary)?;
    Ok(summary)
}
