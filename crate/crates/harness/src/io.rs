//! Deterministic file emission. All CSVs start with a schema header line,
//! use '.' as the decimal separator regardless of locale (Rust's default
//! float formatting), and are byte-identical across runs of the same
//! configuration and seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use mnli_core::estimate::EstimatorState;
use mnli_core::reduce::ReductionAudit;
use mnli_core::RegretTrace;

pub const TRACE_SCHEMA: &str = "mnli.trace.v1";
pub const CURVE_SCHEMA: &str = "mnli.mean-regret.v1";
pub const ESTBENCH_SCHEMA: &str = "mnli.estimator-error.v1";
pub const ESTIMATOR_TRACE_SCHEMA: &str = "mnli.estimator-trace.v1";
pub const PAIRED_SCHEMA: &str = "mnli.paired-trace.v1";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("cannot create directory {}", parent.display()))?;
    }
    let file =
        File::create(path).with_context(|| format!("cannot create file {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn levels_field(levels: &[u32]) -> String {
    levels
        .iter()
        .map(|u| u.to_string())
        .collect::<Vec<_>>()
        .join("|")
}

/// Per-cycle trace: cycle, epoch, decision, realized profit, expected
/// profit, cumulative regret.
pub fn write_trace_csv(path: &Path, trace: &RegretTrace) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "# schema: {TRACE_SCHEMA}")?;
    writeln!(
        w,
        "cycle,epoch,decision,realized_profit,expected_profit,cum_regret"
    )?;
    for r in &trace.records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.cycle,
            r.epoch,
            levels_field(r.decision.levels()),
            r.realized_profit,
            r.expected_profit,
            r.cum_regret
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Mean cumulative regret per cycle across replications.
pub fn write_mean_curve_csv(path: &Path, curve: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "# schema: {CURVE_SCHEMA}")?;
    writeln!(w, "cycle,mean_cum_regret")?;
    for (i, value) in curve.iter().enumerate() {
        writeln!(w, "{},{}", i + 1, value)?;
    }
    w.flush()?;
    Ok(())
}

/// Estimator-error trajectories, row 0 being the pre-data error.
pub fn write_estbench_csv(path: &Path, labels: &[&str], curves: &[Vec<f64>]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "# schema: {ESTBENCH_SCHEMA}")?;
    writeln!(w, "cycle,{}", labels.join(","))?;
    let len = curves.iter().map(|c| c.len()).min().unwrap_or(0);
    for t in 0..len {
        write!(w, "{t}")?;
        for curve in curves {
            write!(w, ",{}", curve[t])?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends the per-product estimator rows for one closed epoch.
pub fn write_estimator_rows(
    w: &mut impl Write,
    epoch: usize,
    state: &EstimatorState,
) -> std::io::Result<()> {
    for (i, p) in state.products().iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            epoch,
            i + 1,
            p.count,
            p.mu_bar,
            p.mu_lcb,
            p.mu_ucb,
            p.v_lcb,
            p.v_ucb,
            p.r_hat
        )?;
    }
    Ok(())
}

pub fn estimator_trace_writer(path: &Path) -> Result<BufWriter<File>> {
    let mut w = create(path)?;
    writeln!(w, "# schema: {ESTIMATOR_TRACE_SCHEMA}")?;
    writeln!(
        w,
        "epoch,product,t_count,mu_bar,mu_lcb,mu_ucb,v_lcb,v_ucb,r_hat"
    )?;
    Ok(w)
}

/// Paired inventory/bandit customer log for the reduction audit.
pub fn write_paired_trace_csv(path: &Path, audit: &ReductionAudit) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "# schema: {PAIRED_SCHEMA}")?;
    writeln!(w, "bandit_index,cycle,position,assortment,choice")?;
    for c in &audit.customers {
        writeln!(
            w,
            "{},{},{},{},{}",
            c.bandit_index,
            c.cycle,
            c.position,
            c.assortment
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join("|"),
            c.choice
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
