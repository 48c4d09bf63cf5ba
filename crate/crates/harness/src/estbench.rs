//! Estimator error benchmark: a random-decision-per-epoch data policy
//! drives four estimators (the no-purchase-count estimator and the three
//! purchase-count benchmarks), tracking the Euclidean error of each
//! attraction estimate at every cycle.
//!
//! Epoch boundaries are estimator-specific (each estimator has its own
//! stopping criterion), so each estimator consumes its own simulation
//! stream; replications average the four error trajectories pointwise.

use anyhow::{bail, Result};
use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use mnli_core::estimate::{BenchmarkEstimator, BenchmarkKind, EpochRecord, EstimatorState};
use mnli_core::{Instance, InventoryDecision};

use crate::config::{ExperimentConfig, Mode};
use crate::io;

pub const ESTIMATOR_LABELS: [&str; 4] = [
    "proposed",
    "first_customer",
    "until_no_purchase",
    "censor_aware",
];

/// Mean error trajectories, indexed by cycle (row 0 = before any data).
#[derive(Debug, Clone)]
pub struct EstimatorCurves {
    pub horizon: usize,
    pub curves: [Vec<f64>; 4],
}

fn l2_error(estimates: &[f64], truth: &[f64]) -> f64 {
    estimates
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Draws a random feasible decision: a uniformly sized random subset of
/// stockable products and a uniform composition of a random unit budget
/// over it, clamped to the per-product caps.
pub fn sample_feasible_decision(instance: &Instance, rng: &mut impl Rng) -> InventoryDecision {
    let n = instance.n_products();
    let caps = instance.per_product_caps();
    let eligible: Vec<usize> = (0..n).filter(|&i| caps[i] > 0).collect();
    let total_cap = instance.total_cap() as usize;
    let k_max = instance
        .max_assortment()
        .min(eligible.len())
        .min(total_cap);
    if k_max == 0 {
        return InventoryDecision::zeros(n);
    }
    let k = rng.gen_range(1..=k_max);
    let chosen: Vec<usize> = index_sample(rng, eligible.len(), k)
        .into_iter()
        .map(|j| eligible[j])
        .collect();
    let budget = rng.gen_range(k..=total_cap.max(k));
    // uniform composition of `budget` into k positive parts via sorted cuts
    let mut cuts: Vec<usize> = if k > 1 {
        index_sample(rng, budget - 1, k - 1)
            .into_iter()
            .map(|c| c + 1)
            .collect()
    } else {
        Vec::new()
    };
    cuts.sort_unstable();
    cuts.insert(0, 0);
    cuts.push(budget);
    let mut levels = vec![0u32; n];
    for (idx, &i) in chosen.iter().enumerate() {
        let part = (cuts[idx + 1] - cuts[idx]) as u32;
        levels[i] = part.min(caps[i]);
    }
    InventoryDecision::new(levels)
}

enum Stream {
    Proposed,
    Benchmark(BenchmarkKind),
}

/// Runs one estimator for `horizon` cycles under the random data policy,
/// returning the error at cycles `0..=horizon`.
fn run_stream(
    instance: &Instance,
    stream: Stream,
    horizon: usize,
    seed: u64,
    stream_id: u64,
    initial: &[f64],
) -> Result<Vec<f64>> {
    let n = instance.n_products();
    let truth = instance.attractions();
    let (v_min, v_max) = instance.v_bounds();
    let mut decision_rng = ChaCha12Rng::seed_from_u64(seed);
    decision_rng.set_stream(100 + stream_id);
    let mut sim_rng = ChaCha12Rng::seed_from_u64(seed);
    sim_rng.set_stream(200 + stream_id);

    let mut errors = Vec::with_capacity(horizon + 1);
    let mut estimates = initial.to_vec();
    errors.push(l2_error(&estimates, truth));

    match stream {
        Stream::Proposed => {
            let mut state = EstimatorState::new(
                n,
                instance.v_bounds(),
                instance.unit_profits().to_vec(),
            )
            .map_err(anyhow::Error::from)?;
            let mut ell = 1usize;
            let mut decision = sample_feasible_decision(instance, &mut decision_rng);
            let mut record = EpochRecord::new(ell, decision.clone());
            for t in 1..=horizon {
                let outcome = instance.simulate_cycle(&decision, &mut sim_rng)?;
                record.ingest_cycle(t, &outcome)?;
                if record.is_closed() {
                    state.close_epoch(&record)?;
                    for (i, p) in state.products().iter().enumerate() {
                        if p.count > 0 {
                            estimates[i] = if p.mu_bar == 0.0 {
                                v_max
                            } else {
                                (1.0 / p.mu_bar).clamp(v_min, v_max)
                            };
                        }
                    }
                    ell += 1;
                    decision = sample_feasible_decision(instance, &mut decision_rng);
                    record = EpochRecord::new(ell, decision.clone());
                }
                errors.push(l2_error(&estimates, truth));
            }
        }
        Stream::Benchmark(kind) => {
            let mut bench = BenchmarkEstimator::new(kind, n);
            let mut decision = sample_feasible_decision(instance, &mut decision_rng);
            for _t in 1..=horizon {
                let outcome = instance.simulate_cycle(&decision, &mut sim_rng)?;
                if bench.observe_cycle(&decision, &outcome) {
                    for (i, est) in bench.estimates().iter().enumerate() {
                        if let Some(v) = est {
                            estimates[i] = *v;
                        }
                    }
                    decision = sample_feasible_decision(instance, &mut decision_rng);
                }
                errors.push(l2_error(&estimates, truth));
            }
        }
    }
    Ok(errors)
}

/// Runs all four estimators over the configured replications and writes the
/// mean error trajectories to `estimator_errors.csv`.
pub fn estimator_benchmark(cfg: &ExperimentConfig) -> Result<EstimatorCurves> {
    if cfg.mode != Mode::EstimatorBenchmark {
        bail!("estimator_benchmark requires mode \"estimator-benchmark\"");
    }
    std::fs::create_dir_all(&cfg.outputs)?;
    let initial = cfg
        .initial_estimate
        .clone()
        .unwrap_or_else(|| vec![cfg.instance.v_max(); cfg.instance.n_products()]);

    let per_rep: Vec<[Vec<f64>; 4]> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let seed = cfg.base_seed + rep as u64;
            let proposed =
                run_stream(&cfg.instance, Stream::Proposed, cfg.horizon, seed, 0, &initial)?;
            let first = run_stream(
                &cfg.instance,
                Stream::Benchmark(BenchmarkKind::FirstCustomer),
                cfg.horizon,
                seed,
                1,
                &initial,
            )?;
            let until = run_stream(
                &cfg.instance,
                Stream::Benchmark(BenchmarkKind::UntilNoPurchase),
                cfg.horizon,
                seed,
                2,
                &initial,
            )?;
            let censor = run_stream(
                &cfg.instance,
                Stream::Benchmark(BenchmarkKind::CensorAware),
                cfg.horizon,
                seed,
                3,
                &initial,
            )?;
            Ok([proposed, first, until, censor])
        })
        .collect::<Result<_>>()?;

    let mut curves: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; cfg.horizon + 1]);
    for rep_curves in &per_rep {
        for (c, rc) in curves.iter_mut().zip(rep_curves) {
            for (acc, v) in c.iter_mut().zip(rc) {
                *acc += v;
            }
        }
    }
    for c in curves.iter_mut() {
        for v in c.iter_mut() {
            *v /= cfg.replications as f64;
        }
    }

    io::write_estbench_csv(
        &cfg.outputs.join("estimator_errors.csv"),
        &ESTIMATOR_LABELS,
        &curves,
    )?;
    Ok(EstimatorCurves {
        horizon: cfg.horizon,
        curves,
    })
}
