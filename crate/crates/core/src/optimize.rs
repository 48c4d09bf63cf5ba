//! Static joint assortment-inventory optimization: exhaustive enumeration
//! of the feasible set, the exact argmax oracle, an epsilon-delta oracle
//! abstraction with a built-in local-search approximation, and the
//! interpolation path used by the optimism analysis.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{tuned_profit, EstimatorState};
use crate::model::{ArrivalProcess, Instance, InventoryDecision};
use crate::profit::{
    dp_expected_profit, dp_expected_sales, expected_profit_mc, ProfitQuery, DEFAULT_STATE_BUDGET,
    DEFAULT_TAIL_EPSILON,
};

/// Default cap on the number of enumerated feasible decisions.
pub const DEFAULT_ENUMERATION_BUDGET: usize = 10_000_000;

/// Shipped defaults of the built-in approximate oracle.
pub const DEFAULT_ORACLE_BUDGET: usize = 600;
pub const DEFAULT_ORACLE_MC_SAMPLES: usize = 200;

/// Oracle contract for the static problem: `Exact` always returns a true
/// argmax; `Approximate` returns a `(1 - epsilon)`-optimal decision with
/// probability at least `1 - delta` under the shipped defaults (an
/// empirical contract, calibrated on the test instance family).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleSpec {
    Exact,
    Approximate {
        epsilon: f64,
        delta: f64,
        #[serde(default = "default_budget")]
        budget: usize,
    },
}

fn default_budget() -> usize {
    DEFAULT_ORACLE_BUDGET
}

impl OracleSpec {
    pub fn epsilon(&self) -> f64 {
        match self {
            OracleSpec::Exact => 0.0,
            OracleSpec::Approximate { epsilon, .. } => *epsilon,
        }
    }

    pub fn delta(&self) -> f64 {
        match self {
            OracleSpec::Exact => 0.0,
            OracleSpec::Approximate { delta, .. } => *delta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let OracleSpec::Approximate {
            epsilon,
            delta,
            budget,
        } = self
        {
            if !(0.0..1.0).contains(epsilon) || !(0.0..1.0).contains(delta) {
                return Err(Error::invalid("epsilon and delta must lie in [0, 1)"));
            }
            if *budget == 0 {
                return Err(Error::invalid("oracle budget must be positive"));
            }
        }
        Ok(())
    }
}

/// Result of an oracle call: the chosen decision, the value the oracle
/// claims for it (exact DP value for the exact kind, a Monte Carlo score
/// for the approximate kind), and the number of evaluations spent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutcome {
    pub decision: InventoryDecision,
    pub value: f64,
    pub evaluations: usize,
}

/// All feasible inventory decisions of the instance in lexicographic order,
/// each exactly once.
pub fn enumerate_feasible(instance: &Instance) -> Result<Vec<InventoryDecision>> {
    enumerate_feasible_with_budget(instance, DEFAULT_ENUMERATION_BUDGET)
}

pub fn enumerate_feasible_with_budget(
    instance: &Instance,
    budget: usize,
) -> Result<Vec<InventoryDecision>> {
    let n = instance.n_products();
    let caps = instance.per_product_caps();
    let total_cap = instance.total_cap();
    let max_assortment = instance.max_assortment();

    struct Dfs<'a> {
        caps: &'a [u32],
        max_assortment: usize,
        budget: usize,
        levels: Vec<u32>,
        out: Vec<InventoryDecision>,
    }

    impl Dfs<'_> {
        fn descend(&mut self, i: usize, remaining: u32, support: usize) -> Result<()> {
            if i == self.levels.len() {
                if self.out.len() >= self.budget {
                    return Err(Error::ResourceLimit {
                        what: "feasible decisions",
                        required: self.budget + 1,
                        budget: self.budget,
                    });
                }
                self.out.push(InventoryDecision::new(self.levels.clone()));
                return Ok(());
            }
            let cap = self.caps[i].min(remaining);
            for u in 0..=cap {
                let support = support + usize::from(u > 0);
                if support > self.max_assortment {
                    break;
                }
                self.levels[i] = u;
                self.descend(i + 1, remaining - u, support)?;
            }
            self.levels[i] = 0;
            Ok(())
        }
    }

    let mut dfs = Dfs {
        caps,
        max_assortment,
        budget,
        levels: vec![0u32; n],
        out: Vec::new(),
    };
    dfs.descend(0, total_cap, 0)?;
    Ok(dfs.out)
}

/// Scores every decision and returns `(index, value)` of the argmax, ties
/// broken by the lexicographically smallest decision. With `parallel`,
/// candidates are scored concurrently; the reduction (max by value, then
/// lexicographic) makes parallel and serial runs agree bit-for-bit.
pub(crate) fn argmax_expected_profit(
    decisions: &[InventoryDecision],
    attractions: &[f64],
    profits: &[f64],
    ordering_costs: Option<&[f64]>,
    arrival_pmf: &[f64],
    state_budget: usize,
    parallel: bool,
) -> Result<(usize, f64)> {
    if decisions.is_empty() {
        return Err(Error::invalid("no candidate decisions"));
    }
    let score = |d: &InventoryDecision| -> Result<f64> {
        match ordering_costs {
            None => dp_expected_profit(d.levels(), attractions, profits, arrival_pmf, state_budget),
            Some(costs) => {
                let sales =
                    dp_expected_sales(d.levels(), attractions, arrival_pmf, state_budget)?;
                let revenue: f64 = sales.iter().zip(profits).map(|(x, r)| x * r).sum();
                let order: f64 = d
                    .levels()
                    .iter()
                    .zip(costs)
                    .map(|(&u, o)| u as f64 * o)
                    .sum();
                Ok(revenue - order)
            }
        }
    };
    let values: Vec<f64> = if parallel {
        decisions
            .par_iter()
            .with_min_len(16)
            .map(score)
            .collect::<Result<_>>()?
    } else {
        decisions.iter().map(score).collect::<Result<_>>()?
    };
    let mut best = 0usize;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] || (v == values[best] && decisions[i] < decisions[best]) {
            best = i;
        }
    }
    Ok((best, values[best]))
}

/// Exact oracle: enumerates the feasible set and maximizes the DP-evaluated
/// expected profit (or the generalized profit when `ordering_costs` is
/// given). Returns the optimal decision and its value.
pub fn solve_exact(
    instance: &Instance,
    attractions: &[f64],
    profits: &[f64],
    ordering_costs: Option<&[f64]>,
) -> Result<(InventoryDecision, f64)> {
    let feasible = enumerate_feasible(instance)?;
    let pmf = instance.arrival().truncated_pmf(DEFAULT_TAIL_EPSILON)?;
    let (idx, value) = argmax_expected_profit(
        &feasible,
        attractions,
        profits,
        ordering_costs,
        &pmf,
        DEFAULT_STATE_BUDGET,
        true,
    )?;
    Ok((feasible[idx].clone(), value))
}

/// A deterministic feasible starting point: products ranked by the
/// single-customer score `v_i r_i / (1 + v_i)`, stocked round-robin up to
/// the caps.
fn greedy_start(instance: &Instance, attractions: &[f64], profits: &[f64]) -> InventoryDecision {
    let n = instance.n_products();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let score = |i: usize| attractions[i] * profits[i] / (1.0 + attractions[i]);
        score(b)
            .partial_cmp(&score(a))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let caps = instance.per_product_caps();
    let chosen: Vec<usize> = order
        .into_iter()
        .filter(|&i| caps[i] > 0)
        .take(instance.max_assortment())
        .collect();
    let mut levels = vec![0u32; n];
    let mut remaining = instance.total_cap();
    let mut progress = true;
    while remaining > 0 && progress {
        progress = false;
        for &i in &chosen {
            if remaining == 0 {
                break;
            }
            if levels[i] < caps[i] {
                levels[i] += 1;
                remaining -= 1;
                progress = true;
            }
        }
    }
    InventoryDecision::new(levels)
}

/// Neighbors of a decision under the local-search moves: +/-1 on one
/// coordinate, moving one unit between two coordinates, and dropping a
/// product entirely.
fn neighborhood(instance: &Instance, current: &InventoryDecision) -> Vec<InventoryDecision> {
    let n = instance.n_products();
    let mut out = Vec::new();
    let mut push = |levels: Vec<u32>| {
        let cand = InventoryDecision::new(levels);
        if cand != *current
            && instance.is_feasible(&cand).unwrap_or(false)
            && !out.contains(&cand)
        {
            out.push(cand);
        }
    };
    for i in 0..n {
        let mut up = current.levels().to_vec();
        up[i] += 1;
        push(up);
        if current.levels()[i] > 0 {
            let mut down = current.levels().to_vec();
            down[i] -= 1;
            push(down);
            let mut drop = current.levels().to_vec();
            drop[i] = 0;
            push(drop);
            for j in 0..n {
                if j != i {
                    let mut swap = current.levels().to_vec();
                    swap[i] -= 1;
                    swap[j] += 1;
                    push(swap);
                }
            }
        }
    }
    out
}

/// Epsilon-delta oracle. The exact kind delegates to [`solve_exact`]; the
/// approximate kind runs best-improvement local search scored by Monte
/// Carlo with a fixed per-candidate sample size, stopping when the
/// evaluation budget is spent or no neighbor improves.
pub fn solve_eps_delta(
    instance: &Instance,
    attractions: &[f64],
    profits: &[f64],
    spec: &OracleSpec,
    rng: &mut impl Rng,
) -> Result<OracleOutcome> {
    spec.validate()?;
    let budget = match spec {
        OracleSpec::Exact => {
            let (decision, value) = solve_exact(instance, attractions, profits, None)?;
            let evaluations = enumerate_feasible(instance)?.len();
            return Ok(OracleOutcome {
                decision,
                value,
                evaluations,
            });
        }
        OracleSpec::Approximate { budget, .. } => *budget,
    };

    let score = |d: &InventoryDecision, rng: &mut _| -> Result<f64> {
        let query = ProfitQuery::new(
            d.clone(),
            attractions.to_vec(),
            profits.to_vec(),
            instance.arrival().clone(),
        )?;
        Ok(expected_profit_mc(&query, DEFAULT_ORACLE_MC_SAMPLES, rng)?.0)
    };

    let mut current = greedy_start(instance, attractions, profits);
    let mut current_value = score(&current, rng)?;
    let mut evaluations = 1usize;

    loop {
        let mut best_neighbor: Option<(InventoryDecision, f64)> = None;
        for cand in neighborhood(instance, &current) {
            if evaluations >= budget {
                break;
            }
            let value = score(&cand, rng)?;
            evaluations += 1;
            if best_neighbor.as_ref().is_none_or(|(_, v)| value > *v) {
                best_neighbor = Some((cand, value));
            }
        }
        match best_neighbor {
            Some((cand, value)) if value > current_value => {
                current = cand;
                current_value = value;
            }
            _ => break,
        }
        if evaluations >= budget {
            break;
        }
    }

    Ok(OracleOutcome {
        decision: current,
        value: current_value,
        evaluations,
    })
}

/// A point on the path from the pessimistic corner `(v_lcb, r)` to the
/// optimistic corner `(v_ucb, r_hat)`:
///
/// ```text
/// v_i(alpha) = (1 - alpha_i) v_lcb_i + alpha_i v_ucb_i
/// r_i(alpha) = min(1, r_i + alpha_i delta_i)
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationPoint {
    pub alpha: Vec<f64>,
    pub v_of_alpha: Vec<f64>,
    pub r_of_alpha: Vec<f64>,
}

/// Evaluates the interpolation path of an estimator state at `alpha`.
pub fn interpolate(state: &EstimatorState, alpha: &[f64]) -> Result<InterpolationPoint> {
    let n = state.n_products();
    if alpha.len() != n {
        return Err(Error::invalid(format!(
            "alpha has length {}, expected {n}",
            alpha.len()
        )));
    }
    if alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::invalid("alpha components must lie in [0, 1]"));
    }
    let mut v_of_alpha = Vec::with_capacity(n);
    let mut r_of_alpha = Vec::with_capacity(n);
    for (i, &a) in alpha.iter().enumerate() {
        let p = state.product(i + 1);
        v_of_alpha.push((1.0 - a) * p.v_lcb + a * p.v_ucb);
        r_of_alpha.push(tuned_profit(state.unit_profits()[i], a * p.delta_tune));
    }
    Ok(InterpolationPoint {
        alpha: alpha.to_vec(),
        v_of_alpha,
        r_of_alpha,
    })
}

/// Convenience wrapper: DP value of a decision under an arbitrary
/// parameter pair, used by tests and the policy layer.
pub fn decision_value(
    decision: &InventoryDecision,
    attractions: &[f64],
    profits: &[f64],
    arrival: &ArrivalProcess,
) -> Result<f64> {
    let pmf = arrival.truncated_pmf(DEFAULT_TAIL_EPSILON)?;
    dp_expected_profit(
        decision.levels(),
        attractions,
        profits,
        &pmf,
        DEFAULT_STATE_BUDGET,
    )
}
