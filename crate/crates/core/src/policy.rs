//! Online policies: the profit-tuned UCB algorithm, the v-UCB-only
//! heuristic, and the greedy point-estimate benchmark, together with the
//! end-to-end runner that produces regret traces.
//!
//! All three policies share the epoch structure: one inventory decision per
//! epoch, held fixed until every assorted product has been purchased at
//! least once. They differ only in the parameters handed to the static
//! optimization oracle at epoch boundaries:
//!
//! * proposed    — `argmax R(u; v_ucb, r_hat)` with tuned profits,
//! * v_ucb_only  — `argmax R(u; v_ucb, r)` with the true profits,
//! * greedy      — `argmax R(u; v_bar, r)` at point estimates, never
//!   entering a forced-exploration epoch.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{EpochRecord, EstimatorState};
use crate::model::{CycleOutcome, Instance, InventoryDecision};
use crate::optimize::{argmax_expected_profit, enumerate_feasible, solve_eps_delta, OracleSpec};
use crate::profit::{
    dp_expected_profit, dp_expected_sales, CostStructure, DEFAULT_STATE_BUDGET,
    DEFAULT_TAIL_EPSILON,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Proposed,
    VUcbOnly,
    Greedy,
}

impl PolicyKind {
    pub fn label(&self) -> &'static str {
        match self {
            PolicyKind::Proposed => "proposed",
            PolicyKind::VUcbOnly => "v_ucb_only",
            PolicyKind::Greedy => "greedy",
        }
    }
}

/// Policy configuration. `forced_exploration` can be disabled to reproduce
/// the failure mode of the untuned heuristic; the greedy benchmark never
/// explores regardless.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    #[serde(default = "default_oracle")]
    pub oracle: OracleSpec,
    #[serde(default = "default_true")]
    pub forced_exploration: bool,
    /// Point estimate used by the greedy policy before a product has any
    /// data; defaults to `v_max`.
    #[serde(default)]
    pub greedy_default_attraction: Option<f64>,
    #[serde(default)]
    pub costs: Option<CostStructure>,
    #[serde(default = "default_tail")]
    pub tail_epsilon: f64,
}

fn default_oracle() -> OracleSpec {
    OracleSpec::Exact
}

fn default_true() -> bool {
    true
}

fn default_tail() -> f64 {
    DEFAULT_TAIL_EPSILON
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        PolicyConfig {
            kind,
            oracle: OracleSpec::Exact,
            forced_exploration: true,
            greedy_default_attraction: None,
            costs: None,
            tail_epsilon: DEFAULT_TAIL_EPSILON,
        }
    }

    pub fn with_oracle(mut self, oracle: OracleSpec) -> Self {
        self.oracle = oracle;
        self
    }

    pub fn without_forced_exploration(mut self) -> Self {
        self.forced_exploration = false;
        self
    }

    pub fn with_costs(mut self, costs: CostStructure) -> Self {
        self.costs = Some(costs);
        self
    }

    fn validate(&self, instance: &Instance) -> Result<()> {
        self.oracle.validate()?;
        if let Some(costs) = &self.costs {
            if costs.adjusted_order_costs().len() != instance.n_products() {
                return Err(Error::invalid("cost structure length mismatch"));
            }
            let matches = costs
                .adjusted_profits()
                .iter()
                .zip(instance.unit_profits())
                .all(|(a, b)| (a - b).abs() < 1e-9);
            if !matches {
                return Err(Error::invalid(
                    "instance unit profits must equal the cost structure's adjusted profits",
                ));
            }
            if matches!(self.oracle, OracleSpec::Approximate { .. }) {
                return Err(Error::invalid(
                    "general-cost runs require the exact oracle",
                ));
            }
        }
        Ok(())
    }
}

type SolveKey = (Vec<u64>, Vec<u64>);

fn bit_key(xs: &[f64]) -> Vec<u64> {
    xs.iter().map(|x| x.to_bits()).collect()
}

/// Online policy state. Holds everything an admissible policy may see: the
/// instance minus its true attractions, the estimator, the open epoch, and
/// the seed-derived randomization stream for approximate oracles.
pub struct Policy {
    cfg: PolicyConfig,
    /// The instance with its hidden attractions replaced by `v_max`; used
    /// for feasibility, enumeration, and arrival information only.
    market: Instance,
    profits: Vec<f64>,
    estimator: EstimatorState,
    epoch: EpochRecord,
    epoch_index: usize,
    current: InventoryDecision,
    exploratory: bool,
    oracle_rng: ChaCha12Rng,
    feasible: Option<Vec<InventoryDecision>>,
    solve_cache: HashMap<SolveKey, InventoryDecision>,
    arrival_pmf: Vec<f64>,
    epochs_closed: usize,
}

impl Policy {
    pub fn new(instance: &Instance, cfg: PolicyConfig, seed: u64) -> Result<Self> {
        cfg.validate(instance)?;
        let n = instance.n_products();
        let market = Instance::new(
            n,
            vec![instance.v_max(); n],
            instance.v_bounds(),
            instance.unit_profits().to_vec(),
            instance.per_product_caps().to_vec(),
            instance.total_cap(),
            instance.max_assortment(),
            instance.arrival().clone(),
        )?;
        let estimator = EstimatorState::new(n, instance.v_bounds(), instance.unit_profits().to_vec())?;
        let arrival_pmf = instance.arrival().truncated_pmf(cfg.tail_epsilon)?;
        let mut oracle_rng = ChaCha12Rng::seed_from_u64(seed);
        oracle_rng.set_stream(1);
        let mut policy = Policy {
            profits: instance.unit_profits().to_vec(),
            cfg,
            market,
            estimator,
            epoch: EpochRecord::new(1, InventoryDecision::zeros(n)),
            epoch_index: 1,
            current: InventoryDecision::zeros(n),
            exploratory: false,
            oracle_rng,
            feasible: None,
            solve_cache: HashMap::new(),
            arrival_pmf,
            epochs_closed: 0,
        };
        // First epoch: solve at the fully optimistic initialization rather
        // than forcing exploration.
        let (first, _) = policy.compute_decision(false, 0)?;
        policy.epoch = EpochRecord::new(1, first.clone());
        policy.current = first;
        Ok(policy)
    }

    pub fn kind(&self) -> PolicyKind {
        self.cfg.kind
    }

    pub fn current_decision(&self) -> &InventoryDecision {
        &self.current
    }

    /// Index of the epoch the next observed cycle belongs to (1-based).
    pub fn epoch_index(&self) -> usize {
        self.epoch_index
    }

    /// Whether the current epoch is a forced-exploration epoch.
    pub fn is_exploratory_epoch(&self) -> bool {
        self.exploratory
    }

    pub fn estimator(&self) -> &EstimatorState {
        &self.estimator
    }

    pub fn epochs_closed(&self) -> usize {
        self.epochs_closed
    }

    fn ordering_costs(&self) -> Option<&[f64]> {
        self.cfg.costs.as_ref().map(|c| c.adjusted_order_costs())
    }

    fn ensure_feasible(&mut self) -> Result<()> {
        if self.feasible.is_none() {
            self.feasible = Some(enumerate_feasible(&self.market)?);
        }
        Ok(())
    }

    fn oracle_solve(&mut self, attractions: &[f64], profits: &[f64]) -> Result<InventoryDecision> {
        let key = (bit_key(attractions), bit_key(profits));
        if let Some(hit) = self.solve_cache.get(&key) {
            return Ok(hit.clone());
        }
        let decision = match &self.cfg.oracle {
            OracleSpec::Exact => {
                self.ensure_feasible()?;
                let feasible = self.feasible.as_ref().unwrap();
                let (idx, _) = argmax_expected_profit(
                    feasible,
                    attractions,
                    profits,
                    self.ordering_costs(),
                    &self.arrival_pmf,
                    DEFAULT_STATE_BUDGET,
                    false,
                )?;
                feasible[idx].clone()
            }
            spec @ OracleSpec::Approximate { .. } => {
                solve_eps_delta(&self.market, attractions, profits, spec, &mut self.oracle_rng)?
                    .decision
            }
        };
        self.solve_cache.insert(key, decision.clone());
        Ok(decision)
    }

    /// Exploration decision: a unit of every under-explored product,
    /// lowest index first, truncated to the cardinality and total-capacity
    /// constraints. `None` when no under-explored product can be stocked.
    fn exploration_decision(&self, under_explored: &[usize]) -> Option<InventoryDecision> {
        let n = self.market.n_products();
        let caps = self.market.per_product_caps();
        let limit = self
            .market
            .max_assortment()
            .min(self.market.total_cap() as usize);
        let mut levels = vec![0u32; n];
        let mut picked = 0usize;
        for &p in under_explored {
            if picked == limit {
                break;
            }
            if caps[p - 1] >= 1 {
                levels[p - 1] = 1;
                picked += 1;
            }
        }
        if picked == 0 {
            None
        } else {
            Some(InventoryDecision::new(levels))
        }
    }

    /// Decision for the next epoch. `ell` is the index of the last closed
    /// epoch (0 at initialization); the adequate-exploration condition is
    /// checked at that index.
    fn compute_decision(
        &mut self,
        exploration_allowed: bool,
        ell: usize,
    ) -> Result<(InventoryDecision, bool)> {
        match self.cfg.kind {
            PolicyKind::Greedy => {
                let default = self
                    .cfg
                    .greedy_default_attraction
                    .unwrap_or(self.market.v_max());
                let v_bar = self.estimator.point_estimates(default);
                let r = self.profits.clone();
                Ok((self.oracle_solve(&v_bar, &r)?, false))
            }
            PolicyKind::Proposed | PolicyKind::VUcbOnly => {
                if exploration_allowed && self.cfg.forced_exploration {
                    let under = self.estimator.under_explored(ell);
                    if !under.is_empty() {
                        if let Some(d) = self.exploration_decision(&under) {
                            return Ok((d, true));
                        }
                    }
                }
                let v_ucb = self.estimator.v_ucb();
                let r = match self.cfg.kind {
                    PolicyKind::Proposed => self.estimator.r_hat(),
                    _ => self.profits.clone(),
                };
                Ok((self.oracle_solve(&v_ucb, &r)?, false))
            }
        }
    }

    /// Feeds one realized cycle (generated under the current decision).
    /// When the epoch closes this updates the estimator and computes the
    /// next epoch's decision; returns whether a close happened.
    pub fn observe_cycle(&mut self, cycle: usize, outcome: &CycleOutcome) -> Result<bool> {
        self.epoch.ingest_cycle(cycle, outcome)?;
        if !self.epoch.is_closed() {
            return Ok(false);
        }
        self.estimator.close_epoch(&self.epoch)?;
        self.epochs_closed += 1;
        let closed = self.epoch_index;
        let (next, exploratory) = self.compute_decision(true, closed)?;
        self.epoch_index = closed + 1;
        self.epoch = EpochRecord::new(self.epoch_index, next.clone());
        self.current = next;
        self.exploratory = exploratory;
        Ok(true)
    }
}

/// One per-cycle row of a policy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub epoch: usize,
    pub decision: InventoryDecision,
    pub realized_profit: f64,
    pub expected_profit: f64,
    pub cum_regret: f64,
    pub exploratory: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub final_regret: f64,
    pub epochs: usize,
    pub exploratory_cycles: usize,
    pub clairvoyant_value: f64,
    pub clairvoyant_decision: InventoryDecision,
}

/// Per-cycle log of one policy run plus its summary. The cumulative regret
/// accrues `R(u*) - R(u_t)` per cycle against the clairvoyant baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub records: Vec<CycleRecord>,
    pub summary: RunSummary,
}

/// Clairvoyant solution of the instance under its true parameters (and
/// optional ordering costs).
pub fn clairvoyant(
    instance: &Instance,
    costs: Option<&CostStructure>,
) -> Result<(InventoryDecision, f64)> {
    crate::optimize::solve_exact(
        instance,
        instance.attractions(),
        instance.unit_profits(),
        costs.map(|c| c.adjusted_order_costs()),
    )
}

/// Runs a policy for `horizon` cycles and returns the regret trace.
pub fn run_policy(
    instance: &Instance,
    cfg: &PolicyConfig,
    horizon: usize,
    seed: u64,
) -> Result<RegretTrace> {
    run_policy_observed(instance, cfg, horizon, seed, None, |_, _, _| {})
}

/// As [`run_policy`], but invokes `observer(cycle, decision, outcome)` for
/// every simulated cycle and accepts a precomputed clairvoyant baseline.
pub fn run_policy_observed<F>(
    instance: &Instance,
    cfg: &PolicyConfig,
    horizon: usize,
    seed: u64,
    baseline: Option<(InventoryDecision, f64)>,
    mut observer: F,
) -> Result<RegretTrace>
where
    F: FnMut(usize, &InventoryDecision, &CycleOutcome),
{
    if horizon == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    let (u_star, r_star) = match baseline {
        Some(pair) => pair,
        None => clairvoyant(instance, cfg.costs.as_ref())?,
    };
    let arrival_pmf = instance.arrival().truncated_pmf(cfg.tail_epsilon)?;
    let order_costs: Option<Vec<f64>> = cfg
        .costs
        .as_ref()
        .map(|c| c.adjusted_order_costs().to_vec());

    // expected profit of a decision under the truth, cached per distinct
    // decision (decisions repeat across epochs)
    let mut value_cache: HashMap<Vec<u32>, f64> = HashMap::new();
    let mut expected_value = |d: &InventoryDecision| -> Result<f64> {
        if let Some(&v) = value_cache.get(d.levels()) {
            return Ok(v);
        }
        let v = match &order_costs {
            None => dp_expected_profit(
                d.levels(),
                instance.attractions(),
                instance.unit_profits(),
                &arrival_pmf,
                DEFAULT_STATE_BUDGET,
            )?,
            Some(o) => {
                let sales = dp_expected_sales(
                    d.levels(),
                    instance.attractions(),
                    &arrival_pmf,
                    DEFAULT_STATE_BUDGET,
                )?;
                let revenue: f64 = sales
                    .iter()
                    .zip(instance.unit_profits())
                    .map(|(x, r)| x * r)
                    .sum();
                let cost: f64 = d
                    .levels()
                    .iter()
                    .zip(o)
                    .map(|(&u, o)| u as f64 * o)
                    .sum();
                revenue - cost
            }
        };
        value_cache.insert(d.levels().to_vec(), v);
        Ok(v)
    };

    let mut sim_rng = ChaCha12Rng::seed_from_u64(seed);
    let mut policy = Policy::new(instance, cfg.clone(), seed)?;
    let mut records = Vec::with_capacity(horizon);
    let mut cum_regret = 0.0;
    let mut exploratory_cycles = 0usize;

    for cycle in 1..=horizon {
        let decision = policy.current_decision().clone();
        let epoch = policy.epoch_index();
        let exploratory = policy.is_exploratory_epoch();
        let outcome = instance.simulate_cycle(&decision, &mut sim_rng)?;

        let mut realized = outcome.revenue(instance.unit_profits());
        if let Some(o) = &order_costs {
            realized -= decision
                .levels()
                .iter()
                .zip(o)
                .map(|(&u, o)| u as f64 * o)
                .sum::<f64>();
        }
        let expected = expected_value(&decision)?;
        cum_regret += r_star - expected;
        if exploratory {
            exploratory_cycles += 1;
        }

        observer(cycle, &decision, &outcome);
        policy.observe_cycle(cycle, &outcome)?;

        records.push(CycleRecord {
            cycle,
            epoch,
            decision,
            realized_profit: realized,
            expected_profit: expected,
            cum_regret,
            exploratory,
        });
    }

    Ok(RegretTrace {
        records,
        summary: RunSummary {
            final_regret: cum_regret,
            epochs: policy.epoch_index(),
            exploratory_cycles,
            clairvoyant_value: r_star,
            clairvoyant_decision: u_star,
        },
    })
}
