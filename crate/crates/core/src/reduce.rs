//! Reduction of the inventory problem to a per-customer assortment bandit:
//! any policy run on a `T`-cycle, `M`-arrivals instance induces a bandit
//! policy over `M * T` sequential customers whose assortments are the
//! in-stock sets seen inside the cycles. With the capacity floor
//! `min c_i >= M`, `total_cap >= K * M`, the clairvoyant values of the two
//! problems coincide and the paired runs share realized profit exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArrivalProcess, Instance};
use crate::policy::{run_policy_observed, PolicyConfig, RegretTrace};

/// Largest product count for which the single-customer assortment optimum
/// is computed by subset enumeration.
const MAX_BANDIT_ENUMERATION_PRODUCTS: usize = 22;

/// The per-customer assortment-bandit instance induced by an inventory
/// instance with deterministic arrivals over `horizon` cycles: `M * T`
/// sequential customers sharing the attraction parameters, unit profits,
/// and assortment-size bound. Construction requires the capacity floor
/// `min c_i >= M` and `total_cap >= K * M`, under which the clairvoyant
/// decision never triggers a stockout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditInstance {
    pub horizon: usize,
    pub attractions: Vec<f64>,
    pub unit_profits: Vec<f64>,
    pub max_assortment: usize,
    /// Arrivals per inventory cycle of the source instance.
    pub arrivals_per_cycle: usize,
}

impl BanditInstance {
    /// Derives the bandit instance, checking the capacity floor.
    pub fn from_inventory_instance(instance: &Instance, cycles: usize) -> Result<Self> {
        let m = match instance.arrival() {
            ArrivalProcess::Deterministic { mean } => *mean as usize,
            _ => {
                return Err(Error::invalid(
                    "the reduction pairing requires deterministic arrivals",
                ))
            }
        };
        let min_cap = instance.per_product_caps().iter().min().copied().unwrap_or(0);
        if (min_cap as usize) < m {
            return Err(Error::invalid(format!(
                "capacity floor violated: min c_i = {min_cap} < M = {m}"
            )));
        }
        if (instance.total_cap() as usize) < instance.max_assortment() * m {
            return Err(Error::invalid(format!(
                "capacity floor violated: total_cap = {} < K * M = {}",
                instance.total_cap(),
                instance.max_assortment() * m
            )));
        }
        Ok(BanditInstance {
            horizon: m * cycles,
            attractions: instance.attractions().to_vec(),
            unit_profits: instance.unit_profits().to_vec(),
            max_assortment: instance.max_assortment(),
            arrivals_per_cycle: m,
        })
    }

    /// Clairvoyant single-customer assortment and its expected profit.
    pub fn clairvoyant(&self) -> Result<(Vec<usize>, f64)> {
        best_single_customer_assortment(
            &self.attractions,
            &self.unit_profits,
            self.max_assortment,
        )
    }
}

/// One customer of the induced bandit instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerRecord {
    /// Bandit time index `M * (t - 1) + m`, 1-based.
    pub bandit_index: usize,
    /// Inventory cycle the customer arrived in.
    pub cycle: usize,
    /// Position within the cycle, 1-based.
    pub position: usize,
    /// Assortment offered to the customer (1-based product ids).
    pub assortment: Vec<usize>,
    /// The shared choice (0 = no purchase).
    pub choice: usize,
}

/// Paired run of an inventory policy and its induced bandit policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionAudit {
    /// Inventory-side regret trace.
    pub trace: RegretTrace,
    /// Bandit-side per-customer log.
    pub customers: Vec<CustomerRecord>,
    /// Bandit horizon `M * T`.
    pub bandit_horizon: usize,
    /// Clairvoyant one-cycle optimum of the inventory problem.
    pub inventory_optimum: f64,
    /// Clairvoyant single-customer optimum of the bandit problem.
    pub bandit_optimum: f64,
    /// Optimal single-customer assortment (1-based ids).
    pub bandit_optimal_assortment: Vec<usize>,
    /// Total realized profit of the inventory run.
    pub inventory_realized: f64,
    /// Total realized profit summed over bandit customers (identical to
    /// `inventory_realized` by construction; recomputed for the audit).
    pub bandit_realized: f64,
}

/// Single-customer expected profit of an assortment (1-based ids):
/// `sum_{i in S} r_i v_i / (1 + sum_{j in S} v_j)`.
pub fn assortment_value(assortment: &[usize], attractions: &[f64], profits: &[f64]) -> f64 {
    let total: f64 = 1.0 + assortment.iter().map(|&i| attractions[i - 1]).sum::<f64>();
    assortment
        .iter()
        .map(|&i| profits[i - 1] * attractions[i - 1])
        .sum::<f64>()
        / total
}

/// Best assortment of size at most `k` by subset enumeration.
pub fn best_single_customer_assortment(
    attractions: &[f64],
    profits: &[f64],
    k: usize,
) -> Result<(Vec<usize>, f64)> {
    let n = attractions.len();
    if n > MAX_BANDIT_ENUMERATION_PRODUCTS {
        return Err(Error::ResourceLimit {
            what: "bandit assortment enumeration",
            required: n,
            budget: MAX_BANDIT_ENUMERATION_PRODUCTS,
        });
    }
    let mut best: Vec<usize> = Vec::new();
    let mut best_value = 0.0;
    for mask in 0u64..(1u64 << n) {
        if (mask.count_ones() as usize) > k {
            continue;
        }
        let subset: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect();
        let value = assortment_value(&subset, attractions, profits);
        if value > best_value {
            best_value = value;
            best = subset;
        }
    }
    Ok((best, best_value))
}

/// Runs `cfg` on the instance for `horizon` cycles and logs the paired
/// bandit-side view. The instance must satisfy the capacity floor and use
/// deterministic arrivals.
pub fn run_reduction(
    instance: &Instance,
    cfg: &PolicyConfig,
    horizon: usize,
    seed: u64,
) -> Result<ReductionAudit> {
    let bandit = BanditInstance::from_inventory_instance(instance, horizon)?;
    let m = bandit.arrivals_per_cycle;
    if cfg.costs.is_some() {
        return Err(Error::invalid("the reduction assumes cost-free leftovers"));
    }

    let mut customers = Vec::with_capacity(horizon * m);
    let mut bandit_realized = 0.0;
    let trace = run_policy_observed(instance, cfg, horizon, seed, None, |cycle, _, outcome| {
        // accumulate per cycle in arrival order, mirroring the association
        // order of the inventory side's realized profit
        let mut cycle_profit = 0.0;
        for (pos, (&choice, assortment)) in outcome
            .choices
            .iter()
            .zip(&outcome.assortment_path)
            .enumerate()
        {
            if choice > 0 {
                cycle_profit += instance.unit_profits()[choice - 1];
            }
            customers.push(CustomerRecord {
                bandit_index: m * (cycle - 1) + pos + 1,
                cycle,
                position: pos + 1,
                assortment: assortment.clone(),
                choice,
            });
        }
        bandit_realized += cycle_profit;
    })?;

    let (bandit_optimal_assortment, bandit_optimum) = bandit.clairvoyant()?;
    let inventory_realized: f64 = trace.records.iter().map(|r| r.realized_profit).sum();
    let inventory_optimum = trace.summary.clairvoyant_value;

    Ok(ReductionAudit {
        trace,
        customers,
        bandit_horizon: bandit.horizon,
        inventory_optimum,
        bandit_optimum,
        bandit_optimal_assortment,
        inventory_realized,
        bandit_realized,
    })
}

impl ReductionAudit {
    /// Cumulative clairvoyant gap of the inventory side after all cycles:
    /// `T * R_star - realized`.
    pub fn inventory_clairvoyant_gap(&self) -> f64 {
        self.trace.records.len() as f64 * self.inventory_optimum - self.inventory_realized
    }

    /// Cumulative clairvoyant gap of the bandit side after all customers.
    pub fn bandit_clairvoyant_gap(&self) -> f64 {
        self.bandit_horizon as f64 * self.bandit_optimum - self.bandit_realized
    }
}
