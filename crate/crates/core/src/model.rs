//! Problem instances, feasibility, the MNL choice law, arrival processes,
//! and the sequential within-cycle simulation with stockout-driven
//! assortment shrinkage.
//!
//! Products are indexed `1..=N` externally; index `0` is reserved for the
//! outside (no-purchase) option in all choice encodings. The outside-option
//! attraction is fixed to 1 and is not configurable.

use std::fmt;

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that a pmf sums to one and that the unit
/// profits are normalized to `max r_i = 1`.
const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Largest tail mass a caller may ask to ignore when truncating an
/// arrival distribution.
pub const MAX_TAIL_EPSILON: f64 = 1e-6;

/// Distribution of the number of customer arrivals per inventory cycle.
///
/// The deterministic and Poisson kinds satisfy the M-Sub-Poisson moment
/// condition by construction. A `TruncatedCustom` pmf is accepted without
/// verifying that condition; regret guarantees only apply when it holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalProcess {
    /// Exactly `mean` customers arrive in every cycle.
    Deterministic { mean: u64 },
    /// Poisson-distributed arrivals with the given mean.
    Poisson { mean: f64 },
    /// Arrivals drawn from an explicit finite pmf over `{0, 1, ..., len-1}`.
    TruncatedCustom { pmf: Vec<f64> },
}

impl ArrivalProcess {
    pub fn validate(&self) -> Result<()> {
        match self {
            ArrivalProcess::Deterministic { mean } => {
                if *mean == 0 {
                    return Err(Error::invalid("deterministic arrival count must be positive"));
                }
            }
            ArrivalProcess::Poisson { mean } => {
                if !mean.is_finite() || *mean <= 0.0 {
                    return Err(Error::invalid("poisson arrival mean must be positive"));
                }
                if *mean > 700.0 {
                    // exp(-mean) underflows; exact pmf truncation would break
                    return Err(Error::invalid("poisson arrival mean above 700 is unsupported"));
                }
            }
            ArrivalProcess::TruncatedCustom { pmf } => {
                if pmf.is_empty() {
                    return Err(Error::invalid("custom arrival pmf must be non-empty"));
                }
                if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::invalid("custom arrival pmf entries must be non-negative"));
                }
                let sum: f64 = pmf.iter().sum();
                if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                    return Err(Error::invalid(format!(
                        "custom arrival pmf sums to {sum}, expected 1 within 1e-12"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Expected number of arrivals per cycle.
    pub fn mean(&self) -> f64 {
        match self {
            ArrivalProcess::Deterministic { mean } => *mean as f64,
            ArrivalProcess::Poisson { mean } => *mean,
            ArrivalProcess::TruncatedCustom { pmf } => {
                pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
            }
        }
    }

    /// Draws one arrival count. Draws are i.i.d. across calls.
    pub fn sample(&self, rng: &mut impl Rng) -> u64 {
        match self {
            ArrivalProcess::Deterministic { mean } => *mean,
            ArrivalProcess::Poisson { mean } => {
                let dist = rand_distr::Poisson::new(*mean).expect("validated mean");
                dist.sample(rng) as u64
            }
            ArrivalProcess::TruncatedCustom { pmf } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (k, p) in pmf.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return k as u64;
                    }
                }
                (pmf.len() - 1) as u64
            }
        }
    }

    /// Pmf over `0..=m_max`, where `m_max` is the smallest count whose
    /// upper-tail mass is below `tail_epsilon` (deterministic arrivals
    /// truncate at the exact count; a custom pmf is already finite).
    ///
    /// Expected-value computations mixed over this pmf carry an absolute
    /// truncation bias of at most `tail_epsilon * sum(u_i)`.
    pub fn truncated_pmf(&self, tail_epsilon: f64) -> Result<Vec<f64>> {
        if !(tail_epsilon > 0.0 && tail_epsilon <= MAX_TAIL_EPSILON) {
            return Err(Error::invalid(format!(
                "tail_epsilon must lie in (0, {MAX_TAIL_EPSILON}], got {tail_epsilon}"
            )));
        }
        match self {
            ArrivalProcess::Deterministic { mean } => {
                let mut pmf = vec![0.0; *mean as usize + 1];
                pmf[*mean as usize] = 1.0;
                Ok(pmf)
            }
            ArrivalProcess::Poisson { mean } => {
                let mut p = (-mean).exp();
                let mut cumulative = p;
                let mut pmf = vec![p];
                while 1.0 - cumulative >= tail_epsilon {
                    let k = pmf.len() as f64;
                    p *= mean / k;
                    cumulative += p;
                    pmf.push(p);
                    if pmf.len() > 100_000 {
                        return Err(Error::invalid("poisson truncation did not converge"));
                    }
                }
                Ok(pmf)
            }
            ArrivalProcess::TruncatedCustom { pmf } => Ok(pmf.clone()),
        }
    }
}

/// Non-negative integer order-up-to levels `u`. The derived assortment is
/// `S(u) = { i : u_i > 0 }`.
///
/// The derived `Ord` is lexicographic on the level vector, which is the
/// tie-breaking order used by the optimizers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InventoryDecision(Vec<u32>);

impl InventoryDecision {
    pub fn new(levels: Vec<u32>) -> Self {
        InventoryDecision(levels)
    }

    pub fn zeros(n: usize) -> Self {
        InventoryDecision(vec![0; n])
    }

    pub fn levels(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Assorted products as 1-based indices, ascending.
    pub fn assortment(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &u)| u > 0)
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&u| u > 0).count()
    }

    pub fn total_units(&self) -> u64 {
        self.0.iter().map(|&u| u as u64).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&u| u == 0)
    }
}

impl fmt::Display for InventoryDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, u) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{u}")?;
        }
        write!(f, ")")
    }
}

/// Realized outcome of one inventory cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleOutcome {
    /// Number of customers that arrived (`M_t`).
    pub arrivals: u64,
    /// Choice of each customer in arrival order; `0` is the outside option,
    /// `i >= 1` a product purchase.
    pub choices: Vec<usize>,
    /// Units of each product sold during the cycle.
    pub sales: Vec<u32>,
    /// In-stock assortment seen by each customer (1-based ids, ascending).
    /// Nested non-increasing along the cycle.
    pub assortment_path: Vec<Vec<usize>>,
}

impl CycleOutcome {
    /// Revenue of the cycle under unit profits `r` (no ordering costs),
    /// accumulated customer by customer in arrival order.
    pub fn revenue(&self, profits: &[f64]) -> f64 {
        self.choices
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| profits[c - 1])
            .sum()
    }
}

/// Full problem specification. The `attractions` vector is the hidden truth
/// used only for simulation and clairvoyant baselines; admissible policies
/// see every other field plus the attraction bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceData")]
pub struct Instance {
    n_products: usize,
    attractions: Vec<f64>,
    v_bounds: (f64, f64),
    unit_profits: Vec<f64>,
    per_product_caps: Vec<u32>,
    total_cap: u32,
    max_assortment: usize,
    arrival: ArrivalProcess,
}

/// Raw wire shape of [`Instance`]; deserialization funnels through
/// [`Instance::new`] so invalid instances cannot be constructed from JSON.
#[derive(Deserialize)]
struct InstanceData {
    n_products: usize,
    attractions: Vec<f64>,
    v_bounds: (f64, f64),
    unit_profits: Vec<f64>,
    per_product_caps: Vec<u32>,
    total_cap: u32,
    max_assortment: usize,
    arrival: ArrivalProcess,
}

impl TryFrom<InstanceData> for Instance {
    type Error = Error;

    fn try_from(d: InstanceData) -> Result<Self> {
        Instance::new(
            d.n_products,
            d.attractions,
            d.v_bounds,
            d.unit_profits,
            d.per_product_caps,
            d.total_cap,
            d.max_assortment,
            d.arrival,
        )
    }
}

impl Instance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_products: usize,
        attractions: Vec<f64>,
        v_bounds: (f64, f64),
        unit_profits: Vec<f64>,
        per_product_caps: Vec<u32>,
        total_cap: u32,
        max_assortment: usize,
        arrival: ArrivalProcess,
    ) -> Result<Self> {
        if n_products == 0 {
            return Err(Error::invalid("instance needs at least one product"));
        }
        let (v_min, v_max) = v_bounds;
        if !(v_min > 0.0 && v_min <= v_max && v_max.is_finite()) {
            return Err(Error::invalid(format!(
                "attraction bounds must satisfy 0 < v_min <= v_max, got ({v_min}, {v_max})"
            )));
        }
        for (name, len) in [
            ("attractions", attractions.len()),
            ("unit_profits", unit_profits.len()),
            ("per_product_caps", per_product_caps.len()),
        ] {
            if len != n_products {
                return Err(Error::invalid(format!(
                    "{name} has length {len}, expected {n_products}"
                )));
            }
        }
        for (i, &v) in attractions.iter().enumerate() {
            if !(v >= v_min && v <= v_max) {
                return Err(Error::invalid(format!(
                    "attraction of product {} is {v}, outside [{v_min}, {v_max}]",
                    i + 1
                )));
            }
        }
        let mut r_max = f64::NEG_INFINITY;
        for (i, &r) in unit_profits.iter().enumerate() {
            if !(r > 0.0 && r <= 1.0 + NORMALIZATION_TOLERANCE) {
                return Err(Error::invalid(format!(
                    "unit profit of product {} is {r}, expected in (0, 1]",
                    i + 1
                )));
            }
            r_max = r_max.max(r);
        }
        if (r_max - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::invalid(format!(
                "unit profits must be normalized so max r_i = 1, got max {r_max}"
            )));
        }
        if max_assortment == 0 || max_assortment > n_products {
            return Err(Error::invalid(format!(
                "max assortment size must lie in 1..={n_products}, got {max_assortment}"
            )));
        }
        arrival.validate()?;
        Ok(Instance {
            n_products,
            attractions,
            v_bounds,
            unit_profits,
            per_product_caps,
            total_cap,
            max_assortment,
            arrival,
        })
    }

    pub fn n_products(&self) -> usize {
        self.n_products
    }

    /// Hidden true attraction parameters. Policies must not read these;
    /// they are for simulation and clairvoyant baselines only.
    pub fn attractions(&self) -> &[f64] {
        &self.attractions
    }

    pub fn v_bounds(&self) -> (f64, f64) {
        self.v_bounds
    }

    pub fn v_min(&self) -> f64 {
        self.v_bounds.0
    }

    pub fn v_max(&self) -> f64 {
        self.v_bounds.1
    }

    pub fn unit_profits(&self) -> &[f64] {
        &self.unit_profits
    }

    pub fn per_product_caps(&self) -> &[u32] {
        &self.per_product_caps
    }

    pub fn total_cap(&self) -> u32 {
        self.total_cap
    }

    pub fn max_assortment(&self) -> usize {
        self.max_assortment
    }

    pub fn arrival(&self) -> &ArrivalProcess {
        &self.arrival
    }

    /// MNL choice probability of `product` (0 = outside option) when the
    /// offered assortment is `assortment` (1-based product ids).
    pub fn choice_probability(&self, assortment: &[usize], product: usize) -> Result<f64> {
        if product > self.n_products {
            return Err(Error::invalid(format!(
                "product index {product} out of range 0..={}",
                self.n_products
            )));
        }
        let mut in_set = vec![false; self.n_products + 1];
        let mut total = 1.0; // v_0 = 1
        for &j in assortment {
            if j == 0 || j > self.n_products {
                return Err(Error::invalid(format!(
                    "assortment member {j} out of range 1..={}",
                    self.n_products
                )));
            }
            if !in_set[j] {
                in_set[j] = true;
                total += self.attractions[j - 1];
            }
        }
        if product == 0 {
            return Ok(1.0 / total);
        }
        if in_set[product] {
            Ok(self.attractions[product - 1] / total)
        } else {
            Ok(0.0)
        }
    }

    /// Whether `decision` belongs to the feasible set: `u_i <= c_i` for all
    /// products, `sum u_i <= total_cap`, and `|S(u)| <= max_assortment`.
    pub fn is_feasible(&self, decision: &InventoryDecision) -> Result<bool> {
        if decision.len() != self.n_products {
            return Err(Error::invalid(format!(
                "decision has length {}, expected {}",
                decision.len(),
                self.n_products
            )));
        }
        let caps_ok = decision
            .levels()
            .iter()
            .zip(&self.per_product_caps)
            .all(|(&u, &c)| u <= c);
        Ok(caps_ok
            && decision.total_units() <= self.total_cap as u64
            && decision.support_size() <= self.max_assortment)
    }

    /// Draws one cycle's arrival count.
    pub fn sample_arrivals(&self, rng: &mut impl Rng) -> u64 {
        self.arrival.sample(rng)
    }

    /// Simulates one inventory cycle under the true attraction parameters:
    /// customers arrive sequentially, each choosing from the currently
    /// in-stock assortment; purchases decrement stock.
    pub fn simulate_cycle(
        &self,
        decision: &InventoryDecision,
        rng: &mut impl Rng,
    ) -> Result<CycleOutcome> {
        if !self.is_feasible(decision)? {
            return Err(Error::invalid(format!(
                "infeasible inventory decision {decision}"
            )));
        }
        Ok(simulate_cycle_given(
            decision.levels(),
            &self.attractions,
            &self.arrival,
            rng,
        ))
    }
}

/// Cycle simulation under explicit attraction values (which need not be the
/// truth; Monte Carlo profit evaluation scores candidate parameter vectors
/// this way). Each customer consumes a single uniform draw mapped through
/// the choice CDF in product-index order, so runs are bit-reproducible per
/// seed and ties are impossible.
pub(crate) fn simulate_cycle_given(
    levels: &[u32],
    attractions: &[f64],
    arrival: &ArrivalProcess,
    rng: &mut impl Rng,
) -> CycleOutcome {
    let n = levels.len();
    let arrivals = arrival.sample(rng);
    let mut stock = levels.to_vec();
    let mut sales = vec![0u32; n];
    let mut choices = Vec::with_capacity(arrivals as usize);
    let mut assortment_path = Vec::with_capacity(arrivals as usize);

    for _ in 0..arrivals {
        let mut available = Vec::new();
        let mut total = 1.0; // outside option
        for i in 0..n {
            if stock[i] > 0 {
                available.push(i + 1);
                total += attractions[i];
            }
        }
        let draw: f64 = rng.gen::<f64>() * total;
        let mut choice = 0usize;
        let mut acc = 0.0;
        for &j in &available {
            acc += attractions[j - 1];
            if draw < acc {
                choice = j;
                break;
            }
        }
        if choice > 0 {
            stock[choice - 1] -= 1;
            sales[choice - 1] += 1;
        }
        choices.push(choice);
        assortment_path.push(available);
    }

    CycleOutcome {
        arrivals,
        choices,
        sales,
        assortment_path,
    }
}
