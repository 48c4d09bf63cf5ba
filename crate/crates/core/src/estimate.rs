//! Epoch summary statistics and the reciprocal-attraction estimator, with
//! confidence bounds, profit tuning, and the benchmark estimators used for
//! comparison.
//!
//! Within an epoch the same inventory decision is offered every cycle; the
//! epoch closes once every assorted product has been purchased at least
//! once. For each assorted product `i`, the summary statistic `mu_{i,l}` is
//! the number of no-purchase choices from the start of the epoch until the
//! product's first purchase. Conditional on choosing between the product
//! and the outside option, each customer picks the product with probability
//! `v_i / (1 + v_i)` regardless of what else is in stock, so `mu_{i,l}` is
//! geometric with mean `1 / v_i` and never censored by inventory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CycleOutcome, InventoryDecision};

/// Scale constant of the confidence radius; also the per-product epoch-count
/// threshold of the adequate-exploration condition.
pub const EXPLORATION_SCALE: f64 = 48.0;

/// `48 * log(sqrt(N) * ell + 1)`, the adequate-exploration threshold for
/// epoch `ell` (natural logarithm).
pub fn exploration_threshold(n_products: usize, ell: usize) -> f64 {
    EXPLORATION_SCALE * ((n_products as f64).sqrt() * ell as f64 + 1.0).ln()
}

/// Confidence radius around the sample mean of the no-purchase statistic:
///
/// ```text
/// Delta = max(sqrt(mu_bar), mu_bar) * sqrt(48 log(sqrt(N) ell + 1) / T)
///       + 48 log(sqrt(N) ell + 1) / T
/// ```
pub fn confidence_radius(mu_bar: f64, t_count: u32, n_products: usize, ell: usize) -> f64 {
    let log_term = exploration_threshold(n_products, ell) / t_count as f64;
    mu_bar.sqrt().max(mu_bar) * log_term.sqrt() + log_term
}

/// Confidence bounds `(mu_lcb, mu_ucb, delta)` clipped into
/// `[mu_min, mu_max] = [1/v_max, 1/v_min]`.
pub fn confidence_bounds(
    mu_bar: f64,
    t_count: u32,
    n_products: usize,
    ell: usize,
    mu_min: f64,
    mu_max: f64,
) -> (f64, f64, f64) {
    let delta = confidence_radius(mu_bar, t_count, n_products, ell);
    let lcb = (mu_bar - delta).clamp(mu_min, mu_max);
    let ucb = (mu_bar + delta).clamp(mu_min, mu_max);
    (lcb, ucb, delta)
}

/// Profit-tuning increment `delta = mu_ucb / mu_lcb - 1`, computed on the
/// clipped bounds (equals `2 Delta / mu_lcb` when no clipping binds).
pub fn tuned_delta(mu_lcb: f64, mu_ucb: f64) -> f64 {
    mu_ucb / mu_lcb - 1.0
}

/// Tuned unit profit `min(1, r + delta)`.
pub fn tuned_profit(unit_profit: f64, delta: f64) -> f64 {
    (unit_profit + delta).min(1.0)
}

/// In-progress statistics of one epoch: the shared no-purchase counter and
/// the frozen per-product counts.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    epoch_index: usize,
    decision: InventoryDecision,
    cycles: Vec<usize>,
    counts: Vec<Option<u64>>,
    open: Vec<bool>,
    open_remaining: usize,
    no_purchase_run: u64,
}

impl EpochRecord {
    pub fn new(epoch_index: usize, decision: InventoryDecision) -> Self {
        let n = decision.len();
        let mut open = vec![false; n];
        let mut open_remaining = 0;
        for (i, &u) in decision.levels().iter().enumerate() {
            if u > 0 {
                open[i] = true;
                open_remaining += 1;
            }
        }
        EpochRecord {
            epoch_index,
            decision,
            cycles: Vec::new(),
            counts: vec![None; n],
            open,
            open_remaining,
            no_purchase_run: 0,
        }
    }

    pub fn epoch_index(&self) -> usize {
        self.epoch_index
    }

    pub fn decision(&self) -> &InventoryDecision {
        &self.decision
    }

    pub fn cycles(&self) -> &[usize] {
        &self.cycles
    }

    /// Frozen statistic for a product (1-based), if recorded.
    pub fn no_purchase_count(&self, product: usize) -> Option<u64> {
        self.counts[product - 1]
    }

    /// The epoch closes once every assorted product has been purchased.
    pub fn is_closed(&self) -> bool {
        self.open_remaining == 0
    }

    pub fn record_cycle(&mut self, cycle: usize) {
        self.cycles.push(cycle);
    }

    /// Processes one customer choice: `0` bumps the running no-purchase
    /// counter; the first purchase of an assorted product freezes its
    /// statistic; repeat purchases carry no information.
    pub fn ingest_choice(&mut self, choice: usize) -> Result<()> {
        if choice == 0 {
            self.no_purchase_run += 1;
            return Ok(());
        }
        let i = choice - 1;
        if i >= self.decision.len() || self.decision.levels()[i] == 0 {
            return Err(Error::InvariantViolation(format!(
                "purchase of product {choice} which is not stocked by {}",
                self.decision
            )));
        }
        if self.open[i] {
            self.open[i] = false;
            self.open_remaining -= 1;
            self.counts[i] = Some(self.no_purchase_run);
        }
        Ok(())
    }

    /// Feeds a whole cycle of choices and appends the cycle index.
    pub fn ingest_cycle(&mut self, cycle: usize, outcome: &CycleOutcome) -> Result<()> {
        for &c in &outcome.choices {
            self.ingest_choice(c)?;
        }
        self.record_cycle(cycle);
        Ok(())
    }
}

/// Per-product estimator state: running statistics, confidence bounds on
/// the reciprocal attraction, derived attraction bounds, and tuned profit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductEstimate {
    /// Number of closed epochs in which the product was assorted (`T_{i,l}`).
    pub count: u32,
    /// Sum of recorded statistics.
    pub sum: u64,
    /// Sample mean of the statistics; `mu_max` before any data.
    pub mu_bar: f64,
    /// Confidence radius at the last update.
    pub delta: f64,
    pub mu_lcb: f64,
    pub mu_ucb: f64,
    pub v_lcb: f64,
    pub v_ucb: f64,
    /// Profit-tuning increment `mu_ucb / mu_lcb - 1`.
    pub delta_tune: f64,
    /// Tuned profit `min(1, r + delta_tune)`; exactly 1 before any data.
    pub r_hat: f64,
}

/// Estimator over all products, updated at epoch closes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    n_products: usize,
    v_min: f64,
    v_max: f64,
    mu_min: f64,
    mu_max: f64,
    profits: Vec<f64>,
    products: Vec<ProductEstimate>,
    closed_epochs: usize,
    #[serde(skip)]
    histories: Option<Vec<Vec<u64>>>,
}

impl EstimatorState {
    pub fn new(n_products: usize, v_bounds: (f64, f64), profits: Vec<f64>) -> Result<Self> {
        let (v_min, v_max) = v_bounds;
        if !(v_min > 0.0 && v_min <= v_max) {
            return Err(Error::invalid("need 0 < v_min <= v_max"));
        }
        if profits.len() != n_products {
            return Err(Error::invalid("profit vector length mismatch"));
        }
        let mu_min = 1.0 / v_max;
        let mu_max = 1.0 / v_min;
        let products = profits
            .iter()
            .map(|&r| {
                // No data yet: bounds span the whole parameter range and the
                // tuned profit starts at r_max = 1; delta_tune is floored so
                // min(1, r + delta_tune) reproduces that initialization.
                let delta_tune = (mu_max / mu_min - 1.0).max(1.0 - r);
                ProductEstimate {
                    count: 0,
                    sum: 0,
                    mu_bar: mu_max,
                    delta: f64::INFINITY,
                    mu_lcb: mu_min,
                    mu_ucb: mu_max,
                    v_lcb: v_min,
                    v_ucb: v_max,
                    delta_tune,
                    r_hat: 1.0,
                }
            })
            .collect();
        Ok(EstimatorState {
            n_products,
            v_min,
            v_max,
            mu_min,
            mu_max,
            profits,
            products,
            closed_epochs: 0,
            histories: None,
        })
    }

    /// Retains the full statistic lists for diagnostics.
    pub fn with_diagnostics(mut self) -> Self {
        self.histories = Some(vec![Vec::new(); self.n_products]);
        self
    }

    pub fn n_products(&self) -> usize {
        self.n_products
    }

    pub fn closed_epochs(&self) -> usize {
        self.closed_epochs
    }

    pub fn unit_profits(&self) -> &[f64] {
        &self.profits
    }

    pub fn product(&self, product: usize) -> &ProductEstimate {
        &self.products[product - 1]
    }

    pub fn products(&self) -> &[ProductEstimate] {
        &self.products
    }

    pub fn v_lcb(&self) -> Vec<f64> {
        self.products.iter().map(|p| p.v_lcb).collect()
    }

    pub fn v_ucb(&self) -> Vec<f64> {
        self.products.iter().map(|p| p.v_ucb).collect()
    }

    pub fn r_hat(&self) -> Vec<f64> {
        self.products.iter().map(|p| p.r_hat).collect()
    }

    /// Tuned profit of a product (1-based).
    pub fn tuned_profit(&self, product: usize) -> f64 {
        self.products[product - 1].r_hat
    }

    /// Point estimates `1 / mu_bar` clipped to the attraction bounds;
    /// `default` (typically `v_max`) for products with no data.
    pub fn point_estimates(&self, default: f64) -> Vec<f64> {
        self.products
            .iter()
            .map(|p| {
                if p.count == 0 {
                    default
                } else if p.mu_bar == 0.0 {
                    self.v_max
                } else {
                    (1.0 / p.mu_bar).clamp(self.v_min, self.v_max)
                }
            })
            .collect()
    }

    /// Products (1-based) failing the adequate-exploration condition at
    /// epoch `ell`: `T_{i,ell} < 48 log(sqrt(N) ell + 1)`.
    pub fn under_explored(&self, ell: usize) -> Vec<usize> {
        let threshold = exploration_threshold(self.n_products, ell);
        self.products
            .iter()
            .enumerate()
            .filter(|(_, p)| (p.count as f64) < threshold)
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn diagnostics_history(&self, product: usize) -> Option<&[u64]> {
        self.histories.as_ref().map(|h| h[product - 1].as_slice())
    }

    /// Folds a closed epoch into the estimates. For each product assorted by
    /// the epoch's decision: append its statistic, recompute the mean, the
    /// radius at the epoch's index, the clipped bounds, and the tuned
    /// profit. Products not assorted are left unchanged.
    pub fn close_epoch(&mut self, record: &EpochRecord) -> Result<()> {
        if !record.is_closed() {
            return Err(Error::Precondition(format!(
                "epoch {} is still open",
                record.epoch_index()
            )));
        }
        if record.decision().len() != self.n_products {
            return Err(Error::invalid("epoch decision length mismatch"));
        }
        let ell = record.epoch_index();
        for i in 0..self.n_products {
            let Some(mu) = record.counts[i] else {
                continue;
            };
            let p = &mut self.products[i];
            p.sum += mu;
            p.count += 1;
            p.mu_bar = p.sum as f64 / p.count as f64;
            let (lcb, ucb, delta) =
                confidence_bounds(p.mu_bar, p.count, self.n_products, ell, self.mu_min, self.mu_max);
            p.delta = delta;
            p.mu_lcb = lcb;
            p.mu_ucb = ucb;
            p.v_lcb = 1.0 / ucb;
            p.v_ucb = 1.0 / lcb;
            p.delta_tune = tuned_delta(lcb, ucb);
            p.r_hat = tuned_profit(self.profits[i], p.delta_tune);
            if let Some(histories) = &mut self.histories {
                histories[i].push(mu);
            }
        }
        self.closed_epochs += 1;
        Ok(())
    }
}

/// Which benchmark estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    /// Record only the first arriving customer of each cycle; epochs end
    /// when such a customer declines to purchase.
    FirstCustomer,
    /// Epochs end at the first no-purchase by any customer; the statistic
    /// is each product's purchase count before that no-purchase.
    UntilNoPurchase,
    /// As `UntilNoPurchase`, but a product's statistic is discarded when the
    /// product stocked out before the first no-purchase (demand censored).
    CensorAware,
}

/// Streaming benchmark estimator. Feed one cycle at a time together with
/// the decision that generated it; the return value signals that the
/// current epoch closed (the data policy may then pick a new decision).
#[derive(Debug, Clone)]
pub struct BenchmarkEstimator {
    kind: BenchmarkKind,
    n_products: usize,
    sums: Vec<f64>,
    counts: Vec<u32>,
    epoch_purchases: Vec<u64>,
    epoch_assorted: Vec<bool>,
    epoch_stock: Vec<u32>,
    epoch_censored: Vec<bool>,
    epoch_has_data: bool,
}

impl BenchmarkEstimator {
    pub fn new(kind: BenchmarkKind, n_products: usize) -> Self {
        BenchmarkEstimator {
            kind,
            n_products,
            sums: vec![0.0; n_products],
            counts: vec![0; n_products],
            epoch_purchases: vec![0; n_products],
            epoch_assorted: vec![false; n_products],
            epoch_stock: vec![0; n_products],
            epoch_censored: vec![false; n_products],
            epoch_has_data: false,
        }
    }

    pub fn kind(&self) -> BenchmarkKind {
        self.kind
    }

    fn begin_epoch(&mut self, decision: &InventoryDecision) {
        self.epoch_purchases.iter_mut().for_each(|c| *c = 0);
        self.epoch_censored.iter_mut().for_each(|c| *c = false);
        for i in 0..self.n_products {
            self.epoch_assorted[i] = decision.levels()[i] > 0;
            self.epoch_stock[i] = decision.levels()[i];
        }
        self.epoch_has_data = true;
    }

    fn commit_epoch(&mut self) {
        for i in 0..self.n_products {
            if !self.epoch_assorted[i] {
                continue;
            }
            if self.kind == BenchmarkKind::CensorAware && self.epoch_censored[i] {
                continue;
            }
            self.sums[i] += self.epoch_purchases[i] as f64;
            self.counts[i] += 1;
        }
        self.epoch_has_data = false;
    }

    /// Consumes one cycle generated under `decision` (which must stay fixed
    /// within an epoch). Returns `true` when the epoch closed.
    pub fn observe_cycle(&mut self, decision: &InventoryDecision, outcome: &CycleOutcome) -> bool {
        if !self.epoch_has_data {
            self.begin_epoch(decision);
        }
        match self.kind {
            BenchmarkKind::FirstCustomer => {
                match outcome.choices.first() {
                    Some(0) => {
                        self.commit_epoch();
                        return true;
                    }
                    Some(&c) => {
                        self.epoch_purchases[c - 1] += 1;
                    }
                    None => {} // nobody arrived; the cycle is uninformative
                }
                false
            }
            BenchmarkKind::UntilNoPurchase | BenchmarkKind::CensorAware => {
                for &c in &outcome.choices {
                    if c == 0 {
                        self.commit_epoch();
                        return true;
                    }
                    self.epoch_purchases[c - 1] += 1;
                    if self.epoch_stock[c - 1] > 0 {
                        self.epoch_stock[c - 1] -= 1;
                    }
                    // a stockout at any point before the first no-purchase
                    // censors the product's demand count
                    if self.epoch_stock[c - 1] == 0 {
                        self.epoch_censored[c - 1] = true;
                    }
                }
                // stock is replenished to the same levels next cycle
                for i in 0..self.n_products {
                    self.epoch_stock[i] = decision.levels()[i];
                }
                false
            }
        }
    }

    /// Per-product attraction estimates: mean of the recorded statistics,
    /// absent until a product has at least one sample.
    pub fn estimates(&self) -> Vec<Option<f64>> {
        (0..self.n_products)
            .map(|i| {
                if self.counts[i] == 0 {
                    None
                } else {
                    Some(self.sums[i] / self.counts[i] as f64)
                }
            })
            .collect()
    }
}
