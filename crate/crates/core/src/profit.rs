//! One-cycle expected profit: exact evaluation by dynamic programming over
//! remaining-inventory states, Monte Carlo estimation, and the generalized
//! profit with per-unit ordering costs and salvage values.
//!
//! The DP conditions on the arrival count `M_t = m` (mixing over a
//! tail-truncated arrival pmf) and runs the backward recursion
//!
//! ```text
//! V(w, k) = sum_{i in S(w)} p_i(S(w)) * (r_i + V(w - e_i, k - 1))
//!         + p_0(S(w)) * V(w, k - 1),          V(., 0) = 0
//! ```
//!
//! over remaining-inventory vectors `w <= u`, encoded in mixed radix
//! `prod(u_i + 1)` for dense table indexing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{simulate_cycle_given, ArrivalProcess, InventoryDecision};

/// Default upper-tail mass ignored when truncating a stochastic arrival
/// distribution; the induced bias is at most `tail_epsilon * sum(u_i)`.
pub const DEFAULT_TAIL_EPSILON: f64 = 1e-10;

/// Default cap on the number of DP states `prod(u_i + 1)`. Exceeding it is
/// an explicit error rather than a silent blow-up; callers can fall back to
/// Monte Carlo.
pub const DEFAULT_STATE_BUDGET: usize = 1_000_000;

/// Everything needed to price one inventory decision: the decision itself,
/// an attraction vector (truth, confidence bound, or interpolated), unit
/// profits, and the arrival process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitQuery {
    pub decision: InventoryDecision,
    pub attractions: Vec<f64>,
    pub profits: Vec<f64>,
    pub arrival: ArrivalProcess,
}

impl ProfitQuery {
    pub fn new(
        decision: InventoryDecision,
        attractions: Vec<f64>,
        profits: Vec<f64>,
        arrival: ArrivalProcess,
    ) -> Result<Self> {
        let q = ProfitQuery {
            decision,
            attractions,
            profits,
            arrival,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.decision.len();
        if self.attractions.len() != n || self.profits.len() != n {
            return Err(Error::invalid(format!(
                "query vectors must all have length {n}"
            )));
        }
        if self.attractions.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::invalid("attractions must be positive"));
        }
        if self
            .profits
            .iter()
            .any(|r| !r.is_finite() || *r < 0.0 || *r > 1.0)
        {
            return Err(Error::invalid("profits must lie in [0, 1]"));
        }
        self.arrival.validate()
    }
}

/// Selling prices, ordering costs, and salvage values, normalized so the
/// adjusted profits `r_i = (r'_i - s'_i) / a4` satisfy `max r_i = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CostData", into = "CostData")]
pub struct CostStructure {
    selling_prices: Vec<f64>,
    ordering_costs: Vec<f64>,
    salvage_values: Vec<f64>,
    normalizer: f64,
    adjusted_profits: Vec<f64>,
    adjusted_order_costs: Vec<f64>,
}

#[derive(Clone, Serialize, Deserialize)]
struct CostData {
    selling_prices: Vec<f64>,
    ordering_costs: Vec<f64>,
    salvage_values: Vec<f64>,
}

impl TryFrom<CostData> for CostStructure {
    type Error = Error;

    fn try_from(d: CostData) -> Result<Self> {
        CostStructure::new(d.selling_prices, d.ordering_costs, d.salvage_values)
    }
}

impl From<CostStructure> for CostData {
    fn from(c: CostStructure) -> Self {
        CostData {
            selling_prices: c.selling_prices,
            ordering_costs: c.ordering_costs,
            salvage_values: c.salvage_values,
        }
    }
}

impl CostStructure {
    pub fn new(
        selling_prices: Vec<f64>,
        ordering_costs: Vec<f64>,
        salvage_values: Vec<f64>,
    ) -> Result<Self> {
        let n = selling_prices.len();
        if ordering_costs.len() != n || salvage_values.len() != n || n == 0 {
            return Err(Error::invalid("cost vectors must share a positive length"));
        }
        for i in 0..n {
            if !(salvage_values[i] <= ordering_costs[i] && ordering_costs[i] <= selling_prices[i])
            {
                return Err(Error::invalid(format!(
                    "product {} must satisfy s' <= o' <= r'",
                    i + 1
                )));
            }
        }
        let normalizer = selling_prices
            .iter()
            .zip(&salvage_values)
            .map(|(r, s)| r - s)
            .fold(f64::NEG_INFINITY, f64::max);
        if normalizer <= 0.0 || normalizer.is_nan() {
            return Err(Error::invalid("max (r' - s') must be positive"));
        }
        let adjusted_profits = selling_prices
            .iter()
            .zip(&salvage_values)
            .map(|(r, s)| (r - s) / normalizer)
            .collect();
        let adjusted_order_costs = ordering_costs
            .iter()
            .zip(&salvage_values)
            .map(|(o, s)| (o - s) / normalizer)
            .collect();
        Ok(CostStructure {
            selling_prices,
            ordering_costs,
            salvage_values,
            normalizer,
            adjusted_profits,
            adjusted_order_costs,
        })
    }

    pub fn selling_prices(&self) -> &[f64] {
        &self.selling_prices
    }

    pub fn ordering_costs(&self) -> &[f64] {
        &self.ordering_costs
    }

    pub fn salvage_values(&self) -> &[f64] {
        &self.salvage_values
    }

    /// The scale factor `a4 = max_j (r'_j - s'_j)`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn adjusted_profits(&self) -> &[f64] {
        &self.adjusted_profits
    }

    pub fn adjusted_order_costs(&self) -> &[f64] {
        &self.adjusted_order_costs
    }
}

/// Mixed-radix state space over remaining-inventory vectors `w <= u`, with
/// per-state choice data laid out flat for the inner DP loop.
struct StateSpace {
    n_states: usize,
    /// 1 / (1 + sum of attractions in stock) per state.
    inv_total: Vec<f64>,
    /// sum of v_i * r_i over in-stock products, per state.
    revenue_base: Vec<f64>,
    /// CSR offsets into `child` / `weight` / `product`.
    offsets: Vec<u32>,
    /// State index after selling one unit of the edge's product.
    child: Vec<u32>,
    /// Attraction of the edge's product.
    weight: Vec<f64>,
    /// Product index (0-based) of the edge.
    product: Vec<u32>,
}

fn build_state_space(
    levels: &[u32],
    attractions: &[f64],
    profits: &[f64],
    budget: usize,
) -> Result<StateSpace> {
    let n = levels.len();
    let mut n_states: usize = 1;
    let mut strides = vec![0usize; n];
    for i in 0..n {
        strides[i] = n_states;
        n_states = n_states
            .checked_mul(levels[i] as usize + 1)
            .filter(|&s| s <= budget)
            .ok_or(Error::ResourceLimit {
                what: "dp states",
                required: usize::MAX,
                budget,
            })?;
    }

    let mut inv_total = Vec::with_capacity(n_states);
    let mut revenue_base = Vec::with_capacity(n_states);
    let mut offsets = Vec::with_capacity(n_states + 1);
    let mut child = Vec::new();
    let mut weight = Vec::new();
    let mut product = Vec::new();

    let mut w = vec![0u32; n];
    for idx in 0..n_states {
        offsets.push(child.len() as u32);
        let mut total = 1.0;
        let mut base = 0.0;
        for i in 0..n {
            if w[i] > 0 {
                total += attractions[i];
                base += attractions[i] * profits[i];
                child.push((idx - strides[i]) as u32);
                weight.push(attractions[i]);
                product.push(i as u32);
            }
        }
        inv_total.push(1.0 / total);
        revenue_base.push(base);
        // odometer increment towards the full-stock state
        for i in 0..n {
            if w[i] < levels[i] {
                w[i] += 1;
                break;
            }
            w[i] = 0;
        }
    }
    offsets.push(child.len() as u32);

    Ok(StateSpace {
        n_states,
        inv_total,
        revenue_base,
        offsets,
        child,
        weight,
        product,
    })
}

/// Expected one-cycle profit `E[sum r_i X_i]` via DP, mixing over the
/// tail-truncated arrival pmf.
pub(crate) fn dp_expected_profit(
    levels: &[u32],
    attractions: &[f64],
    profits: &[f64],
    arrival_pmf: &[f64],
    budget: usize,
) -> Result<f64> {
    let space = build_state_space(levels, attractions, profits, budget)?;
    let ns = space.n_states;
    let top = ns - 1;
    let mut old = vec![0.0f64; ns];
    let mut new = vec![0.0f64; ns];
    let mut result = 0.0;

    for &mass in arrival_pmf.iter().skip(1) {
        for idx in 0..ns {
            let lo = space.offsets[idx] as usize;
            let hi = space.offsets[idx + 1] as usize;
            let mut acc = space.revenue_base[idx] + old[idx];
            for e in lo..hi {
                acc += space.weight[e] * old[space.child[e] as usize];
            }
            new[idx] = acc * space.inv_total[idx];
        }
        result += mass * new[top];
        std::mem::swap(&mut old, &mut new);
    }
    Ok(result)
}

/// Per-product expected sales `E[X_i]` via the same DP, tracking the whole
/// sales vector in one pass.
pub(crate) fn dp_expected_sales(
    levels: &[u32],
    attractions: &[f64],
    arrival_pmf: &[f64],
    budget: usize,
) -> Result<Vec<f64>> {
    let n = levels.len();
    let zeros = vec![0.0; n];
    let space = build_state_space(levels, attractions, &zeros, budget)?;
    let ns = space.n_states;
    let cells = ns.checked_mul(n).filter(|&c| c <= budget.max(ns) * 64).ok_or(
        Error::ResourceLimit {
            what: "dp sales cells",
            required: usize::MAX,
            budget,
        },
    )?;
    let top = ns - 1;
    let mut old = vec![0.0f64; cells];
    let mut new = vec![0.0f64; cells];
    let mut result = vec![0.0f64; n];

    for &mass in arrival_pmf.iter().skip(1) {
        for idx in 0..ns {
            let lo = space.offsets[idx] as usize;
            let hi = space.offsets[idx + 1] as usize;
            let row = idx * n;
            let inv = space.inv_total[idx];
            new[row..row + n].copy_from_slice(&old[row..row + n]);
            for e in lo..hi {
                let c_row = space.child[e] as usize * n;
                let v = space.weight[e];
                for j in 0..n {
                    new[row + j] += v * old[c_row + j];
                }
                new[row + space.product[e] as usize] += v;
            }
            for j in 0..n {
                new[row + j] *= inv;
            }
        }
        for j in 0..n {
            result[j] += mass * new[top * n + j];
        }
        std::mem::swap(&mut old, &mut new);
    }
    Ok(result)
}

/// Exact expected one-cycle profit of the query's decision.
pub fn expected_profit_exact(query: &ProfitQuery, tail_epsilon: f64) -> Result<f64> {
    expected_profit_exact_with_budget(query, tail_epsilon, DEFAULT_STATE_BUDGET)
}

pub fn expected_profit_exact_with_budget(
    query: &ProfitQuery,
    tail_epsilon: f64,
    state_budget: usize,
) -> Result<f64> {
    query.validate()?;
    let pmf = query.arrival.truncated_pmf(tail_epsilon)?;
    dp_expected_profit(
        query.decision.levels(),
        &query.attractions,
        &query.profits,
        &pmf,
        state_budget,
    )
}

/// Per-product expected sales of a decision under the given attractions.
pub fn expected_sales(
    decision: &InventoryDecision,
    attractions: &[f64],
    arrival: &ArrivalProcess,
    tail_epsilon: f64,
    state_budget: usize,
) -> Result<Vec<f64>> {
    if attractions.len() != decision.len() {
        return Err(Error::invalid("attraction vector length mismatch"));
    }
    let pmf = arrival.truncated_pmf(tail_epsilon)?;
    dp_expected_sales(decision.levels(), attractions, &pmf, state_budget)
}

/// Monte Carlo estimate of the expected one-cycle profit: sample mean and
/// standard error over `n_samples` independent simulated cycles.
pub fn expected_profit_mc(
    query: &ProfitQuery,
    n_samples: usize,
    rng: &mut impl Rng,
) -> Result<(f64, f64)> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    query.validate()?;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 1..=n_samples {
        let outcome = simulate_cycle_given(
            query.decision.levels(),
            &query.attractions,
            &query.arrival,
            rng,
        );
        let profit = outcome.revenue(&query.profits);
        let delta = profit - mean;
        mean += delta / k as f64;
        m2 += delta * (profit - mean);
    }
    let std_error = if n_samples > 1 {
        (m2 / (n_samples - 1) as f64 / n_samples as f64).sqrt()
    } else {
        0.0
    };
    Ok((mean, std_error))
}

/// Normalized generalized profit `Pi(u; v, r, o) = sum_i (r_i E[X_i] - o_i u_i)`,
/// with `r` taken from the query (pass the cost structure's adjusted profits,
/// or a tuned version of them) and `o` the adjusted ordering costs. The raw
/// profit satisfies `Pi' = a4 * Pi`.
pub fn expected_profit_general(
    query: &ProfitQuery,
    costs: &CostStructure,
    tail_epsilon: f64,
) -> Result<f64> {
    query.validate()?;
    if costs.adjusted_order_costs.len() != query.decision.len() {
        return Err(Error::invalid("cost structure length mismatch"));
    }
    let sales = expected_sales(
        &query.decision,
        &query.attractions,
        &query.arrival,
        tail_epsilon,
        DEFAULT_STATE_BUDGET,
    )?;
    let revenue: f64 = sales
        .iter()
        .zip(&query.profits)
        .map(|(x, r)| x * r)
        .sum();
    let order_cost: f64 = query
        .decision
        .levels()
        .iter()
        .zip(&costs.adjusted_order_costs)
        .map(|(&u, o)| u as f64 * o)
        .sum();
    Ok(revenue - order_cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    /// The two-product, two-customer instance with unit caps whose profits
    /// have closed forms:
    ///   R((1,0)) = 3/4
    ///   R((1,1)) = v2 r2/(1+v2) + 1/2 + (1+v2 r2)/(2+v2)^2   (v1 = r1 = 1)
    fn pair_query(u: Vec<u32>, v2: f64, r2: f64) -> ProfitQuery {
        ProfitQuery::new(
            InventoryDecision::new(u),
            vec![1.0, v2],
            vec![1.0, r2],
            ArrivalProcess::Deterministic { mean: 2 },
        )
        .unwrap()
    }

    fn closed_form_both(v2: f64, r2: f64) -> f64 {
        v2 * r2 / (1.0 + v2) + 0.5 + (1.0 + v2 * r2) / ((2.0 + v2) * (2.0 + v2))
    }

    #[test]
    fn golden_values_from_closed_forms() {
        let r = expected_profit_exact(&pair_query(vec![1, 0], 1.0, 0.22), 1e-10).unwrap();
        assert!((r - 0.75).abs() < 1e-9);

        let r = expected_profit_exact(&pair_query(vec![1, 1], 1.0, 0.22), 1e-10).unwrap();
        assert!((r - closed_form_both(1.0, 0.22)).abs() < 1e-9);
        assert!((r - 0.7455555555555555).abs() < 1e-9);

        let r = expected_profit_exact(&pair_query(vec![1, 1], 1.0, 1.0), 1e-10).unwrap();
        assert!((r - 11.0 / 9.0).abs() < 1e-9);
    }

    #[test]
    fn zero_decision_is_worthless() {
        let q = pair_query(vec![0, 0], 1.0, 0.5);
        assert_eq!(expected_profit_exact(&q, 1e-10).unwrap(), 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let (mean, se) = expected_profit_mc(&q, 100, &mut rng).unwrap();
        assert_eq!((mean, se), (0.0, 0.0));
    }

    #[test]
    fn monte_carlo_agrees_with_dp() {
        let q = pair_query(vec![1, 0], 1.0, 0.22);
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let (mean, se) = expected_profit_mc(&q, 1_000_000, &mut rng).unwrap();
        assert!((mean - 0.75).abs() < 4.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn poisson_mixture_matches_direct_conditioning() {
        // independent route: condition on M = m by hand with deterministic
        // arrivals and mix with the Poisson pmf
        let arrival = ArrivalProcess::Poisson { mean: 3.0 };
        let pmf = arrival.truncated_pmf(1e-10).unwrap();
        let u = vec![1u32, 1];
        let v = vec![1.0, 0.4];
        let r = vec![1.0, 0.22];
        let mut expected = 0.0;
        for (m, &mass) in pmf.iter().enumerate().skip(1) {
            let det = [vec![0.0; m], vec![1.0]].concat();
            let cond = dp_expected_profit(&u, &v, &r, &det, 1 << 20).unwrap();
            expected += mass * cond;
        }
        let q = ProfitQuery::new(
            InventoryDecision::new(u),
            v,
            r,
            arrival,
        )
        .unwrap();
        let direct = expected_profit_exact(&q, 1e-10).unwrap();
        assert!((direct - expected).abs() < 1e-12);
    }

    #[test]
    fn linear_in_profits() {
        let base = pair_query(vec![1, 1], 0.7, 0.9);
        let full = expected_profit_exact(&base, 1e-10).unwrap();
        for a in [0.25, 0.5, 1.0] {
            let scaled = ProfitQuery::new(
                base.decision.clone(),
                base.attractions.clone(),
                base.profits.iter().map(|r| r * a).collect(),
                base.arrival.clone(),
            )
            .unwrap();
            let v = expected_profit_exact(&scaled, 1e-10).unwrap();
            assert!((v - a * full).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_in_each_profit() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..20 {
            let n = 3;
            let v: Vec<f64> = (0..n).map(|_| 0.2 + 0.8 * rng.gen::<f64>()).collect();
            let mut r: Vec<f64> = (0..n).map(|_| 0.2 + 0.7 * rng.gen::<f64>()).collect();
            let u: Vec<u32> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let arrival = ArrivalProcess::Deterministic {
                mean: rng.gen_range(1..5),
            };
            let q = ProfitQuery::new(
                InventoryDecision::new(u.clone()),
                v.clone(),
                r.clone(),
                arrival.clone(),
            )
            .unwrap();
            let before = expected_profit_exact(&q, 1e-10).unwrap();
            let i = rng.gen_range(0..n);
            r[i] = (r[i] + 0.1).min(1.0);
            let q2 = ProfitQuery::new(InventoryDecision::new(u), v, r, arrival).unwrap();
            let after = expected_profit_exact(&q2, 1e-10).unwrap();
            assert!(after >= before - 1e-12);
        }
    }

    #[test]
    fn profit_is_not_monotone_in_attractions() {
        // with r2 in (1/5, 1/4), dR((1,1))/dv2 changes sign on (0, 1):
        // finite-difference slopes at v2 = 0.05 and v2 = 0.95 differ in sign
        let r2 = 0.22;
        let h = 1e-3;
        let slope = |v2: f64| {
            let hi = expected_profit_exact(&pair_query(vec![1, 1], v2 + h, r2), 1e-10).unwrap();
            let lo = expected_profit_exact(&pair_query(vec![1, 1], v2 - h, r2), 1e-10).unwrap();
            (hi - lo) / (2.0 * h)
        };
        assert!(slope(0.05) > 1e-3);
        assert!(slope(0.95) < -1e-3);
    }

    #[test]
    fn state_budget_is_enforced() {
        let q = ProfitQuery::new(
            InventoryDecision::new(vec![100, 100, 100]),
            vec![0.5, 0.5, 0.5],
            vec![1.0, 1.0, 1.0],
            ArrivalProcess::Deterministic { mean: 2 },
        )
        .unwrap();
        let err = expected_profit_exact_with_budget(&q, 1e-10, 1000).unwrap_err();
        assert!(err.is_resource_limit());
    }

    #[test]
    fn sales_dp_matches_profit_dp() {
        // r . E[X] must equal the scalar profit DP on the same query
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..20 {
            let n = rng.gen_range(1..4);
            let v: Vec<f64> = (0..n).map(|_| 0.2 + 0.8 * rng.gen::<f64>()).collect();
            let r: Vec<f64> = (0..n).map(|_| 0.2 + 0.8 * rng.gen::<f64>()).collect();
            let u: Vec<u32> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let arrival = ArrivalProcess::Poisson { mean: 2.5 };
            let d = InventoryDecision::new(u.clone());
            let sales = expected_sales(&d, &v, &arrival, 1e-10, 1 << 20).unwrap();
            let from_sales: f64 = sales.iter().zip(&r).map(|(x, r)| x * r).sum();
            let pmf = arrival.truncated_pmf(1e-10).unwrap();
            let direct = dp_expected_profit(&u, &v, &r, &pmf, 1 << 20).unwrap();
            assert!((from_sales - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn general_profit_reduces_to_plain_profit_without_costs() {
        let q = pair_query(vec![1, 1], 0.8, 0.9);
        let costs = CostStructure::new(
            vec![2.0, 1.8],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        assert_eq!(costs.adjusted_order_costs(), &[0.0, 0.0]);
        let pi = expected_profit_general(&q, &costs, 1e-10).unwrap();
        let r = expected_profit_exact(&q, 1e-10).unwrap();
        assert!((pi - r).abs() < 1e-12);

        let zero = pair_query(vec![0, 0], 0.8, 0.9);
        assert_eq!(expected_profit_general(&zero, &costs, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn raw_profit_is_normalizer_times_adjusted() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        for _ in 0..10 {
            let n = 3;
            let s: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let o: Vec<f64> = s.iter().map(|s| s + rng.gen::<f64>()).collect();
            let rp: Vec<f64> = o.iter().map(|o| o + 0.1 + rng.gen::<f64>()).collect();
            let costs = CostStructure::new(rp.clone(), o.clone(), s.clone()).unwrap();
            let v: Vec<f64> = (0..n).map(|_| 0.2 + 0.8 * rng.gen::<f64>()).collect();
            let u: Vec<u32> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let arrival = ArrivalProcess::Deterministic { mean: 4 };
            let d = InventoryDecision::new(u.clone());

            let q = ProfitQuery::new(
                d.clone(),
                v.clone(),
                costs.adjusted_profits().to_vec(),
                arrival.clone(),
            )
            .unwrap();
            let pi = expected_profit_general(&q, &costs, 1e-10).unwrap();

            // raw route recomputed directly from (r', o', s')
            let sales = expected_sales(&d, &v, &arrival, 1e-10, 1 << 20).unwrap();
            let raw: f64 = (0..n)
                .map(|i| (rp[i] - s[i]) * sales[i] - (o[i] - s[i]) * u[i] as f64)
                .sum();
            assert!(
                (raw - costs.normalizer() * pi).abs() < 1e-9,
                "raw {raw} vs a4*pi {}",
                costs.normalizer() * pi
            );
        }
    }

    #[test]
    fn cost_structure_rejects_disordered_inputs() {
        assert!(CostStructure::new(vec![1.0], vec![1.2], vec![0.0]).is_err());
        assert!(CostStructure::new(vec![1.0], vec![0.5], vec![0.6]).is_err());
        assert!(CostStructure::new(vec![1.0], vec![1.0], vec![1.0]).is_err());
    }
}
