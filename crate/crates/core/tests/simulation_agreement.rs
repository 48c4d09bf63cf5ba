//! Cross-module agreement checks: the stochastic simulator against the
//! exact DP evaluator, on hand-built and randomized instances.

use mnli_core::model::{ArrivalProcess, Instance, InventoryDecision};
use mnli_core::profit::{expected_profit_exact, expected_profit_mc, ProfitQuery};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

#[test]
fn both_products_sell_with_dp_derived_probability() {
    // N = 2, unit caps, two deterministic arrivals, v = (1, 1), r = (1, 1):
    // E[X1 + X2] = R and P(at least one sale) = 1 - (1/3)^2, so
    // P(both sold) = R - 8/9 (inclusion-exclusion on {0,1}-valued sales).
    let inst = Instance::new(
        2,
        vec![1.0, 1.0],
        (0.1, 1.0),
        vec![1.0, 1.0],
        vec![1, 1],
        2,
        2,
        ArrivalProcess::Deterministic { mean: 2 },
    )
    .unwrap();
    let u = InventoryDecision::new(vec![1, 1]);
    let query = ProfitQuery::new(
        u.clone(),
        vec![1.0, 1.0],
        vec![1.0, 1.0],
        ArrivalProcess::Deterministic { mean: 2 },
    )
    .unwrap();
    let r = expected_profit_exact(&query, 1e-10).unwrap();
    let p_both = r - 8.0 / 9.0;

    let n = 1_000_000u32;
    let mut rng = ChaCha12Rng::seed_from_u64(2024);
    let mut hits = 0u32;
    for _ in 0..n {
        let out = inst.simulate_cycle(&u, &mut rng).unwrap();
        if out.sales == [1, 1] {
            hits += 1;
        }
    }
    let freq = hits as f64 / n as f64;
    let se = (p_both * (1.0 - p_both) / n as f64).sqrt();
    assert!(
        (freq - p_both).abs() < 3.0 * se,
        "freq {freq}, dp-derived {p_both}, se {se}"
    );
}

#[test]
fn clairvoyant_value_agrees_with_monte_carlo_on_a_larger_instance() {
    // five products, Poisson arrivals: price the clairvoyant decision by
    // simulation and compare against the DP
    let inst = Instance::new(
        5,
        vec![0.9, 0.3, 0.3, 0.3, 0.2],
        (0.1, 1.0),
        vec![0.6, 1.0, 1.0, 1.0, 1.0],
        vec![6; 5],
        6,
        5,
        ArrivalProcess::Poisson { mean: 6.0 },
    )
    .unwrap();
    let (u_star, value) = mnli_core::optimize::solve_exact(
        &inst,
        inst.attractions(),
        inst.unit_profits(),
        None,
    )
    .unwrap();
    let query = ProfitQuery::new(
        u_star,
        inst.attractions().to_vec(),
        inst.unit_profits().to_vec(),
        inst.arrival().clone(),
    )
    .unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(55);
    let (mc, se) = expected_profit_mc(&query, 100_000, &mut rng).unwrap();
    assert!((mc - value).abs() < 4.0 * se, "mc {mc} vs dp {value} se {se}");
}

#[test]
fn dp_matches_monte_carlo_on_random_instances() {
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    for trial in 0..50 {
        let n = rng.gen_range(1..=4usize);
        let v: Vec<f64> = (0..n).map(|_| 0.1 + 0.9 * rng.gen::<f64>()).collect();
        let r: Vec<f64> = (0..n).map(|_| 0.1 + 0.9 * rng.gen::<f64>()).collect();
        // total units at most 6
        let mut levels = vec![0u32; n];
        let mut budget = 6u32;
        for l in levels.iter_mut() {
            let u = rng.gen_range(0..=budget.min(3));
            *l = u;
            budget -= u;
        }
        let arrival = match rng.gen_range(0..3) {
            0 => ArrivalProcess::Deterministic {
                mean: rng.gen_range(1..=8),
            },
            1 => ArrivalProcess::Poisson {
                mean: 1.0 + 7.0 * rng.gen::<f64>(),
            },
            _ => {
                let a = rng.gen::<f64>();
                let b = rng.gen::<f64>();
                let s = 1.0 + a + b;
                ArrivalProcess::TruncatedCustom {
                    pmf: vec![a / s, 1.0 / s, b / s],
                }
            }
        };
        let query = ProfitQuery::new(InventoryDecision::new(levels), v, r, arrival).unwrap();
        let exact = expected_profit_exact(&query, 1e-10).unwrap();
        let (mc, se) = expected_profit_mc(&query, 1_000_000, &mut rng).unwrap();
        // a zero-stock decision has zero variance; give the bound a floor
        let tol = 4.0 * se + 1e-12;
        assert!(
            (exact - mc).abs() <= tol,
            "trial {trial}: dp {exact} vs mc {mc} +- {se}"
        );
    }
}
