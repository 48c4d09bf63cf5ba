//! Simulation, estimation, and online optimization for joint
//! assortment-inventory decisions under the multinomial logit choice model
//! with unknown attraction parameters.
//!
//! The crate is organized around the lifecycle of an experiment:
//!
//! * [`model`] — instances, feasibility, the MNL choice law, arrival
//!   processes, and the sequential within-cycle simulator;
//! * [`profit`] — exact (dynamic-programming) and Monte Carlo evaluation of
//!   the one-cycle expected profit, plus generalized ordering-cost profits;
//! * [`optimize`] — static assortment-inventory optimization: enumeration,
//!   the exact oracle, an epsilon-delta oracle with a built-in local-search
//!   approximation, and the optimism interpolation path;
//! * [`estimate`] — epoch summary statistics, the reciprocal-attraction
//!   estimator with confidence bounds and profit tuning, and the benchmark
//!   estimators;
//! * [`policy`] — the online policies and the regret-trace runner;
//! * [`reduce`] — the pairing of inventory runs with per-customer
//!   assortment-bandit runs and its bookkeeping audit.

pub mod error;
pub mod estimate;
pub mod model;
pub mod optimize;
pub mod policy;
pub mod profit;
pub mod reduce;

pub use error::{Error, Result};
pub use model::{ArrivalProcess, CycleOutcome, Instance, InventoryDecision};
pub use policy::{PolicyConfig, PolicyKind, RegretTrace};
