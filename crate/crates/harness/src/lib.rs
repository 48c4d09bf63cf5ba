//! Experiment orchestration for the assortment-inventory toolkit: config
//! loading, replicated policy runs with clairvoyant baselines, the
//! estimator error benchmark, the reduction audit, and deterministic
//! CSV/JSON emission. The `mnli` binary is a thin CLI over this library.

pub mod config;
pub mod estbench;
pub mod io;
pub mod runner;
