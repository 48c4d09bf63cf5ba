//! Experiment configuration: a problem instance, the policies to run, and
//! the replication plan. Loaded from JSON; flags on the CLI can override
//! the seed, horizon, and output directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use mnli_core::optimize::OracleSpec;
use mnli_core::profit::CostStructure;
use mnli_core::{Instance, PolicyConfig, PolicyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Regret,
    EstimatorBenchmark,
    ReductionAudit,
}

/// One policy to run, as configured.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    #[serde(default = "default_oracle")]
    pub oracle: OracleSpec,
    #[serde(default = "default_true")]
    pub forced_exploration: bool,
    #[serde(default)]
    pub costs: Option<CostStructure>,
}

fn default_oracle() -> OracleSpec {
    OracleSpec::Exact
}

fn default_true() -> bool {
    true
}

impl PolicySpec {
    pub fn to_policy_config(&self) -> PolicyConfig {
        let mut cfg = PolicyConfig::new(self.kind).with_oracle(self.oracle.clone());
        cfg.forced_exploration = self.forced_exploration;
        cfg.costs = self.costs.clone();
        cfg
    }

    /// Label used in file names and summaries; disambiguates repeated kinds.
    pub fn label(&self, index: usize, specs: &[PolicySpec]) -> String {
        let base = self.kind.label();
        let repeats = specs.iter().filter(|s| s.kind == self.kind).count();
        if repeats > 1 {
            format!("{base}_{index}")
        } else {
            base.to_string()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance: Instance,
    #[serde(default)]
    pub policies: Vec<PolicySpec>,
    pub horizon: usize,
    pub replications: usize,
    pub base_seed: u64,
    pub outputs: PathBuf,
    pub mode: Mode,
    /// Estimator benchmark only: the estimate reported for a product before
    /// it has any data. Defaults to `v_max` per product.
    #[serde(default)]
    pub initial_estimate: Option<Vec<f64>>,
    /// Also write per-epoch estimator trace CSVs during regret runs.
    #[serde(default)]
    pub emit_estimator_trace: bool,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            bail!("replications must be at least 1");
        }
        if self.horizon == 0 {
            bail!("horizon must be at least 1");
        }
        match self.mode {
            Mode::Regret | Mode::ReductionAudit => {
                if self.policies.is_empty() {
                    bail!("at least one policy is required for this mode");
                }
            }
            Mode::EstimatorBenchmark => {}
        }
        if let Some(init) = &self.initial_estimate {
            if init.len() != self.instance.n_products() {
                bail!(
                    "initial_estimate has length {}, expected {}",
                    init.len(),
                    self.instance.n_products()
                );
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_json() -> serde_json::Value {
        serde_json::json!({
            "instance": {
                "n_products": 2,
                "attractions": [1.0, 0.4],
                "v_bounds": [0.1, 1.0],
                "unit_profits": [1.0, 0.22],
                "per_product_caps": [1, 1],
                "total_cap": 2,
                "max_assortment": 2,
                "arrival": {"kind": "deterministic", "mean": 2}
            },
            "policies": [{"kind": "proposed"}],
            "horizon": 10,
            "replications": 1,
            "base_seed": 0,
            "outputs": "/tmp/x",
            "mode": "regret"
        })
    }

    #[test]
    fn parses_a_minimal_config() {
        let cfg: ExperimentConfig = serde_json::from_value(base_json()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.policies.len(), 1);
        assert!(cfg.policies[0].forced_exploration);
        assert!(matches!(cfg.policies[0].oracle, OracleSpec::Exact));
    }

    #[test]
    fn rejects_zero_replications_and_missing_policies() {
        let mut bad = base_json();
        bad["replications"] = 0.into();
        let cfg: ExperimentConfig = serde_json::from_value(bad).unwrap();
        assert!(cfg.validate().is_err());

        let mut bad = base_json();
        bad["policies"] = serde_json::json!([]);
        let cfg: ExperimentConfig = serde_json::from_value(bad).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn oracle_spec_round_trips() {
        let spec: PolicySpec = serde_json::from_value(serde_json::json!({
            "kind": "v_ucb_only",
            "oracle": {"kind": "approximate", "epsilon": 0.1, "delta": 0.1},
            "forced_exploration": false
        }))
        .unwrap();
        assert_eq!(spec.kind, PolicyKind::VUcbOnly);
        assert!(!spec.forced_exploration);
        match spec.oracle {
            OracleSpec::Approximate { budget, .. } => {
                assert_eq!(budget, mnli_core::optimize::DEFAULT_ORACLE_BUDGET)
            }
            _ => panic!("expected approximate oracle"),
        }
    }
}
