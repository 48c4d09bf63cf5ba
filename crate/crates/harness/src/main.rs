//! Command-line driver. Exit codes: 0 on success, 2 on configuration
//! errors, 3 when a computation exceeds a resource budget, 1 otherwise.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use mnli_core::optimize::{solve_eps_delta, solve_exact, OracleSpec};
use mnli_core::profit::{
    expected_profit_exact, expected_profit_general, expected_profit_mc, CostStructure,
    ProfitQuery, DEFAULT_TAIL_EPSILON,
};
use mnli_core::{Instance, InventoryDecision};
use mnli_harness::config::{ExperimentConfig, Mode};
use mnli_harness::{estbench, runner};

#[derive(Parser)]
#[command(
    name = "mnli",
    about = "Simulation and online-optimization experiments for joint assortment-inventory decisions under MNL demand",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Size of the worker pool (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Override the configured horizon.
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Replicated regret experiment over the configured policies.
    Simulate(RunArgs),
    /// Estimator error trajectories under a random data policy.
    EstimateBench(RunArgs),
    /// Evaluate the expected profit of one query (JSON request on --config).
    Evaluate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve a static assortment-inventory problem (JSON request on --config).
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Paired bandit-reduction audit runs.
    ReduceAudit(RunArgs),
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum EvalMethod {
    Exact,
    Mc,
}

#[derive(Debug, Deserialize)]
struct EvaluateRequest {
    query: ProfitQuery,
    #[serde(default = "default_method")]
    method: EvalMethod,
    #[serde(default)]
    tail_epsilon: Option<f64>,
    #[serde(default)]
    n_samples: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    costs: Option<CostStructure>,
}

fn default_method() -> EvalMethod {
    EvalMethod::Exact
}

#[derive(Debug, Serialize)]
struct EvaluateResponse {
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    std_error: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct OptimizeRequest {
    instance: Instance,
    #[serde(default)]
    attractions: Option<Vec<f64>>,
    #[serde(default)]
    profits: Option<Vec<f64>>,
    #[serde(default = "default_oracle")]
    oracle: OracleSpec,
    #[serde(default)]
    ordering_costs: Option<Vec<f64>>,
    #[serde(default)]
    seed: Option<u64>,
}

fn default_oracle() -> OracleSpec {
    OracleSpec::Exact
}

#[derive(Debug, Serialize)]
struct OptimizeResponse {
    decision: InventoryDecision,
    value: f64,
    evaluations: usize,
}

fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn load_config(args: &RunArgs, expected: Mode) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if cfg.mode != expected {
        anyhow::bail!(
            "config mode {:?} does not match the requested subcommand",
            cfg.mode
        );
    }
    if let Some(out) = &args.out {
        cfg.outputs = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    if let Some(horizon) = args.horizon {
        cfg.horizon = horizon;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_request<T: for<'de> Deserialize<'de>>(path: &PathBuf) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("cannot parse {}: {e}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            init_threads(args.threads);
            let cfg = load_config(&args, Mode::Regret)?;
            let output = runner::run_experiment(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&output.summary)?);
        }
        Command::EstimateBench(args) => {
            init_threads(args.threads);
            let cfg = load_config(&args, Mode::EstimatorBenchmark)?;
            let curves = estbench::estimator_benchmark(&cfg)?;
            let finals: Vec<f64> = curves.curves.iter().map(|c| *c.last().unwrap()).collect();
            println!(
                "{}",
                serde_json::json!({
                    "schema": "mnli.estbench.v1",
                    "horizon": curves.horizon,
                    "final_errors": estbench::ESTIMATOR_LABELS
                        .iter()
                        .zip(&finals)
                        .map(|(l, e)| (l.to_string(), *e))
                        .collect::<std::collections::BTreeMap<_, _>>(),
                })
            );
        }
        Command::ReduceAudit(args) => {
            init_threads(args.threads);
            let cfg = load_config(&args, Mode::ReductionAudit)?;
            let summary = runner::run_reduction_audit(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Evaluate { config } => {
            let req: EvaluateRequest = read_request(&config)?;
            let tail = req.tail_epsilon.unwrap_or(DEFAULT_TAIL_EPSILON);
            let response = match req.method {
                EvalMethod::Exact => {
                    let value = match &req.costs {
                        None => expected_profit_exact(&req.query, tail)?,
                        Some(costs) => expected_profit_general(&req.query, costs, tail)?,
                    };
                    EvaluateResponse {
                        value,
                        std_error: None,
                    }
                }
                EvalMethod::Mc => {
                    if req.costs.is_some() {
                        anyhow::bail!("Monte Carlo evaluation does not support cost structures");
                    }
                    let mut rng = ChaCha12Rng::seed_from_u64(req.seed.unwrap_or(0));
                    let (value, std_error) =
                        expected_profit_mc(&req.query, req.n_samples.unwrap_or(100_000), &mut rng)?;
                    EvaluateResponse {
                        value,
                        std_error: Some(std_error),
                    }
                }
            };
            println!("{}", serde_json::to_string_pretty(&response)?);
        }
        Command::Optimize {
            config,
            seed,
            threads,
        } => {
            init_threads(threads);
            let req: OptimizeRequest = read_request(&config)?;
            let attractions = req
                .attractions
                .unwrap_or_else(|| req.instance.attractions().to_vec());
            let profits = req
                .profits
                .unwrap_or_else(|| req.instance.unit_profits().to_vec());
            let response = match &req.oracle {
                OracleSpec::Exact => {
                    let (decision, value) = solve_exact(
                        &req.instance,
                        &attractions,
                        &profits,
                        req.ordering_costs.as_deref(),
                    )?;
                    let evaluations =
                        mnli_core::optimize::enumerate_feasible(&req.instance)?.len();
                    OptimizeResponse {
                        decision,
                        value,
                        evaluations,
                    }
                }
                spec @ OracleSpec::Approximate { .. } => {
                    if req.ordering_costs.is_some() {
                        anyhow::bail!("the approximate oracle does not support ordering costs");
                    }
                    let mut rng =
                        ChaCha12Rng::seed_from_u64(seed.or(req.seed).unwrap_or(0));
                    let outcome =
                        solve_eps_delta(&req.instance, &attractions, &profits, spec, &mut rng)?;
                    OptimizeResponse {
                        decision: outcome.decision,
                        value: outcome.value,
                        evaluations: outcome.evaluations,
                    }
                }
            };
            println!("{}", serde_json::to_string_pretty(&response)?);
        }
    }
    Ok(())
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core_err) = cause.downcast_ref::<mnli_core::Error>() {
            if core_err.is_resource_limit() {
                return 3;
            }
            // bad arguments reaching the toolkit are configuration errors
            return 2;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some()
            || cause.downcast_ref::<std::io::Error>().is_some()
        {
            return 2;
        }
    }
    let text = err.to_string();
    if text.contains("config") || text.contains("mode") || text.contains("must") {
        return 2;
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
