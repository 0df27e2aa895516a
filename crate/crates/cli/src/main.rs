//! `riskdp`: generate models, explore them, solve them exactly, learn from trajectories
//! and run the full comparison experiment.
//!
//! Exit status: 0 on success, 1 on invalid input or usage, 2 on numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use riskdp_core::harness::{self, ExperimentConfig, Provenance, QMaxMode};
use riskdp_core::learner::{self, BoundParams, LearnedSolution, LearnerConfig, ProblemMeta};
use riskdp_core::mdp::{self, CostKind, Dataset, MdpModel, SimplexPolicy};
use riskdp_core::oracle::{ExactSolver, OracleSolution, SimplexSearch};
use riskdp_core::risk::{RiskSpec, BENCHMARK_RISK_JSON};
use riskdp_core::rng::{derive_seed, stream};
use riskdp_core::{hashing, Error, Result};

#[derive(Parser)]
#[command(
    name = "riskdp",
    version,
    about = "Risk-averse MDPs: exact solver and distributional learner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Clone)]
struct Common {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (a directory for `experiment`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with this subcommand's parameters; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random model.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        states: Option<usize>,
        #[arg(long)]
        actions: Option<usize>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        c_max: Option<f64>,
        /// `deterministic` or `beta`.
        #[arg(long)]
        cost_kind: Option<String>,
    },
    /// Simulate one exploration trajectory of a model.
    Explore {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        /// `uniform` or `random`.
        #[arg(long)]
        policy: Option<String>,
        /// Minimum action probability of the random policy.
        #[arg(long)]
        floor: Option<f64>,
        #[arg(long)]
        t_max: Option<usize>,
        #[arg(long)]
        x0: Option<usize>,
    },
    /// Solve a model exactly by value iteration.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        risk: RiskArgs,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        grid_step: Option<f64>,
        #[arg(long)]
        n_random: Option<usize>,
    },
    /// Learn value and policy from a trajectory.
    Train {
        #[command(flatten)]
        common: Common,
        /// Trajectory CSV.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Model file; only its dimensions, discount and cost bound are read.
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        risk: RiskArgs,
        /// `table` or `mlp`.
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        m_grid: Option<usize>,
        /// `c_max` or `value_bound`.
        #[arg(long)]
        q_max: Option<String>,
        #[arg(long)]
        stop_tol: Option<f64>,
        #[arg(long)]
        max_outer: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Compare a learned solution with the exact one.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        risk: RiskArgs,
        #[arg(long)]
        learned: Option<PathBuf>,
        #[arg(long)]
        oracle: Option<PathBuf>,
    },
    /// Evaluate the finite-sample probability and error bounds.
    Bound {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_states: Option<usize>,
        #[arg(long)]
        n_actions: Option<usize>,
        #[arg(long)]
        epsilon_e: Option<f64>,
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long)]
        t_max: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        epsilon_theta: Option<f64>,
        #[arg(long)]
        epsilon_v: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        c_max: Option<f64>,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        v0_gap: Option<f64>,
    },
    /// Run the replicated learner-versus-oracle experiment.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        t_max: Option<usize>,
        #[arg(long)]
        normalize: bool,
    },
}

#[derive(Args, Clone)]
struct RiskArgs {
    /// Risk spec JSON; the built-in benchmark listing when omitted.
    #[arg(long)]
    risk: Option<PathBuf>,
    /// Rescale measures whose weights do not sum to one, recording the factor.
    #[arg(long)]
    normalize: bool,
}

impl RiskArgs {
    fn overrides(&self) -> Value {
        json!({ "risk": self.risk, "normalize": self.normalize.then_some(true) })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct GenParams {
    states: usize,
    actions: usize,
    gamma: f64,
    c_max: f64,
    cost_kind: CostKind,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            states: 4,
            actions: 4,
            gamma: 0.3,
            c_max: 1.0,
            cost_kind: CostKind::Beta,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PolicyKind {
    Uniform,
    Random,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct ExploreParams {
    model: Option<PathBuf>,
    policy: PolicyKind,
    floor: f64,
    t_max: usize,
    x0: usize,
}

impl Default for ExploreParams {
    fn default() -> Self {
        ExploreParams {
            model: None,
            policy: PolicyKind::Random,
            floor: 0.05,
            t_max: 10_000,
            x0: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct SolveParams {
    model: Option<PathBuf>,
    risk: Option<PathBuf>,
    normalize: bool,
    tol: f64,
    max_iter: usize,
    search: SimplexSearch,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            model: None,
            risk: None,
            normalize: false,
            tol: 1e-10,
            max_iter: 1000,
            search: SimplexSearch::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct TrainParams {
    data: Option<PathBuf>,
    model: Option<PathBuf>,
    risk: Option<PathBuf>,
    normalize: bool,
    m_grid: usize,
    q_max: QMaxMode,
    learner: LearnerConfig,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            data: None,
            model: None,
            risk: None,
            normalize: false,
            m_grid: 100,
            q_max: QMaxMode::CMax,
            learner: LearnerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct EvalParams {
    model: Option<PathBuf>,
    risk: Option<PathBuf>,
    normalize: bool,
    learned: Option<PathBuf>,
    oracle: Option<PathBuf>,
}

/// Recursively overlays non-null values of `over` onto `base`.
fn overlay(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                if v.is_null() {
                    continue;
                }
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) if !o.is_null() => *b = o,
        _ => {}
    }
}

/// Defaults, then the `--config` file, then explicit flags.
fn resolve<T: Serialize + DeserializeOwned + Default>(
    config: &Option<PathBuf>,
    flags: Value,
) -> Result<(T, Value)> {
    let mut merged = serde_json::to_value(T::default())?;
    if let Some(p) = config {
        let file: Value = serde_json::from_str(&read(p)?)?;
        if !file.is_object() {
            return Err(Error::Validation(format!(
                "config {} must be a JSON object",
                p.display()
            )));
        }
        overlay(&mut merged, file);
    }
    overlay(&mut merged, flags);
    let params: T = serde_json::from_value(merged.clone())
        .map_err(|e| Error::Validation(format!("invalid parameters: {e}")))?;
    Ok((params, merged))
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p)
        .map_err(|e| Error::Validation(format!("cannot read {}: {e}", p.display())))
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf> {
    p.as_ref()
        .ok_or_else(|| Error::Validation(format!("missing required --{flag}")))
}

fn load_risk(path: &Option<PathBuf>, normalize: bool) -> Result<RiskSpec> {
    let text = match path {
        Some(p) => read(p)?,
        None => BENCHMARK_RISK_JSON.to_string(),
    };
    let (spec, notes) = RiskSpec::from_json_str(&text, normalize)?;
    for n in &notes {
        eprintln!(
            "note: measure {} rescaled from total weight {}",
            n.measure_index, n.original_sum
        );
    }
    Ok(spec)
}

fn input_hashes(paths: &[&Option<PathBuf>]) -> Result<Vec<(String, String)>> {
    paths
        .iter()
        .filter_map(|p| p.as_ref())
        .map(|p| {
            Ok((
                p.display().to_string(),
                hashing::sha256_hex(read(p)?.as_bytes()),
            ))
        })
        .collect()
}

struct Output<'a> {
    command: &'a str,
    seed: u64,
    config: Value,
    inputs: Vec<(String, String)>,
}

impl Output<'_> {
    /// Writes to `--out` with a provenance sidecar, or to stdout without one.
    fn emit(self, out: &Option<PathBuf>, bytes: &[u8]) -> Result<()> {
        match out {
            Some(path) => {
                let prov = Provenance {
                    command: self.command.to_string(),
                    seed: self.seed,
                    config_hash: hashing::json_hash(&self.config),
                    config: self.config,
                    inputs: self.inputs,
                    output_sha256: String::new(),
                };
                prov.write_with(path, bytes)
            }
            None => {
                print!("{}", String::from_utf8_lossy(bytes));
                Ok(())
            }
        }
    }
}

/// Returns the exit status on success paths that still signal failure.
fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Gen {
            common,
            states,
            actions,
            gamma,
            c_max,
            cost_kind,
        } => {
            let flags = json!({ "states": states, "actions": actions, "gamma": gamma, "c_max": c_max, "cost_kind": cost_kind });
            let (p, cfg): (GenParams, _) = resolve(&common.config, flags)?;
            let seed = common.seed.unwrap_or(0);
            let model =
                mdp::gen_random_mdp(p.states, p.actions, p.cost_kind, p.c_max, p.gamma, seed)?;
            let out = Output {
                command: "gen",
                seed,
                config: cfg,
                inputs: vec![],
            };
            out.emit(&common.out, model.to_json()?.as_bytes())?;
            Ok(0)
        }
        Command::Explore {
            common,
            model,
            policy,
            floor,
            t_max,
            x0,
        } => {
            let flags = json!({ "model": model, "policy": policy, "floor": floor, "t_max": t_max, "x0": x0 });
            let (p, cfg): (ExploreParams, _) = resolve(&common.config, flags)?;
            let seed = common.seed.unwrap_or(0);
            let model = MdpModel::from_json(&read(required(&p.model, "model")?)?)?;
            let pi = match p.policy {
                PolicyKind::Uniform => SimplexPolicy::uniform(model.n_states, model.n_actions),
                PolicyKind::Random => SimplexPolicy::random_exploration(
                    model.n_states,
                    model.n_actions,
                    p.floor,
                    derive_seed(seed, &[stream::EXPLORATION_POLICY]),
                )?,
            };
            let data = mdp::simulate(
                &model,
                &pi,
                p.t_max,
                p.x0,
                derive_seed(seed, &[stream::TRAJECTORY]),
            )?;
            let coverage = mdp::check_coverage(&data, model.n_states, model.n_actions, 1)?;
            if !coverage.is_covered() {
                log::warn!(
                    "{} state-action pairs never visited",
                    coverage.flagged.len()
                );
            }
            let out = Output {
                command: "explore",
                seed,
                config: cfg,
                inputs: input_hashes(&[&p.model])?,
            };
            out.emit(&common.out, data.to_csv_string().as_bytes())?;
            Ok(0)
        }
        Command::Solve {
            common,
            model,
            risk,
            tol,
            max_iter,
            grid_step,
            n_random,
        } => {
            let mut flags = json!({ "model": model, "tol": tol, "max_iter": max_iter,
                "search": { "grid_step": grid_step, "n_random": n_random } });
            overlay(&mut flags, risk.overrides());
            let (p, cfg): (SolveParams, _) = resolve(&common.config, flags)?;
            let seed = common.seed.unwrap_or(0);
            let model = MdpModel::from_json(&read(required(&p.model, "model")?)?)?;
            let spec = load_risk(&p.risk, p.normalize)?;
            let search = p
                .search
                .clone()
                .with_seed(derive_seed(seed, &[stream::ORACLE_SEARCH]));
            let sol =
                ExactSolver::new(&model, &spec)?.value_iteration(p.tol, p.max_iter, &search)?;
            let out = Output {
                command: "solve",
                seed,
                config: cfg,
                inputs: input_hashes(&[&p.model, &p.risk])?,
            };
            out.emit(&common.out, sol.to_json()?.as_bytes())?;
            Ok(0)
        }
        Command::Train {
            common,
            data,
            model,
            risk,
            backend,
            m_grid,
            q_max,
            stop_tol,
            max_outer,
            epochs,
            learning_rate,
            beta,
        } => {
            let mut flags = json!({ "data": data, "model": model, "m_grid": m_grid, "q_max": q_max,
                "learner": { "backend": backend, "stop_tol": stop_tol, "max_outer": max_outer,
                    "mlp": { "epochs": epochs, "learning_rate": learning_rate, "beta": beta } } });
            overlay(&mut flags, risk.overrides());
            let (p, cfg): (TrainParams, _) = resolve(&common.config, flags)?;
            let seed = common.seed.unwrap_or(0);
            let model: Value = serde_json::from_str(&read(required(&p.model, "model")?)?)?;
            let meta = meta_from_model_json(&model)?;
            let dataset = Dataset::read_csv(
                read(required(&p.data, "data")?)?.as_bytes(),
                meta.n_states,
                meta.n_actions,
            )?;
            let spec = load_risk(&p.risk, p.normalize)?;
            let exp = ExperimentConfig {
                m_grid: p.m_grid,
                q_max: p.q_max,
                ..Default::default()
            };
            let grid = harness::grid_for(&exp, &meta)?;
            let lcfg = LearnerConfig {
                seed,
                ..p.learner.clone()
            };
            let sol = learner::run_algorithm(&dataset, &spec, &grid, &meta, &lcfg)?;
            if !sol.converged {
                eprintln!(
                    "warning: learner stopped at max_outer = {} without meeting stop_tol",
                    lcfg.max_outer
                );
            }
            let inputs = input_hashes(&[&p.data, &p.model, &p.risk])?;
            let out = Output {
                command: "train",
                seed,
                config: cfg,
                inputs,
            };
            out.emit(&common.out, sol.to_json()?.as_bytes())?;
            Ok(0)
        }
        Command::Eval {
            common,
            model,
            risk,
            learned,
            oracle,
        } => {
            let mut flags = json!({ "model": model, "learned": learned, "oracle": oracle });
            overlay(&mut flags, risk.overrides());
            let (p, cfg): (EvalParams, _) = resolve(&common.config, flags)?;
            let model = MdpModel::from_json(&read(required(&p.model, "model")?)?)?;
            let spec = load_risk(&p.risk, p.normalize)?;
            let learned = LearnedSolution::from_json(&read(required(&p.learned, "learned")?)?)?;
            let oracle = OracleSolution::from_json(&read(required(&p.oracle, "oracle")?)?)?;
            let report = harness::evaluate(&model, &spec, &learned, &oracle)?;
            let inputs = input_hashes(&[&p.model, &p.risk, &p.learned, &p.oracle])?;
            let out = Output {
                command: "eval",
                seed: common.seed.unwrap_or(0),
                config: cfg,
                inputs,
            };
            out.emit(
                &common.out,
                serde_json::to_string_pretty(&report)?.as_bytes(),
            )?;
            Ok(0)
        }
        Command::Bound {
            common,
            n_states,
            n_actions,
            epsilon_e,
            ell,
            t_max,
            epsilon,
            b,
            epsilon_theta,
            epsilon_v,
            gamma,
            c_max,
            n,
            v0_gap,
        } => {
            let flags = json!({ "n_states": n_states, "n_actions": n_actions, "epsilon_e": epsilon_e, "ell": ell,
                "t_max": t_max, "epsilon": epsilon, "b": b, "epsilon_theta": epsilon_theta,
                "epsilon_v": epsilon_v, "gamma": gamma, "c_max": c_max, "n": n, "v0_gap": v0_gap });
            let mut merged = json!({});
            if let Some(p) = &common.config {
                overlay(&mut merged, serde_json::from_str(&read(p)?)?);
            }
            overlay(&mut merged, flags);
            let params: BoundParams = serde_json::from_value(merged.clone())
                .map_err(|e| Error::Validation(format!("bound parameters incomplete: {e}")))?;
            let r = learner::theorem_bound(&params)?;
            println!("prob_lower_bound {:.17e}", r.prob_lower_bound);
            println!("error_upper_bound {:.17e}", r.error_upper_bound);
            if common.out.is_some() {
                let out = Output {
                    command: "bound",
                    seed: common.seed.unwrap_or(0),
                    config: merged,
                    inputs: vec![],
                };
                out.emit(&common.out, serde_json::to_string_pretty(&r)?.as_bytes())?;
            }
            Ok(0)
        }
        Command::Experiment {
            common,
            replicas,
            t_max,
            normalize,
        } => {
            let flags = json!({ "replicas": replicas, "t_max": t_max, "master_seed": common.seed,
                "out_dir": common.out, "normalize": normalize.then_some(true) });
            let (cfg, _): (ExperimentConfig, _) = resolve(&common.config, flags)?;
            let report = harness::run_experiment(&cfg)?;
            let s = &report.summary;
            println!("replicas ok {} failed {}", s.n_ok, s.n_failed);
            if let (Some(med), Some(max)) = (s.median_rel_err, s.max_rel_err) {
                println!("relative error median {med:.6e} max {max:.6e}");
            }
            if cfg.out_dir.is_none() {
                print!("{}", report.to_csv_string()?);
            }
            if s.n_ok == 0 {
                let numerical = report.replicas.iter().all(|r| {
                    matches!(
                        r.outcome,
                        harness::ReplicaStatus::Failed {
                            numerical: true,
                            ..
                        }
                    )
                });
                eprintln!("error: every replica failed");
                return Ok(if numerical { 2 } else { 1 });
            }
            Ok(0)
        }
    }
}

/// Dimensions, discount and cost bound from a model file, ignoring everything else.
fn meta_from_model_json(v: &Value) -> Result<ProblemMeta> {
    let get_usize = |k: &str| v.get(k).and_then(Value::as_u64).map(|x| x as usize);
    let c_max = v
        .get("cost")
        .and_then(|c| c.get("c_max"))
        .and_then(Value::as_f64);
    let meta = match (
        get_usize("n_states"),
        get_usize("n_actions"),
        v.get("gamma").and_then(Value::as_f64),
        c_max,
    ) {
        (Some(n_states), Some(n_actions), Some(gamma), Some(c_max)) => ProblemMeta {
            n_states,
            n_actions,
            gamma,
            c_max,
        },
        _ => {
            return Err(Error::Validation(
                "model file lacks n_states, n_actions, gamma or cost.c_max".into(),
            ))
        }
    };
    meta.validate()?;
    Ok(meta)
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
