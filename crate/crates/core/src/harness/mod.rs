//! Experiment pipeline: per replica, generate a model, explore it, solve it exactly,
//! run the learner on the trajectory and compare the two.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::{json_hash, sha256_hex};
use crate::learner::{run_algorithm, LearnedSolution, LearnerConfig, ProblemMeta, QGrid};
use crate::mdp::{gen_random_mdp, simulate, CostKind, Dataset, MdpModel, SimplexPolicy};
use crate::oracle::{ExactSolver, OracleSolution, SimplexSearch, ValueFunction};
use crate::risk::{NormalizationNote, RiskSpec, BENCHMARK_RISK_JSON};
use crate::rng::{derive_seed, stream};

/// Denominator floor of the relative error.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// Truncation error allowed when evaluating a policy's infinite-horizon nested risk.
pub const RISK_GAP_TRUNCATION: f64 = 1e-10;

/// Environment variable capping the number of replicas run concurrently.
pub const THREADS_ENV: &str = "RISKDP_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExplorationSpec {
    Uniform,
    /// Per-state Dirichlet mix keeping every action at probability `floor` or more.
    Random {
        floor: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QMaxMode {
    /// Grid on `[0, c_max]`.
    CMax,
    /// Grid on `[0, c_max / (1 - γ)]`.
    ValueBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub c_max: f64,
    pub cost_kind: CostKind,
    /// Fixed model shared by all replicas; replaces generation when set.
    pub model_path: Option<PathBuf>,
    /// Risk spec file; the built-in benchmark listing when unset.
    pub risk_spec_path: Option<PathBuf>,
    pub normalize: bool,
    pub exploration: ExplorationSpec,
    pub t_max: usize,
    pub x0: usize,
    pub m_grid: usize,
    pub q_max: QMaxMode,
    pub learner: LearnerConfig,
    pub oracle_search: SimplexSearch,
    pub oracle_tol: f64,
    pub oracle_max_iter: usize,
    pub replicas: usize,
    pub master_seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_states: 4,
            n_actions: 4,
            gamma: 0.3,
            c_max: 1.0,
            cost_kind: CostKind::Beta,
            model_path: None,
            risk_spec_path: None,
            normalize: false,
            exploration: ExplorationSpec::Random { floor: 0.05 },
            t_max: 10_000,
            x0: 0,
            m_grid: 100,
            q_max: QMaxMode::CMax,
            learner: LearnerConfig::default(),
            oracle_search: SimplexSearch::default(),
            oracle_tol: 1e-10,
            oracle_max_iter: 1000,
            replicas: 10,
            master_seed: 0,
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::validation("replicas must be at least 1"));
        }
        if self.t_max < 2 {
            return Err(Error::validation("t_max must be at least 2"));
        }
        if self.m_grid < 2 {
            return Err(Error::validation("m_grid must be at least 2"));
        }
        if !(self.oracle_tol > 0.0) {
            return Err(Error::validation("oracle_tol must be positive"));
        }
        for p in [&self.model_path, &self.risk_spec_path]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return Err(Error::validation(format!(
                    "path {} does not exist",
                    p.display()
                )));
            }
        }
        if let ExplorationSpec::Random { floor } = self.exploration {
            if !(floor >= 0.0 && floor * self.n_actions as f64 <= 1.0) {
                return Err(Error::validation(format!(
                    "exploration floor {floor} infeasible"
                )));
            }
        }
        self.learner.validate()?;
        self.oracle_search.validate()
    }

    pub fn hash(&self) -> String {
        json_hash(self)
    }

    /// Loads the risk spec, normalizing only when the config allows it.
    pub fn load_risk_spec(&self) -> Result<(RiskSpec, Vec<NormalizationNote>)> {
        match &self.risk_spec_path {
            Some(p) => RiskSpec::from_json_str(&fs::read_to_string(p)?, self.normalize),
            None => RiskSpec::from_json_str(BENCHMARK_RISK_JSON, self.normalize),
        }
    }

    pub fn replica_seed(&self, replica: usize) -> u64 {
        derive_seed(self.master_seed, &[stream::REPLICA, replica as u64])
    }
}

/// Everything about a replica that does not depend on how much data the learner sees.
#[derive(Debug, Clone)]
pub struct PreparedReplica {
    pub replica: usize,
    pub seed: u64,
    pub model: MdpModel,
    pub exploration: SimplexPolicy,
    pub dataset: Dataset,
    pub oracle: OracleSolution,
}

/// Generates (or loads) the model, simulates `t_max` steps and solves the model exactly.
pub fn prepare_replica(
    cfg: &ExperimentConfig,
    spec: &RiskSpec,
    replica: usize,
    t_max: usize,
) -> Result<PreparedReplica> {
    let seed = cfg.replica_seed(replica);
    let model = match &cfg.model_path {
        Some(p) => MdpModel::from_json(&fs::read_to_string(p)?)?,
        None => gen_random_mdp(
            cfg.n_states,
            cfg.n_actions,
            cfg.cost_kind,
            cfg.c_max,
            cfg.gamma,
            derive_seed(seed, &[stream::MODEL]),
        )?,
    };
    let exploration = match cfg.exploration {
        ExplorationSpec::Uniform => SimplexPolicy::uniform(model.n_states, model.n_actions),
        ExplorationSpec::Random { floor } => SimplexPolicy::random_exploration(
            model.n_states,
            model.n_actions,
            floor,
            derive_seed(seed, &[stream::EXPLORATION_POLICY]),
        )?,
    };
    let dataset = simulate(
        &model,
        &exploration,
        t_max,
        cfg.x0,
        derive_seed(seed, &[stream::TRAJECTORY]),
    )?;
    let search = cfg
        .oracle_search
        .clone()
        .with_seed(derive_seed(seed, &[stream::ORACLE_SEARCH]));
    let oracle = ExactSolver::new(&model, spec)?.value_iteration(
        cfg.oracle_tol,
        cfg.oracle_max_iter,
        &search,
    )?;
    Ok(PreparedReplica {
        replica,
        seed,
        model,
        exploration,
        dataset,
        oracle,
    })
}

/// Grid for a model under the configured range mode.
pub fn grid_for(cfg: &ExperimentConfig, meta: &ProblemMeta) -> Result<QGrid> {
    let q_max = match cfg.q_max {
        QMaxMode::CMax => meta.c_max,
        QMaxMode::ValueBound => meta.value_bound(),
    };
    QGrid::uniform(cfg.m_grid, q_max)
}

/// Smallest horizon whose truncation error `γ^H c_max / (1 - γ)` is below `RISK_GAP_TRUNCATION`.
pub fn risk_gap_horizon(gamma: f64, c_max: f64) -> usize {
    let bound = c_max / (1.0 - gamma);
    let mut h = 0usize;
    let mut tail = bound;
    while tail >= RISK_GAP_TRUNCATION {
        tail *= gamma;
        h += 1;
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaResult {
    pub v_hat: Vec<f64>,
    pub v_star: Vec<f64>,
    pub rel_err: Vec<f64>,
    /// Nested risk of the learned policy minus the optimal value, per state.
    pub risk_gap: Vec<f64>,
    pub pi_hat: SimplexPolicy,
    pub pi_star: SimplexPolicy,
    pub learner_converged: bool,
    pub learner_iterations: usize,
    pub oracle_iterations: usize,
    pub oracle_residual: f64,
    pub unvisited_pairs: usize,
}

pub fn relative_errors(v_hat: &[f64], v_star: &[f64]) -> Vec<f64> {
    v_hat
        .iter()
        .zip(v_star)
        .map(|(a, b)| (a - b).abs() / b.max(REL_ERR_FLOOR))
        .collect()
}

/// Runs the learner on the first `t_max - 1` transitions of a prepared replica.
pub fn learn_replica(
    cfg: &ExperimentConfig,
    spec: &RiskSpec,
    prepared: &PreparedReplica,
    t_max: usize,
) -> Result<(ReplicaResult, LearnedSolution)> {
    let model = &prepared.model;
    let meta = ProblemMeta::from_model(model);
    let grid = grid_for(cfg, &meta)?;
    let data = prepared.dataset.prefix(t_max.saturating_sub(1));
    let learner_cfg = LearnerConfig {
        seed: derive_seed(prepared.seed, &[stream::LEARNER]),
        ..cfg.learner.clone()
    };
    let learned = run_algorithm(&data, spec, &grid, &meta, &learner_cfg)?;
    let solver = ExactSolver::new(model, spec)?;
    let horizon = risk_gap_horizon(model.gamma, model.c_max());
    let achieved = solver.nested_risk_eval(&learned.pi_hat, horizon)?;
    let v_star = &prepared.oracle.v_star.0;
    let unvisited = data
        .pair_counts()
        .iter()
        .flatten()
        .filter(|&&c| c == 0)
        .count();
    let result = ReplicaResult {
        rel_err: relative_errors(&learned.v_hat.0, v_star),
        risk_gap: achieved.0.iter().zip(v_star).map(|(a, b)| a - b).collect(),
        v_hat: learned.v_hat.0.clone(),
        v_star: v_star.clone(),
        pi_hat: learned.pi_hat.clone(),
        pi_star: prepared.oracle.pi_star.clone(),
        learner_converged: learned.converged,
        learner_iterations: learned.history.len(),
        oracle_iterations: prepared.oracle.iterations,
        oracle_residual: prepared.oracle.residual,
        unvisited_pairs: unvisited,
    };
    Ok((result, learned))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ReplicaStatus {
    Ok(Box<ReplicaResult>),
    Failed { error: String, numerical: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaOutcome {
    pub replica: usize,
    pub seed: u64,
    pub model_hash: Option<String>,
    pub dataset_hash: Option<String>,
    pub outcome: ReplicaStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub n_ok: usize,
    pub n_failed: usize,
    pub median_rel_err: Option<f64>,
    pub max_rel_err: Option<f64>,
    pub max_risk_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub master_seed: u64,
    pub risk_spec_hash: String,
    pub normalization_notes: Vec<NormalizationNote>,
    pub rel_err_floor: f64,
    pub risk_gap_horizon_tolerance: f64,
    pub replicas: Vec<ReplicaOutcome>,
    pub summary: ErrorSummary,
}

impl ErrorReport {
    /// Every per-state relative error of the successful replicas, in replica order.
    pub fn all_rel_errors(&self) -> Vec<f64> {
        self.replicas
            .iter()
            .filter_map(|r| match &r.outcome {
                ReplicaStatus::Ok(res) => Some(res.rel_err.clone()),
                ReplicaStatus::Failed { .. } => None,
            })
            .flatten()
            .collect()
    }

    /// `replica,state,v_hat,v_star,rel_err` rows for successful replicas.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["replica", "state", "v_hat", "v_star", "rel_err"])?;
        for r in &self.replicas {
            if let ReplicaStatus::Ok(res) = &r.outcome {
                for s in 0..res.v_hat.len() {
                    w.write_record([
                        r.replica.to_string(),
                        s.to_string(),
                        format!("{:.16e}", res.v_hat[s]),
                        format!("{:.16e}", res.v_star[s]),
                        format!("{:.16e}", res.rel_err[s]),
                    ])?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Summary file written next to the CSV; ties the CSV bytes to the config that produced them.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryFile<'a> {
    pub csv_file: &'a str,
    pub csv_sha256: String,
    #[serde(flatten)]
    pub report: &'a ErrorReport,
}

pub const CSV_NAME: &str = "errors.csv";
pub const SUMMARY_NAME: &str = "summary.json";

/// Writes `errors.csv` and `summary.json` into `dir`.
pub fn write_report(report: &ErrorReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv = report.to_csv_string()?;
    let csv_path = dir.join(CSV_NAME);
    fs::write(&csv_path, &csv)?;
    let summary = SummaryFile {
        csv_file: CSV_NAME,
        csv_sha256: sha256_hex(csv.as_bytes()),
        report,
    };
    let summary_path = dir.join(SUMMARY_NAME);
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    Ok((csv_path, summary_path))
}

fn median(xs: &mut [f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    })
}

/// Number of worker threads for replicas: `RISKDP_THREADS` when set and positive.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n: &usize| n > 0)
}

/// Runs every replica, collecting per-replica failures instead of aborting.
/// Writes the CSV and summary when `out_dir` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ErrorReport> {
    cfg.validate()?;
    let (spec, notes) = cfg.load_risk_spec()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::validation(format!("cannot build thread pool: {e}")))?;
    let replicas: Vec<ReplicaOutcome> = pool.install(|| {
        (0..cfg.replicas)
            .into_par_iter()
            .map(|r| {
                let seed = cfg.replica_seed(r);
                let mut out = ReplicaOutcome {
                    replica: r,
                    seed,
                    model_hash: None,
                    dataset_hash: None,
                    outcome: ReplicaStatus::Failed {
                        error: String::new(),
                        numerical: false,
                    },
                };
                let res = prepare_replica(cfg, &spec, r, cfg.t_max).and_then(|p| {
                    out.model_hash = Some(p.model.hash());
                    out.dataset_hash = Some(p.dataset.hash());
                    learn_replica(cfg, &spec, &p, cfg.t_max)
                });
                out.outcome = match res {
                    Ok((result, _)) => ReplicaStatus::Ok(Box::new(result)),
                    Err(e) => {
                        log::error!("replica {r} failed: {e}");
                        ReplicaStatus::Failed {
                            numerical: e.is_numerical(),
                            error: e.to_string(),
                        }
                    }
                };
                out
            })
            .collect()
    });

    let oks: Vec<&ReplicaResult> = replicas
        .iter()
        .filter_map(|r| match &r.outcome {
            ReplicaStatus::Ok(res) => Some(res.as_ref()),
            ReplicaStatus::Failed { .. } => None,
        })
        .collect();
    let mut errs: Vec<f64> = oks.iter().flat_map(|r| r.rel_err.iter().copied()).collect();
    let summary = ErrorSummary {
        n_ok: oks.len(),
        n_failed: replicas.len() - oks.len(),
        max_rel_err: errs.iter().copied().reduce(f64::max),
        median_rel_err: median(&mut errs),
        max_risk_gap: oks
            .iter()
            .flat_map(|r| r.risk_gap.iter().copied())
            .reduce(f64::max),
    };
    let report = ErrorReport {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        master_seed: cfg.master_seed,
        risk_spec_hash: spec.hash(),
        normalization_notes: notes,
        rel_err_floor: REL_ERR_FLOOR,
        risk_gap_horizon_tolerance: RISK_GAP_TRUNCATION,
        replicas,
        summary,
    };
    if let Some(dir) = &cfg.out_dir {
        write_report(&report, dir)?;
    }
    Ok(report)
}

/// Compares a learned solution with the exact one for the same model and risk spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub v_hat: Vec<f64>,
    pub v_star: Vec<f64>,
    pub rel_err: Vec<f64>,
    pub risk_gap: Vec<f64>,
    pub risk_gap_horizon: usize,
    pub rel_err_floor: f64,
    pub model_hash: String,
    pub risk_spec_hash: String,
}

pub fn evaluate(
    model: &MdpModel,
    spec: &RiskSpec,
    learned: &LearnedSolution,
    oracle: &OracleSolution,
) -> Result<EvalReport> {
    if oracle.model_hash != model.hash() || oracle.risk_spec_hash != spec.hash() {
        return Err(Error::validation(
            "oracle solution was computed for a different model or risk spec",
        ));
    }
    if learned.v_hat.len() != model.n_states {
        return Err(Error::validation(
            "learned solution does not match the model's state count",
        ));
    }
    let horizon = risk_gap_horizon(model.gamma, model.c_max());
    let achieved: ValueFunction =
        ExactSolver::new(model, spec)?.nested_risk_eval(&learned.pi_hat, horizon)?;
    Ok(EvalReport {
        rel_err: relative_errors(&learned.v_hat.0, &oracle.v_star.0),
        risk_gap: achieved
            .0
            .iter()
            .zip(&oracle.v_star.0)
            .map(|(a, b)| a - b)
            .collect(),
        v_hat: learned.v_hat.0.clone(),
        v_star: oracle.v_star.0.clone(),
        risk_gap_horizon: horizon,
        rel_err_floor: REL_ERR_FLOOR,
        model_hash: model.hash(),
        risk_spec_hash: spec.hash(),
    })
}

/// Sidecar written next to every CLI output: how to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
    /// SHA-256 of each input file, by path.
    pub inputs: Vec<(String, String)>,
    pub output_sha256: String,
}

impl Provenance {
    pub fn sidecar_path(output: &Path) -> PathBuf {
        let mut name = output
            .file_name()
            .map(|n| n.to_os_string())
            .unwrap_or_default();
        name.push(".meta.json");
        output.with_file_name(name)
    }

    /// Writes `output` and its sidecar.
    pub fn write_with(&self, output: &Path, bytes: &[u8]) -> Result<()> {
        if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        fs::write(output, bytes)?;
        let meta = Provenance {
            output_sha256: sha256_hex(bytes),
            ..self.clone()
        };
        fs::write(
            Self::sidecar_path(output),
            serde_json::to_string_pretty(&meta)?,
        )?;
        Ok(())
    }
}
