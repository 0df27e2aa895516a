//! Learning the optimal risk-averse value from one exploration trajectory.
//!
//! Each outer iteration fits a surrogate `f(i, k, q)` for the partial-expectation
//! curves of `C + γ v̂(X')` on a q-grid, then recomputes `(v̂, π̂)` by minimizing the
//! Kusuoka risk over randomized actions with the surrogate in place of the model.

mod approx;
mod bound;
mod estimate;
mod estp;
mod grid;
mod mlp;
mod table;

pub use approx::{value_policy_update, Backend, FitStats, GApproximator, QDescent};
pub use bound::{theorem_bound, BoundParams, BoundResult};
pub use estimate::{mle_transition, EstimatedTransitions};
pub use estp::{
    exploration_epsilon, lemma_bound, lemma_estp_suite, EstpReport, LemmaBound, MAX_WINDOW,
};
pub use grid::QGrid;
pub use mlp::{fit_g_mlp, monotonicity_violation, Activation, Mlp, MlpHyper, Optimizer};
pub use table::{fit_g_table, fit_table_raw, isotonic_nonincreasing};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Dataset, MdpModel, SimplexPolicy};
use crate::oracle::{SimplexSearch, ValueFunction};
use crate::risk::RiskSpec;
use crate::rng::derive_seed;

/// What the learner knows about the problem besides the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub c_max: f64,
}

impl ProblemMeta {
    pub fn from_model(model: &MdpModel) -> Self {
        ProblemMeta {
            n_states: model.n_states,
            n_actions: model.n_actions,
            gamma: model.gamma,
            c_max: model.c_max(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(Error::validation(
                "problem needs at least one state and one action",
            ));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::validation(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.c_max > 0.0 && self.c_max.is_finite()) {
            return Err(Error::validation(format!(
                "c_max must be positive, got {}",
                self.c_max
            )));
        }
        Ok(())
    }

    /// `c_max / (1 - γ)`, the range of every value function.
    pub fn value_bound(&self) -> f64 {
        self.c_max / (1.0 - self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Table,
    Mlp,
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(BackendKind::Table),
            "mlp" => Ok(BackendKind::Mlp),
            _ => Err(Error::validation(format!(
                "unknown backend {s:?}; expected table or mlp"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub backend: BackendKind,
    pub mlp: MlpHyper,
    pub search: SimplexSearch,
    pub q_descent: QDescent,
    pub stop_tol: f64,
    pub max_outer: usize,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            backend: BackendKind::Table,
            mlp: MlpHyper::default(),
            search: SimplexSearch::default(),
            q_descent: QDescent::default(),
            stop_tol: 1e-4,
            max_outer: 50,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        self.search.validate()?;
        self.mlp.validate()?;
        if !(self.stop_tol > 0.0 && self.stop_tol.is_finite()) {
            return Err(Error::validation("stop_tol must be positive"));
        }
        if self.max_outer == 0 {
            return Err(Error::validation("max_outer must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    /// `‖v̂_{n+1} - v̂_n‖_∞`.
    pub delta: f64,
    pub fit: FitStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedSolution {
    pub v_hat: ValueFunction,
    pub pi_hat: SimplexPolicy,
    pub approximator: GApproximator,
    pub history: Vec<HistoryEntry>,
    pub converged: bool,
    pub meta: ProblemMeta,
    pub config: LearnerConfig,
    pub dataset_hash: String,
    pub risk_spec_hash: String,
}

impl LearnedSolution {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sol: LearnedSolution = serde_json::from_str(s)?;
        sol.approximator.validate()?;
        sol.pi_hat.validate()?;
        let cap = sol.meta.value_bound();
        if sol.v_hat.len() != sol.meta.n_states
            || sol.v_hat.0.iter().any(|v| !(0.0..=cap).contains(v))
        {
            return Err(Error::validation(
                "stored value estimate is outside [0, c_max/(1-gamma)]",
            ));
        }
        Ok(sol)
    }
}

/// Alternates fitting and value/policy updates from `v̂ ≡ 0` until successive values differ
/// by less than `stop_tol` or `max_outer` iterations have run.
///
/// Running out of iterations is reported through `converged`, not as an error.
pub fn run_algorithm(
    dataset: &Dataset,
    spec: &RiskSpec,
    grid: &QGrid,
    meta: &ProblemMeta,
    config: &LearnerConfig,
) -> Result<LearnedSolution> {
    meta.validate()?;
    config.validate()?;
    dataset.validate()?;
    let cap = meta.value_bound();
    let mut search = config.search.clone();
    search.seed = derive_seed(config.seed, &[crate::rng::stream::LEARNER_SEARCH]);
    let descent = QDescent {
        seed: derive_seed(config.seed, &[crate::rng::stream::LEARNER_SEARCH, 1]),
        ..config.q_descent
    };

    let mut v = ValueFunction::zeros(meta.n_states);
    let mut history = Vec::new();
    let mut last: Option<(GApproximator, SimplexPolicy)> = None;
    let mut converged = false;
    for n in 1..=config.max_outer {
        let (approx, fit) = match config.backend {
            BackendKind::Table => fit_g_table(dataset, &v.0, grid, meta)?,
            BackendKind::Mlp => {
                let warm = match (&last, config.mlp.warm_start) {
                    (
                        Some((
                            GApproximator {
                                backend: Backend::Mlp(net),
                                ..
                            },
                            _,
                        )),
                        true,
                    ) => Some(net),
                    _ => None,
                };
                let seed = derive_seed(config.seed, &[crate::rng::stream::LEARNER, n as u64]);
                fit_g_mlp(dataset, &v.0, grid, meta, &config.mlp, seed, warm)?
            }
        };
        let (v_new, pi) = value_policy_update(&approx, spec, &search, cap, &descent)?;
        let delta = v_new.sup_distance(&v);
        log::debug!(
            "outer iteration {n}: delta {delta:.3e}, fit loss {:.3e}",
            fit.data_loss
        );
        history.push(HistoryEntry {
            iteration: n,
            delta,
            fit,
        });
        v = v_new;
        last = Some((approx, pi));
        if delta < config.stop_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "learner stopped after {} outer iterations without meeting stop_tol",
            config.max_outer
        );
    }
    let (approximator, pi_hat) = last.expect("max_outer >= 1");
    Ok(LearnedSolution {
        v_hat: v,
        pi_hat,
        approximator,
        history,
        converged,
        meta: *meta,
        config: config.clone(),
        dataset_hash: dataset.hash(),
        risk_spec_hash: spec.hash(),
    })
}
