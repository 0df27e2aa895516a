//! Exact dynamic programming on a known model.
//!
//! The Bellman operator here evaluates, for each candidate action mix, the
//! Kusuoka risk of the one-step law `C(i, A, X') + gamma v(X')` directly on its
//! sorted atoms. That equals the curve-based form
//! `risk_from_gcurve(exact_g(..))` (see `tests/oracle_equivalence.rs`) and is
//! much cheaper inside a simplex search.

mod laws;
mod search;

pub use laws::{CostAtoms, BETA_DISCRETIZATION};
pub use search::{simplex_lattice, SimplexSearch};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{MdpModel, SimplexPolicy};
use crate::risk::{curve_from_distribution, DiscreteDistribution, GCurve, RiskSpec};
use laws::StateLaw;

/// One value per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueFunction(pub Vec<f64>);

impl ValueFunction {
    pub fn zeros(n: usize) -> Self {
        ValueFunction(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Self {
        ValueFunction(vec![c; n])
    }

    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if self.0.len() != n {
            return Err(Error::validation(format!(
                "value function has {} entries, model has {n} states",
                self.0.len()
            )));
        }
        if self.0.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("value function has non-finite entries"));
        }
        Ok(())
    }
}

/// Result of value iteration: `v_star` and a policy attaining `S v_star`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub v_star: ValueFunction,
    pub pi_star: SimplexPolicy,
    pub residual: f64,
    pub iterations: usize,
    pub tol: f64,
    pub search: SimplexSearch,
    /// `||v_{n+1} - v_n||` for every iteration.
    pub residual_history: Vec<f64>,
    pub risk_spec_hash: String,
    pub model_hash: String,
}

impl OracleSolution {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sol: OracleSolution = serde_json::from_str(s)?;
        sol.pi_star.validate()?;
        if sol.v_star.len() != sol.pi_star.n_states() {
            return Err(Error::validation(
                "oracle solution value and policy lengths differ",
            ));
        }
        if !(sol.residual <= sol.tol) {
            return Err(Error::validation(format!(
                "oracle solution residual {} exceeds its tolerance {}",
                sol.residual, sol.tol
            )));
        }
        Ok(sol)
    }
}

/// A model with its cost laws discretized, ready for repeated Bellman sweeps.
pub struct ExactSolver<'a> {
    model: &'a MdpModel,
    spec: &'a RiskSpec,
    costs: CostAtoms,
}

impl<'a> ExactSolver<'a> {
    pub fn new(model: &'a MdpModel, spec: &'a RiskSpec) -> Result<Self> {
        model.validate()?;
        Ok(ExactSolver {
            model,
            spec,
            costs: CostAtoms::new(model),
        })
    }

    pub fn model(&self) -> &MdpModel {
        self.model
    }

    /// The discrete law of `C(i, k, X') + gamma v(X')` mixed over `lambda`.
    pub fn one_step_law(
        &self,
        v: &ValueFunction,
        i: usize,
        lambda: &[f64],
    ) -> Result<DiscreteDistribution> {
        self.check_state_and_weights(v, i, lambda)?;
        let law = StateLaw::new(self.model, &self.costs, &v.0, i);
        let points: Vec<(f64, f64)> = law.mixture(lambda).filter(|(_, p)| *p > 0.0).collect();
        // Mixture masses carry rounding from the products; renormalize to an exact law.
        let total: f64 = points.iter().map(|p| p.1).sum();
        DiscreteDistribution::new(points.into_iter().map(|(z, p)| (z, p / total)).collect())
    }

    /// `q -> Σ_k λ_k Σ_j T^k_ij E[(C(i,k,j) + γ v(j) - q)_+]`.
    pub fn exact_g(&self, v: &ValueFunction, i: usize, lambda: &[f64]) -> Result<GCurve> {
        Ok(curve_from_distribution(&self.one_step_law(v, i, lambda)?))
    }

    fn check_state_and_weights(&self, v: &ValueFunction, i: usize, lambda: &[f64]) -> Result<()> {
        v.check_len(self.model.n_states)?;
        if i >= self.model.n_states {
            return Err(Error::validation(format!("state {i} out of range")));
        }
        SimplexPolicy::new(vec![lambda.to_vec()])
            .ok()
            .filter(|p| p.n_actions() == self.model.n_actions)
            .map(|_| ())
            .ok_or_else(|| {
                Error::validation(format!("{lambda:?} is not a point of the action simplex"))
            })
    }

    /// Risk of the one-step law at state `i` under action weights `lambda`.
    pub fn state_risk(&self, v: &ValueFunction, i: usize, lambda: &[f64]) -> Result<f64> {
        self.check_state_and_weights(v, i, lambda)?;
        Ok(StateLaw::new(self.model, &self.costs, &v.0, i).risk(lambda, self.spec))
    }

    /// `(S v, argmin policy)`.
    pub fn bellman_apply(
        &self,
        v: &ValueFunction,
        search: &SimplexSearch,
    ) -> Result<(ValueFunction, SimplexPolicy)> {
        v.check_len(self.model.n_states)?;
        search.validate()?;
        let mut values = Vec::with_capacity(self.model.n_states);
        let mut weights = Vec::with_capacity(self.model.n_states);
        for i in 0..self.model.n_states {
            let law = StateLaw::new(self.model, &self.costs, &v.0, i);
            let (val, w) = search.minimize(self.model.n_actions, i, |lambda| {
                law.risk(lambda, self.spec)
            });
            values.push(val);
            weights.push(w);
        }
        Ok((ValueFunction(values), SimplexPolicy { weights }))
    }

    /// One application of the fixed-policy operator `(R_π w)(i) = risk under π(i)`.
    pub fn policy_apply(&self, v: &ValueFunction, policy: &SimplexPolicy) -> Result<ValueFunction> {
        v.check_len(self.model.n_states)?;
        if policy.n_states() != self.model.n_states || policy.n_actions() != self.model.n_actions {
            return Err(Error::validation("policy shape does not match the model"));
        }
        Ok(ValueFunction(
            (0..self.model.n_states)
                .map(|i| {
                    StateLaw::new(self.model, &self.costs, &v.0, i)
                        .risk(&policy.weights[i], self.spec)
                })
                .collect(),
        ))
    }

    /// Iterate `v <- S v` from zero until `||S v - v|| <= tol`. The returned
    /// `v_star` is the last input to `S`, so `residual` is exactly its Bellman residual.
    pub fn value_iteration(
        &self,
        tol: f64,
        max_iter: usize,
        search: &SimplexSearch,
    ) -> Result<OracleSolution> {
        if !(tol > 0.0) {
            return Err(Error::validation(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        let mut v = ValueFunction::zeros(self.model.n_states);
        let mut history = Vec::new();
        let mut residual = f64::INFINITY;
        for it in 1..=max_iter {
            let (next, pi) = self.bellman_apply(&v, search)?;
            residual = next.sup_distance(&v);
            history.push(residual);
            if residual <= tol {
                return Ok(OracleSolution {
                    v_star: v,
                    pi_star: pi,
                    residual,
                    iterations: it,
                    tol,
                    search: search.clone(),
                    residual_history: history,
                    risk_spec_hash: self.spec.hash(),
                    model_hash: self.model.hash(),
                });
            }
            v = next;
        }
        Err(Error::NonConvergence {
            iterations: max_iter,
            residual,
        })
    }

    /// Finite-horizon nested risk of the cost stream under a fixed policy:
    /// `w_{T+1} = 0`, `w_t = R_π w_{t+1}`, returning `w_0`.
    pub fn nested_risk_eval(
        &self,
        policy: &SimplexPolicy,
        horizon: usize,
    ) -> Result<ValueFunction> {
        let mut w = ValueFunction::zeros(self.model.n_states);
        for _ in 0..=horizon {
            w = self.policy_apply(&w, policy)?;
        }
        Ok(w)
    }
}

pub fn exact_g(model: &MdpModel, v: &ValueFunction, i: usize, lambda: &[f64]) -> Result<GCurve> {
    let spec = RiskSpec::expectation();
    ExactSolver::new(model, &spec)?.exact_g(v, i, lambda)
}

pub fn bellman_apply(
    model: &MdpModel,
    spec: &RiskSpec,
    v: &ValueFunction,
    search: &SimplexSearch,
) -> Result<(ValueFunction, SimplexPolicy)> {
    ExactSolver::new(model, spec)?.bellman_apply(v, search)
}

pub fn value_iteration(
    model: &MdpModel,
    spec: &RiskSpec,
    tol: f64,
    max_iter: usize,
    search: &SimplexSearch,
) -> Result<OracleSolution> {
    ExactSolver::new(model, spec)?.value_iteration(tol, max_iter, search)
}

pub fn nested_risk_eval(
    model: &MdpModel,
    spec: &RiskSpec,
    policy: &SimplexPolicy,
    horizon: usize,
) -> Result<ValueFunction> {
    ExactSolver::new(model, spec)?.nested_risk_eval(policy, horizon)
}

/// Upper bound on value iteration steps from zero: `ceil(log(tol (1-γ)/c_max) / log γ)`.
pub fn iteration_bound(tol: f64, gamma: f64, c_max: f64) -> usize {
    ((tol * (1.0 - gamma) / c_max).ln() / gamma.ln())
        .ceil()
        .max(1.0) as usize
}

/// Randomized optimum next to the best deterministic stationary policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub randomized: OracleSolution,
    pub deterministic: OracleSolution,
    /// `v_det(i) - v_rand(i)`.
    pub randomization_gain: Vec<f64>,
    /// States where an interior mix beats every vertex by more than [`STRICT_GAIN`].
    pub strictly_randomized: Vec<bool>,
}

pub const STRICT_GAIN: f64 = 1e-6;

/// The brute-force benchmark: dense value iteration plus the vertex-only solve.
pub fn brute_force_policy_eval_sweep(
    model: &MdpModel,
    spec: &RiskSpec,
    search: &SimplexSearch,
    tol: f64,
    max_iter: usize,
) -> Result<SweepReport> {
    let solver = ExactSolver::new(model, spec)?;
    let randomized = solver.value_iteration(tol, max_iter, search)?;
    let deterministic = solver.value_iteration(tol, max_iter, &SimplexSearch::vertices_only())?;
    let randomization_gain: Vec<f64> = deterministic
        .v_star
        .0
        .iter()
        .zip(&randomized.v_star.0)
        .map(|(d, r)| d - r)
        .collect();
    let strictly_randomized = randomization_gain
        .iter()
        .map(|g| *g > STRICT_GAIN)
        .collect();
    Ok(SweepReport {
        randomized,
        deterministic,
        randomization_gain,
        strictly_randomized,
    })
}
