//! Finite controlled Markov chains with bounded latent costs.

mod data;
mod policy;

pub use data::{check_coverage, simulate, CoverageReport, Dataset, FlaggedPair, Transition};
pub use policy::SimplexPolicy;

use rand::Rng as _;
use rand_distr::{Beta, Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

pub(crate) const STOCHASTIC_TOL: f64 = 1e-12;

/// Range of the Beta shape parameters drawn by [`gen_random_mdp`].
pub const BETA_PARAM_RANGE: (f64, f64) = (0.5, 5.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    Deterministic,
    Beta,
}

impl std::str::FromStr for CostKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic" => Ok(CostKind::Deterministic),
            "beta" => Ok(CostKind::Beta),
            other => Err(Error::validation(format!(
                "unknown cost kind {other:?} (expected \"deterministic\" or \"beta\")"
            ))),
        }
    }
}

/// Cost law of `C(i, k, j)`; all tables are indexed `[i][k][j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostModel {
    Deterministic {
        c_max: f64,
        table: Vec<Vec<Vec<f64>>>,
    },
    /// `C = c_max * B` with `B ~ Beta(alpha[i][k][j], beta[i][k][j])`.
    Beta {
        c_max: f64,
        alpha: Vec<Vec<Vec<f64>>>,
        beta: Vec<Vec<Vec<f64>>>,
    },
}

impl CostModel {
    pub fn c_max(&self) -> f64 {
        match self {
            CostModel::Deterministic { c_max, .. } | CostModel::Beta { c_max, .. } => *c_max,
        }
    }

    pub fn kind(&self) -> CostKind {
        match self {
            CostModel::Deterministic { .. } => CostKind::Deterministic,
            CostModel::Beta { .. } => CostKind::Beta,
        }
    }

    fn validate(&self, n_states: usize, n_actions: usize) -> Result<()> {
        let c_max = self.c_max();
        if !(c_max.is_finite() && c_max > 0.0) {
            return Err(Error::validation(format!(
                "c_max must be positive, got {c_max}"
            )));
        }
        let check_shape = |name: &str, t: &Vec<Vec<Vec<f64>>>| -> Result<()> {
            let ok = t.len() == n_states
                && t.iter()
                    .all(|row| row.len() == n_actions && row.iter().all(|r| r.len() == n_states));
            if ok {
                Ok(())
            } else {
                Err(Error::validation(format!(
                    "cost {name} must have shape {n_states}x{n_actions}x{n_states}"
                )))
            }
        };
        match self {
            CostModel::Deterministic { table, .. } => {
                check_shape("table", table)?;
                for (i, k, j, c) in iter3(table) {
                    if !(0.0..=c_max).contains(&c) {
                        return Err(Error::validation(format!(
                            "cost C[{i}][{k}][{j}] = {c} outside [0, {c_max}]"
                        )));
                    }
                }
            }
            CostModel::Beta { alpha, beta, .. } => {
                check_shape("alpha", alpha)?;
                check_shape("beta", beta)?;
                for (name, t) in [("alpha", alpha), ("beta", beta)] {
                    for (i, k, j, p) in iter3(t) {
                        if !(p.is_finite() && p > 0.0) {
                            return Err(Error::validation(format!(
                                "{name}[{i}][{k}][{j}] = {p} must be strictly positive"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn iter3(t: &[Vec<Vec<f64>>]) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
    t.iter().enumerate().flat_map(|(i, row)| {
        row.iter()
            .enumerate()
            .flat_map(move |(k, r)| r.iter().enumerate().map(move |(j, &v)| (i, k, j, v)))
    })
}

/// A finite MDP. `transitions[k][i][j]` is the probability of moving from `i`
/// to `j` under action `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpModel {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub cost: CostModel,
}

impl MdpModel {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        transitions: Vec<Vec<Vec<f64>>>,
        cost: CostModel,
    ) -> Result<Self> {
        let model = MdpModel {
            n_states,
            n_actions,
            gamma,
            transitions,
            cost,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        validate_dims(self.n_states, self.n_actions, self.gamma)?;
        if self.transitions.len() != self.n_actions {
            return Err(Error::validation(format!(
                "expected {} transition matrices, got {}",
                self.n_actions,
                self.transitions.len()
            )));
        }
        for (k, m) in self.transitions.iter().enumerate() {
            if m.len() != self.n_states {
                return Err(Error::validation(format!(
                    "T^{k} must have {} rows",
                    self.n_states
                )));
            }
            for (i, row) in m.iter().enumerate() {
                check_stochastic_row(row, self.n_states)
                    .map_err(|e| Error::validation(format!("T^{k} row {i}: {e}")))?;
            }
        }
        self.cost.validate(self.n_states, self.n_actions)
    }

    pub fn c_max(&self) -> f64 {
        self.cost.c_max()
    }

    /// Upper end of the admissible value range, `c_max / (1 - gamma)`.
    pub fn value_bound(&self) -> f64 {
        self.c_max() / (1.0 - self.gamma)
    }

    pub fn transition(&self, i: usize, k: usize, j: usize) -> f64 {
        self.transitions[k][i][j]
    }

    pub(crate) fn check_ids(&self, i: usize, k: usize, j: usize) -> Result<()> {
        if i >= self.n_states || j >= self.n_states || k >= self.n_actions {
            return Err(Error::validation(format!(
                "index (i={i}, k={k}, j={j}) out of range for {}x{} model",
                self.n_states, self.n_actions
            )));
        }
        Ok(())
    }

    /// Draw a realized cost `C(i, k, j)`; always lands in `[0, c_max]`.
    pub fn sample_cost(&self, i: usize, k: usize, j: usize, rng: &mut Rng) -> Result<f64> {
        self.check_ids(i, k, j)?;
        Ok(self.sample_cost_unchecked(i, k, j, rng))
    }

    pub(crate) fn sample_cost_unchecked(&self, i: usize, k: usize, j: usize, rng: &mut Rng) -> f64 {
        match &self.cost {
            CostModel::Deterministic { table, .. } => table[i][k][j],
            CostModel::Beta { c_max, alpha, beta } => {
                let dist =
                    Beta::new(alpha[i][k][j], beta[i][k][j]).expect("validated beta parameters");
                let b: f64 = dist.sample(rng);
                (b * c_max).clamp(0.0, *c_max)
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: MdpModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn hash(&self) -> String {
        crate::hashing::json_hash(self)
    }
}

fn validate_dims(n_states: usize, n_actions: usize, gamma: f64) -> Result<()> {
    if n_states == 0 || n_actions == 0 {
        return Err(Error::validation(format!(
            "state and action counts must be positive (got {n_states} states, {n_actions} actions)"
        )));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::validation(format!(
            "gamma must lie strictly inside (0,1), got {gamma}"
        )));
    }
    Ok(())
}

pub(crate) fn check_stochastic_row(row: &[f64], len: usize) -> std::result::Result<(), String> {
    if row.len() != len {
        return Err(format!("expected length {len}, got {}", row.len()));
    }
    if let Some(p) = row.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(format!("entry {p} is not a non-negative probability"));
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(format!("sums to {s}, not 1"));
    }
    Ok(())
}

/// One draw from the flat Dirichlet on the `(n-1)`-simplex.
pub(crate) fn flat_dirichlet(n: usize, rng: &mut Rng) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let mut w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// Random instance: every transition row is a flat Dirichlet draw; deterministic
/// costs are uniform on `[0, c_max]`, Beta shapes uniform on [`BETA_PARAM_RANGE`].
pub fn gen_random_mdp(
    n_states: usize,
    n_actions: usize,
    cost_kind: CostKind,
    c_max: f64,
    gamma: f64,
    seed: u64,
) -> Result<MdpModel> {
    validate_dims(n_states, n_actions, gamma)?;
    if !(c_max.is_finite() && c_max > 0.0) {
        return Err(Error::validation(format!(
            "c_max must be positive, got {c_max}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let transitions: Vec<Vec<Vec<f64>>> = (0..n_actions)
        .map(|_| {
            (0..n_states)
                .map(|_| flat_dirichlet(n_states, &mut rng))
                .collect()
        })
        .collect();
    let mut table3 = |f: &mut dyn FnMut(&mut Rng) -> f64| -> Vec<Vec<Vec<f64>>> {
        (0..n_states)
            .map(|_| {
                (0..n_actions)
                    .map(|_| (0..n_states).map(|_| f(&mut rng)).collect())
                    .collect()
            })
            .collect()
    };
    let cost = match cost_kind {
        CostKind::Deterministic => CostModel::Deterministic {
            c_max,
            table: table3(&mut |r| r.random::<f64>() * c_max),
        },
        CostKind::Beta => {
            let (lo, hi) = BETA_PARAM_RANGE;
            let alpha = table3(&mut |r| r.random_range(lo..=hi));
            let beta = table3(&mut |r| r.random_range(lo..=hi));
            CostModel::Beta { c_max, alpha, beta }
        }
    };
    MdpModel::new(n_states, n_actions, gamma, transitions, cost)
}
