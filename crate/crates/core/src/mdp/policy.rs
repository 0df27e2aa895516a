use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{check_stochastic_row, flat_dirichlet};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

/// Stationary randomized policy: one probability vector over actions per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexPolicy {
    pub weights: Vec<Vec<f64>>,
}

impl SimplexPolicy {
    pub fn new(weights: Vec<Vec<f64>>) -> Result<Self> {
        let p = SimplexPolicy { weights };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n_actions = self.weights.first().map_or(0, Vec::len);
        if self.weights.is_empty() || n_actions == 0 {
            return Err(Error::validation(
                "policy must cover at least one state and one action",
            ));
        }
        for (i, w) in self.weights.iter().enumerate() {
            check_stochastic_row(w, n_actions)
                .map_err(|e| Error::validation(format!("policy at state {i}: {e}")))?;
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.weights.len()
    }

    pub fn n_actions(&self) -> usize {
        self.weights[0].len()
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        SimplexPolicy {
            weights: vec![vec![1.0 / n_actions as f64; n_actions]; n_states],
        }
    }

    /// Deterministic policy playing `actions[i]` in state `i`.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Self {
        let weights = actions
            .iter()
            .map(|&a| {
                let mut w = vec![0.0; n_actions];
                w[a] = 1.0;
                w
            })
            .collect();
        SimplexPolicy { weights }
    }

    /// Exploration policy: per-state flat Dirichlet draw `d`, mixed as
    /// `floor + (1 - n_actions * floor) * d` so every action keeps probability
    /// at least `floor`.
    pub fn random_exploration(
        n_states: usize,
        n_actions: usize,
        floor: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(floor >= 0.0 && floor * n_actions as f64 <= 1.0) {
            return Err(Error::validation(format!(
                "exploration floor {floor} infeasible for {n_actions} actions"
            )));
        }
        let mut rng = rng_from_seed(seed);
        let free = 1.0 - floor * n_actions as f64;
        let weights = (0..n_states)
            .map(|_| {
                let mut w: Vec<f64> = flat_dirichlet(n_actions, &mut rng)
                    .into_iter()
                    .map(|d| floor + free * d)
                    .collect();
                let s: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= s);
                w
            })
            .collect();
        SimplexPolicy::new(weights)
    }

    /// Inverse-CDF draw of an action at state `i`.
    pub fn sample_action(&self, i: usize, rng: &mut Rng) -> usize {
        let u: f64 = rng.random();
        let w = &self.weights[i];
        let mut acc = 0.0;
        for (k, &p) in w.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        // Rounding left u above the total; fall back to the last action with mass.
        w.iter().rposition(|&p| p > 0.0).unwrap_or(w.len() - 1)
    }
}
