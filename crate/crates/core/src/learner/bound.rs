use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs of the finite-sample guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub n_states: usize,
    pub n_actions: usize,
    /// Minimum probability of visiting any state-action pair within `ell` steps.
    pub epsilon_e: f64,
    pub ell: usize,
    pub t_max: usize,
    /// Transition estimation accuracy.
    pub epsilon: f64,
    /// Lower bound on every risk level of the measures.
    pub b: f64,
    pub epsilon_theta: f64,
    pub epsilon_v: f64,
    pub gamma: f64,
    pub c_max: f64,
    /// Outer iterations performed.
    pub n: u32,
    /// `‖v̂_0 - v*‖_∞`.
    pub v0_gap: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        let open01 = |x: f64| x > 0.0 && x < 1.0;
        let nonneg = |x: f64| x >= 0.0 && x.is_finite();
        let checks: [(bool, &str); 10] = [
            (
                self.n_states >= 1 && self.n_actions >= 1,
                "n_states and n_actions must be at least 1",
            ),
            (
                self.epsilon > 0.0 && self.epsilon <= 1.0,
                "epsilon must lie in (0, 1]",
            ),
            (open01(self.epsilon_e), "epsilon_e must lie in (0, 1)"),
            (open01(self.b), "b must lie in (0, 1)"),
            (self.ell >= 1, "ell must be at least 1"),
            (self.t_max > self.ell, "t_max must exceed ell"),
            (open01(self.gamma), "gamma must lie in (0, 1)"),
            (
                self.c_max > 0.0 && self.c_max.is_finite(),
                "c_max must be positive",
            ),
            (
                nonneg(self.epsilon_theta) && nonneg(self.epsilon_v),
                "epsilon_theta and epsilon_v must be non-negative",
            ),
            (nonneg(self.v0_gap), "v0_gap must be non-negative"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::validation(*msg)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    /// Lower bound on the probability that the error bound holds, clamped to `[0, 1]`.
    pub prob_lower_bound: f64,
    pub error_upper_bound: f64,
}

pub fn theorem_bound(p: &BoundParams) -> Result<BoundResult> {
    p.validate()?;
    let k = ((p.t_max - 1) / p.ell) as f64;
    let ee2 = p.epsilon_e * p.epsilon_e;
    let union = 3.0 * (p.n_states * p.n_states * p.n_actions) as f64;
    let tail = (-(ee2 / 4.0) * k).exp()
        + (-(p.epsilon * p.epsilon * ee2 / (8.0 * p.ell as f64)) * k).exp();
    let prob = (1.0 - union * tail).clamp(0.0, 1.0);
    let one_m = 1.0 - p.gamma;
    let err = p.gamma.powi(p.n as i32) * p.v0_gap
        + p.c_max * p.epsilon / (p.b * one_m * one_m)
        + (p.epsilon_theta / p.b + p.epsilon_v) / one_m;
    Ok(BoundResult {
        prob_lower_bound: prob,
        error_upper_bound: err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reference() -> BoundParams {
        BoundParams {
            n_states: 4,
            n_actions: 4,
            epsilon_e: 0.2,
            ell: 4,
            t_max: 10_000,
            epsilon: 0.1,
            b: 0.05,
            epsilon_theta: 0.01,
            epsilon_v: 0.01,
            gamma: 0.3,
            c_max: 1.0,
            n: 20,
            v0_gap: 10.0 / 7.0,
        }
    }

    #[test]
    fn prob_increases_with_horizon() {
        let mut p = reference();
        let mut last = -1.0;
        for t in [100, 1_000, 10_000, 100_000, 1_000_000, 10_000_000] {
            p.t_max = t;
            let r = theorem_bound(&p).unwrap();
            assert!(r.prob_lower_bound >= last);
            last = r.prob_lower_bound;
        }
        assert!(last > 0.999);
    }

    #[test]
    fn error_vanishes_without_slack() {
        let p = BoundParams {
            epsilon_theta: 0.0,
            epsilon_v: 0.0,
            epsilon: 1e-300,
            n: 2000,
            ..reference()
        };
        assert!(theorem_bound(&p).unwrap().error_upper_bound < 1e-290);
    }

    #[test]
    fn domain_violations_are_rejected() {
        for p in [
            BoundParams {
                epsilon: 0.0,
                ..reference()
            },
            BoundParams {
                epsilon_e: 1.0,
                ..reference()
            },
            BoundParams {
                b: 0.0,
                ..reference()
            },
            BoundParams {
                ell: 0,
                ..reference()
            },
            BoundParams {
                t_max: 4,
                ..reference()
            },
            BoundParams {
                gamma: 1.0,
                ..reference()
            },
        ] {
            assert!(matches!(theorem_bound(&p), Err(Error::Validation(_))));
        }
    }
}
