use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimate::mle_transition;
use crate::error::{Error, Result};
use crate::mdp::{simulate, MdpModel, SimplexPolicy};
use crate::rng::{derive_seed, stream};

/// Longest window searched when optimizing the concentration bound over `ell`.
pub const MAX_WINDOW: usize = 64;

/// Concentration bound for one window length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaBound {
    pub ell: usize,
    /// Minimum probability of visiting any pair within the next `ell` steps, from any pair.
    pub epsilon_e: f64,
    /// Visit-count threshold minimizing the per-entry bound.
    pub n_threshold: usize,
    pub per_entry: f64,
    /// `per_entry` times the number of `(i, k, j)` entries, unclamped.
    pub union: f64,
    pub vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstpReport {
    pub n_seeds: usize,
    pub t_max: usize,
    pub epsilon: f64,
    /// Runs with `max |T̂ - T| > epsilon`; an unvisited pair counts as an exceedance.
    pub exceed_count: usize,
    pub empirical_frequency: f64,
    pub max_deviations: Vec<f64>,
    pub median_max_deviation: f64,
    /// Bound with one-step windows.
    pub surrogate: LemmaBound,
    /// Best bound over windows up to `MAX_WINDOW`.
    pub best: LemmaBound,
    /// Empirical frequency within every non-vacuous bound.
    pub holds: bool,
}

/// `min_{(x,a), (i,k)} P(pair (i,k) occurs in the next ell steps | current pair (x,a))`,
/// over current pairs the policy can produce.
pub fn exploration_epsilon(model: &MdpModel, policy: &SimplexPolicy, ell: usize) -> Result<f64> {
    let (ns, na) = (model.n_states, model.n_actions);
    if policy.n_states() != ns || policy.n_actions() != na {
        return Err(Error::validation(
            "policy dimensions do not match the model",
        ));
    }
    let np = ns * na;
    let step = |from: usize, to: usize| {
        let (x, a) = (from / na, from % na);
        let (y, b) = (to / na, to % na);
        model.transition(x, a, y) * policy.weights[y][b]
    };
    let starts: Vec<usize> = (0..np)
        .filter(|&p| policy.weights[p / na][p % na] > 0.0)
        .collect();
    let mut eps = f64::INFINITY;
    for target in 0..np {
        // avoid[s]: probability of not hitting `target` in the remaining steps from pair s.
        let mut avoid = vec![1.0; np];
        for _ in 0..ell {
            avoid = (0..np)
                .map(|s| {
                    (0..np)
                        .filter(|&t| t != target)
                        .map(|t| step(s, t) * avoid[t])
                        .sum()
                })
                .collect();
        }
        for &s in &starts {
            eps = eps.min(1.0 - avoid[s]);
        }
    }
    Ok(eps.max(0.0))
}

/// Per-entry concentration bound at window `ell`, minimized over the count threshold.
pub fn lemma_bound(
    epsilon_e: f64,
    ell: usize,
    t_max: usize,
    epsilon: f64,
    entries: usize,
) -> LemmaBound {
    let k = ((t_max.saturating_sub(1)) / ell.max(1)) as f64;
    let limit = epsilon_e * k;
    let mut best = (f64::INFINITY, 0usize);
    let mut n = 0usize;
    while (n as f64) < limit {
        let nf = n as f64;
        let b = (-(nf - limit).powi(2) / k).exp()
            + 2.0 * (-(epsilon * epsilon * nf * nf) / (2.0 * t_max as f64)).exp();
        if b < best.0 {
            best = (b, n);
        }
        n += 1;
    }
    let union = best.0 * entries as f64;
    LemmaBound {
        ell,
        epsilon_e,
        n_threshold: best.1,
        per_entry: best.0,
        union,
        vacuous: !(union < 1.0),
    }
}

/// Simulates `n_seeds` explorations and compares the frequency of `max |T̂ - T| > epsilon`
/// with the concentration bound.
pub fn lemma_estp_suite(
    model: &MdpModel,
    policy: &SimplexPolicy,
    t_max: usize,
    epsilon: f64,
    n_seeds: usize,
    seed: u64,
) -> Result<EstpReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::validation("epsilon must lie in (0, 1)"));
    }
    if n_seeds == 0 || t_max < 2 {
        return Err(Error::validation("need at least one seed and t_max >= 2"));
    }
    let (ns, na) = (model.n_states, model.n_actions);
    let max_deviations: Vec<f64> = (0..n_seeds)
        .into_par_iter()
        .map(|s| -> Result<f64> {
            let d = simulate(
                model,
                policy,
                t_max,
                0,
                derive_seed(seed, &[stream::TRAJECTORY, s as u64]),
            )?;
            let est = mle_transition(&d, ns, na)?;
            if !est.unvisited.is_empty() {
                return Ok(1.0);
            }
            Ok(est.max_deviation(&model.transitions))
        })
        .collect::<Result<_>>()?;
    let exceed_count = max_deviations.iter().filter(|&&d| d > epsilon).count();
    let empirical_frequency = exceed_count as f64 / n_seeds as f64;
    let mut sorted = max_deviations.clone();
    sorted.sort_by(f64::total_cmp);
    let median_max_deviation = if n_seeds % 2 == 1 {
        sorted[n_seeds / 2]
    } else {
        0.5 * (sorted[n_seeds / 2 - 1] + sorted[n_seeds / 2])
    };

    let entries = ns * ns * na;
    let bounds: Vec<LemmaBound> = (1..=MAX_WINDOW.min(t_max - 1))
        .map(|ell| {
            Ok(lemma_bound(
                exploration_epsilon(model, policy, ell)?,
                ell,
                t_max,
                epsilon,
                entries,
            ))
        })
        .collect::<Result<_>>()?;
    let surrogate = bounds[0];
    let best = *bounds
        .iter()
        .min_by(|a, b| a.union.total_cmp(&b.union))
        .unwrap();
    let holds = [surrogate, best]
        .iter()
        .all(|b| b.vacuous || empirical_frequency <= b.union);
    Ok(EstpReport {
        n_seeds,
        t_max,
        epsilon,
        exceed_count,
        empirical_frequency,
        max_deviations,
        median_max_deviation,
        surrogate,
        best,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{gen_random_mdp, CostKind, CostModel};

    fn cycle(ns: usize) -> MdpModel {
        let t: Vec<Vec<f64>> = (0..ns)
            .map(|i| {
                (0..ns)
                    .map(|j| if j == (i + 1) % ns { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let table = vec![vec![vec![0.5; ns]; 2]; ns];
        MdpModel::new(
            ns,
            2,
            0.3,
            vec![t.clone(), t],
            CostModel::Deterministic { c_max: 1.0, table },
        )
        .unwrap()
    }

    #[test]
    fn deterministic_chain_never_deviates() {
        let m = cycle(3);
        let r = lemma_estp_suite(&m, &SimplexPolicy::uniform(3, 2), 2000, 0.01, 20, 4).unwrap();
        assert_eq!(r.exceed_count, 0);
        assert!(r.holds);
    }

    #[test]
    fn one_step_epsilon_on_cycle() {
        // From any pair the next state is fixed, so a given pair follows with probability 1/2 or 0.
        let m = cycle(3);
        let pi = SimplexPolicy::uniform(3, 2);
        assert_eq!(exploration_epsilon(&m, &pi, 1).unwrap(), 0.0);
        assert!((exploration_epsilon(&m, &pi, 3).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn longer_horizon_shrinks_median_deviation() {
        let m = gen_random_mdp(3, 2, CostKind::Deterministic, 1.0, 0.3, 11).unwrap();
        let pi = SimplexPolicy::uniform(3, 2);
        let a = lemma_estp_suite(&m, &pi, 2000, 0.1, 30, 5).unwrap();
        let b = lemma_estp_suite(&m, &pi, 4000, 0.1, 30, 5).unwrap();
        assert!(b.median_max_deviation < a.median_max_deviation);
    }

    #[test]
    fn epsilon_grows_with_window() {
        let m = gen_random_mdp(4, 4, CostKind::Deterministic, 1.0, 0.3, 2).unwrap();
        let pi = SimplexPolicy::uniform(4, 4);
        let e: Vec<f64> = (1..6)
            .map(|l| exploration_epsilon(&m, &pi, l).unwrap())
            .collect();
        assert!(e.windows(2).all(|w| w[1] >= w[0] - 1e-15));
    }
}
