//! Randomized-policy search over the probability simplex.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::flat_dirichlet;
use crate::rng::{derive_seed, rng_from_seed};

/// Candidate schedule for `inf` over the action simplex: a regular lattice,
/// flat-Dirichlet samples, then rounds of local refinement around the incumbent
/// (pairwise mass transfers plus shrunken random perturbations), the radius
/// shrinking by a factor 4 per round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimplexSearch {
    pub grid_step: f64,
    pub n_random: usize,
    pub refine_rounds: usize,
    pub refine_radius: f64,
    pub refine_samples: usize,
    pub seed: u64,
}

impl Default for SimplexSearch {
    fn default() -> Self {
        SimplexSearch {
            grid_step: 0.05,
            n_random: 2000,
            refine_rounds: 3,
            refine_radius: 0.05,
            refine_samples: 64,
            seed: 0,
        }
    }
}

const REFINE_SHRINK: f64 = 0.25;
const MAX_PATTERN_STEPS: usize = 32;

impl SimplexSearch {
    /// Only the simplex vertices, i.e. deterministic actions.
    pub fn vertices_only() -> Self {
        SimplexSearch {
            grid_step: 1.0,
            n_random: 0,
            refine_rounds: 0,
            refine_radius: 0.0,
            refine_samples: 0,
            seed: 0,
        }
    }

    /// Lattice only, no random or refinement candidates.
    pub fn lattice(grid_step: f64) -> Self {
        SimplexSearch {
            grid_step,
            ..SimplexSearch::vertices_only()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid_step > 0.0 && self.grid_step <= 1.0) {
            return Err(Error::validation(format!(
                "grid_step {} outside (0, 1]",
                self.grid_step
            )));
        }
        if !(self.refine_radius >= 0.0 && self.refine_radius <= 1.0) {
            return Err(Error::validation(format!(
                "refine_radius {} outside [0, 1]",
                self.refine_radius
            )));
        }
        Ok(())
    }

    /// True when the candidate set does not depend on the objective, so two
    /// objectives are always compared on identical points.
    pub fn is_fixed_candidate_set(&self) -> bool {
        self.refine_rounds == 0 || self.refine_radius == 0.0
    }

    fn lattice_divisions(&self) -> usize {
        ((1.0 / self.grid_step).round() as usize).max(1)
    }

    /// Lattice points and random samples for the search at `state`.
    pub fn initial_candidates(&self, n_actions: usize, state: usize) -> Vec<Vec<f64>> {
        let mut out = simplex_lattice(n_actions, self.lattice_divisions());
        if n_actions > 1 && self.n_random > 0 {
            let mut rng = rng_from_seed(derive_seed(self.seed, &[state as u64, 0]));
            out.extend((0..self.n_random).map(|_| flat_dirichlet(n_actions, &mut rng)));
        }
        out
    }

    /// Minimize `objective` over the simplex for `state`. Returns the best value
    /// and its weights; ties go to the lexicographically smallest weight vector,
    /// which keeps the result independent of evaluation order.
    pub fn minimize<F>(&self, n_actions: usize, state: usize, objective: F) -> (f64, Vec<f64>)
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let cands = self.initial_candidates(n_actions, state);
        let mut best = best_of(cands, &objective).expect("lattice is never empty");
        if n_actions == 1 {
            return best;
        }
        let mut radius = self.refine_radius;
        for round in 0..self.refine_rounds {
            if radius <= 0.0 {
                break;
            }
            for _ in 0..MAX_PATTERN_STEPS {
                let moves = pair_transfers(&best.1, radius);
                match best_of(moves, &objective) {
                    Some(c) if better(&c, &best) => best = c,
                    _ => break,
                }
            }
            if self.refine_samples > 0 {
                let mut rng =
                    rng_from_seed(derive_seed(self.seed, &[state as u64, 1 + round as u64]));
                let local: Vec<Vec<f64>> = (0..self.refine_samples)
                    .map(|_| {
                        let d = flat_dirichlet(n_actions, &mut rng);
                        best.1
                            .iter()
                            .zip(&d)
                            .map(|(l, u)| (1.0 - radius) * l + radius * u)
                            .collect()
                    })
                    .collect();
                if let Some(c) = best_of(local, &objective) {
                    if better(&c, &best) {
                        best = c;
                    }
                }
            }
            radius *= REFINE_SHRINK;
        }
        best
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn better(a: &(f64, Vec<f64>), b: &(f64, Vec<f64>)) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => lex_cmp(&a.1, &b.1) == Ordering::Less,
    }
}

fn best_of<F>(cands: Vec<Vec<f64>>, objective: &F) -> Option<(f64, Vec<f64>)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cands
        .into_par_iter()
        .map(|w| (objective(&w), w))
        .reduce_with(|a, b| if better(&b, &a) { b } else { a })
}

/// Move up to `radius` of probability mass between every ordered pair of actions.
fn pair_transfers(w: &[f64], radius: f64) -> Vec<Vec<f64>> {
    let n = w.len();
    let mut out = Vec::with_capacity(n * (n - 1) * 2);
    for from in 0..n {
        for to in 0..n {
            if from == to || w[from] <= 0.0 {
                continue;
            }
            for step in [radius, 0.5 * radius] {
                let d = step.min(w[from]);
                let mut c = w.to_vec();
                c[from] -= d;
                c[to] += d;
                if c[from] < 1e-15 {
                    c[from] = 0.0;
                }
                out.push(c);
            }
        }
    }
    out
}

/// All weight vectors with entries in `{0, 1/n, ..., 1}` summing to one.
pub fn simplex_lattice(n_actions: usize, n: usize) -> Vec<Vec<f64>> {
    fn rec(rem: usize, slots: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if slots == 1 {
            cur.push(rem);
            out.push(cur.iter().map(|&c| c as f64 / n as f64).collect());
            cur.pop();
            return;
        }
        for c in 0..=rem {
            cur.push(c);
            rec(rem - c, slots - 1, n, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(
        n,
        n_actions,
        n,
        &mut Vec::with_capacity(n_actions),
        &mut out,
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_counts() {
        assert_eq!(simplex_lattice(1, 20), vec![vec![1.0]]);
        assert_eq!(simplex_lattice(3, 1).len(), 3);
        // C(20 + 3, 3) points on the 3-simplex at step 0.05.
        assert_eq!(simplex_lattice(4, 20).len(), 1771);
        for w in simplex_lattice(4, 20) {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn vertices_only_finds_best_vertex() {
        let s = SimplexSearch::vertices_only();
        let (v, w) = s.minimize(3, 0, |w| 3.0 * w[0] + 1.0 * w[1] + 2.0 * w[2]);
        assert_eq!(v, 1.0);
        assert_eq!(w, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn ties_resolve_to_lexicographic_minimum() {
        let s = SimplexSearch::default();
        let (v, w) = s.minimize(3, 0, |_| 0.0);
        assert_eq!(v, 0.0);
        assert_eq!(w, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn refinement_recovers_interior_optimum() {
        let target = [0.137, 0.512, 0.351];
        let obj = |w: &[f64]| {
            w.iter()
                .zip(&target)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        };
        let (v, _) = SimplexSearch::default().minimize(3, 2, obj);
        assert!(v < 2e-3, "v = {v}");
        let (coarse, _) = SimplexSearch::lattice(0.05).minimize(3, 2, obj);
        assert!(v < coarse);
    }

    #[test]
    fn search_is_deterministic() {
        let obj = |w: &[f64]| (w[0] - 0.3).powi(2) + (w[1] - 0.2).powi(2);
        let s = SimplexSearch::default().with_seed(99);
        assert_eq!(s.minimize(4, 1, obj), s.minimize(4, 1, obj));
    }

    #[test]
    fn single_action_is_a_point() {
        let (v, w) = SimplexSearch::default().minimize(1, 0, |w| w[0] * 2.0);
        assert_eq!((v, w), (2.0, vec![1.0]));
    }
}
