use serde::{Deserialize, Serialize};

use super::{ProblemMeta, QGrid};
use crate::error::{Error, Result};
use crate::mdp::Dataset;

/// Empirical transition frequencies `T̂^k_ij = #(i,k,j) / #(i,k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatedTransitions {
    /// Indexed `[k][i][j]`, like the model's matrices.
    pub t_hat: Vec<Vec<Vec<f64>>>,
    /// Visits per `[i][k]`.
    pub pair_counts: Vec<Vec<usize>>,
    /// Transitions per `[i][k][j]`.
    pub transition_counts: Vec<Vec<Vec<usize>>>,
    /// `(i, k)` pairs never visited; their rows are uniform.
    pub unvisited: Vec<(usize, usize)>,
}

impl EstimatedTransitions {
    /// `max_{i,k,j} |T̂ - T|` against reference matrices indexed `[k][i][j]`.
    pub fn max_deviation(&self, reference: &[Vec<Vec<f64>>]) -> f64 {
        self.t_hat
            .iter()
            .zip(reference)
            .flat_map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs()))
            })
            .fold(0.0, f64::max)
    }
}

pub fn mle_transition(
    dataset: &Dataset,
    n_states: usize,
    n_actions: usize,
) -> Result<EstimatedTransitions> {
    if dataset.n_states != n_states || dataset.n_actions != n_actions {
        return Err(Error::validation(
            "dataset dimensions do not match the requested estimate",
        ));
    }
    let mut tc = vec![vec![vec![0usize; n_states]; n_actions]; n_states];
    for tr in &dataset.transitions {
        tc[tr.x][tr.a][tr.x_next] += 1;
    }
    let pair_counts: Vec<Vec<usize>> = tc
        .iter()
        .map(|r| r.iter().map(|c| c.iter().sum()).collect())
        .collect();
    let mut unvisited = Vec::new();
    let t_hat = (0..n_actions)
        .map(|k| {
            (0..n_states)
                .map(|i| {
                    let n = pair_counts[i][k];
                    if n == 0 {
                        unvisited.push((i, k));
                        vec![1.0 / n_states as f64; n_states]
                    } else {
                        tc[i][k].iter().map(|&c| c as f64 / n as f64).collect()
                    }
                })
                .collect()
        })
        .collect();
    unvisited.sort_unstable();
    if !unvisited.is_empty() {
        log::warn!(
            "{} state-action pairs unvisited; their transition rows default to uniform",
            unvisited.len()
        );
    }
    Ok(EstimatedTransitions {
        t_hat,
        pair_counts,
        transition_counts: tc,
        unvisited,
    })
}

/// Per-cell sufficient statistics of the regression targets
/// `y_{t,m} = (c_t + γ v̂(x_{t+1}) - q_m)_+`: counts per `(i, k)` and the first
/// two moments per `(i, k, m)`.
#[derive(Debug, Clone)]
pub(crate) struct CellTargets {
    pub counts: Vec<Vec<usize>>,
    pub mean: Vec<Vec<Vec<f64>>>,
    pub mean_sq: Vec<Vec<Vec<f64>>>,
}

impl CellTargets {
    pub fn new(dataset: &Dataset, v_hat: &[f64], grid: &QGrid, meta: &ProblemMeta) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::validation("cannot fit on an empty dataset"));
        }
        if dataset.n_states != meta.n_states || dataset.n_actions != meta.n_actions {
            return Err(Error::validation(
                "dataset dimensions do not match the problem",
            ));
        }
        if v_hat.len() != meta.n_states {
            return Err(Error::validation(
                "value estimate length does not match the state count",
            ));
        }
        let (ns, na, m) = (meta.n_states, meta.n_actions, grid.len());
        let mut counts = vec![vec![0usize; na]; ns];
        let mut sum = vec![vec![vec![0.0; m]; na]; ns];
        let mut sum_sq = vec![vec![vec![0.0; m]; na]; ns];
        for tr in &dataset.transitions {
            let y = tr.c + meta.gamma * v_hat[tr.x_next];
            counts[tr.x][tr.a] += 1;
            let (s, s2) = (&mut sum[tr.x][tr.a], &mut sum_sq[tr.x][tr.a]);
            for (n, &q) in grid.points().iter().enumerate() {
                let h = (y - q).max(0.0);
                s[n] += h;
                s2[n] += h * h;
            }
        }
        let mut mean = sum;
        let mut mean_sq = sum_sq;
        for i in 0..ns {
            for k in 0..na {
                let n = counts[i][k];
                if n == 0 {
                    // Unvisited: uniform next state and the worst-case cost c_max.
                    for (mm, &q) in grid.points().iter().enumerate() {
                        let ys = v_hat
                            .iter()
                            .map(|&v| (meta.c_max + meta.gamma * v - q).max(0.0));
                        let (a, b) = ys.fold((0.0, 0.0), |(a, b), h| (a + h, b + h * h));
                        mean[i][k][mm] = a / ns as f64;
                        mean_sq[i][k][mm] = b / ns as f64;
                    }
                } else {
                    mean[i][k].iter_mut().for_each(|x| *x /= n as f64);
                    mean_sq[i][k].iter_mut().for_each(|x| *x /= n as f64);
                }
            }
        }
        Ok(CellTargets {
            counts,
            mean,
            mean_sq,
        })
    }

    pub fn total_count(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// `(1 / (N m)) Σ_t Σ_m (f(x_t, a_t, q_m) - y_{t,m})²` for cell values `f[i][k][m]`,
    /// through the per-cell decomposition `n (f - ȳ)² + n (E[y²] - ȳ²)`.
    pub fn data_loss(&self, f: &[Vec<Vec<f64>>]) -> f64 {
        let mut total = 0.0;
        let mut cells = 0usize;
        for (i, row) in self.counts.iter().enumerate() {
            for (k, &n) in row.iter().enumerate() {
                if n == 0 {
                    continue;
                }
                for m in 0..self.mean[i][k].len() {
                    let ybar = self.mean[i][k][m];
                    let var = (self.mean_sq[i][k][m] - ybar * ybar).max(0.0);
                    total += n as f64 * ((f[i][k][m] - ybar).powi(2) + var);
                    cells += 1;
                }
            }
        }
        let m = self
            .mean
            .first()
            .and_then(|r| r.first())
            .map_or(1, Vec::len);
        if cells == 0 {
            0.0
        } else {
            total / (self.total_count() * m) as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Transition;

    fn tr(t: usize, x: usize, a: usize, x_next: usize) -> Transition {
        Transition {
            t,
            x,
            a,
            x_next,
            c: 0.0,
        }
    }

    #[test]
    fn count_ratios() {
        let d = Dataset::new(2, 1, vec![tr(1, 0, 0, 1), tr(2, 0, 0, 0), tr(3, 0, 0, 1)]).unwrap();
        let e = mle_transition(&d, 2, 1).unwrap();
        assert!((e.t_hat[0][0][0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((e.t_hat[0][0][1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.pair_counts[0][0], 3);
        // State 1 never visited: uniform fallback, flagged.
        assert_eq!(e.t_hat[0][1], vec![0.5, 0.5]);
        assert_eq!(e.unvisited, vec![(1, 0)]);
    }

    #[test]
    fn single_transition() {
        let d = Dataset::new(2, 1, vec![tr(1, 0, 0, 1)]).unwrap();
        let e = mle_transition(&d, 2, 1).unwrap();
        assert_eq!(e.t_hat[0][0], vec![0.0, 1.0]);
    }

    #[test]
    fn visited_rows_are_stochastic() {
        let d = Dataset::new(
            3,
            2,
            (0..50).map(|t| tr(t, t % 3, t % 2, (t * 7) % 3)).collect(),
        )
        .unwrap();
        let e = mle_transition(&d, 3, 2).unwrap();
        for k in 0..2 {
            for i in 0..3 {
                if e.pair_counts[i][k] > 0 {
                    assert!((e.t_hat[k][i].iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                }
            }
        }
    }
}
