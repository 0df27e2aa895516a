use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::{monotonicity_violation, Mlp};
use super::QGrid;
use crate::error::{Error, Result};
use crate::mdp::SimplexPolicy;
use crate::oracle::{SimplexSearch, ValueFunction};
use crate::risk::{risk_on_candidates, GCurve, RiskSpec};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    /// `values[i][k][m]` at the grid points.
    Table {
        values: Vec<Vec<Vec<f64>>>,
    },
    Mlp(Mlp),
}

/// Surrogate `f(i, k, q)` for the one-step partial-expectation curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GApproximator {
    pub grid: QGrid,
    pub backend: Backend,
}

/// Outcome of one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    /// Mean squared residual over transitions and grid points.
    pub data_loss: f64,
    /// Monotonicity violation mass on the grid.
    pub psi: f64,
    /// Optimizer steps taken; zero for closed-form fits.
    pub steps: usize,
}

impl GApproximator {
    pub fn dims(&self) -> (usize, usize) {
        match &self.backend {
            Backend::Table { values } => (values.len(), values.first().map_or(0, Vec::len)),
            Backend::Mlp(net) => (net.n_states, net.n_actions),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.backend {
            Backend::Table { values } => {
                let na = values.first().map_or(0, Vec::len);
                if values.is_empty()
                    || na == 0
                    || values
                        .iter()
                        .any(|r| r.len() != na || r.iter().any(|c| c.len() != self.grid.len()))
                {
                    return Err(Error::validation("table shape does not match the grid"));
                }
                if values
                    .iter()
                    .flatten()
                    .flatten()
                    .any(|v| !v.is_finite() || *v < 0.0)
                {
                    return Err(Error::validation(
                        "table values must be finite and non-negative",
                    ));
                }
                Ok(())
            }
            Backend::Mlp(net) => net.validate(),
        }
    }

    /// Piecewise-linear in `q` between grid points for the table, constant beyond the ends.
    pub fn eval(&self, i: usize, k: usize, q: f64) -> f64 {
        match &self.backend {
            Backend::Table { values } => interp(self.grid.points(), &values[i][k], q),
            Backend::Mlp(net) => net.eval(i, k, q),
        }
    }

    /// `f(i, k, ·)` at every grid point.
    pub fn grid_values(&self, i: usize, k: usize) -> Vec<f64> {
        match &self.backend {
            Backend::Table { values } => values[i][k].clone(),
            Backend::Mlp(net) => self
                .grid
                .points()
                .iter()
                .map(|&q| net.eval(i, k, q))
                .collect(),
        }
    }

    /// `f(i, k, ·)` as a curve over the grid.
    pub fn curve(&self, i: usize, k: usize) -> Result<GCurve> {
        GCurve::tabulated(self.grid.points().to_vec(), self.grid_values(i, k))
    }

    /// `ψ` on the grid.
    pub fn monotonicity_violation(&self) -> f64 {
        let (ns, na) = self.dims();
        let vals: Vec<Vec<Vec<f64>>> = (0..ns)
            .map(|i| (0..na).map(|k| self.grid_values(i, k)).collect())
            .collect();
        monotonicity_violation(&vals)
    }
}

fn interp(xs: &[f64], ys: &[f64], q: f64) -> f64 {
    if q <= xs[0] {
        return ys[0];
    }
    let n = xs.len();
    if q >= xs[n - 1] {
        return ys[n - 1];
    }
    let hi = xs.partition_point(|&x| x <= q);
    let (x0, x1) = (xs[hi - 1], xs[hi]);
    let t = (q - x0) / (x1 - x0);
    ys[hi - 1] + t * (ys[hi] - ys[hi - 1])
}

/// Settings for the inner minimization over `q` with a network surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QDescent {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for QDescent {
    fn default() -> Self {
        QDescent {
            restarts: 8,
            iterations: 100,
            seed: 0,
        }
    }
}

/// Per state, minimizes over `λ` the risk `max_μ Σ w min_q {q + ξ⁻¹ Σ_k λ_k f(i, k, q)}`
/// and clamps the result into `[0, value_cap]`.
///
/// The `q` minimization scans the grid points inside `[0, value_cap]` (plus `value_cap` itself),
/// which is exact for the table. For a network, the chosen `λ` is then refined by projected
/// gradient descent in `q` from random starts.
pub fn value_policy_update(
    approx: &GApproximator,
    spec: &RiskSpec,
    search: &SimplexSearch,
    value_cap: f64,
    descent: &QDescent,
) -> Result<(ValueFunction, SimplexPolicy)> {
    approx.validate()?;
    search.validate()?;
    if !(value_cap > 0.0 && value_cap.is_finite()) {
        return Err(Error::validation("value cap must be positive"));
    }
    let (ns, na) = approx.dims();
    let grid = approx.grid.points();
    let mut keep: Vec<usize> = (0..grid.len()).filter(|&m| grid[m] <= value_cap).collect();
    let mut qs: Vec<f64> = keep.iter().map(|&m| grid[m]).collect();
    let extra_cap = value_cap < approx.grid.q_max() && qs.last() != Some(&value_cap);
    if extra_cap {
        qs.push(value_cap);
    }
    keep.shrink_to_fit();

    let per_state: Vec<(f64, Vec<f64>)> = (0..ns)
        .into_par_iter()
        .map(|i| {
            let table: Vec<Vec<f64>> = (0..na)
                .map(|k| {
                    let mut row: Vec<f64> = keep
                        .iter()
                        .map(|&m| approx_grid_value(approx, i, k, m))
                        .collect();
                    if extra_cap {
                        row.push(approx.eval(i, k, value_cap));
                    }
                    row
                })
                .collect();
            let objective = |lambda: &[f64]| {
                let mut gs = vec![0.0; qs.len()];
                for (l, row) in lambda.iter().zip(&table) {
                    if *l != 0.0 {
                        gs.iter_mut().zip(row).for_each(|(g, r)| *g += l * r);
                    }
                }
                let mut scratch = vec![0.0; spec.levels().len()];
                risk_on_candidates(&qs, &gs, spec, &mut scratch)
            };
            let (mut v, lambda) = search.minimize(na, i, objective);
            if let Backend::Mlp(net) = &approx.backend {
                v = v.min(refine_q(
                    net, i, &lambda, &qs, &table, spec, value_cap, descent,
                ));
            }
            (v.clamp(0.0, value_cap), lambda)
        })
        .collect();
    let v = ValueFunction(per_state.iter().map(|p| p.0).collect());
    let policy = SimplexPolicy::new(per_state.into_iter().map(|p| p.1).collect())?;
    Ok((v, policy))
}

fn approx_grid_value(approx: &GApproximator, i: usize, k: usize, m: usize) -> f64 {
    match &approx.backend {
        Backend::Table { values } => values[i][k][m],
        Backend::Mlp(net) => net.eval(i, k, approx.grid.points()[m]),
    }
}

/// Per risk level, the better of the grid scan and projected descent from random starts.
#[allow(clippy::too_many_arguments)]
fn refine_q(
    net: &Mlp,
    i: usize,
    lambda: &[f64],
    qs: &[f64],
    table: &[Vec<f64>],
    spec: &RiskSpec,
    cap: f64,
    descent: &QDescent,
) -> f64 {
    let mix = |q: f64| {
        lambda
            .iter()
            .enumerate()
            .filter(|(_, l)| **l != 0.0)
            .map(|(k, l)| l * net.eval(i, k, q))
            .sum::<f64>()
    };
    let gs: Vec<f64> = (0..qs.len())
        .map(|m| lambda.iter().zip(table).map(|(l, r)| l * r[m]).sum())
        .collect();
    let h = 1e-6 * cap;
    let mut per_level = Vec::with_capacity(spec.levels().len());
    for (l, &xi) in spec.levels().iter().enumerate() {
        let inv = 1.0 / xi;
        let obj = |q: f64| q + inv * mix(q);
        let mut best = qs
            .iter()
            .zip(&gs)
            .map(|(&q, &g)| q + inv * g)
            .fold(f64::INFINITY, f64::min);
        let mut rng = rng_from_seed(derive_seed(descent.seed, &[i as u64, l as u64]));
        for _ in 0..descent.restarts {
            let mut q: f64 = rand::Rng::random_range(&mut rng, 0.0..=cap);
            let mut fq = obj(q);
            let mut step = 0.1 * cap;
            for _ in 0..descent.iterations {
                let lo = (q - h).max(0.0);
                let hi = (q + h).min(cap);
                let d = (obj(hi) - obj(lo)) / (hi - lo);
                let mut moved = false;
                while step > 1e-12 * cap {
                    let cand = (q - step * d.signum()).clamp(0.0, cap);
                    let fc = obj(cand);
                    if fc < fq {
                        q = cand;
                        fq = fc;
                        moved = true;
                        step *= 2.0;
                        break;
                    }
                    step *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            best = best.min(fq);
        }
        per_level.push(best);
    }
    spec.combine(&per_level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::{Atom, SpectralMeasure};

    fn table(values: Vec<Vec<Vec<f64>>>, grid: QGrid) -> GApproximator {
        GApproximator {
            grid,
            backend: Backend::Table { values },
        }
    }

    #[test]
    fn interpolation_and_extrapolation() {
        let g = table(
            vec![vec![vec![1.0, 0.5, 0.0]]],
            QGrid::new(vec![0.0, 1.0, 2.0]).unwrap(),
        );
        assert_eq!(g.eval(0, 0, 0.5), 0.75);
        assert_eq!(g.eval(0, 0, -1.0), 1.0);
        assert_eq!(g.eval(0, 0, 5.0), 0.0);
    }

    #[test]
    fn zero_surrogate_gives_zero_value_and_lexicographic_policy() {
        let grid = QGrid::uniform(5, 1.0).unwrap();
        let g = table(vec![vec![vec![0.0; 5]; 3]; 2], grid);
        let (v, pi) = value_policy_update(
            &g,
            &RiskSpec::expectation(),
            &SimplexSearch::default(),
            2.0,
            &QDescent::default(),
        )
        .unwrap();
        assert_eq!(v.0, vec![0.0, 0.0]);
        for row in &pi.weights {
            assert_eq!(row, &vec![0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn single_action_matches_direct_formula() {
        let grid = QGrid::uniform(11, 1.0).unwrap();
        let vals: Vec<f64> = grid.points().iter().map(|q| (0.6 - q).max(0.0)).collect();
        let g = table(vec![vec![vals.clone()]], grid.clone());
        let spec = RiskSpec::new(vec![SpectralMeasure::new(vec![
            Atom {
                xi: 0.5,
                weight: 0.5,
            },
            Atom {
                xi: 1.0,
                weight: 0.5,
            },
        ])
        .unwrap()])
        .unwrap();
        let (v, pi) = value_policy_update(
            &g,
            &spec,
            &SimplexSearch::default(),
            2.0,
            &QDescent::default(),
        )
        .unwrap();
        let direct = |xi: f64| {
            grid.points()
                .iter()
                .zip(&vals)
                .map(|(q, f)| q + f / xi)
                .fold(f64::INFINITY, f64::min)
        };
        let expected = 0.5 * direct(0.5) + 0.5 * direct(1.0);
        assert!((v.0[0] - expected).abs() < 1e-15);
        assert_eq!(pi.weights[0], vec![1.0]);
    }

    #[test]
    fn output_is_clamped_to_cap() {
        let grid = QGrid::uniform(5, 1.0).unwrap();
        let g = table(vec![vec![vec![50.0; 5]]], grid);
        let (v, _) = value_policy_update(
            &g,
            &RiskSpec::expectation(),
            &SimplexSearch::default(),
            1.5,
            &QDescent::default(),
        )
        .unwrap();
        assert_eq!(v.0[0], 1.5);
    }
}
