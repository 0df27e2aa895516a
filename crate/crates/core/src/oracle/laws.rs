//! Discrete one-step laws used by the exact solver.

use statrs::function::beta::{beta_reg, ln_beta};

use crate::mdp::{CostModel, MdpModel};
use crate::risk::{avar_levels_sorted_desc, RiskSpec};

/// Support points per `(i, k, j)` when a Beta cost law is discretized.
pub const BETA_DISCRETIZATION: usize = 200;

/// Equally weighted cost support points for every `(i, k, j)`, indexed `[i][k][j]`.
#[derive(Debug, Clone)]
pub struct CostAtoms {
    atoms: Vec<Vec<Vec<Vec<f64>>>>,
}

impl CostAtoms {
    /// Deterministic costs give one point; Beta laws are cut into
    /// [`BETA_DISCRETIZATION`] equal-mass bins represented by their conditional means.
    pub fn new(model: &MdpModel) -> Self {
        let (ns, na) = (model.n_states, model.n_actions);
        let atoms = (0..ns)
            .map(|i| {
                (0..na)
                    .map(|k| {
                        (0..ns)
                            .map(|j| match &model.cost {
                                CostModel::Deterministic { table, .. } => vec![table[i][k][j]],
                                CostModel::Beta { c_max, alpha, beta } => beta_bin_means(
                                    alpha[i][k][j],
                                    beta[i][k][j],
                                    BETA_DISCRETIZATION,
                                )
                                .into_iter()
                                .map(|m| (m * c_max).clamp(0.0, *c_max))
                                .collect(),
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        CostAtoms { atoms }
    }

    pub fn get(&self, i: usize, k: usize, j: usize) -> &[f64] {
        &self.atoms[i][k][j]
    }
}

fn beta_pdf(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    ((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b)).exp()
}

/// Quantile of Beta(a, b) by Newton steps safeguarded with bisection.
pub(crate) fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x = a / (a + b);
    for _ in 0..200 {
        let f = beta_reg(a, b, x) - p;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = beta_pdf(a, b, x);
        let newton = x - f / d;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * next || hi - lo <= 4.0 * f64::EPSILON * hi {
            return next;
        }
        x = next;
    }
    x
}

/// Conditional means of Beta(a, b) on `n` consecutive equal-mass bins.
/// Uses `E[X; X <= t] = a/(a+b) * I_t(a+1, b)`.
pub(crate) fn beta_bin_means(a: f64, b: f64, n: usize) -> Vec<f64> {
    let mean = a / (a + b);
    let mut edges: Vec<f64> = (0..=n)
        .map(|m| beta_quantile(a, b, m as f64 / n as f64))
        .collect();
    edges[0] = 0.0;
    edges[n] = 1.0;
    let partial: Vec<f64> = edges
        .iter()
        .map(|&t| mean * beta_reg(a + 1.0, b, t))
        .collect();
    (0..n)
        .map(|m| {
            let v = (partial[m + 1] - partial[m]) * n as f64;
            v.clamp(edges[m], edges[m + 1])
        })
        .collect()
}

/// The law of `C(i, A, X') + gamma * v(X')` at a fixed state, for any action
/// weights: atoms sorted by value (descending) with their action and base mass.
#[derive(Debug, Clone)]
pub(crate) struct StateLaw {
    values: Vec<f64>,
    actions: Vec<usize>,
    base: Vec<f64>,
    /// Per-action mean of the one-step value, used for the level-1 AVaR.
    means: Vec<f64>,
}

impl StateLaw {
    pub fn new(model: &MdpModel, costs: &CostAtoms, v: &[f64], i: usize) -> Self {
        let mut atoms: Vec<(f64, usize, f64)> = Vec::new();
        let mut means = vec![0.0; model.n_actions];
        for k in 0..model.n_actions {
            for j in 0..model.n_states {
                let t = model.transitions[k][i][j];
                if t == 0.0 {
                    continue;
                }
                let pts = costs.get(i, k, j);
                let p = t / pts.len() as f64;
                for &c in pts {
                    let z = c + model.gamma * v[j];
                    atoms.push((z, k, p));
                    means[k] += p * z;
                }
            }
        }
        atoms.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        StateLaw {
            values: atoms.iter().map(|a| a.0).collect(),
            actions: atoms.iter().map(|a| a.1).collect(),
            base: atoms.iter().map(|a| a.2).collect(),
            means,
        }
    }

    /// Atoms of the mixture under action weights `lambda`, in descending value order.
    pub fn mixture<'a>(&'a self, lambda: &'a [f64]) -> impl Iterator<Item = (f64, f64)> + 'a {
        self.values
            .iter()
            .zip(&self.actions)
            .zip(&self.base)
            .map(move |((&z, &k), &p)| (z, lambda[k] * p))
    }

    /// Kusuoka risk of the mixture under `lambda`.
    pub fn risk(&self, lambda: &[f64], spec: &RiskSpec) -> f64 {
        let levels = spec.levels();
        let mut av = vec![0.0; levels.len()];
        // Level 1 is the mean, which is linear in lambda; walk the tail only for the rest.
        let tail = if levels.last() == Some(&1.0) {
            levels.len() - 1
        } else {
            levels.len()
        };
        avar_levels_sorted_desc(self.mixture(lambda), &levels[..tail], &mut av[..tail]);
        if tail < levels.len() {
            av[tail] = lambda.iter().zip(&self.means).map(|(l, m)| l * m).sum();
        }
        spec.combine(&av)
    }
}
