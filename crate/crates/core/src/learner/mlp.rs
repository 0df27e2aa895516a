use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::estimate::CellTargets;
use super::{Backend, FitStats, GApproximator, ProblemMeta, QGrid};
use crate::error::{Error, Result};
use crate::mdp::Dataset;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Elu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpHyper {
    pub hidden: Vec<usize>,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub minibatch: usize,
    /// Passes over the `(i, k, m)` cells per fit.
    pub epochs: usize,
    /// Weight of the monotonicity penalty.
    pub beta: f64,
    pub warm_start: bool,
}

impl Default for MlpHyper {
    fn default() -> Self {
        MlpHyper {
            hidden: vec![64, 64],
            optimizer: Optimizer::Adam,
            learning_rate: 1e-3,
            minibatch: 256,
            epochs: 50,
            beta: 1.0,
            warm_start: true,
        }
    }
}

impl MlpHyper {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::validation("hidden layer widths must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("learning_rate must be positive"));
        }
        if self.minibatch == 0 {
            return Err(Error::validation("minibatch must be positive"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::validation("beta must be non-negative"));
        }
        Ok(())
    }
}

/// Fully connected network `one-hot(i) ⊕ one-hot(k) ⊕ q/q_scale -> scalar`.
///
/// `weights` is flat: for each layer, the row-major `out × in` matrix followed by the `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub n_states: usize,
    pub n_actions: usize,
    pub q_scale: f64,
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

struct Cache {
    /// `acts[0]` is the input; `acts[l]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    /// Pre-activations of each layer.
    pre: Vec<Vec<f64>>,
}

impl Mlp {
    /// Xavier-uniform weights, zero biases.
    pub fn init(
        n_states: usize,
        n_actions: usize,
        hidden: &[usize],
        q_scale: f64,
        seed: u64,
    ) -> Self {
        let mut layer_sizes = vec![n_states + n_actions + 1];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(1);
        let mut rng = rng_from_seed(seed);
        let mut weights = Vec::new();
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.extend((0..fan_in * fan_out).map(|_| rng.random_range(-a..a)));
            weights.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Mlp {
            layer_sizes,
            activation: Activation::Elu,
            weights,
            n_states,
            n_actions,
            q_scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let expected: usize = self
            .layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        if self.layer_sizes.len() < 2
            || self.layer_sizes[0] != self.n_states + self.n_actions + 1
            || *self.layer_sizes.last().unwrap() != 1
            || self.weights.len() != expected
        {
            return Err(Error::validation(
                "network shape metadata does not match its weights",
            ));
        }
        if !(self.q_scale > 0.0 && self.q_scale.is_finite()) {
            return Err(Error::validation("network q_scale must be positive"));
        }
        Ok(())
    }

    fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    fn input(&self, i: usize, k: usize, q: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.layer_sizes[0]];
        x[i] = 1.0;
        x[self.n_states + k] = 1.0;
        x[self.n_states + self.n_actions] = q / self.q_scale;
        x
    }

    fn forward(&self, input: Vec<f64>, mut cache: Option<&mut Cache>) -> f64 {
        let mut a = input;
        let mut off = 0;
        let last = self.n_layers() - 1;
        if let Some(c) = cache.as_deref_mut() {
            c.acts.clear();
            c.pre.clear();
        }
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w = &self.weights[off..off + n_in * n_out];
            let b = &self.weights[off + n_in * n_out..off + n_in * n_out + n_out];
            off += n_in * n_out + n_out;
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    b[o] + w[o * n_in..(o + 1) * n_in]
                        .iter()
                        .zip(&a)
                        .map(|(x, y)| x * y)
                        .sum::<f64>()
                })
                .collect();
            let out: Vec<f64> = if l == last {
                z.clone()
            } else {
                z.iter().map(|&v| elu(v)).collect()
            };
            if let Some(c) = cache.as_deref_mut() {
                c.acts.push(std::mem::take(&mut a));
                c.pre.push(z);
            }
            a = out;
        }
        a[0]
    }

    /// Accumulates `dout · ∂f/∂weights` into `grad`.
    fn backward(&self, cache: &Cache, dout: f64, grad: &mut [f64]) {
        let mut offsets = Vec::with_capacity(self.n_layers());
        let mut off = 0;
        for w in self.layer_sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut delta = vec![dout];
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let off = offsets[l];
            let a = &cache.acts[l];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                row.iter_mut().zip(a).for_each(|(g, x)| *g += d * x);
                grad[off + n_in * n_out + o] += d;
            }
            if l > 0 {
                let w = &self.weights[off..off + n_in * n_out];
                let pre = &cache.pre[l - 1];
                delta = (0..n_in)
                    .map(|j| {
                        (0..n_out).map(|o| w[o * n_in + j] * delta[o]).sum::<f64>()
                            * elu_grad(pre[j])
                    })
                    .collect();
            }
        }
    }

    pub fn eval(&self, i: usize, k: usize, q: f64) -> f64 {
        self.forward(self.input(i, k, q), None)
    }
}

struct Cell {
    i: usize,
    k: usize,
    m: usize,
    weight: f64,
    target: f64,
}

/// Fits the network to the hinge targets by minibatch gradient descent on
/// `Σ_t Σ_m (f(x_t, a_t, q_m) - y_{t,m})² + β ψ`, where `ψ` sums the positive forward
/// differences of `f` along the grid.
///
/// The data term is evaluated through per-cell means and counts, which differs from the
/// per-transition sum by a constant only. Both terms are divided by the mean visit count.
#[allow(clippy::too_many_arguments)]
pub fn fit_g_mlp(
    dataset: &Dataset,
    v_hat: &[f64],
    grid: &QGrid,
    meta: &ProblemMeta,
    hyper: &MlpHyper,
    seed: u64,
    warm: Option<&Mlp>,
) -> Result<(GApproximator, FitStats)> {
    hyper.validate()?;
    let targets = CellTargets::new(dataset, v_hat, grid, meta)?;
    let mut net = match warm {
        Some(w)
            if w.n_states == meta.n_states
                && w.n_actions == meta.n_actions
                && w.q_scale == grid.q_max() =>
        {
            w.validate()?;
            w.clone()
        }
        _ => Mlp::init(
            meta.n_states,
            meta.n_actions,
            &hyper.hidden,
            grid.q_max(),
            seed,
        ),
    };

    let visited = targets
        .counts
        .iter()
        .flatten()
        .filter(|&&n| n > 0)
        .count()
        .max(1);
    let n_bar = targets.total_count() as f64 / visited as f64;
    let mut cells = Vec::new();
    for i in 0..meta.n_states {
        for k in 0..meta.n_actions {
            let n = targets.counts[i][k];
            // Unvisited pairs carry fallback targets with unit weight.
            let weight = if n == 0 { 1.0 } else { n as f64 / n_bar };
            for m in 0..grid.len() {
                cells.push(Cell {
                    i,
                    k,
                    m,
                    weight,
                    target: targets.mean[i][k][m],
                });
            }
        }
    }
    let penalty = hyper.beta / n_bar;
    let q = grid.points();
    let mut order: Vec<usize> = (0..cells.len()).collect();
    let mut rng = rng_from_seed(seed);
    let n_params = net.weights.len();
    let mut grad = vec![0.0; n_params];
    let mut m1 = vec![0.0; n_params];
    let mut m2 = vec![0.0; n_params];
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut cache_a = Cache {
        acts: Vec::new(),
        pre: Vec::new(),
    };
    let mut cache_b = Cache {
        acts: Vec::new(),
        pre: Vec::new(),
    };
    let mut step = 0usize;

    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(hyper.minibatch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            let mut loss = 0.0;
            for &c in batch {
                let cell = &cells[c];
                let f = net.forward(net.input(cell.i, cell.k, q[cell.m]), Some(&mut cache_a));
                let r = f - cell.target;
                loss += cell.weight * r * r;
                let mut d_a = 2.0 * cell.weight * r * scale;
                if penalty > 0.0 && cell.m + 1 < q.len() {
                    let f2 =
                        net.forward(net.input(cell.i, cell.k, q[cell.m + 1]), Some(&mut cache_b));
                    if f2 > f {
                        loss += penalty * (f2 - f);
                        d_a -= penalty * scale;
                        net.backward(&cache_b, penalty * scale, &mut grad);
                    }
                }
                net.backward(&cache_a, d_a, &mut grad);
            }
            step += 1;
            let loss = loss * scale;
            if !loss.is_finite() {
                return Err(Error::Divergence { step, loss });
            }
            match hyper.optimizer {
                Optimizer::Sgd => {
                    net.weights
                        .iter_mut()
                        .zip(&grad)
                        .for_each(|(w, g)| *w -= hyper.learning_rate * g);
                }
                Optimizer::Adam => {
                    let c1 = 1.0 - b1.powi(step as i32);
                    let c2 = 1.0 - b2.powi(step as i32);
                    for p in 0..n_params {
                        m1[p] = b1 * m1[p] + (1.0 - b1) * grad[p];
                        m2[p] = b2 * m2[p] + (1.0 - b2) * grad[p] * grad[p];
                        net.weights[p] -=
                            hyper.learning_rate * (m1[p] / c1) / ((m2[p] / c2).sqrt() + eps);
                    }
                }
            }
        }
    }

    let table: Vec<Vec<Vec<f64>>> = (0..meta.n_states)
        .map(|i| {
            (0..meta.n_actions)
                .map(|k| q.iter().map(|&qq| net.eval(i, k, qq)).collect())
                .collect()
        })
        .collect();
    if table.iter().flatten().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            step,
            loss: f64::NAN,
        });
    }
    let data_loss = targets.data_loss(&table);
    let psi = monotonicity_violation(&table);
    let approx = GApproximator {
        grid: grid.clone(),
        backend: Backend::Mlp(net),
    };
    Ok((
        approx,
        FitStats {
            data_loss,
            psi,
            steps: step,
        },
    ))
}

/// `ψ`: sum over `(i, k)` and grid neighbours of `(f(q_{m+1}) - f(q_m))_+`.
pub fn monotonicity_violation(values: &[Vec<Vec<f64>>]) -> f64 {
    values
        .iter()
        .flatten()
        .map(|row| row.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum::<f64>())
        .sum()
}
