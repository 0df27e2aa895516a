use super::estimate::CellTargets;
use super::{Backend, FitStats, GApproximator, ProblemMeta, QGrid};
use crate::error::Result;
use crate::mdp::Dataset;

/// Cell means of the hinge targets, before any shape projection.
///
/// Each `(i, k, m)` cell is its own least-squares problem, so the cell mean is the
/// unconstrained minimizer of the empirical loss over the table class.
pub fn fit_table_raw(
    dataset: &Dataset,
    v_hat: &[f64],
    grid: &QGrid,
    meta: &ProblemMeta,
) -> Result<Vec<Vec<Vec<f64>>>> {
    Ok(CellTargets::new(dataset, v_hat, grid, meta)?.mean)
}

/// Cell means followed by a non-increasing isotonic projection along the grid.
pub fn fit_g_table(
    dataset: &Dataset,
    v_hat: &[f64],
    grid: &QGrid,
    meta: &ProblemMeta,
) -> Result<(GApproximator, FitStats)> {
    let targets = CellTargets::new(dataset, v_hat, grid, meta)?;
    let mut values = targets.mean.clone();
    for row in values.iter_mut().flatten() {
        isotonic_nonincreasing(row);
    }
    let data_loss = targets.data_loss(&values);
    let approx = GApproximator {
        grid: grid.clone(),
        backend: Backend::Table { values },
    };
    Ok((
        approx,
        FitStats {
            data_loss,
            psi: 0.0,
            steps: 0,
        },
    ))
}

/// In-place L2 projection onto non-increasing sequences (pool adjacent violators, unit weights).
pub fn isotonic_nonincreasing(y: &mut [f64]) {
    // Blocks of (mean, size); each new value merges backwards while it exceeds its predecessor.
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y.iter() {
        let mut cur = (v, 1usize);
        while let Some(&(m, n)) = blocks.last() {
            if cur.0 > m {
                blocks.pop();
                let size = n + cur.1;
                cur = ((m * n as f64 + cur.0 * cur.1 as f64) / size as f64, size);
            } else {
                break;
            }
        }
        blocks.push(cur);
    }
    let mut idx = 0;
    for (m, n) in blocks {
        y[idx..idx + n].iter_mut().for_each(|x| *x = m);
        idx += n;
    }
}
