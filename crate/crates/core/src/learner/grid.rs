use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Increasing grid of q values starting at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QGrid {
    points: Vec<f64>,
}

impl QGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::validation("q grid needs at least two points"));
        }
        if points[0] != 0.0 {
            return Err(Error::validation(format!(
                "q grid must start at 0, starts at {}",
                points[0]
            )));
        }
        if points.iter().any(|q| !q.is_finite()) || points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation(
                "q grid must be finite and strictly increasing",
            ));
        }
        Ok(QGrid { points })
    }

    /// `m` equally spaced points covering `[0, q_max]`, both ends included.
    pub fn uniform(m: usize, q_max: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::validation(format!(
                "m_grid must be at least 2, got {m}"
            )));
        }
        if !(q_max.is_finite() && q_max > 0.0) {
            return Err(Error::validation(format!(
                "q_max must be positive, got {q_max}"
            )));
        }
        let step = q_max / (m - 1) as f64;
        let mut pts: Vec<f64> = (0..m).map(|n| n as f64 * step).collect();
        pts[m - 1] = q_max;
        QGrid::new(pts)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn q_max(&self) -> f64 {
        *self.points.last().unwrap()
    }

    /// Largest gap between neighbouring points.
    pub fn spacing(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}
