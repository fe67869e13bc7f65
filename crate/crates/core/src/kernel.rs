//! Gaussian kernel `k(x, y) = exp(-|x - y|^2 / (2 sigma^2))`, Gram matrices
//! and the median-heuristic bandwidth.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Features;
use crate::error::{Error, Result};

/// Bandwidth multipliers applied to the median heuristic in model selection.
pub const DEFAULT_SIGMA_MULTIPLIERS: [f64; 4] = [1e-2, 1e-1, 1.0, 10.0];

const FLUSH_EXPONENT: f64 = -50.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    sigma: f64,
}

fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

impl GaussianKernel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "kernel bandwidth must be positive and finite, got {sigma}"
            )));
        }
        Ok(GaussianKernel { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel argument".into()));
        }
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let exponent = -squared_distance(x, y) / (2.0 * self.sigma * self.sigma);
        // e^-50 is far below the resolution of k(x, x) = 1; flushing keeps the
        // chains of products in the solvers out of the slow subnormal range
        if exponent < FLUSH_EXPONENT {
            0.0
        } else {
            exponent.exp()
        }
    }

    /// Gram matrix with entry `(i, j) = k(rows_i, cols_j)`.
    ///
    /// Entries are exactly 0 for points more than 10 bandwidths apart.
    pub fn gram(&self, rows: &Features, cols: &Features) -> Result<DMatrix<f64>> {
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::Empty("gram matrix of an empty point set".into()));
        }
        if rows.dim() != cols.dim() {
            return Err(Error::DimensionMismatch {
                expected: rows.dim(),
                found: cols.dim(),
            });
        }
        Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            self.eval_unchecked(rows.row(i), cols.row(j))
        }))
    }

    /// Symmetric Gram matrix of one point set; each pair is evaluated once.
    pub fn gram_symmetric(&self, points: &Features) -> Result<DMatrix<f64>> {
        if points.is_empty() {
            return Err(Error::Empty("gram matrix of an empty point set".into()));
        }
        let n = points.len();
        let mut g = DMatrix::from_element(n, n, 1.0);
        for j in 0..n {
            for i in j + 1..n {
                let v = self.eval_unchecked(points.row(i), points.row(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }
}

/// Median of all pairwise Euclidean distances over distinct unordered pairs,
/// zero distances included. With an even number of pairs the two middle
/// values are averaged.
pub fn median_heuristic(points: &Features) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientSamples(
            "median heuristic needs at least two points".into(),
        ));
    }
    let mut distances = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            distances.push(squared_distance(points.row(i), points.row(j)).sqrt());
        }
    }
    let m = distances.len();
    let mid = m / 2;
    let (_, &mut upper, _) = distances.select_nth_unstable_by(mid, f64::total_cmp);
    let median = if m % 2 == 1 {
        upper
    } else {
        let lower = distances[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    };
    if median <= 0.0 {
        return Err(Error::DegenerateKernel(
            "median pairwise distance is zero".into(),
        ));
    }
    Ok(median)
}
