//! Estimation of the known-class proportion `theta` in the test distribution
//! by kernel mean embeddings.
//!
//! For a candidate `c >= 1` with `t = 1 / c`, the distance
//!
//! `d(c) = min over w in the simplex of |mu_U - t mu_L - (1 - t) sum_j w_j phi(u_j)|`
//!
//! measures whether `mu_U - t mu_L` is still `(1 - t)` times a distribution
//! supported on the unlabeled sample. It stays near zero while `t <= theta`
//! and grows once `t` exceeds `theta`. Scanning `c` downward, the estimate is
//! `1 / c` at the last grid point before the slope of `d` first exceeds
//! `tau * (1/sqrt(n_l) + 1/sqrt(n_u))`.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Features;
use crate::error::{Error, Result};
use crate::kernel::{median_heuristic, GaussianKernel};

const MIN_THETA: f64 = 1e-3;
const QP_MAX_ITERATIONS: usize = 20_000;
const QP_GAP_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaOptions {
    /// Slope threshold constant.
    pub tau: f64,
    /// Number of log-spaced candidates for `1 / theta`.
    pub grid_size: usize,
    /// Largest candidate for `1 / theta`.
    pub c_max: f64,
}

impl Default for ThetaOptions {
    fn default() -> Self {
        ThetaOptions {
            tau: 2.0,
            grid_size: 64,
            c_max: 20.0,
        }
    }
}

/// One point of the diagnostic curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Candidate for `1 / theta`.
    pub c: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub theta: f64,
    /// Distance curve in increasing `c`; empty for an override.
    pub curve: Vec<CurvePoint>,
    pub threshold: Option<f64>,
    /// False when the curve never crossed the threshold (no new class seen)
    /// or for an override.
    pub detected: bool,
}

/// A user-supplied `theta`.
pub fn theta_override(value: f64) -> Result<ThetaEstimate> {
    if !(value > 0.0 && value <= 1.0) {
        return Err(Error::InvalidArgument(format!("theta {value} outside (0, 1]")));
    }
    Ok(ThetaEstimate {
        theta: value,
        curve: Vec::new(),
        threshold: None,
        detected: false,
    })
}

/// Log-spaced grid of `size` points over `[1, c_max]`, increasing.
fn candidate_grid(size: usize, c_max: f64) -> Vec<f64> {
    let top = c_max.ln();
    (0..size)
        .map(|i| (top * i as f64 / (size - 1) as f64).exp())
        .collect()
}

fn mean(m: &DMatrix<f64>) -> f64 {
    m.sum() / (m.nrows() * m.ncols()) as f64
}

/// `min over the simplex of w' G w - 2 w' target`, warm-started at `w`.
///
/// Frank-Wolfe with away steps and exact line search. `G w` is kept up to
/// date from single Gram columns, so each step costs O(n). Stops when the
/// Frank-Wolfe duality gap is at most `gap_tolerance`.
fn simplex_qp(g: &DMatrix<f64>, target: &DVector<f64>, w: &mut DVector<f64>, gap_tolerance: f64) -> f64 {
    let n = w.len();
    let mut gw = g * &*w;
    let mut quad = w.dot(&gw);
    for _ in 0..QP_MAX_ITERATIONS {
        // gradient is 2 (G w - target); the factor 2 is dropped in comparisons
        let mut toward = 0;
        let mut away = usize::MAX;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let grad = gw[i] - target[i];
            if grad < lo {
                lo = grad;
                toward = i;
            }
            if w[i] > 0.0 && grad > hi {
                hi = grad;
                away = i;
            }
        }
        let current = quad - w.dot(target);
        let fw_gap = 2.0 * (current - lo);
        if fw_gap <= gap_tolerance {
            break;
        }
        let away_gap = 2.0 * (hi - current);
        if fw_gap >= away_gap || away == usize::MAX {
            // direction e_j - w
            let col = g.column(toward);
            let curvature = g[(toward, toward)] - 2.0 * gw[toward] + quad;
            let step = if curvature > 0.0 { (fw_gap / (2.0 * curvature)).min(1.0) } else { 1.0 };
            *w *= 1.0 - step;
            w[toward] += step;
            gw.zip_apply(&col, |q, c| *q = (1.0 - step) * *q + step * c);
        } else {
            // direction w - e_a, bounded so that w_a stays nonnegative
            let wa = w[away];
            let max_step = if wa < 1.0 { wa / (1.0 - wa) } else { f64::INFINITY };
            let col = g.column(away);
            let curvature = quad - 2.0 * gw[away] + g[(away, away)];
            let step = if curvature > 0.0 { (away_gap / (2.0 * curvature)).min(max_step) } else { max_step };
            if !step.is_finite() {
                break;
            }
            *w *= 1.0 + step;
            w[away] -= step;
            if step == max_step {
                w[away] = 0.0;
            }
            gw.zip_apply(&col, |q, c| *q = (1.0 + step) * *q - step * c);
        }
        quad = w.dot(&gw);
    }
    quad - 2.0 * w.dot(target)
}

/// Estimates `theta` from labeled features (known classes) and unlabeled
/// features (test marginal) with the given kernel.
pub fn estimate_theta(
    labeled: &Features,
    unlabeled: &Features,
    kernel: GaussianKernel,
    options: &ThetaOptions,
) -> Result<ThetaEstimate> {
    if labeled.is_empty() || unlabeled.is_empty() {
        return Err(Error::Empty("theta estimation needs labeled and unlabeled data".into()));
    }
    if labeled.dim() != unlabeled.dim() {
        return Err(Error::DimensionMismatch {
            expected: labeled.dim(),
            found: unlabeled.dim(),
        });
    }
    if !(options.tau > 0.0) || options.grid_size < 2 || !(options.c_max > 1.0) {
        return Err(Error::InvalidArgument(
            "theta options need tau > 0, at least two grid points and c_max > 1".into(),
        ));
    }
    let g_ll = kernel.gram_symmetric(labeled)?;
    let g_uu = kernel.gram_symmetric(unlabeled)?;
    let g_lu = kernel.gram(labeled, unlabeled)?;
    let near_one = 1.0 - 1e-9;
    if g_ll.iter().chain(g_uu.iter()).chain(g_lu.iter()).all(|&v| v >= near_one) {
        return Err(Error::DegenerateKernel(
            "all kernel values are 1; the bandwidth is too large for the data".into(),
        ));
    }

    let n_l = labeled.len() as f64;
    let n_u = unlabeled.len() as f64;
    let a_l = mean(&g_ll);
    let a_u = mean(&g_uu);
    let a_ul = mean(&g_lu);
    let b_u = DVector::from_iterator(g_uu.ncols(), g_uu.column_iter().map(|c| c.mean()));
    let b_l = DVector::from_iterator(g_lu.ncols(), g_lu.column_iter().map(|c| c.mean()));

    let grid = candidate_grid(options.grid_size, options.c_max);
    let mut distances = vec![0.0; grid.len()];
    let mut w = DVector::from_element(g_uu.nrows(), 1.0 / n_u);
    for (i, &c) in grid.iter().enumerate().rev() {
        let t = 1.0 / c;
        let s = 1.0 - t;
        let residual = a_u - 2.0 * t * a_ul + t * t * a_l;
        let squared = if s <= 0.0 {
            residual
        } else {
            let target = (&b_u - &b_l * t) / s;
            let value = simplex_qp(&g_uu, &target, &mut w, QP_GAP_TOLERANCE / (s * s));
            residual + s * s * value
        };
        distances[i] = squared.max(0.0).sqrt();
    }
    let curve: Vec<CurvePoint> = grid
        .iter()
        .zip(&distances)
        .map(|(&c, &distance)| CurvePoint { c, distance })
        .collect();

    let threshold = options.tau * (1.0 / n_l.sqrt() + 1.0 / n_u.sqrt());
    let mut estimate = None;
    for i in (0..grid.len() - 1).rev() {
        let slope = (distances[i] - distances[i + 1]) / (grid[i + 1] - grid[i]);
        if slope > threshold {
            estimate = Some(1.0 / grid[i + 1]);
            break;
        }
    }
    let detected = estimate.is_some();
    let theta = match estimate {
        Some(t) => t.clamp(MIN_THETA, 1.0),
        None => {
            warn!("distance curve never crossed the slope threshold {threshold:.4}; assuming no new class (theta = 1)");
            1.0
        }
    };
    Ok(ThetaEstimate {
        theta,
        curve,
        threshold: Some(threshold),
        detected,
    })
}

/// [`estimate_theta`] with the median-heuristic bandwidth over both datasets.
pub fn estimate_theta_median(labeled: &Features, unlabeled: &Features, options: &ThetaOptions) -> Result<ThetaEstimate> {
    let pooled = labeled.concat(unlabeled)?;
    let kernel = GaussianKernel::new(median_heuristic(&pooled)?)?;
    estimate_theta(labeled, unlabeled, kernel, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sample_synthetic, SyntheticSpec};

    #[test]
    fn override_contract() {
        assert_eq!(theta_override(0.7).unwrap().theta, 0.7);
        assert_eq!(theta_override(1.0).unwrap().theta, 1.0);
        assert!(theta_override(1.0).unwrap().curve.is_empty());
        assert!(theta_override(0.0).is_err());
        assert!(theta_override(1.2).is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = candidate_grid(64, 20.0);
        assert_eq!(g.len(), 64);
        assert!((g[0] - 1.0).abs() < 1e-15);
        assert!((g[63] - 20.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn degenerate_kernel_rejected() {
        let l = Features::from_rows(&[vec![0.0], vec![1e-6]]).unwrap();
        let u = Features::from_rows(&[vec![0.0], vec![2e-6]]).unwrap();
        let k = GaussianKernel::new(1e6).unwrap();
        assert!(matches!(
            estimate_theta(&l, &u, k, &ThetaOptions::default()),
            Err(Error::DegenerateKernel(_))
        ));
    }

    fn estimate_for(theta: f64, seed: u64, n: usize) -> ThetaEstimate {
        let spec = SyntheticSpec::reference_2d().with_theta(theta).with_seed(seed);
        let split = sample_synthetic(&spec, n, n, 1).unwrap();
        estimate_theta_median(split.labeled.features(), split.unlabeled.features(), &ThetaOptions::default()).unwrap()
    }

    #[test]
    fn no_novelty_gives_high_theta() {
        let e = estimate_for(1.0, 3, 400);
        assert!(e.theta >= 0.9, "{}", e.theta);
        assert_eq!(e.curve.len(), 64);
    }

    #[test]
    fn recovers_mixture_proportion() {
        let e = estimate_for(0.5, 4, 400);
        assert!((e.theta - 0.5).abs() <= 0.1, "{}", e.theta);
        assert!(e.detected);
    }

    #[test]
    fn deterministic() {
        let a = estimate_for(0.7, 5, 150);
        let b = estimate_for(0.7, 5, 150);
        assert_eq!(a, b);
    }
}
