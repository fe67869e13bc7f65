//! Convex surrogate losses satisfying `psi(z) - psi(-z) = -z`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateLoss {
    /// `(1 - z)^2 / 4`
    Square,
    /// `log(1 + exp(-z))`
    Logistic,
    /// `max(-z, max(0, 1/2 - z/2))`
    DoubleHinge,
}

impl SurrogateLoss {
    pub const ALL: [SurrogateLoss; 3] = [
        SurrogateLoss::Square,
        SurrogateLoss::Logistic,
        SurrogateLoss::DoubleHinge,
    ];

    #[inline]
    pub fn value(self, z: f64) -> f64 {
        match self {
            SurrogateLoss::Square => 0.25 * (1.0 - z) * (1.0 - z),
            SurrogateLoss::Logistic => {
                if z > 30.0 {
                    (-z).exp().ln_1p()
                } else if z < -30.0 {
                    -z + z.exp().ln_1p()
                } else {
                    (-z).exp().ln_1p()
                }
            }
            SurrogateLoss::DoubleHinge => (-z).max((0.5 - 0.5 * z).max(0.0)),
        }
    }

    /// Derivative, with the midpoint subgradient at double-hinge kinks.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            SurrogateLoss::Square => 0.5 * (z - 1.0),
            SurrogateLoss::Logistic => {
                if z >= 0.0 {
                    let e = (-z).exp();
                    -e / (1.0 + e)
                } else {
                    -1.0 / (1.0 + z.exp())
                }
            }
            SurrogateLoss::DoubleHinge => {
                if z < -1.0 {
                    -1.0
                } else if z == -1.0 {
                    -0.75
                } else if z < 1.0 {
                    -0.5
                } else if z == 1.0 {
                    -0.25
                } else {
                    0.0
                }
            }
        }
    }

    pub fn checked_value(self, z: f64) -> Result<f64> {
        if !z.is_finite() {
            return Err(Error::NonFinite("loss argument".into()));
        }
        Ok(self.value(z))
    }

    pub fn checked_derivative(self, z: f64) -> Result<f64> {
        if !z.is_finite() {
            return Err(Error::NonFinite("loss argument".into()));
        }
        Ok(self.derivative(z))
    }

    /// `max |psi(z) - psi(-z) + z|` over the grid.
    pub fn lac_condition_violation(self, grid: &[f64]) -> f64 {
        grid.iter()
            .map(|&z| (self.value(z) - self.value(-z) + z).abs())
            .fold(0.0, f64::max)
    }

    /// Lipschitz constant on `[-bound, bound]`.
    pub fn lipschitz(self, bound: f64) -> f64 {
        match self {
            SurrogateLoss::Square => 0.5 * (bound + 1.0),
            SurrogateLoss::Logistic | SurrogateLoss::DoubleHinge => 1.0,
        }
    }

    /// Supremum of the loss on `[-bound, bound]`, attained at `-bound`.
    pub fn sup_on(self, bound: f64) -> f64 {
        self.value(-bound)
    }

    pub fn name(self) -> &'static str {
        match self {
            SurrogateLoss::Square => "square",
            SurrogateLoss::Logistic => "logistic",
            SurrogateLoss::DoubleHinge => "double-hinge",
        }
    }
}

impl fmt::Display for SurrogateLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SurrogateLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "square" => Ok(SurrogateLoss::Square),
            "logistic" => Ok(SurrogateLoss::Logistic),
            "double-hinge" => Ok(SurrogateLoss::DoubleHinge),
            "hinge" | "exponential" => Err(Error::UnsupportedLoss(s.to_string())),
            _ => Err(Error::InvalidArgument(format!(
                "unknown loss `{s}` (expected square, logistic or double-hinge)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(step: f64) -> Vec<f64> {
        let n = (20.0 / step).round() as i64;
        (0..=n).map(|i| -10.0 + i as f64 * step).collect()
    }

    #[test]
    fn value_examples() {
        let sq = SurrogateLoss::Square;
        assert_eq!(sq.value(1.0), 0.0);
        assert_eq!(sq.value(0.0), 0.25);
        assert_eq!(sq.value(-1.0), 1.0);
        assert_relative_eq!(SurrogateLoss::Logistic.value(0.0), 0.6931472, epsilon = 1e-7);
        let dh = SurrogateLoss::DoubleHinge;
        assert_eq!(dh.value(2.0), 0.0);
        assert_eq!(dh.value(0.0), 0.5);
        assert_eq!(dh.value(-2.0), 2.0);
    }

    #[test]
    fn logistic_is_overflow_safe() {
        let l = SurrogateLoss::Logistic;
        assert_relative_eq!(l.value(-800.0), 800.0, epsilon = 1e-12);
        assert!(l.value(800.0) >= 0.0 && l.value(800.0) < 1e-300);
        assert_eq!(l.derivative(-800.0), -1.0);
        assert_eq!(l.derivative(800.0), -0.0);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(SurrogateLoss::Square.derivative(1.0), 0.0);
        assert_eq!(SurrogateLoss::Logistic.derivative(0.0), -0.5);
        let dh = SurrogateLoss::DoubleHinge;
        assert_eq!(dh.derivative(-1.0), -0.75);
        assert_eq!(dh.derivative(1.0), -0.25);
        assert_eq!(dh.derivative(0.0), -0.5);
        assert_eq!(dh.derivative(-3.0), -1.0);
        assert_eq!(dh.derivative(3.0), 0.0);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for loss in SurrogateLoss::ALL {
            let mut checked = 0;
            while checked < 100 {
                let z: f64 = rng.gen_range(-5.0..5.0);
                if loss == SurrogateLoss::DoubleHinge && ((z + 1.0).abs() < 1e-3 || (z - 1.0).abs() < 1e-3) {
                    continue;
                }
                let fd = (loss.value(z + h) - loss.value(z - h)) / (2.0 * h);
                assert!((fd - loss.derivative(z)).abs() <= 1e-5, "{loss} at {z}");
                checked += 1;
            }
        }
    }

    #[test]
    fn lac_condition_holds() {
        for loss in SurrogateLoss::ALL {
            assert!(loss.lac_condition_violation(&grid(0.1)) <= 1e-12, "{loss}");
            assert!(loss.lac_condition_violation(&grid(0.01)) <= 1e-12, "{loss}");
        }
    }

    #[test]
    fn smaller_loss_for_positive_margin() {
        for loss in SurrogateLoss::ALL {
            for z in grid(0.01).into_iter().filter(|&z| z > 0.0) {
                assert!(loss.value(z) < loss.value(-z), "{loss} at {z}");
            }
        }
    }

    #[test]
    fn parsing() {
        assert_eq!("square".parse::<SurrogateLoss>().unwrap(), SurrogateLoss::Square);
        assert_eq!("double-hinge".parse::<SurrogateLoss>().unwrap(), SurrogateLoss::DoubleHinge);
        assert_eq!("double_hinge".parse::<SurrogateLoss>().unwrap(), SurrogateLoss::DoubleHinge);
        assert!(matches!("hinge".parse::<SurrogateLoss>(), Err(Error::UnsupportedLoss(_))));
        assert!(matches!("exponential".parse::<SurrogateLoss>(), Err(Error::UnsupportedLoss(_))));
        assert!(matches!("ramp".parse::<SurrogateLoss>(), Err(Error::InvalidArgument(_))));
        for loss in SurrogateLoss::ALL {
            assert_eq!(loss.to_string().parse::<SurrogateLoss>().unwrap(), loss);
        }
    }

    #[test]
    fn non_finite_rejected() {
        assert!(SurrogateLoss::Square.checked_value(f64::NAN).is_err());
        assert!(SurrogateLoss::Logistic.checked_derivative(f64::INFINITY).is_err());
    }

    proptest! {
        #[test]
        fn convex_and_nonnegative(z1 in -20.0f64..20.0, z2 in -20.0f64..20.0, t in 0.0f64..=1.0) {
            for loss in SurrogateLoss::ALL {
                let mid = loss.value(t * z1 + (1.0 - t) * z2);
                prop_assert!(mid <= t * loss.value(z1) + (1.0 - t) * loss.value(z2) + 1e-12);
                prop_assert!(loss.value(z1) >= 0.0);
            }
        }
    }
}
