//! Risk functionals over the augmented label space.
//!
//! Score matrices have one row per point and `K + 1` columns: the known
//! classes `1..K` in order, then `nc`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Features, FiniteDistribution, Label};
use crate::error::{Error, Result};
use crate::loss::SurrogateLoss;

/// A set of `K + 1` score functions `f_1..f_K, f_nc`.
pub trait ScoreFunctions {
    fn num_known(&self) -> usize;

    /// Score matrix of shape `points.len() x (K + 1)`.
    fn scores(&self, points: &Features) -> Result<DMatrix<f64>>;
}

/// Score functions given by a closure from a point to its `K + 1` scores.
pub struct FnScores<F> {
    num_known: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64>> FnScores<F> {
    pub fn new(num_known: usize, f: F) -> Self {
        FnScores { num_known, f }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> ScoreFunctions for FnScores<F> {
    fn num_known(&self) -> usize {
        self.num_known
    }

    fn scores(&self, points: &Features) -> Result<DMatrix<f64>> {
        let cols = self.num_known + 1;
        let mut out = DMatrix::zeros(points.len(), cols);
        for (i, x) in points.rows().enumerate() {
            let s = (self.f)(x);
            if s.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: s.len(),
                });
            }
            for (j, v) in s.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("theta {theta} outside (0, 1]")))
    }
}

/// Unlabeled-part integrand `psi(f_nc) + sum_k psi(-f_k)` for one score row.
#[inline]
pub(crate) fn unlabeled_term(loss: SurrogateLoss, scores: &DMatrix<f64>, row: usize) -> f64 {
    let num_known = scores.ncols() - 1;
    let mut total = loss.value(scores[(row, num_known)]);
    for k in 0..num_known {
        total += loss.value(-scores[(row, k)]);
    }
    total
}

/// Weighted LAC risk
/// `theta * sum_i w_i (f_nc - f_{y_i})(x_i) + sum_j v_j (psi(f_nc) + sum_k psi(-f_k))(u_j)`.
/// With uniform weights `1/n` this is the empirical risk; with the
/// probabilities of a finite distribution it is the exact one.
pub fn weighted_lac_risk(
    labeled_scores: &DMatrix<f64>,
    labels: &[usize],
    labeled_weights: &[f64],
    unlabeled_scores: &DMatrix<f64>,
    unlabeled_weights: &[f64],
    theta: f64,
    loss: SurrogateLoss,
) -> Result<f64> {
    check_theta(theta)?;
    let cols = labeled_scores.ncols();
    if cols < 2 || unlabeled_scores.ncols() != cols {
        return Err(Error::DimensionMismatch {
            expected: cols,
            found: unlabeled_scores.ncols(),
        });
    }
    if labeled_scores.nrows() == 0 || unlabeled_scores.nrows() == 0 {
        return Err(Error::Empty("risk over an empty dataset".into()));
    }
    if labels.len() != labeled_scores.nrows() || labeled_weights.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labeled_scores.nrows(),
            found: labels.len(),
        });
    }
    if unlabeled_weights.len() != unlabeled_scores.nrows() {
        return Err(Error::DimensionMismatch {
            expected: unlabeled_scores.nrows(),
            found: unlabeled_weights.len(),
        });
    }
    let nc = cols - 1;
    let mut labeled = 0.0;
    for (i, (&y, &w)) in labels.iter().zip(labeled_weights).enumerate() {
        if y == 0 || y > nc {
            return Err(Error::InvalidArgument(format!("label {y} outside 1..={nc}")));
        }
        labeled += w * (labeled_scores[(i, nc)] - labeled_scores[(i, y - 1)]);
    }
    let mut unlabeled = 0.0;
    for (j, &v) in unlabeled_weights.iter().enumerate() {
        unlabeled += v * unlabeled_term(loss, unlabeled_scores, j);
    }
    Ok(theta * labeled + unlabeled)
}

/// Empirical LAC risk from score matrices of the labeled and unlabeled sets.
pub fn empirical_lac_risk(
    labeled_scores: &DMatrix<f64>,
    labels: &[usize],
    unlabeled_scores: &DMatrix<f64>,
    theta: f64,
    loss: SurrogateLoss,
) -> Result<f64> {
    let wl = vec![1.0 / labels.len().max(1) as f64; labels.len()];
    let wu = vec![1.0 / unlabeled_scores.nrows().max(1) as f64; unlabeled_scores.nrows()];
    weighted_lac_risk(labeled_scores, labels, &wl, unlabeled_scores, &wu, theta, loss)
}

/// Empirical LAC risk of score functions on datasets.
pub fn empirical_lac_risk_of(
    f: &dyn ScoreFunctions,
    labeled: &crate::data::LabeledDataset,
    unlabeled: &crate::data::UnlabeledDataset,
    theta: f64,
    loss: SurrogateLoss,
) -> Result<f64> {
    if f.num_known() != labeled.num_known() {
        return Err(Error::DimensionMismatch {
            expected: labeled.num_known(),
            found: f.num_known(),
        });
    }
    let ls = f.scores(labeled.features())?;
    let us = f.scores(unlabeled.features())?;
    empirical_lac_risk(&ls, labeled.labels(), &us, theta, loss)
}

fn check_table(dist: &FiniteDistribution, scores: &DMatrix<f64>) -> Result<()> {
    if scores.nrows() != dist.points().len() {
        return Err(Error::DimensionMismatch {
            expected: dist.points().len(),
            found: scores.nrows(),
        });
    }
    if scores.ncols() != dist.num_known() + 1 {
        return Err(Error::DimensionMismatch {
            expected: dist.num_known() + 1,
            found: scores.ncols(),
        });
    }
    Ok(())
}

/// One-versus-rest risk `E[psi(f_y) + sum_{k != y} psi(-f_k)]` over all
/// `K + 1` classes. `scores` is tabulated on `dist.points()`.
pub fn exact_ovr_risk(dist: &FiniteDistribution, scores: &DMatrix<f64>, loss: SurrogateLoss) -> Result<f64> {
    check_table(dist, scores)?;
    let cols = scores.ncols();
    let mut total = 0.0;
    for atom in dist.atoms() {
        let y = atom.label.index(dist.num_known());
        let mut v = 0.0;
        for k in 0..cols {
            let s = scores[(atom.point, k)];
            v += if k == y { loss.value(s) } else { loss.value(-s) };
        }
        total += atom.prob * v;
    }
    Ok(total)
}

/// Convex LAC risk `theta E_tr[f_nc - f_y] + E_te,X[psi(f_nc) + sum_k psi(-f_k)]`.
pub fn exact_lac_risk(dist: &FiniteDistribution, scores: &DMatrix<f64>, loss: SurrogateLoss) -> Result<f64> {
    exact_lac_variant(dist, scores, loss, |s, y, nc| s[nc] - s[y])
}

/// Non-convex LAC risk with labeled integrand
/// `psi(f_y) - psi(-f_y) + psi(-f_nc) - psi(f_nc)`.
pub fn exact_nonconvex_lac_risk(
    dist: &FiniteDistribution,
    scores: &DMatrix<f64>,
    loss: SurrogateLoss,
) -> Result<f64> {
    exact_lac_variant(dist, scores, loss, |s, y, nc| {
        loss.value(s[y]) - loss.value(-s[y]) + loss.value(-s[nc]) - loss.value(s[nc])
    })
}

fn exact_lac_variant(
    dist: &FiniteDistribution,
    scores: &DMatrix<f64>,
    loss: SurrogateLoss,
    labeled_term: impl Fn(&[f64], usize, usize) -> f64,
) -> Result<f64> {
    check_table(dist, scores)?;
    let nc = dist.num_known();
    let mut row = vec![0.0; nc + 1];
    let mut labeled = 0.0;
    let mut unlabeled = 0.0;
    for atom in dist.atoms() {
        for (k, r) in row.iter_mut().enumerate() {
            *r = scores[(atom.point, k)];
        }
        if let Label::Known(y) = atom.label {
            // known atoms carry theta * p_tr, so this sum is already theta E_tr[...]
            labeled += atom.prob * labeled_term(&row, y - 1, nc);
        }
        unlabeled += atom.prob * unlabeled_term(loss, scores, atom.point);
    }
    Ok(labeled + unlabeled)
}

/// Fraction of mismatched labels.
pub fn zero_one_risk(predictions: &[Label], truths: &[Label]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            found: predictions.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::Empty("zero-one risk of no predictions".into()));
    }
    let wrong = predictions.iter().zip(truths).filter(|(p, t)| p != t).count();
    Ok(wrong as f64 / truths.len() as f64)
}

/// Constants of the generalization bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    /// Bound on the RKHS norm of each score function.
    pub norm_bound: f64,
    /// Kernel bound with `k(x, x) <= r^2`.
    pub kernel_bound: f64,
    /// Lipschitz constant of the loss on `[-norm_bound * kernel_bound, norm_bound * kernel_bound]`.
    pub lipschitz: f64,
    /// Supremum of the loss on the same interval.
    pub loss_bound: f64,
    pub delta: f64,
    pub theta: f64,
    pub num_known: usize,
    pub n_labeled: f64,
    pub n_unlabeled: f64,
}

impl TheoryParams {
    /// Parameters for a Gaussian kernel (`r = 1`) and the given loss.
    pub fn for_loss(
        loss: SurrogateLoss,
        norm_bound: f64,
        delta: f64,
        theta: f64,
        num_known: usize,
        n_labeled: usize,
        n_unlabeled: usize,
    ) -> Self {
        let kernel_bound = 1.0;
        let range = norm_bound * kernel_bound;
        TheoryParams {
            norm_bound,
            kernel_bound,
            lipschitz: loss.lipschitz(range),
            loss_bound: loss.sup_on(range),
            delta,
            theta,
            num_known,
            n_labeled: n_labeled as f64,
            n_unlabeled: n_unlabeled as f64,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            self.norm_bound,
            self.kernel_bound,
            self.lipschitz,
            self.loss_bound,
            self.n_labeled,
            self.n_unlabeled,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument("bound constants must be positive and finite".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta {} outside (0, 1)", self.delta)));
        }
        if self.num_known == 0 {
            return Err(Error::InvalidArgument("at least one known class is required".into()));
        }
        check_theta(self.theta)
    }
}

/// Uniform deviation bound between the LAC risk and its empirical estimate.
pub fn theorem3_bound(p: &TheoryParams) -> Result<f64> {
    p.validate()?;
    let classes = (p.num_known + 1) as f64;
    let lr = p.norm_bound * p.kernel_bound;
    let log_term = (4.0 / p.delta).ln();
    Ok(2.0 * classes * lr / p.n_labeled.sqrt()
        + 6.0 * lr * (2.0 * log_term / p.n_labeled).sqrt()
        + 2.0 * classes * p.lipschitz * lr / p.n_unlabeled.sqrt()
        + 3.0 * classes * p.loss_bound * (log_term / p.n_unlabeled).sqrt())
}

/// Square-loss OVR minimizer `f_k = 2 eta_k - 1` for class posteriors `eta`.
pub fn square_loss_optimal_scores(posterior: &[f64]) -> Vec<f64> {
    posterior.iter().map(|&eta| 2.0 * eta - 1.0).collect()
}

/// Per-point class posteriors of a finite distribution; points with no mass
/// get all-zero rows.
pub fn finite_posteriors(dist: &FiniteDistribution) -> Vec<Vec<f64>> {
    dist.joint_table()
        .into_iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter().map(|p| p / total).collect()
            } else {
                row.iter().map(|_| 0.0).collect()
            }
        })
        .collect()
}

/// Bayes 0-1 risk of a finite distribution.
pub fn finite_bayes_risk(dist: &FiniteDistribution) -> f64 {
    dist.joint_table()
        .iter()
        .map(|row| row.iter().sum::<f64>() - row.iter().copied().fold(0.0, f64::max))
        .sum()
}

/// Minimal square-loss LAC risk `sum_x p(x) sum_k eta_k (1 - eta_k)`.
pub fn finite_minimal_square_risk(dist: &FiniteDistribution) -> f64 {
    dist.joint_table()
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            if total <= 0.0 {
                return 0.0;
            }
            row.iter().map(|p| p * (1.0 - p / total)).sum::<f64>()
        })
        .sum()
}

/// Argmax label of a score row; ties go to the smallest index, `nc` last.
pub fn argmax_label(row: &[f64]) -> Result<Label> {
    if row.len() < 2 {
        return Err(Error::InvalidArgument("need at least K + 1 = 2 scores".into()));
    }
    let mut best = 0;
    for (i, &s) in row.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::NonFinite("score".into()));
        }
        if s > row[best] {
            best = i;
        }
    }
    Ok(Label::from_index(best, row.len() - 1))
}

/// Expected 0-1 risk of the argmax rule on a finite distribution.
pub fn finite_zero_one_risk(dist: &FiniteDistribution, scores: &DMatrix<f64>) -> Result<f64> {
    check_table(dist, scores)?;
    let mut predicted = Vec::with_capacity(scores.nrows());
    for i in 0..scores.nrows() {
        let row: Vec<f64> = scores.row(i).iter().copied().collect();
        predicted.push(argmax_label(&row)?);
    }
    Ok(dist
        .atoms()
        .iter()
        .filter(|a| predicted[a.point] != a.label)
        .map(|a| a.prob)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Atom;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_scores(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-3.0..3.0))
    }

    #[test]
    fn zero_functions_square_k1() {
        let ls = DMatrix::zeros(3, 2);
        let us = DMatrix::zeros(4, 2);
        let r = empirical_lac_risk(&ls, &[1, 1, 1], &us, 0.5, SurrogateLoss::Square).unwrap();
        assert_eq!(r, 0.5);
    }

    #[test]
    fn hand_computed_example() {
        let ls = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let us = DMatrix::from_row_slice(1, 2, &[-1.0, 2.0]);
        let r = empirical_lac_risk(&ls, &[1], &us, 0.6, SurrogateLoss::Square).unwrap();
        assert_relative_eq!(r, -0.35, epsilon = 1e-15);
    }

    #[test]
    fn empirical_errors() {
        let ls = DMatrix::zeros(1, 3);
        let us = DMatrix::zeros(1, 2);
        assert!(empirical_lac_risk(&ls, &[1], &us, 0.5, SurrogateLoss::Square).is_err());
        let us = DMatrix::zeros(0, 3);
        assert!(empirical_lac_risk(&ls, &[1], &us, 0.5, SurrogateLoss::Square).is_err());
        let us = DMatrix::zeros(1, 3);
        assert!(empirical_lac_risk(&ls, &[1], &us, 0.0, SurrogateLoss::Square).is_err());
        assert!(empirical_lac_risk(&ls, &[3], &us, 0.5, SurrogateLoss::Square).is_err());
    }

    #[test]
    fn ovr_examples() {
        let points = Features::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let atoms = vec![
            Atom { point: 0, label: Label::Known(1), prob: 0.3 },
            Atom { point: 1, label: Label::Known(2), prob: 0.3 },
            Atom { point: 1, label: Label::New, prob: 0.4 },
        ];
        let dist = FiniteDistribution::new(points.clone(), atoms, 0.6, 2).unwrap();
        let zero = DMatrix::zeros(2, 3);
        assert_relative_eq!(exact_ovr_risk(&dist, &zero, SurrogateLoss::Square).unwrap(), 0.75, epsilon = 1e-15);

        let single = FiniteDistribution::new(
            points,
            vec![Atom { point: 0, label: Label::Known(1), prob: 1.0 }],
            1.0,
            2,
        )
        .unwrap();
        let s = DMatrix::from_row_slice(2, 3, &[1.0, -1.0, -1.0, 0.0, 0.0, 0.0]);
        assert_eq!(exact_ovr_risk(&single, &s, SurrogateLoss::Square).unwrap(), 0.0);
    }

    #[test]
    fn zero_functions_lac_k1() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dist = FiniteDistribution::random(&mut rng, 6, 10, 2, 1, 0.4).unwrap();
        let zero = DMatrix::zeros(6, 2);
        assert_relative_eq!(exact_lac_risk(&dist, &zero, SurrogateLoss::Square).unwrap(), 0.5, epsilon = 1e-15);
    }

    // independent path: expand the OVR risk class by class from the joint table
    fn ovr_reference(dist: &FiniteDistribution, scores: &DMatrix<f64>, loss: SurrogateLoss) -> f64 {
        let table = dist.joint_table();
        let mut total = 0.0;
        for (x, row) in table.iter().enumerate() {
            for (y, &p) in row.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let positive = loss.value(scores[(x, y)]);
                let negative: f64 = (0..row.len()).filter(|&k| k != y).map(|k| loss.value(-scores[(x, k)])).sum();
                total += p * (positive + negative);
            }
        }
        total
    }

    #[test]
    fn ovr_matches_reference_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for loss in SurrogateLoss::ALL {
            let dist = FiniteDistribution::random(&mut rng, 12, 20, 2, 3, 0.7).unwrap();
            let s = random_scores(&mut rng, 12, 4);
            let a = exact_ovr_risk(&dist, &s, loss).unwrap();
            assert!((a - ovr_reference(&dist, &s, loss)).abs() <= 1e-12);
        }
    }

    #[test]
    fn lac_equalities() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for trial in 0..100 {
            let loss = SurrogateLoss::ALL[trial % 3];
            let k = rng.gen_range(1..5);
            let theta = rng.gen_range(0.05..=1.0);
            let n_points = rng.gen_range(1..30);
            let n_atoms = rng.gen_range(k + 1..=50);
            let dist = FiniteDistribution::random(&mut rng, n_points, n_atoms, 2, k, theta).unwrap();
            let s = random_scores(&mut rng, n_points, k + 1);
            let ovr = exact_ovr_risk(&dist, &s, loss).unwrap();
            assert!((ovr - exact_lac_risk(&dist, &s, loss).unwrap()).abs() <= 1e-10);
            assert!((ovr - exact_nonconvex_lac_risk(&dist, &s, loss).unwrap()).abs() <= 1e-10);
        }
    }

    #[test]
    fn weighted_support_equals_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dist = FiniteDistribution::random(&mut rng, 15, 30, 2, 2, 0.65).unwrap();
        let s = random_scores(&mut rng, 15, 3);
        let known: Vec<&Atom> = dist.atoms().iter().filter(|a| !a.label.is_new()).collect();
        let ls = DMatrix::from_fn(known.len(), 3, |i, j| s[(known[i].point, j)]);
        let labels: Vec<usize> = known.iter().map(|a| a.label.index(2) + 1).collect();
        let wl: Vec<f64> = known.iter().map(|a| a.prob / dist.theta()).collect();
        let all = dist.atoms();
        let us = DMatrix::from_fn(all.len(), 3, |i, j| s[(all[i].point, j)]);
        let wu: Vec<f64> = all.iter().map(|a| a.prob).collect();
        let w = weighted_lac_risk(&ls, &labels, &wl, &us, &wu, dist.theta(), SurrogateLoss::Logistic).unwrap();
        let exact = exact_lac_risk(&dist, &s, SurrogateLoss::Logistic).unwrap();
        assert!((w - exact).abs() <= 1e-12);
    }

    #[test]
    fn unbiased_in_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dist = FiniteDistribution::random(&mut rng, 10, 25, 2, 2, 0.6).unwrap();
        let s = random_scores(&mut rng, 10, 3);
        let loss = SurrogateLoss::Square;
        let target = exact_ovr_risk(&dist, &s, loss).unwrap();
        let draws = 1000;
        let mut values = Vec::with_capacity(draws);
        for _ in 0..draws {
            let lab = dist.sample_training(&mut rng, 50);
            let unl = dist.sample_marginal(&mut rng, 50);
            let ls = DMatrix::from_fn(50, 3, |i, j| s[(lab[i].0, j)]);
            let labels: Vec<usize> = lab.iter().map(|p| p.1).collect();
            let us = DMatrix::from_fn(50, 3, |i, j| s[(unl[i], j)]);
            values.push(empirical_lac_risk(&ls, &labels, &us, dist.theta(), loss).unwrap());
        }
        let mean = crate::stats::mean(&values);
        let se = crate::stats::std_dev(&values) / (draws as f64).sqrt();
        assert!((mean - target).abs() <= 3.0 * se, "{mean} vs {target} (se {se})");
    }

    #[test]
    fn excess_risk_transfer_on_finite_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let theta = rng.gen_range(0.2..1.0);
            let dist = FiniteDistribution::random(&mut rng, 8, 24, 1, 2, theta).unwrap();
            let bayes = finite_bayes_risk(&dist);
            let best = finite_minimal_square_risk(&dist);
            let optimal = finite_posteriors(&dist);
            let opt = DMatrix::from_fn(8, 3, |i, j| square_loss_optimal_scores(&optimal[i])[j]);
            assert!((exact_lac_risk(&dist, &opt, SurrogateLoss::Square).unwrap() - best).abs() <= 1e-12);
            for _ in 0..5 {
                let s = random_scores(&mut rng, 8, 3);
                let lhs = finite_zero_one_risk(&dist, &s).unwrap() - bayes;
                let excess = exact_lac_risk(&dist, &s, SurrogateLoss::Square).unwrap() - best;
                assert!(excess >= -1e-12);
                assert!(lhs <= (2.0 * excess.max(0.0)).sqrt() + 1e-8);
            }
        }
    }

    #[test]
    fn zero_one_examples() {
        use Label::{Known, New};
        assert_eq!(zero_one_risk(&[Known(1), New], &[Known(1), New]).unwrap(), 0.0);
        assert_eq!(zero_one_risk(&[Known(1), New], &[New, Known(2)]).unwrap(), 1.0);
        let p = [Known(1), Known(2), New, Known(1)];
        let t = [Known(1), New, New, Known(2)];
        assert_eq!(zero_one_risk(&p, &t).unwrap(), 0.5);
        assert!(zero_one_risk(&p, &t[..3]).is_err());
    }

    #[test]
    fn bound_value() {
        let p = TheoryParams {
            norm_bound: 1.0,
            kernel_bound: 1.0,
            lipschitz: 1.0,
            loss_bound: 1.0,
            delta: 0.05,
            theta: 0.7,
            num_known: 2,
            n_labeled: 1000.0,
            n_unlabeled: 1000.0,
        };
        let log_term = (4.0f64 / 0.05).ln();
        let expected = 6.0 / 1000f64.sqrt()
            + 6.0 * (2.0 * log_term / 1000.0).sqrt()
            + 6.0 / 1000f64.sqrt()
            + 9.0 * (log_term / 1000.0).sqrt();
        let b = theorem3_bound(&p).unwrap();
        assert_relative_eq!(b, expected, epsilon = 1e-14);
        assert!((b - 1.5369).abs() < 5e-4);

        let huge = TheoryParams { n_labeled: 1e16, n_unlabeled: 1e16, ..p };
        assert!(theorem3_bound(&huge).unwrap() < 1e-6);

        let values: Vec<f64> = [100.0, 1000.0, 10000.0]
            .iter()
            .map(|&n| theorem3_bound(&TheoryParams { n_unlabeled: n, ..p }).unwrap())
            .collect();
        assert!(values[0] > values[1] && values[1] > values[2]);
        assert!(theorem3_bound(&TheoryParams { delta: 1.0, ..p }).is_err());
    }

    #[test]
    fn argmax_rule() {
        assert_eq!(argmax_label(&[0.2, 0.5, -0.1]).unwrap(), Label::Known(2));
        assert_eq!(argmax_label(&[0.5, 0.5, 0.1]).unwrap(), Label::Known(1));
        assert_eq!(argmax_label(&[-1.0, -2.0, 0.3]).unwrap(), Label::New);
        assert_eq!(argmax_label(&[0.3, -2.0, 0.3]).unwrap(), Label::Known(1));
        assert!(argmax_label(&[f64::NAN, 0.0]).is_err());
    }
}
