//! Regularized LAC risk minimization in the kernel dual.
//!
//! Each score function is a kernel expansion `f_k(x) = sum_i alpha_ik k(x, x_i)`
//! over the support `D_L` followed by `D_U`, and the objective is
//! `empirical LAC risk + lambda * sum_k alpha_k' G alpha_k`.

use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use faer::linalg::solvers::Solve;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Features, Label, LabeledDataset, UnlabeledDataset};
use crate::error::{Error, Result};
use crate::kernel::GaussianKernel;
use crate::loss::SurrogateLoss;
use crate::risk::{self, ScoreFunctions};

const JITTER: f64 = 1e-10;
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-16;
const REFRESH_EVERY: usize = 50;
/// Queries per kernel block when scoring, to bound memory.
const PREDICT_CHUNK: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub lambda: f64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            lambda: 0.1,
            max_iterations: 5000,
            gradient_tolerance: 1e-6,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn with_lambda(lambda: f64) -> Self {
        FitOptions {
            lambda,
            ..FitOptions::default()
        }
    }

    fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if !(self.gradient_tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "tolerance must be positive and max_iterations at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("theta {theta} outside (0, 1]")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    ClosedForm,
    FirstOrder,
}

/// Convergence record of a fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub method: FitMethod,
    pub iterations: usize,
    /// Max-norm of the objective gradient in `alpha` at the returned model.
    pub gradient_norm: f64,
    pub converged: bool,
    /// Objective after each accepted step, starting at `alpha = 0`.
    pub objective_trace: Vec<f64>,
}

/// The regularized objective on a fixed support with Gram matrix `gram`.
/// Rows `0..n_l` of the support are labeled, the rest unlabeled.
#[derive(Clone, Debug)]
pub struct LacObjective<'a> {
    gram: &'a DMatrix<f64>,
    labels: &'a [usize],
    num_known: usize,
    theta: f64,
    lambda: f64,
    loss: SurrogateLoss,
}

impl<'a> LacObjective<'a> {
    pub fn new(
        gram: &'a DMatrix<f64>,
        labels: &'a [usize],
        num_known: usize,
        theta: f64,
        lambda: f64,
        loss: SurrogateLoss,
    ) -> Result<Self> {
        check_theta(theta)?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be nonnegative, got {lambda}")));
        }
        if gram.nrows() != gram.ncols() || gram.nrows() <= labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len() + 1,
                found: gram.nrows(),
            });
        }
        if labels.is_empty() || num_known == 0 {
            return Err(Error::Empty("labeled part of the support".into()));
        }
        if let Some(&y) = labels.iter().find(|&&y| y == 0 || y > num_known) {
            return Err(Error::InvalidArgument(format!("label {y} outside 1..={num_known}")));
        }
        Ok(LacObjective {
            gram,
            labels,
            num_known,
            theta,
            lambda,
            loss,
        })
    }

    fn n_labeled(&self) -> usize {
        self.labels.len()
    }

    fn n_unlabeled(&self) -> usize {
        self.gram.nrows() - self.labels.len()
    }

    fn check_alpha(&self, alpha: &DMatrix<f64>) -> Result<()> {
        if alpha.nrows() != self.gram.nrows() || alpha.ncols() != self.num_known + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.gram.nrows() * (self.num_known + 1),
                found: alpha.nrows() * alpha.ncols(),
            });
        }
        Ok(())
    }

    /// Empirical LAC risk of the score tabulation `scores = G alpha`.
    fn risk_of_scores(&self, scores: &DMatrix<f64>) -> f64 {
        let n_l = self.n_labeled();
        let n_u = self.n_unlabeled();
        let nc = self.num_known;
        let mut labeled = 0.0;
        for (i, &y) in self.labels.iter().enumerate() {
            labeled += scores[(i, nc)] - scores[(i, y - 1)];
        }
        let mut unlabeled = 0.0;
        for j in n_l..n_l + n_u {
            unlabeled += risk::unlabeled_term(self.loss, scores, j);
        }
        self.theta * labeled / n_l as f64 + unlabeled / n_u as f64
    }

    /// Derivative of the empirical risk with respect to the score tabulation.
    fn score_gradient(&self, scores: &DMatrix<f64>) -> DMatrix<f64> {
        let n_l = self.n_labeled();
        let n_u = self.n_unlabeled();
        let nc = self.num_known;
        let mut d = DMatrix::zeros(n_l + n_u, nc + 1);
        let wl = self.theta / n_l as f64;
        for (i, &y) in self.labels.iter().enumerate() {
            d[(i, nc)] = wl;
            d[(i, y - 1)] = -wl;
        }
        let wu = 1.0 / n_u as f64;
        for j in n_l..n_l + n_u {
            d[(j, nc)] = wu * self.loss.derivative(scores[(j, nc)]);
            for k in 0..nc {
                d[(j, k)] = -wu * self.loss.derivative(-scores[(j, k)]);
            }
        }
        d
    }

    fn regularizer(&self, alpha: &DMatrix<f64>, scores: &DMatrix<f64>) -> f64 {
        alpha.dot(scores)
    }

    pub fn value(&self, alpha: &DMatrix<f64>) -> Result<f64> {
        self.check_alpha(alpha)?;
        let scores = self.gram * alpha;
        Ok(self.risk_of_scores(&scores) + self.lambda * self.regularizer(alpha, &scores))
    }

    /// Exact gradient `G (D + 2 lambda alpha)` where `D` is the score gradient.
    pub fn gradient(&self, alpha: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_alpha(alpha)?;
        let scores = self.gram * alpha;
        let inner = self.score_gradient(&scores) + alpha * (2.0 * self.lambda);
        Ok(self.gram * inner)
    }
}

/// Square-loss minimizer. Setting `D + 2 lambda alpha = 0` fixes the labeled
/// rows in closed form and leaves one SPD system in the unlabeled block,
/// shared by all `K + 1` columns.
pub(crate) fn solve_square(
    gram: &DMatrix<f64>,
    labels: &[usize],
    num_known: usize,
    theta: f64,
    lambda: f64,
) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    check_theta(theta)?;
    let n = gram.nrows();
    let n_l = labels.len();
    let n_u = n - n_l;
    if n_l == 0 || n_u == 0 {
        return Err(Error::Empty("labeled and unlabeled parts must be nonempty".into()));
    }
    let cols = num_known + 1;
    let mut alpha = DMatrix::zeros(n, cols);
    let scale = theta / (2.0 * lambda * n_l as f64);
    for (i, &y) in labels.iter().enumerate() {
        alpha[(i, y - 1)] = scale;
        alpha[(i, num_known)] = -scale;
    }

    let alpha_l = alpha.rows(0, n_l);
    let cross = gram.view((n_l, 0), (n_u, n_l)) * alpha_l;
    let mut rhs = DMatrix::zeros(n_u, cols);
    for j in 0..n_u {
        for k in 0..num_known {
            rhs[(j, k)] = -1.0 - cross[(j, k)];
        }
        rhs[(j, num_known)] = 1.0 - cross[(j, num_known)];
    }
    let mut system = DMatrix::zeros(n_u, n_u);
    for (j, mut col) in system.column_iter_mut().enumerate() {
        let start = (n_l + j) * n + n_l;
        col.as_mut_slice().copy_from_slice(&gram.as_slice()[start..start + n_u]);
    }
    let shift = 4.0 * lambda * n_u as f64 + JITTER;
    for j in 0..n_u {
        system[(j, j)] += shift;
    }
    let alpha_u = spd_solve(&system, &rhs)?;
    alpha.rows_mut(n_l, n_u).copy_from(&alpha_u);
    if alpha.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("closed-form coefficients".into()));
    }
    Ok(alpha)
}

/// Solves `system * x = rhs` for a symmetric positive definite `system` by
/// a blocked Cholesky factorization.
pub(crate) fn spd_solve(system: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = system.nrows();
    let a = faer::MatRef::from_column_major_slice(system.as_slice(), n, n);
    let b = faer::MatRef::from_column_major_slice(rhs.as_slice(), n, rhs.ncols());
    match a.llt(faer::Side::Lower) {
        Ok(llt) => {
            let x = llt.solve(b);
            Ok(DMatrix::from_fn(n, rhs.ncols(), |i, j| x[(i, j)]))
        }
        Err(_) => {
            let eig = system.symmetric_eigenvalues();
            let (lo, hi) = (eig.min(), eig.max());
            Err(Error::Singular {
                condition: if lo > 0.0 { hi / lo } else { f64::INFINITY },
            })
        }
    }
}

/// Descent along the negative kernel-space gradient `-(D + 2 lambda alpha)`
/// with Armijo backtracking. Stops when the max-norm of the true gradient
/// `G (D + 2 lambda alpha)` is at most the tolerance.
pub(crate) fn solve_first_order(
    objective: &LacObjective<'_>,
    options: &FitOptions,
) -> Result<(DMatrix<f64>, FitRecord)> {
    options.validate()?;
    let gram = objective.gram;
    let n = gram.nrows();
    let cols = objective.num_known + 1;
    let lambda = objective.lambda;

    let mut alpha = DMatrix::zeros(n, cols);
    let mut scores = DMatrix::zeros(n, cols);
    let mut reg = 0.0;
    let mut value = objective.risk_of_scores(&scores);
    let mut trace = vec![value];
    let mut iterations = 0;
    let mut converged = false;
    let mut gradient_norm;

    loop {
        let direction = -(objective.score_gradient(&scores) + &alpha * (2.0 * lambda));
        // G d is minus the gradient
        let scores_dir = gram * &direction;
        gradient_norm = scores_dir.amax();
        if gradient_norm <= options.gradient_tolerance {
            converged = true;
            break;
        }
        if iterations >= options.max_iterations {
            break;
        }
        let slope = -direction.dot(&scores_dir);
        let cross = direction.dot(&scores);
        let quad = direction.dot(&scores_dir);
        let mut step = 1.0;
        let accepted = loop {
            let trial_scores = &scores + &scores_dir * step;
            let trial_reg = reg + 2.0 * step * cross + step * step * quad;
            let trial = objective.risk_of_scores(&trial_scores) + lambda * trial_reg;
            if trial <= value + ARMIJO * step * slope {
                break Some((trial_scores, trial_reg, trial));
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some((new_scores, new_reg, new_value)) = accepted else {
            warn!("line search stalled after {iterations} iterations (gradient norm {gradient_norm:.3e})");
            break;
        };
        alpha += &direction * step;
        iterations += 1;
        if iterations % REFRESH_EVERY == 0 {
            scores = gram * &alpha;
            reg = alpha.dot(&scores);
            value = objective.risk_of_scores(&scores) + lambda * reg;
        } else {
            scores = new_scores;
            reg = new_reg;
            value = new_value;
        }
        trace.push(value);
    }
    if !converged {
        warn!(
            "first-order solver stopped after {iterations} iterations with gradient norm {gradient_norm:.3e} > {:.3e}",
            options.gradient_tolerance
        );
    }
    Ok((
        alpha,
        FitRecord {
            method: FitMethod::FirstOrder,
            iterations,
            gradient_norm,
            converged,
            objective_trace: trace,
        },
    ))
}

/// K + 1 kernel score functions with their fitting context.
#[derive(Clone, Debug, PartialEq)]
pub struct DualModel {
    support: Features,
    alpha: DMatrix<f64>,
    kernel: GaussianKernel,
    loss: SurrogateLoss,
    theta: f64,
    lambda: f64,
    label_table: Vec<i64>,
    record: FitRecord,
}

fn support_of(labeled: &LabeledDataset, unlabeled: &UnlabeledDataset) -> Result<Features> {
    if labeled.dim() != unlabeled.dim() {
        return Err(Error::DimensionMismatch {
            expected: labeled.dim(),
            found: unlabeled.dim(),
        });
    }
    labeled.features().concat(unlabeled.features())
}

/// Exact square-loss fit.
pub fn fit_square_closed_form(
    labeled: &LabeledDataset,
    unlabeled: &UnlabeledDataset,
    kernel: GaussianKernel,
    theta: f64,
    lambda: f64,
) -> Result<DualModel> {
    let support = support_of(labeled, unlabeled)?;
    let gram = kernel.gram_symmetric(&support)?;
    DualModel::from_gram_square(support, &gram, labeled, kernel, theta, lambda)
}

/// Gradient-descent fit for any supported loss.
pub fn fit_first_order(
    labeled: &LabeledDataset,
    unlabeled: &UnlabeledDataset,
    kernel: GaussianKernel,
    theta: f64,
    options: &FitOptions,
    loss: SurrogateLoss,
) -> Result<DualModel> {
    let support = support_of(labeled, unlabeled)?;
    let gram = kernel.gram_symmetric(&support)?;
    DualModel::from_gram_first_order(support, &gram, labeled, kernel, theta, options, loss)
}

/// Closed form for the square loss, gradient descent otherwise.
pub fn fit(
    labeled: &LabeledDataset,
    unlabeled: &UnlabeledDataset,
    kernel: GaussianKernel,
    theta: f64,
    loss: SurrogateLoss,
    options: &FitOptions,
) -> Result<DualModel> {
    match loss {
        SurrogateLoss::Square => fit_square_closed_form(labeled, unlabeled, kernel, theta, options.lambda),
        _ => fit_first_order(labeled, unlabeled, kernel, theta, options, loss),
    }
}

impl DualModel {
    pub(crate) fn from_gram_square(
        support: Features,
        gram: &DMatrix<f64>,
        labeled: &LabeledDataset,
        kernel: GaussianKernel,
        theta: f64,
        lambda: f64,
    ) -> Result<Self> {
        let alpha = solve_square(gram, labeled.labels(), labeled.num_known(), theta, lambda)?;
        let objective = LacObjective::new(
            gram,
            labeled.labels(),
            labeled.num_known(),
            theta,
            lambda,
            SurrogateLoss::Square,
        )?;
        let zero = DMatrix::zeros(alpha.nrows(), alpha.ncols());
        let record = FitRecord {
            method: FitMethod::ClosedForm,
            iterations: 1,
            gradient_norm: objective.gradient(&alpha)?.amax(),
            converged: true,
            objective_trace: vec![objective.value(&zero)?, objective.value(&alpha)?],
        };
        Ok(DualModel {
            support,
            alpha,
            kernel,
            loss: SurrogateLoss::Square,
            theta,
            lambda,
            label_table: labeled.label_table().to_vec(),
            record,
        })
    }

    pub(crate) fn from_gram_first_order(
        support: Features,
        gram: &DMatrix<f64>,
        labeled: &LabeledDataset,
        kernel: GaussianKernel,
        theta: f64,
        options: &FitOptions,
        loss: SurrogateLoss,
    ) -> Result<Self> {
        let objective = LacObjective::new(gram, labeled.labels(), labeled.num_known(), theta, options.lambda, loss)?;
        let (alpha, record) = solve_first_order(&objective, options)?;
        Ok(DualModel {
            support,
            alpha,
            kernel,
            loss,
            theta,
            lambda: options.lambda,
            label_table: labeled.label_table().to_vec(),
            record,
        })
    }

    /// Assembles a model from explicit coefficients.
    pub fn from_parts(
        support: Features,
        alpha: DMatrix<f64>,
        kernel: GaussianKernel,
        loss: SurrogateLoss,
        theta: f64,
        lambda: f64,
        label_table: Vec<i64>,
    ) -> Result<Self> {
        if alpha.nrows() != support.len() || alpha.ncols() != label_table.len() + 1 || label_table.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: support.len() * (label_table.len() + 1),
                found: alpha.nrows() * alpha.ncols(),
            });
        }
        if alpha.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dual coefficients".into()));
        }
        check_theta(theta)?;
        Ok(DualModel {
            support,
            alpha,
            kernel,
            loss,
            theta,
            lambda,
            label_table,
            record: FitRecord {
                method: FitMethod::ClosedForm,
                iterations: 0,
                gradient_norm: f64::NAN,
                converged: true,
                objective_trace: Vec::new(),
            },
        })
    }

    pub fn support(&self) -> &Features {
        &self.support
    }

    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub fn kernel(&self) -> GaussianKernel {
        self.kernel
    }

    pub fn loss(&self) -> SurrogateLoss {
        self.loss
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn label_table(&self) -> &[i64] {
        &self.label_table
    }

    pub fn record(&self) -> &FitRecord {
        &self.record
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    /// Squared RKHS norm of each score function.
    pub fn squared_norms(&self) -> Result<Vec<f64>> {
        let gram = self.kernel.gram_symmetric(&self.support)?;
        let scores = &gram * &self.alpha;
        Ok((0..self.alpha.ncols())
            .map(|k| self.alpha.column(k).dot(&scores.column(k)))
            .collect())
    }

    /// Predicted labels for every query point.
    pub fn predict(&self, queries: &Features) -> Result<Vec<Label>> {
        let scores = predict_scores(self, queries)?;
        (0..scores.nrows())
            .map(|i| predict_label(&scores.row(i).iter().copied().collect::<Vec<_>>()))
            .collect()
    }

    /// Text serialization; floats use the shortest representation that
    /// parses back to the same bits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "eulac-model 1");
        let _ = writeln!(out, "kernel-sigma {:?}", self.kernel.sigma());
        let _ = writeln!(out, "theta {:?}", self.theta);
        let _ = writeln!(out, "lambda {:?}", self.lambda);
        let _ = writeln!(out, "loss {}", self.loss);
        let table: Vec<String> = self.label_table.iter().map(i64::to_string).collect();
        let _ = writeln!(out, "label-table {}", table.join(" "));
        let r = &self.record;
        let _ = writeln!(
            out,
            "fit {} {} {:?} {}",
            match r.method {
                FitMethod::ClosedForm => "closed-form",
                FitMethod::FirstOrder => "first-order",
            },
            r.iterations,
            r.gradient_norm,
            r.converged
        );
        let _ = writeln!(out, "support {} {}", self.support.len(), self.support.dim());
        for row in self.support.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        let _ = writeln!(out, "alpha {} {}", self.alpha.nrows(), self.alpha.ncols());
        for i in 0..self.alpha.nrows() {
            let cells: Vec<String> = self.alpha.row(i).iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, &str)> {
            lines
                .next()
                .map(|(i, l)| (i + 1, l))
                .ok_or_else(|| Error::ModelFormat(format!("missing {what}")))
        };
        fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
            Error::ModelFormat(format!("line {line}: {msg}"))
        }
        fn keyed<'a>(line: (usize, &'a str), key: &str) -> Result<Vec<&'a str>> {
            let mut parts = line.1.split_whitespace();
            if parts.next() != Some(key) {
                return Err(bad(line.0, format!("expected `{key}`")));
            }
            Ok(parts.collect())
        }
        fn number<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
            s.parse().map_err(|_| bad(line, format!("cannot parse `{s}`")))
        }
        fn single<T: std::str::FromStr>(line: (usize, &str), key: &str) -> Result<T> {
            match keyed(line, key)?.as_slice() {
                [v] => number(line.0, v),
                _ => Err(bad(line.0, format!("`{key}` takes one value"))),
            }
        }

        let header = next("header")?;
        if header.1.trim() != "eulac-model 1" {
            return Err(bad(header.0, "unsupported header"));
        }
        let sigma: f64 = single(next("kernel-sigma")?, "kernel-sigma")?;
        let theta: f64 = single(next("theta")?, "theta")?;
        let lambda: f64 = single(next("lambda")?, "lambda")?;
        let loss_line = next("loss")?;
        let loss: SurrogateLoss = match keyed(loss_line, "loss")?.as_slice() {
            [v] => v.parse()?,
            _ => return Err(bad(loss_line.0, "`loss` takes one value")),
        };
        let table_line = next("label-table")?;
        let label_table = keyed(table_line, "label-table")?
            .into_iter()
            .map(|s| number::<i64>(table_line.0, s))
            .collect::<Result<Vec<_>>>()?;
        let fit_line = next("fit")?;
        let record = match keyed(fit_line, "fit")?.as_slice() {
            [method, iterations, gradient_norm, converged] => FitRecord {
                method: match *method {
                    "closed-form" => FitMethod::ClosedForm,
                    "first-order" => FitMethod::FirstOrder,
                    other => return Err(bad(fit_line.0, format!("unknown method `{other}`"))),
                },
                iterations: number(fit_line.0, iterations)?,
                gradient_norm: number(fit_line.0, gradient_norm)?,
                converged: number(fit_line.0, converged)?,
                objective_trace: Vec::new(),
            },
            _ => return Err(bad(fit_line.0, "`fit` takes four values")),
        };

        let mut matrix = |key: &str| -> Result<(usize, usize, Vec<f64>)> {
            let line = next(key)?;
            let (rows, cols) = match keyed(line, key)?.as_slice() {
                [r, c] => (number::<usize>(line.0, r)?, number::<usize>(line.0, c)?),
                _ => return Err(bad(line.0, format!("`{key}` takes two values"))),
            };
            let mut values = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (no, row) = next(key)?;
                let before = values.len();
                for cell in row.split_whitespace() {
                    values.push(number::<f64>(no, cell)?);
                }
                if values.len() - before != cols {
                    return Err(bad(no, format!("expected {cols} values")));
                }
            }
            Ok((rows, cols, values))
        };
        let (_, dim, support_values) = matrix("support")?;
        let (rows, cols, alpha_values) = matrix("alpha")?;
        let support = Features::new(dim, support_values)?;
        let alpha = DMatrix::from_row_slice(rows, cols, &alpha_values);
        let mut model = DualModel::from_parts(
            support,
            alpha,
            GaussianKernel::new(sigma)?,
            loss,
            theta,
            lambda,
            label_table,
        )?;
        model.record = record;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        DualModel::from_text(&text)
    }
}

impl ScoreFunctions for DualModel {
    fn num_known(&self) -> usize {
        self.label_table.len()
    }

    fn scores(&self, points: &Features) -> Result<DMatrix<f64>> {
        predict_scores(self, points)
    }
}

/// Scores `k(queries, support) * alpha`, one row per query.
pub fn predict_scores(model: &DualModel, queries: &Features) -> Result<DMatrix<f64>> {
    if queries.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: queries.dim(),
        });
    }
    if queries.is_empty() {
        return Ok(DMatrix::zeros(0, model.alpha.ncols()));
    }
    let mut out = DMatrix::zeros(queries.len(), model.alpha.ncols());
    let mut start = 0;
    while start < queries.len() {
        let end = (start + PREDICT_CHUNK).min(queries.len());
        let rows: Vec<usize> = (start..end).collect();
        let block = model.kernel.gram(&queries.select(&rows), &model.support)? * &model.alpha;
        out.rows_mut(start, end - start).copy_from(&block);
        start = end;
    }
    Ok(out)
}

/// Argmax over `1..K, nc`; ties go to the smallest index with `nc` last.
pub fn predict_label(scores: &[f64]) -> Result<Label> {
    risk::argmax_label(scores)
}
