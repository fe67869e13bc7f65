//! Hyperparameter selection by k-fold cross-validation on the empirical LAC
//! risk. Both the labeled and the unlabeled set are folded, so each
//! validation value is an unbiased estimate of the test risk of the fold
//! model.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{kfold_split, LabeledDataset, UnlabeledDataset};
use crate::error::{Error, Result};
use crate::kernel::{median_heuristic, GaussianKernel, DEFAULT_SIGMA_MULTIPLIERS};
use crate::loss::SurrogateLoss;
use crate::risk::{empirical_lac_risk, ScoreFunctions};
use crate::solver::{solve_first_order, solve_square, DualModel, FitOptions, LacObjective};

/// Regularization candidates; the inverse of the `{1e-3, ..., 1e1}` pool of
/// SVM-style `C` values.
pub const DEFAULT_LAMBDAS: [f64; 5] = [1e-3, 1e-2, 1e-1, 1.0, 10.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub sigma_multipliers: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub loss: SurrogateLoss,
    pub folds: usize,
    /// Iteration limits for non-square losses; `lambda` is taken from the grid.
    pub solver: FitOptions,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            sigma_multipliers: DEFAULT_SIGMA_MULTIPLIERS.to_vec(),
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            loss: SurrogateLoss::Square,
            folds: 5,
            solver: FitOptions::default(),
        }
    }
}

impl HyperGrid {
    pub fn single(sigma_multiplier: f64, lambda: f64, loss: SurrogateLoss) -> Self {
        HyperGrid {
            sigma_multipliers: vec![sigma_multiplier],
            lambdas: vec![lambda],
            loss,
            ..HyperGrid::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.sigma_multipliers.is_empty() || self.lambdas.is_empty() {
            return Err(Error::InvalidArgument("hyperparameter grid is empty".into()));
        }
        if self
            .sigma_multipliers
            .iter()
            .chain(&self.lambdas)
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(Error::InvalidArgument("grid values must be positive and finite".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidArgument("cross-validation needs at least 2 folds".into()));
        }
        Ok(())
    }
}

/// Validation result of one grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub sigma_multiplier: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub mean_risk: f64,
    pub std_error: f64,
    pub fold_risks: Vec<f64>,
    /// False if any fold fit stopped before reaching the gradient tolerance.
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub theta: f64,
    pub loss: SurrogateLoss,
    pub folds: usize,
    pub seed: u64,
    pub median_distance: f64,
    pub cells: Vec<CellResult>,
    pub selected_sigma_multiplier: f64,
    pub selected_sigma: f64,
    pub selected_lambda: f64,
    pub selected_mean_risk: f64,
}

impl CvReport {
    pub fn selected_kernel(&self) -> Result<GaussianKernel> {
        GaussianKernel::new(self.selected_sigma)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Index of the cell with minimal mean risk; ties go to larger lambda, then
/// larger sigma, so the result does not depend on grid order.
pub(crate) fn select_cell(cells: &[(f64, f64, f64)]) -> usize {
    let mut best = 0;
    for (i, &(risk, lambda, sigma)) in cells.iter().enumerate().skip(1) {
        let (b_risk, b_lambda, b_sigma) = cells[best];
        let better = risk
            .total_cmp(&b_risk)
            .then(b_lambda.total_cmp(&lambda))
            .then(b_sigma.total_cmp(&sigma))
            .is_lt();
        if better {
            best = i;
        }
    }
    best
}

pub(crate) fn fit_on_gram(
    support: crate::data::Features,
    gram: &DMatrix<f64>,
    labeled: &LabeledDataset,
    kernel: GaussianKernel,
    theta: f64,
    lambda: f64,
    grid: &HyperGrid,
) -> Result<DualModel> {
    match grid.loss {
        SurrogateLoss::Square => DualModel::from_gram_square(support, gram, labeled, kernel, theta, lambda),
        loss => {
            let options = FitOptions {
                lambda,
                ..grid.solver
            };
            DualModel::from_gram_first_order(support, gram, labeled, kernel, theta, &options, loss)
        }
    }
}

/// Dual coefficients of one grid cell and whether the solver converged. The
/// square loss skips building a full model.
fn cell_alpha(
    gram: &DMatrix<f64>,
    labeled: &LabeledDataset,
    theta: f64,
    lambda: f64,
    grid: &HyperGrid,
) -> Result<(DMatrix<f64>, bool)> {
    match grid.loss {
        SurrogateLoss::Square => Ok((solve_square(gram, labeled.labels(), labeled.num_known(), theta, lambda)?, true)),
        loss => {
            let objective = LacObjective::new(gram, labeled.labels(), labeled.num_known(), theta, lambda, loss)?;
            let options = FitOptions { lambda, ..grid.solver };
            let (alpha, record) = solve_first_order(&objective, &options)?;
            Ok((alpha, record.converged))
        }
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let mean = crate::stats::mean(values);
    let se = crate::stats::std_dev(values) / (values.len() as f64).sqrt();
    (mean, se)
}

/// K-fold cross-validation over the grid. Bandwidths are multiples of the
/// median pairwise distance over `D_L` and `D_U` together.
pub fn cross_validate(
    labeled: &LabeledDataset,
    unlabeled: &UnlabeledDataset,
    theta: f64,
    grid: &HyperGrid,
    seed: u64,
) -> Result<CvReport> {
    grid.validate()?;
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("theta {theta} outside (0, 1]")));
    }
    let pooled = labeled.features().concat(unlabeled.features())?;
    let median = median_heuristic(&pooled)?;
    let folds = kfold_split(labeled, unlabeled, grid.folds, seed)?;

    let n_sigma = grid.sigma_multipliers.len();
    let n_lambda = grid.lambdas.len();
    let mut risks = vec![vec![Vec::with_capacity(folds.len()); n_lambda]; n_sigma];
    let mut converged = vec![vec![true; n_lambda]; n_sigma];
    for (si, &mult) in grid.sigma_multipliers.iter().enumerate() {
        let kernel = GaussianKernel::new(mult * median)?;
        for (fi, fold) in folds.iter().enumerate() {
            let annotate = |lambda: f64| {
                move |e: Error| Error::Cell {
                    sigma_mult: mult,
                    lambda,
                    fold: fi,
                    source: Box::new(e),
                }
            };
            let support = fold
                .train_labeled
                .features()
                .concat(fold.train_unlabeled.features())
                .map_err(annotate(f64::NAN))?;
            let gram = kernel.gram_symmetric(&support).map_err(annotate(f64::NAN))?;
            let val_l = kernel.gram(fold.val_labeled.features(), &support).map_err(annotate(f64::NAN))?;
            let val_u = kernel.gram(fold.val_unlabeled.features(), &support).map_err(annotate(f64::NAN))?;
            for (li, &lambda) in grid.lambdas.iter().enumerate() {
                let (alpha, done) = cell_alpha(&gram, &fold.train_labeled, theta, lambda, grid).map_err(annotate(lambda))?;
                converged[si][li] &= done;
                let risk = empirical_lac_risk(
                    &(&val_l * &alpha),
                    fold.val_labeled.labels(),
                    &(&val_u * &alpha),
                    theta,
                    grid.loss,
                )
                .map_err(annotate(lambda))?;
                risks[si][li].push(risk);
            }
        }
    }

    let mut cells = Vec::with_capacity(n_sigma * n_lambda);
    for (si, &mult) in grid.sigma_multipliers.iter().enumerate() {
        for (li, &lambda) in grid.lambdas.iter().enumerate() {
            let (mean_risk, std_error) = mean_and_se(&risks[si][li]);
            cells.push(CellResult {
                sigma_multiplier: mult,
                sigma: mult * median,
                lambda,
                mean_risk,
                std_error,
                fold_risks: risks[si][li].clone(),
                converged: converged[si][li],
            });
        }
    }
    let keys: Vec<(f64, f64, f64)> = cells.iter().map(|c| (c.mean_risk, c.lambda, c.sigma)).collect();
    let best = &cells[select_cell(&keys)];
    Ok(CvReport {
        theta,
        loss: grid.loss,
        folds: grid.folds,
        seed,
        median_distance: median,
        selected_sigma_multiplier: best.sigma_multiplier,
        selected_sigma: best.sigma,
        selected_lambda: best.lambda,
        selected_mean_risk: best.mean_risk,
        cells,
    })
}

/// Cross-validates, then refits on all of `D_L` and `D_U` at the selected cell.
pub fn fit_with_selection(
    labeled: &LabeledDataset,
    unlabeled: &UnlabeledDataset,
    theta: f64,
    grid: &HyperGrid,
    seed: u64,
) -> Result<(DualModel, CvReport)> {
    let report = cross_validate(labeled, unlabeled, theta, grid, seed)?;
    let kernel = report.selected_kernel()?;
    let support = labeled.features().concat(unlabeled.features())?;
    let gram = kernel.gram_symmetric(&support)?;
    let model = fit_on_gram(support, &gram, labeled, kernel, theta, report.selected_lambda, grid)?;
    Ok((model, report))
}

/// Validation risk of the zero model, `(K + 1) psi(0)`.
pub fn zero_model_risk(num_known: usize, loss: SurrogateLoss) -> f64 {
    (num_known + 1) as f64 * loss.value(0.0)
}

/// Empirical LAC risk of a fitted model on datasets.
pub fn validation_risk(
    model: &dyn ScoreFunctions,
    labeled: &LabeledDataset,
    unlabeled: &UnlabeledDataset,
    theta: f64,
    loss: SurrogateLoss,
) -> Result<f64> {
    crate::risk::empirical_lac_risk_of(model, labeled, unlabeled, theta, loss)
}
