//! Evaluation: confusion matrices and Macro-F1 over `1..K, nc`, the
//! one-vs-rest reject baseline, and experiment harnesses that emit JSON
//! reports and plot-ready CSV.

use log::info;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{
    sample_synthetic, split_class_configuration, split_with_theta, stratified_folds, ClassConfiguration, Features,
    Label, LabeledDataset, Split, SyntheticSpec, TestDataset, TestDensity,
};
use crate::error::{Error, Result};
use crate::kernel::{median_heuristic, GaussianKernel};
use crate::loss::SurrogateLoss;
use crate::mixture::{estimate_theta_median, ThetaOptions};
use crate::modelsel::{fit_with_selection, select_cell, HyperGrid};
use crate::solver::spd_solve;
use crate::risk::{empirical_lac_risk_of, theorem3_bound, zero_one_risk, ScoreFunctions, TheoryParams};
use crate::stats::{mean, spearman, std_dev};

/// Rows are truths, columns predictions; index `K` is `nc`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    num_known: usize,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(num_known: usize) -> Self {
        ConfusionMatrix {
            num_known,
            counts: vec![vec![0; num_known + 1]; num_known + 1],
        }
    }

    pub fn from_labels(num_known: usize, truths: &[Label], predictions: &[Label]) -> Result<Self> {
        if truths.len() != predictions.len() {
            return Err(Error::DimensionMismatch {
                expected: truths.len(),
                found: predictions.len(),
            });
        }
        let mut cm = ConfusionMatrix::new(num_known);
        for (&t, &p) in truths.iter().zip(predictions) {
            cm.add(t, p)?;
        }
        Ok(cm)
    }

    pub fn add(&mut self, truth: Label, prediction: Label) -> Result<()> {
        let t = self.slot(truth)?;
        let p = self.slot(prediction)?;
        self.counts[t][p] += 1;
        Ok(())
    }

    fn slot(&self, label: Label) -> Result<usize> {
        match label {
            Label::Known(k) if k == 0 || k > self.num_known => Err(Error::InvalidArgument(format!(
                "label {k} outside the known classes 1..={}",
                self.num_known
            ))),
            l => Ok(l.index(self.num_known)),
        }
    }

    pub fn num_known(&self) -> usize {
        self.num_known
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::Empty("confusion matrix has no samples".into()));
        }
        let hits: u64 = (0..=self.num_known).map(|i| self.counts[i][i]).sum();
        Ok(hits as f64 / total as f64)
    }

    /// Per-class F1; `None` for a class absent from both truths and
    /// predictions.
    pub fn per_class_f1(&self) -> Vec<Option<f64>> {
        (0..=self.num_known)
            .map(|c| {
                let tp = self.counts[c][c] as f64;
                let truth: u64 = self.counts[c].iter().sum();
                let predicted: u64 = self.counts.iter().map(|row| row[c]).sum();
                if truth == 0 && predicted == 0 {
                    return None;
                }
                if truth == 0 || predicted == 0 || tp == 0.0 {
                    return Some(0.0);
                }
                let precision = tp / predicted as f64;
                let recall = tp / truth as f64;
                Some(2.0 * precision * recall / (precision + recall))
            })
            .collect()
    }

    pub fn macro_f1(&self) -> Result<f64> {
        if self.total() == 0 {
            return Err(Error::Empty("confusion matrix has no samples".into()));
        }
        let scores: Vec<f64> = self.per_class_f1().into_iter().flatten().collect();
        Ok(mean(&scores))
    }
}

/// One-vs-rest square-loss kernel classifiers trained on `D_L` alone; a query
/// is `nc` when every known-class score is strictly negative.
#[derive(Clone, Debug)]
pub struct OvrRejectBaseline {
    support: Features,
    alpha: DMatrix<f64>,
    kernel: GaussianKernel,
    lambda: f64,
}

impl OvrRejectBaseline {
    pub fn fit(labeled: &LabeledDataset, kernel: GaussianKernel, lambda: f64) -> Result<Self> {
        let gram = kernel.gram_symmetric(labeled.features())?;
        Self::fit_on_gram(labeled, &gram, kernel, lambda)
    }

    fn fit_on_gram(labeled: &LabeledDataset, gram: &DMatrix<f64>, kernel: GaussianKernel, lambda: f64) -> Result<Self> {
        if labeled.is_empty() {
            return Err(Error::Empty("baseline needs labeled data".into()));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("lambda {lambda} must be positive")));
        }
        let n = labeled.len();
        let k = labeled.num_known();
        let targets = DMatrix::from_fn(n, k, |i, c| if labeled.labels()[i] == c + 1 { 1.0 } else { -1.0 });
        // minimizer of (1/n) sum psi(y f) + lambda |f|^2 with psi(z) = (1 - z)^2 / 4
        let mut system = gram.clone();
        for i in 0..n {
            system[(i, i)] += 4.0 * lambda * n as f64;
        }
        Ok(OvrRejectBaseline {
            support: labeled.features().clone(),
            alpha: spd_solve(&system, &targets)?,
            kernel,
            lambda,
        })
    }

    pub fn kernel(&self) -> GaussianKernel {
        self.kernel
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Known-class scores, one row per query.
    pub fn scores(&self, queries: &Features) -> Result<DMatrix<f64>> {
        if queries.dim() != self.support.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.support.dim(),
                found: queries.dim(),
            });
        }
        Ok(self.kernel.gram(queries, &self.support)? * &self.alpha)
    }

    pub fn predict(&self, queries: &Features) -> Result<Vec<Label>> {
        let scores = self.scores(queries)?;
        Ok(scores.row_iter().map(|row| reject_or_argmax(row.iter().copied())).collect())
    }
}

fn reject_or_argmax(scores: impl Iterator<Item = f64>) -> Label {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, s) in scores.enumerate() {
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    if best_score < 0.0 {
        Label::New
    } else {
        Label::Known(best + 1)
    }
}

/// Cross-validation table of the baseline: mean validation one-vs-rest
/// square loss per cell, in grid order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineCv {
    pub median_distance: f64,
    pub cells: Vec<(f64, f64, f64)>,
    pub selected_sigma: f64,
    pub selected_lambda: f64,
}

/// Selects the baseline's bandwidth and regularization on the same grid as
/// the main model, with stratified folds over `D_L`, then refits on `D_L`.
pub fn select_baseline(labeled: &LabeledDataset, grid: &HyperGrid, seed: u64) -> Result<(OvrRejectBaseline, BaselineCv)> {
    grid.validate()?;
    let median = median_heuristic(labeled.features())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assignment = stratified_folds(labeled.labels(), labeled.num_known(), grid.folds, &mut rng)?;
    let folds: Vec<(LabeledDataset, LabeledDataset)> = (0..grid.folds)
        .map(|f| {
            let train: Vec<usize> = (0..labeled.len()).filter(|&i| assignment[i] != f).collect();
            let val: Vec<usize> = (0..labeled.len()).filter(|&i| assignment[i] == f).collect();
            (labeled.select(&train), labeled.select(&val))
        })
        .collect();
    let square = SurrogateLoss::Square;
    let mut cells = Vec::new();
    for &mult in &grid.sigma_multipliers {
        let kernel = GaussianKernel::new(mult * median)?;
        let mut totals = vec![0.0; grid.lambdas.len()];
        for (train, val) in &folds {
            let gram = kernel.gram_symmetric(train.features())?;
            for (li, &lambda) in grid.lambdas.iter().enumerate() {
                let model = OvrRejectBaseline::fit_on_gram(train, &gram, kernel, lambda)?;
                let scores = model.scores(val.features())?;
                let mut loss = 0.0;
                for (i, row) in scores.row_iter().enumerate() {
                    for (c, &s) in row.iter().enumerate() {
                        let sign = if val.labels()[i] == c + 1 { 1.0 } else { -1.0 };
                        loss += square.value(sign * s);
                    }
                }
                totals[li] += loss / val.len() as f64;
            }
        }
        for (li, &lambda) in grid.lambdas.iter().enumerate() {
            cells.push((totals[li] / folds.len() as f64, lambda, mult * median));
        }
    }
    let best = cells[select_cell(&cells)];
    let model = OvrRejectBaseline::fit(labeled, GaussianKernel::new(best.2)?, best.1)?;
    Ok((
        model,
        BaselineCv {
            median_distance: median,
            selected_sigma: best.2,
            selected_lambda: best.1,
            cells,
        },
    ))
}

/// Where benchmark data comes from.
#[derive(Clone, Debug)]
pub enum TaskSource {
    /// A synthetic task; the run seed replaces the spec's own seed.
    Synthetic(SyntheticSpec),
    /// A labeled dataset split by a class configuration.
    Dataset { full: LabeledDataset, config: ClassConfiguration },
}

impl TaskSource {
    /// Draws a split; `theta`, if given, fixes the known-class fraction of the
    /// unlabeled and test sets.
    pub fn draw(&self, n_labeled: usize, n_unlabeled: usize, n_test: usize, theta: Option<f64>, seed: u64) -> Result<Split> {
        match self {
            TaskSource::Synthetic(spec) => {
                let mut spec = spec.clone().with_seed(seed);
                if let Some(t) = theta {
                    spec = spec.with_theta(t);
                }
                sample_synthetic(&spec, n_labeled, n_unlabeled, n_test)
            }
            TaskSource::Dataset { full, config } => match theta {
                Some(t) => split_with_theta(full, config, n_labeled, n_unlabeled, n_test, t, seed),
                None => split_class_configuration(full, config, n_labeled, n_unlabeled, n_test, seed),
            },
        }
    }

    /// Known-class fraction of the test distribution, when it is known.
    fn true_theta(&self, theta: Option<f64>, test: &TestDataset) -> f64 {
        match (self, theta) {
            (_, Some(t)) => t,
            (TaskSource::Synthetic(spec), None) => spec.theta,
            (TaskSource::Dataset { .. }, None) => 1.0 - test.new_class_count() as f64 / test.len() as f64,
        }
    }

    fn describe(&self) -> serde_json::Value {
        match self {
            TaskSource::Synthetic(spec) => serde_json::json!({ "synthetic": spec }),
            TaskSource::Dataset { full, config } => serde_json::json!({
                "dataset": {
                    "samples": full.len(),
                    "dim": full.dim(),
                    "known": config.known(),
                    "new": config.new_classes(),
                    "config_seed": config.seed(),
                }
            }),
        }
    }
}

/// How a run obtains `theta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ThetaMode {
    /// The true value of the task.
    Known,
    Estimated { options: ThetaOptions },
    Fixed { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSettings {
    pub n_labeled: usize,
    pub n_unlabeled: usize,
    pub n_test: usize,
    pub grid: HyperGrid,
    pub theta_mode: ThetaMode,
    pub with_baseline: bool,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            n_labeled: 500,
            n_unlabeled: 1000,
            n_test: 10_000,
            grid: HyperGrid::default(),
            theta_mode: ThetaMode::Known,
            with_baseline: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Value of the swept variable.
    pub x: f64,
    pub seed: u64,
    pub theta_true: f64,
    pub theta_used: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub zero_one_risk: f64,
    /// Empirical LAC risk of the final model on its own training data.
    pub lac_risk: f64,
    pub selected_sigma: f64,
    pub selected_lambda: f64,
    pub converged: bool,
    pub confusion: ConfusionMatrix,
    pub baseline_accuracy: Option<f64>,
    pub baseline_macro_f1: Option<f64>,
}

/// Summary of one metric at one value of the swept variable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Summary {
    fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        Some(Summary {
            mean: mean(values),
            std: std_dev(values),
            n: values.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub x: f64,
    pub accuracy: Summary,
    pub macro_f1: Summary,
    pub zero_one_risk: Summary,
    pub baseline_accuracy: Option<Summary>,
    pub baseline_macro_f1: Option<Summary>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub x: f64,
    pub bound: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Accuracy,
    MacroF1,
    ZeroOneRisk,
    BaselineAccuracy,
    BaselineMacroF1,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::MacroF1 => "macro_f1",
            Metric::ZeroOneRisk => "zero_one_risk",
            Metric::BaselineAccuracy => "baseline_accuracy",
            Metric::BaselineMacroF1 => "baseline_macro_f1",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config: serde_json::Value,
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<Aggregate>,
    /// Spearman correlation between the swept variable and mean Macro-F1;
    /// absent with fewer than two distinct rows.
    pub spearman: Option<f64>,
    pub bounds: Vec<BoundRow>,
}

impl ExperimentReport {
    fn new(name: &str, config: serde_json::Value, runs: Vec<RunRecord>, bounds: Vec<BoundRow>) -> Self {
        let aggregates = aggregate(&runs);
        let xs: Vec<f64> = aggregates.iter().map(|a| a.x).collect();
        let ys: Vec<f64> = aggregates.iter().map(|a| a.macro_f1.mean).collect();
        ExperimentReport {
            name: name.to_string(),
            config,
            runs,
            aggregates,
            spearman: spearman(&xs, &ys),
            bounds,
        }
    }

    /// Aggregates recomputed from the per-run records.
    pub fn recompute_aggregates(&self) -> Vec<Aggregate> {
        aggregate(&self.runs)
    }

    pub fn is_self_consistent(&self) -> bool {
        self.recompute_aggregates() == self.aggregates
    }

    /// Plot data with header `x,mean,std,n`; rows without the metric are
    /// skipped.
    pub fn csv(&self, metric: Metric) -> String {
        let mut out = String::from("x,mean,std,n\n");
        for a in &self.aggregates {
            let s = match metric {
                Metric::Accuracy => Some(a.accuracy),
                Metric::MacroF1 => Some(a.macro_f1),
                Metric::ZeroOneRisk => Some(a.zero_one_risk),
                Metric::BaselineAccuracy => a.baseline_accuracy,
                Metric::BaselineMacroF1 => a.baseline_macro_f1,
            };
            if let Some(s) = s {
                out.push_str(&format!("{},{},{},{}\n", a.x, s.mean, s.std, s.n));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn aggregate(runs: &[RunRecord]) -> Vec<Aggregate> {
    let mut xs: Vec<f64> = runs.iter().map(|r| r.x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.into_iter()
        .map(|x| {
            let rows: Vec<&RunRecord> = runs.iter().filter(|r| r.x == x).collect();
            let collect = |f: &dyn Fn(&RunRecord) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let optional = |f: &dyn Fn(&RunRecord) -> Option<f64>| {
                let v: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
                Summary::of(&v)
            };
            Aggregate {
                x,
                accuracy: Summary::of(&collect(&|r| r.accuracy)).expect("nonempty"),
                macro_f1: Summary::of(&collect(&|r| r.macro_f1)).expect("nonempty"),
                zero_one_risk: Summary::of(&collect(&|r| r.zero_one_risk)).expect("nonempty"),
                baseline_accuracy: optional(&|r| r.baseline_accuracy),
                baseline_macro_f1: optional(&|r| r.baseline_macro_f1),
            }
        })
        .collect()
}

/// Draws data, picks `theta`, fits with cross-validation and evaluates on the
/// test set. `theta` fixes the task's known-class fraction when given.
pub fn run_once(
    source: &TaskSource,
    settings: &BenchSettings,
    x: f64,
    n_unlabeled: usize,
    theta: Option<f64>,
    seed: u64,
) -> Result<RunRecord> {
    let split = source.draw(settings.n_labeled, n_unlabeled, settings.n_test, theta, seed)?;
    let theta_true = source.true_theta(theta, &split.test);
    let theta_used = match settings.theta_mode {
        ThetaMode::Known => theta_true,
        ThetaMode::Fixed { value } => value,
        ThetaMode::Estimated { options } => {
            estimate_theta_median(split.labeled.features(), split.unlabeled.features(), &options)?.theta
        }
    };
    let (model, report) = fit_with_selection(&split.labeled, &split.unlabeled, theta_used, &settings.grid, seed)?;
    let predictions = model.predict(split.test.features())?;
    let k = split.labeled.num_known();
    let confusion = ConfusionMatrix::from_labels(k, split.test.labels(), &predictions)?;
    let lac_risk = empirical_lac_risk_of(&model, &split.labeled, &split.unlabeled, theta_used, settings.grid.loss)?;
    let (baseline_accuracy, baseline_macro_f1) = if settings.with_baseline {
        let (baseline, _) = select_baseline(&split.labeled, &settings.grid, seed)?;
        let cm = ConfusionMatrix::from_labels(k, split.test.labels(), &baseline.predict(split.test.features())?)?;
        (Some(cm.accuracy()?), Some(cm.macro_f1()?))
    } else {
        (None, None)
    };
    let record = RunRecord {
        x,
        seed,
        theta_true,
        theta_used,
        accuracy: confusion.accuracy()?,
        macro_f1: confusion.macro_f1()?,
        zero_one_risk: zero_one_risk(&predictions, split.test.labels())?,
        lac_risk,
        selected_sigma: report.selected_sigma,
        selected_lambda: report.selected_lambda,
        converged: model.record().converged,
        confusion,
        baseline_accuracy,
        baseline_macro_f1,
    };
    info!(
        "x={x} seed={seed}: macro-F1 {:.4}, accuracy {:.4}, theta {:.3}",
        record.macro_f1, record.accuracy, record.theta_used
    );
    Ok(record)
}

fn config_echo(source: &TaskSource, settings: &BenchSettings, sweep: serde_json::Value, seeds: &[u64]) -> serde_json::Value {
    serde_json::json!({
        "source": source.describe(),
        "settings": settings,
        "sweep": sweep,
        "seeds": seeds,
    })
}

/// Default unlabeled sizes: 250 to 1500 in steps of 250.
pub fn default_unlabeled_sizes() -> Vec<usize> {
    (1..=6).map(|i| 250 * i).collect()
}

/// Default new-class ratios of the test distribution.
pub const DEFAULT_NEW_CLASS_RATIOS: [f64; 4] = [0.0, 0.2, 0.6, 0.8];

/// Performance as the unlabeled sample grows, with the generalization bound
/// (unit norm bound, `delta = 0.05`) per size.
pub fn run_unlabeled_scaling(
    source: &TaskSource,
    settings: &BenchSettings,
    sizes: &[usize],
    seeds: &[u64],
) -> Result<ExperimentReport> {
    if sizes.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument("sizes and seeds must be nonempty".into()));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("sizes must be increasing".into()));
    }
    let mut runs = Vec::with_capacity(sizes.len() * seeds.len());
    let mut bounds = Vec::with_capacity(sizes.len());
    for &size in sizes {
        for &seed in seeds {
            runs.push(run_once(source, settings, size as f64, size, None, seed)?);
        }
        let theta = runs.last().map(|r| r.theta_true).unwrap_or(1.0);
        let num_known = runs.last().map(|r| r.confusion.num_known()).unwrap_or(1);
        let params = TheoryParams::for_loss(settings.grid.loss, 1.0, 0.05, theta, num_known, settings.n_labeled, size);
        bounds.push(BoundRow {
            x: size as f64,
            bound: theorem3_bound(&params)?,
        });
    }
    let config = config_echo(source, settings, serde_json::json!({ "unlabeled_sizes": sizes }), seeds);
    Ok(ExperimentReport::new("unlabeled-scaling", config, runs, bounds))
}

/// Performance as the new-class ratio `1 - theta` of the test distribution
/// varies. `x` in the report is the ratio.
pub fn run_theta_sweep(
    source: &TaskSource,
    settings: &BenchSettings,
    new_class_ratios: &[f64],
    seeds: &[u64],
) -> Result<ExperimentReport> {
    if new_class_ratios.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument("ratios and seeds must be nonempty".into()));
    }
    if let Some(r) = new_class_ratios.iter().find(|r| !(**r >= 0.0 && **r < 1.0)) {
        return Err(Error::InvalidArgument(format!("new-class ratio {r} outside [0, 1)")));
    }
    let mut runs = Vec::with_capacity(new_class_ratios.len() * seeds.len());
    for &ratio in new_class_ratios {
        for &seed in seeds {
            runs.push(run_once(source, settings, ratio, settings.n_unlabeled, Some(1.0 - ratio), seed)?);
        }
    }
    let config = config_echo(source, settings, serde_json::json!({ "new_class_ratios": new_class_ratios }), seeds);
    Ok(ExperimentReport::new("theta-sweep", config, runs, Vec::new()))
}

/// Bayes-optimal square-loss scores `2 p(y | x) - 1` of a synthetic task.
pub struct BayesScores {
    density: TestDensity,
}

impl BayesScores {
    pub fn new(spec: &SyntheticSpec) -> Result<Self> {
        Ok(BayesScores {
            density: TestDensity::new(spec)?,
        })
    }
}

impl ScoreFunctions for BayesScores {
    fn num_known(&self) -> usize {
        self.density.num_known()
    }

    fn scores(&self, points: &Features) -> Result<DMatrix<f64>> {
        let cols = self.num_known() + 1;
        let mut out = DMatrix::zeros(points.len(), cols);
        for (i, x) in points.rows().enumerate() {
            for (j, eta) in self.density.posterior(x).into_iter().enumerate() {
                out[(i, j)] = 2.0 * eta - 1.0;
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Check {
    /// Test 0-1 risk minus the Bayes risk.
    pub lhs: f64,
    /// `sqrt(2 (R_LAC(f) - R*_LAC))`.
    pub rhs: f64,
    /// Monte-Carlo standard error of the test 0-1 risk.
    pub std_error: f64,
    pub zero_one_risk: f64,
    pub bayes_risk: f64,
    pub lac_excess: f64,
    pub holds: bool,
}

/// Checks the square-loss calibration inequality on a synthetic task with
/// `d <= 2`. The 0-1 risk is estimated on `n_test` fresh test samples; the
/// Bayes risk and the LAC excess risk are integrated on a `resolution` grid,
/// where the pointwise excess is `sum_k p(x) (f_k(x) - (2 eta_k(x) - 1))^2 / 4`.
pub fn run_theorem2_check(
    spec: &SyntheticSpec,
    model: &dyn ScoreFunctions,
    n_test: usize,
    seed: u64,
    resolution: usize,
) -> Result<Theorem2Check> {
    if spec.dim > 2 {
        return Err(Error::InvalidArgument(format!(
            "the check integrates on a grid and needs d <= 2, got {}",
            spec.dim
        )));
    }
    if model.num_known() != spec.num_known() {
        return Err(Error::DimensionMismatch {
            expected: spec.num_known(),
            found: model.num_known(),
        });
    }
    if n_test < 2 {
        return Err(Error::InvalidArgument("need at least two test samples".into()));
    }
    let density = TestDensity::new(spec)?;
    let (grid, volume) = density.quadrature_grid(resolution)?;
    let scores = model.scores(&grid)?;
    let mut bayes = 0.0;
    let mut excess = 0.0;
    for (i, x) in grid.rows().enumerate() {
        let joint = density.joint(x);
        let px: f64 = joint.iter().sum();
        if px <= 0.0 {
            continue;
        }
        bayes += px - joint.iter().copied().fold(0.0, f64::max);
        let gap: f64 = joint
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let d = scores[(i, k)] - (2.0 * p / px - 1.0);
                d * d
            })
            .sum();
        excess += 0.25 * px * gap;
    }
    let bayes = (bayes * volume).clamp(0.0, 1.0);
    let excess = (excess * volume).max(0.0);

    let test = sample_synthetic(&spec.clone().with_seed(seed), 1, 1, n_test)?.test;
    let test_scores = model.scores(test.features())?;
    let predictions = test_scores
        .row_iter()
        .map(|row| crate::risk::argmax_label(&row.iter().copied().collect::<Vec<f64>>()))
        .collect::<Result<Vec<Label>>>()?;
    let risk = zero_one_risk(&predictions, test.labels())?;
    let std_error = (risk * (1.0 - risk) / n_test as f64).sqrt();
    let lhs = risk - bayes;
    let rhs = (2.0 * excess).sqrt();
    Ok(Theorem2Check {
        lhs,
        rhs,
        std_error,
        zero_one_risk: risk,
        bayes_risk: bayes,
        lac_excess: excess,
        holds: lhs <= rhs + 3.0 * std_error,
    })
}
