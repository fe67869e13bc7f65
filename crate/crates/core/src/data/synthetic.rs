//! Synthetic class-shift tasks built from Gaussian mixtures, with exact
//! (quadrature) and Monte-Carlo Bayes-risk oracles.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Features, Label, LabeledDataset, Split, TestDataset, UnlabeledDataset};
use crate::error::{Error, Result};

const REFERENCE_2D: &str = include_str!("../../specs/reference_2d.toml");

/// Per-axis half-width of the integration box, in standard deviations.
/// Two-sided normal tail mass at 5.5 sd is 3.8e-8 per axis.
const BOX_HALF_WIDTH_SD: f64 = 5.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    #[serde(default)]
    pub components: Vec<GaussianComponent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownClass {
    pub prior: f64,
    pub components: Vec<GaussianComponent>,
}

/// Generative description of a class-shift task:
/// `P_te = theta * P_tr + (1 - theta) * P_new`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub theta: f64,
    #[serde(default)]
    pub seed: u64,
    pub known: Vec<KnownClass>,
    #[serde(default)]
    pub new: GaussianMixture,
}

impl SyntheticSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: SyntheticSpec = toml::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("synthetic spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("spec is always representable as TOML")
    }

    /// Bundled 2-D task: two known unit-variance Gaussians and one new class.
    pub fn reference_2d() -> Self {
        Self::from_toml_str(REFERENCE_2D).expect("bundled spec is valid")
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn num_known(&self) -> usize {
        self.known.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidArgument("dim must be >= 1".into()));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "theta {} outside (0, 1]",
                self.theta
            )));
        }
        if self.known.is_empty() {
            return Err(Error::InvalidArgument("at least one known class is required".into()));
        }
        let prior_sum: f64 = self.known.iter().map(|k| k.prior).sum();
        if self.known.iter().any(|k| !(k.prior >= 0.0)) || (prior_sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "known-class priors must be nonnegative and sum to 1 (sum = {prior_sum})"
            )));
        }
        for (i, class) in self.known.iter().enumerate() {
            validate_mixture(&class.components, self.dim, &format!("known class {}", i + 1))?;
        }
        if self.theta < 1.0 || !self.new.components.is_empty() {
            validate_mixture(&self.new.components, self.dim, "new class")?;
        }
        Ok(())
    }
}

fn validate_mixture(components: &[GaussianComponent], dim: usize, what: &str) -> Result<()> {
    if components.is_empty() {
        return Err(Error::InvalidArgument(format!("{what}: no components")));
    }
    let sum: f64 = components.iter().map(|c| c.weight).sum();
    if components.iter().any(|c| !(c.weight >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "{what}: component weights must be nonnegative and sum to 1"
        )));
    }
    for c in components {
        CompiledGaussian::new(c, dim).map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::InvalidArgument(format!("{what}: {msg}")),
            other => other,
        })?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
struct CompiledGaussian {
    weight: f64,
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    log_norm: f64,
    sd: Vec<f64>,
}

impl CompiledGaussian {
    fn new(c: &GaussianComponent, dim: usize) -> Result<Self> {
        if c.mean.len() != dim || c.cov.len() != dim || c.cov.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument(format!(
                "component mean/covariance must have dimension {dim}"
            )));
        }
        let cov = DMatrix::from_fn(dim, dim, |i, j| c.cov[i][j]);
        let scale = cov.amax().max(1.0);
        for i in 0..dim {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidArgument("covariance is not symmetric".into()));
                }
            }
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidArgument("covariance is not positive definite".into()))?
            .l();
        let log_det_half: f64 = (0..dim).map(|i| chol[(i, i)].ln()).sum();
        let log_norm = 0.5 * dim as f64 * (2.0 * std::f64::consts::PI).ln() + log_det_half;
        Ok(CompiledGaussian {
            weight: c.weight,
            mean: DVector::from_column_slice(&c.mean),
            sd: (0..dim).map(|i| cov[(i, i)].sqrt()).collect(),
            chol,
            log_norm,
        })
    }

    fn density(&self, x: &[f64]) -> f64 {
        let dim = self.mean.len();
        // forward substitution L z = x - mean
        let mut z = vec![0.0; dim];
        for i in 0..dim {
            let mut s = x[i] - self.mean[i];
            for (j, zj) in z.iter().enumerate().take(i) {
                s -= self.chol[(i, j)] * zj;
            }
            z[i] = s / self.chol[(i, i)];
        }
        let q: f64 = z.iter().map(|v| v * v).sum();
        (-0.5 * q - self.log_norm).exp()
    }

    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        let dim = self.mean.len();
        let z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..dim {
            let mut v = self.mean[i];
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                v += self.chol[(i, j)] * zj;
            }
            out.push(v);
        }
    }
}

#[derive(Clone, Debug)]
struct CompiledMixture {
    components: Vec<CompiledGaussian>,
}

impl CompiledMixture {
    fn new(components: &[GaussianComponent], dim: usize) -> Result<Self> {
        Ok(CompiledMixture {
            components: components
                .iter()
                .map(|c| CompiledGaussian::new(c, dim))
                .collect::<Result<_>>()?,
        })
    }

    fn density(&self, x: &[f64]) -> f64 {
        self.components.iter().map(|c| c.weight * c.density(x)).sum()
    }

    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        let weights: Vec<f64> = self.components.iter().map(|c| c.weight).collect();
        let i = pick(&weights, rng);
        self.components[i].sample(rng, out);
    }
}

fn pick(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // rounding in the cumulative sum: fall back to the last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Densities of the test distribution of a [`SyntheticSpec`].
#[derive(Clone, Debug)]
pub struct TestDensity {
    dim: usize,
    theta: f64,
    priors: Vec<f64>,
    known: Vec<CompiledMixture>,
    new: Option<CompiledMixture>,
}

impl TestDensity {
    pub fn new(spec: &SyntheticSpec) -> Result<Self> {
        spec.validate()?;
        let known = spec
            .known
            .iter()
            .map(|k| CompiledMixture::new(&k.components, spec.dim))
            .collect::<Result<_>>()?;
        let new = if spec.new.components.is_empty() {
            None
        } else {
            Some(CompiledMixture::new(&spec.new.components, spec.dim)?)
        };
        Ok(TestDensity {
            dim: spec.dim,
            theta: spec.theta,
            priors: spec.known.iter().map(|k| k.prior).collect(),
            known,
            new,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_known(&self) -> usize {
        self.known.len()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Joint test densities `p_te(x, y)` for `y = 1..K, nc`.
    pub fn joint(&self, x: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .known
            .iter()
            .zip(&self.priors)
            .map(|(m, p)| self.theta * p * m.density(x))
            .collect();
        let new = match &self.new {
            Some(m) if self.theta < 1.0 => (1.0 - self.theta) * m.density(x),
            _ => 0.0,
        };
        out.push(new);
        out
    }

    /// Class posteriors `p_te(y | x)`; uniform where the density underflows.
    pub fn posterior(&self, x: &[f64]) -> Vec<f64> {
        let joint = self.joint(x);
        let total: f64 = joint.iter().sum();
        if total > 0.0 {
            joint.iter().map(|p| p / total).collect()
        } else {
            vec![1.0 / joint.len() as f64; joint.len()]
        }
    }

    fn all_components(&self) -> impl Iterator<Item = &CompiledGaussian> {
        self.known
            .iter()
            .chain(self.new.iter())
            .flat_map(|m| m.components.iter())
    }

    /// Axis-aligned box containing at least `1 - 1e-6` of every component's
    /// mass.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|a| {
                self.all_components().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                    let w = BOX_HALF_WIDTH_SD * c.sd[a];
                    (lo.min(c.mean[a] - w), hi.max(c.mean[a] + w))
                })
            })
            .collect()
    }

    /// Midpoint-rule nodes over [`Self::bounding_box`] with `resolution`
    /// cells per axis, and the volume of one cell. Only `d <= 2`.
    pub fn quadrature_grid(&self, resolution: usize) -> Result<(Features, f64)> {
        check_quadrature(self.dim, resolution)?;
        let bounds = self.bounding_box();
        let axes: Vec<Vec<f64>> = bounds
            .iter()
            .map(|&(lo, hi)| {
                let h = (hi - lo) / resolution as f64;
                (0..resolution).map(|i| lo + (i as f64 + 0.5) * h).collect()
            })
            .collect();
        let volume: f64 = bounds
            .iter()
            .map(|&(lo, hi)| (hi - lo) / resolution as f64)
            .product();
        let mut values = Vec::with_capacity(resolution.pow(self.dim as u32) * self.dim);
        if self.dim == 1 {
            values.extend_from_slice(&axes[0]);
        } else {
            for &x in &axes[0] {
                for &y in &axes[1] {
                    values.push(x);
                    values.push(y);
                }
            }
        }
        Ok((Features::new(self.dim, values)?, volume))
    }

    fn sample_known(&self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) -> usize {
        let k = pick(&self.priors, rng);
        self.known[k].sample(rng, out);
        k + 1
    }

    fn sample_test(&self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) -> Label {
        let from_known = self.theta >= 1.0 || rng.gen::<f64>() < self.theta;
        match (&self.new, from_known) {
            (Some(new), false) => {
                new.sample(rng, out);
                Label::New
            }
            _ => Label::Known(self.sample_known(rng, out)),
        }
    }
}

fn check_quadrature(dim: usize, resolution: usize) -> Result<()> {
    if dim > 2 {
        return Err(Error::InvalidArgument(format!(
            "quadrature is limited to d <= 2 (got d = {dim}); use the Monte-Carlo oracle"
        )));
    }
    if resolution < 2 {
        return Err(Error::InvalidArgument("grid resolution must be >= 2".into()));
    }
    Ok(())
}

/// Draws labeled data from `P_tr`, and unlabeled and test data from `P_te`.
/// Deterministic given `spec.seed`.
pub fn sample_synthetic(
    spec: &SyntheticSpec,
    n_labeled: usize,
    n_unlabeled: usize,
    n_test: usize,
) -> Result<Split> {
    let density = TestDensity::new(spec)?;
    if n_labeled == 0 || n_unlabeled == 0 {
        return Err(Error::InvalidArgument(
            "labeled and unlabeled sizes must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dim = spec.dim;

    let mut values = Vec::with_capacity(n_labeled * dim);
    let mut labels = Vec::with_capacity(n_labeled);
    for _ in 0..n_labeled {
        labels.push(density.sample_known(&mut rng, &mut values));
    }
    let table = (1..=spec.num_known() as i64).collect();
    let labeled = LabeledDataset::new(Features::new(dim, values)?, labels, table)?;

    let mut values = Vec::with_capacity(n_unlabeled * dim);
    for _ in 0..n_unlabeled {
        density.sample_test(&mut rng, &mut values);
    }
    let unlabeled = UnlabeledDataset::new(Features::new(dim, values)?)?;

    let mut values = Vec::with_capacity(n_test * dim);
    let mut labels = Vec::with_capacity(n_test);
    for _ in 0..n_test {
        labels.push(density.sample_test(&mut rng, &mut values));
    }
    let test = TestDataset::new(Features::new(dim, values)?, labels, spec.num_known())?;

    Ok(Split {
        labeled,
        unlabeled,
        test,
    })
}

/// Bayes error `R* = integral of (p_te(x) - max_y p_te(x, y)) dx` by the
/// midpoint rule on `resolution` cells per axis. Only `d <= 2`.
pub fn bayes_risk_oracle(spec: &SyntheticSpec, resolution: usize) -> Result<f64> {
    check_quadrature(spec.dim, resolution)?;
    let density = TestDensity::new(spec)?;
    let (grid, volume) = density.quadrature_grid(resolution)?;
    let mut total = 0.0;
    for x in grid.rows() {
        let joint = density.joint(x);
        let sum: f64 = joint.iter().sum();
        let max = joint.iter().copied().fold(0.0, f64::max);
        total += sum - max;
    }
    Ok((total * volume).clamp(0.0, 1.0))
}

/// Monte-Carlo Bayes error for any dimension: mean of `1 - max_y p(y | x)`
/// over `x ~ P_te`. Returns `(estimate, standard error)`.
pub fn bayes_risk_monte_carlo(spec: &SyntheticSpec, n: usize, seed: u64) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let density = TestDensity::new(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(spec.dim);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        x.clear();
        density.sample_test(&mut rng, &mut x);
        let post = density.posterior(&x);
        let v = 1.0 - post.iter().copied().fold(0.0, f64::max);
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n as f64;
    let var = ((sum_sq / n as f64) - mean * mean).max(0.0) * n as f64 / (n - 1) as f64;
    Ok((mean, (var / n as f64).sqrt()))
}
