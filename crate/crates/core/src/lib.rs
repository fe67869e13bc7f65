//! Learning with augmented classes (LAC) from labeled and unlabeled data.
//!
//! Classes unseen during training may appear at test time; they are predicted
//! collectively as a single new class `nc`. Under the class shift condition
//! the test distribution is a mixture `theta * P_tr + (1 - theta) * P_new`,
//! which makes the one-versus-rest risk over the test distribution estimable
//! from labeled data (known classes) and unlabeled data (test marginal).
//!
//! The crate is organized by concern:
//!
//! - [`data`]: datasets, file loaders, class configurations, synthetic
//!   class-shift tasks and exact Bayes-risk oracles.
//! - [`kernel`]: Gaussian kernel, Gram matrices and the median heuristic.
//! - [`loss`]: surrogate losses with `psi(z) - psi(-z) = -z`.
//! - [`risk`]: empirical and exact risk functionals and the generalization bound.
//! - [`solver`]: kernel dual solvers producing a [`solver::DualModel`].
//! - [`mixture`]: estimation of the known-class proportion `theta`.
//! - [`modelsel`]: k-fold cross-validation on the unbiased risk estimate.
//! - [`evalbench`]: metrics, a reject-option baseline and experiment harnesses.

pub mod data;
pub mod error;
pub mod evalbench;
pub mod kernel;
pub mod loss;
pub mod mixture;
pub mod modelsel;
pub mod risk;
pub mod solver;

mod stats;

pub use data::{Features, Label, LabeledDataset, TestDataset, UnlabeledDataset};
pub use error::{Error, Result};
pub use kernel::GaussianKernel;
pub use loss::SurrogateLoss;
pub use solver::DualModel;
