//! Finite-support joint distributions under the class shift condition. Every
//! expectation over them is an exact finite sum.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use super::{Features, Label};
use crate::error::{Error, Result};

const MASS_TOLERANCE: f64 = 1e-12;

/// Probability mass `prob` on the pair `(points[point], label)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub point: usize,
    pub label: Label,
    pub prob: f64,
}

/// Test distribution `theta * P_tr + (1 - theta) * P_new` on finitely many
/// atoms. Known-label atoms carry the `theta * P_tr` part and `nc` atoms carry
/// `(1 - theta) * P_new`. Several atoms may share a point.
#[derive(Clone, Debug)]
pub struct FiniteDistribution {
    points: Features,
    atoms: Vec<Atom>,
    theta: f64,
    num_known: usize,
}

impl FiniteDistribution {
    pub fn new(points: Features, atoms: Vec<Atom>, theta: f64, num_known: usize) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::InvalidArgument(format!("theta {theta} outside (0, 1]")));
        }
        if num_known == 0 {
            return Err(Error::InvalidArgument("at least one known class is required".into()));
        }
        if atoms.is_empty() {
            return Err(Error::Empty("distribution has no atoms".into()));
        }
        let mut known_mass = 0.0;
        let mut new_mass = 0.0;
        for atom in &atoms {
            if atom.point >= points.len() {
                return Err(Error::InvalidArgument(format!(
                    "atom refers to point {} of {}",
                    atom.point,
                    points.len()
                )));
            }
            if !(atom.prob >= 0.0) || !atom.prob.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "invalid probability {}",
                    atom.prob
                )));
            }
            match atom.label {
                Label::Known(k) if k == 0 || k > num_known => {
                    return Err(Error::InvalidArgument(format!("label {k} outside 1..={num_known}")))
                }
                Label::Known(_) => known_mass += atom.prob,
                Label::New => new_mass += atom.prob,
            }
        }
        if (known_mass + new_mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {} instead of 1",
                known_mass + new_mass
            )));
        }
        if (known_mass - theta).abs() > MASS_TOLERANCE || (new_mass - (1.0 - theta)).abs() > MASS_TOLERANCE {
            return Err(Error::ClassShift(format!(
                "known mass {known_mass} and new mass {new_mass} do not split as theta = {theta}"
            )));
        }
        Ok(FiniteDistribution {
            points,
            atoms,
            theta,
            num_known,
        })
    }

    /// Random class-shift distribution on `num_points` standard-normal points
    /// in `dim` dimensions with `num_atoms` atoms (at least one per known
    /// class and one `nc` atom when `theta < 1`).
    pub fn random<R: Rng>(
        rng: &mut R,
        num_points: usize,
        num_atoms: usize,
        dim: usize,
        num_known: usize,
        theta: f64,
    ) -> Result<Self> {
        let needs_new = theta < 1.0;
        let min_atoms = num_known + usize::from(needs_new);
        if num_atoms < min_atoms || num_points == 0 {
            return Err(Error::InvalidArgument(format!(
                "need at least {min_atoms} atoms and one point"
            )));
        }
        let values = (0..num_points * dim)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let points = Features::new(dim, values)?;

        let mut labels: Vec<Label> = (1..=num_known).map(Label::Known).collect();
        if needs_new {
            labels.push(Label::New);
        }
        while labels.len() < num_atoms {
            let i = rng.gen_range(0..num_known + usize::from(needs_new));
            labels.push(Label::from_index(i, num_known));
        }
        let raw: Vec<f64> = labels.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
        let known_raw: f64 = labels.iter().zip(&raw).filter(|(l, _)| !l.is_new()).map(|(_, w)| w).sum();
        let new_raw: f64 = labels.iter().zip(&raw).filter(|(l, _)| l.is_new()).map(|(_, w)| w).sum();
        let atoms = labels
            .iter()
            .zip(&raw)
            .map(|(&label, &w)| Atom {
                point: rng.gen_range(0..num_points),
                label,
                prob: if label.is_new() {
                    w / new_raw * (1.0 - theta)
                } else {
                    w / known_raw * theta
                },
            })
            .collect();
        FiniteDistribution::new(points, atoms, theta, num_known)
    }

    pub fn points(&self) -> &Features {
        &self.points
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn num_known(&self) -> usize {
        self.num_known
    }

    pub fn known_mass(&self) -> f64 {
        self.atoms.iter().filter(|a| !a.label.is_new()).map(|a| a.prob).sum()
    }

    pub fn new_mass(&self) -> f64 {
        self.atoms.iter().filter(|a| a.label.is_new()).map(|a| a.prob).sum()
    }

    /// Joint mass table `p(point, y)` with `num_known + 1` columns.
    pub fn joint_table(&self) -> Vec<Vec<f64>> {
        let mut table = vec![vec![0.0; self.num_known + 1]; self.points.len()];
        for a in &self.atoms {
            table[a.point][a.label.index(self.num_known)] += a.prob;
        }
        table
    }

    /// Draws `n` labeled pairs `(point, class)` from `P_tr`.
    pub fn sample_training<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<(usize, usize)> {
        let known: Vec<&Atom> = self.atoms.iter().filter(|a| !a.label.is_new()).collect();
        let dist = WeightedIndex::new(known.iter().map(|a| a.prob)).expect("known mass is positive");
        (0..n)
            .map(|_| {
                let a = known[dist.sample(rng)];
                match a.label {
                    Label::Known(k) => (a.point, k),
                    Label::New => unreachable!(),
                }
            })
            .collect()
    }

    /// Draws `n` points from the test marginal `p_te(x)`.
    pub fn sample_marginal<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<usize> {
        let dist = WeightedIndex::new(self.atoms.iter().map(|a| a.prob)).expect("total mass is 1");
        (0..n).map(|_| self.atoms[dist.sample(rng)].point).collect()
    }
}
