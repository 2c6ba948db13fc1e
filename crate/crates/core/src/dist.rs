//! Data distributions and the super-sample machinery.
//!
//! A super-sample is an `n x 2` array of i.i.d. data points together with a
//! membership vector of `n` fair bits selecting one column per row as the
//! training set; the complementary column is the ghost (test) set. All
//! shipped distributions are supported on the unit ball.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed::Seed;
use crate::{invalid, linalg, Error, Result};

/// A single observation: a real vector of the ambient dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub coords: Vec<f64>,
}

impl DataPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        DataPoint { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.coords)
    }
}

/// Supported data distributions.
///
/// `CubeP` is the product measure on `{-1/sqrt(D), +1/sqrt(D)}^D` with
/// coordinate-wise bias vector `pstar` in `[-1, 1]^D`: coordinate `k` equals
/// `+1/sqrt(D)` with probability `(1 + pstar_k) / 2`. Every atom has unit
/// norm exactly, so the mean is `pstar / sqrt(D)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataDistribution {
    CubeP { pstar: Vec<f64> },
    FiniteSupport { atoms: Vec<DataPoint>, weights: Vec<f64> },
    SphereUniform { dim: usize },
}

impl DataDistribution {
    /// Cube distribution with bias drawn uniformly from `[-1, 1]^D`.
    pub fn cube_random_pstar(dim: usize, seed: &Seed) -> Self {
        let mut rng = seed.rng();
        let pstar = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        DataDistribution::CubeP { pstar }
    }

    pub fn cube_symmetric(dim: usize) -> Self {
        DataDistribution::CubeP { pstar: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        match self {
            DataDistribution::CubeP { pstar } => pstar.len(),
            DataDistribution::FiniteSupport { atoms, .. } => {
                atoms.first().map_or(0, |a| a.dim())
            }
            DataDistribution::SphereUniform { dim } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DataDistribution::CubeP { pstar } => {
                if pstar.is_empty() {
                    return Err(invalid("cube_p needs dimension >= 1"));
                }
                for (k, p) in pstar.iter().enumerate() {
                    if !(-1.0..=1.0).contains(p) {
                        return Err(invalid(format!(
                            "cube_p bias component {k} = {p} outside [-1, 1]"
                        )));
                    }
                }
                Ok(())
            }
            DataDistribution::FiniteSupport { atoms, weights } => {
                if atoms.is_empty() || atoms.len() != weights.len() {
                    return Err(invalid("finite_support needs matching non-empty atoms/weights"));
                }
                let dim = atoms[0].dim();
                if atoms.iter().any(|a| a.dim() != dim) {
                    return Err(Error::ShapeMismatch("finite_support atoms of mixed dimension".into()));
                }
                if weights.iter().any(|w| *w < 0.0) {
                    return Err(invalid("finite_support weights must be nonnegative"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(invalid(format!("finite_support weights sum to {total}, not 1")));
                }
                if atoms.iter().any(|a| a.norm() > 1.0 + 1e-12) {
                    return Err(invalid("finite_support atoms must lie in the unit ball"));
                }
                Ok(())
            }
            DataDistribution::SphereUniform { dim } => {
                if *dim == 0 {
                    return Err(invalid("sphere_uniform needs dimension >= 1"));
                }
                Ok(())
            }
        }
    }

    /// Exact mean vector.
    pub fn mean(&self) -> Vec<f64> {
        match self {
            DataDistribution::CubeP { pstar } => {
                let s = (pstar.len() as f64).sqrt();
                pstar.iter().map(|p| p / s).collect()
            }
            DataDistribution::FiniteSupport { atoms, weights } => {
                let mut m = vec![0.0; self.dim()];
                for (a, w) in atoms.iter().zip(weights) {
                    linalg::axpy(&mut m, *w, &a.coords);
                }
                m
            }
            DataDistribution::SphereUniform { dim } => vec![0.0; *dim],
        }
    }

    /// Exact second moment `E ||Z||^2`.
    pub fn second_moment(&self) -> f64 {
        match self {
            DataDistribution::CubeP { .. } | DataDistribution::SphereUniform { .. } => 1.0,
            DataDistribution::FiniteSupport { atoms, weights } => atoms
                .iter()
                .zip(weights)
                .map(|(a, w)| w * a.norm().powi(2))
                .sum(),
        }
    }

    pub fn sample_with(&self, rng: &mut impl Rng) -> DataPoint {
        match self {
            DataDistribution::CubeP { pstar } => {
                let s = 1.0 / (pstar.len() as f64).sqrt();
                let coords = pstar
                    .iter()
                    .map(|p| {
                        if rng.gen::<f64>() < (1.0 + p) / 2.0 {
                            s
                        } else {
                            -s
                        }
                    })
                    .collect();
                DataPoint::new(coords)
            }
            DataDistribution::FiniteSupport { atoms, weights } => {
                let mut u = rng.gen::<f64>();
                for (a, w) in atoms.iter().zip(weights) {
                    if u < *w {
                        return a.clone();
                    }
                    u -= w;
                }
                atoms.last().unwrap().clone()
            }
            DataDistribution::SphereUniform { dim } => {
                let v = crate::sample::gaussian_vector_with(rng, *dim, 1.0);
                let n = linalg::norm(&v);
                DataPoint::new(v.into_iter().map(|x| x / n).collect())
            }
        }
    }
}

/// `n x 2` array of i.i.d. data points.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperSample {
    pairs: Vec<[DataPoint; 2]>,
}

impl SuperSample {
    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    /// Point in row `i`, column `j in {0, 1}`.
    pub fn point(&self, i: usize, j: usize) -> &DataPoint {
        &self.pairs[i][j]
    }

    pub fn rows(&self) -> &[[DataPoint; 2]] {
        &self.pairs
    }
}

/// Length-`n` vector of fair membership bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipVector {
    pub bits: Vec<u8>,
}

impl MembershipVector {
    pub fn n(&self) -> usize {
        self.bits.len()
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|b| *b > 1) {
            return Err(invalid("membership bits must be 0 or 1"));
        }
        Ok(MembershipVector { bits })
    }
}

pub fn sample_supersample(dist: &DataDistribution, n: usize, seed: &Seed) -> Result<SuperSample> {
    if n == 0 {
        return Err(invalid("super-sample size must be >= 1"));
    }
    dist.validate()?;
    let mut rng = seed.rng();
    Ok(sample_supersample_with(dist, n, &mut rng))
}

pub(crate) fn sample_supersample_with(
    dist: &DataDistribution,
    n: usize,
    rng: &mut impl Rng,
) -> SuperSample {
    let pairs = (0..n)
        .map(|_| [dist.sample_with(rng), dist.sample_with(rng)])
        .collect();
    SuperSample { pairs }
}

pub fn sample_membership(n: usize, seed: &Seed) -> Result<MembershipVector> {
    if n == 0 {
        return Err(invalid("membership vector length must be >= 1"));
    }
    let mut rng = seed.rng();
    Ok(sample_membership_with(n, &mut rng))
}

pub(crate) fn sample_membership_with(n: usize, rng: &mut impl Rng) -> MembershipVector {
    MembershipVector {
        bits: (0..n).map(|_| u8::from(rng.gen::<bool>())).collect(),
    }
}

/// Training set `{Z_{i, J_i}}`.
pub fn select_train(ss: &SuperSample, j: &MembershipVector) -> Result<Vec<DataPoint>> {
    select(ss, j, false)
}

/// Ghost set `{Z_{i, 1 - J_i}}`.
pub fn select_ghost(ss: &SuperSample, j: &MembershipVector) -> Result<Vec<DataPoint>> {
    select(ss, j, true)
}

fn select(ss: &SuperSample, j: &MembershipVector, flip: bool) -> Result<Vec<DataPoint>> {
    if ss.n() != j.n() {
        return Err(Error::ShapeMismatch(format!(
            "super-sample rows {} != membership length {}",
            ss.n(),
            j.n()
        )));
    }
    Ok(ss
        .pairs
        .iter()
        .zip(&j.bits)
        .map(|(pair, &b)| {
            let col = if flip { 1 - b } else { b } as usize;
            pair[col].clone()
        })
        .collect())
}
