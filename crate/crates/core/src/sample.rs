//! Random matrix and ball samplers.
//!
//! Three samplers back the compression and subspace-training machinery:
//!
//! * `D x d` matrices with i.i.d. `N(0, 1/d)` entries, so `E ||theta^T z||^2
//!   = ||z||^2` for every fixed `z` and `d * ||theta^T z||^2` is chi-squared
//!   with `d` degrees of freedom for unit `z`;
//! * uniform draws from the radius-`nu` ball, via a normalized Gaussian
//!   direction and radius `nu * u^(1/d)`, which reproduces the radial law
//!   `P(r <= t) = (t/nu)^d` exactly in every dimension;
//! * Haar-uniform Stiefel matrices (orthonormal columns), via Gram-Schmidt
//!   on a standard Gaussian matrix with positive pivots.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::Matrix;
use crate::seed::Seed;
use crate::{invalid, Result};

pub(crate) fn gaussian_vector_with(rng: &mut impl Rng, d: usize, std_dev: f64) -> Vec<f64> {
    (0..d).map(|_| std_dev * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// `D x d` matrix of i.i.d. `N(0, 1/d)` entries.
pub fn sample_gaussian_matrix(d_ambient: usize, d: usize, seed: &Seed) -> Result<Matrix> {
    let mut rng = seed.rng();
    sample_gaussian_matrix_with(d_ambient, d, &mut rng)
}

pub fn sample_gaussian_matrix_with(
    d_ambient: usize,
    d: usize,
    rng: &mut impl Rng,
) -> Result<Matrix> {
    check_dims(d_ambient, d)?;
    let sd = 1.0 / (d as f64).sqrt();
    Ok(Matrix::from_fn(d_ambient, d, |_, _| {
        sd * rng.sample::<f64, _>(StandardNormal)
    }))
}

/// Uniform draw from the `d`-dimensional ball of radius `nu`.
pub fn sample_uniform_ball(d: usize, nu: f64, seed: &Seed) -> Result<Vec<f64>> {
    let mut rng = seed.rng();
    sample_uniform_ball_with(d, nu, &mut rng)
}

pub fn sample_uniform_ball_with(d: usize, nu: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(invalid("ball dimension must be >= 1"));
    }
    if nu <= 0.0 {
        return Err(invalid(format!("ball radius must be positive, got {nu}")));
    }
    let mut v = gaussian_vector_with(rng, d, 1.0);
    let n = crate::linalg::norm(&v);
    let u: f64 = rng.gen();
    let r = nu * u.powf(1.0 / d as f64);
    let c = if n > 0.0 { r / n } else { 0.0 };
    for x in v.iter_mut() {
        *x *= c;
    }
    Ok(v)
}

/// Haar-uniform `D x d` matrix with orthonormal columns.
pub fn sample_stiefel(d_ambient: usize, d: usize, seed: &Seed) -> Result<Matrix> {
    let mut rng = seed.rng();
    sample_stiefel_with(d_ambient, d, &mut rng)
}

pub fn sample_stiefel_with(d_ambient: usize, d: usize, rng: &mut impl Rng) -> Result<Matrix> {
    check_dims(d_ambient, d)?;
    let mut m = Matrix::from_fn(d_ambient, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    m.orthonormalize_columns()?;
    Ok(m)
}

fn check_dims(d_ambient: usize, d: usize) -> Result<()> {
    if d == 0 {
        return Err(invalid("target dimension must be >= 1"));
    }
    if d > d_ambient {
        return Err(invalid(format!(
            "target dimension {d} exceeds ambient dimension {d_ambient}"
        )));
    }
    Ok(())
}
