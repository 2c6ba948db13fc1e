//! The projection-clip-quantize compressor and its closed forms.
//!
//! A hypothesis `w` in `R^D` is compressed in three steps:
//!
//! 1. project with a `D x d` matrix of i.i.d. `N(0, 1/d)` entries:
//!    `u = theta^T w`;
//! 2. clip: keep `u` when `||u|| <= c_w`, else replace it by the zero
//!    vector (the boundary stays on the no-clip branch);
//! 3. dither: add a uniform draw from the radius-`nu` ball, so the
//!    compressed value `w_hat = u + v` is uniform on `B_d(u, nu)` and
//!    unbiased for `u`.
//!
//! The compressed value lives in `B_d(c_w + nu)`, which caps the
//! membership information it can carry at `d * log((c_w + nu) / nu)` nats
//! (volume ratio of the support to one dither cell). The clip event has
//! probability at most `exp(-0.21 d (c_w^2 - 1)^2)` for unit-ball
//! hypotheses, and the projected-back model `theta w_hat` has second
//! moment growing like `D/d` — the norm blow-up that breaks
//! bounded-model arguments.
//!
//! Constants: the clip-tail bound carries 0.21 in its exponent while the
//! norm blow-up lower bound carries 0.1; each formula is implemented with
//! its own stated constant, without reconciling the two.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::linalg::{norm, Matrix};
use crate::sample;
use crate::seed::Seed;
use crate::{invalid, Error, Result};

pub const CLIP_MAX: f64 = 1.118033988749895; // sqrt(5/4), exclusive upper end

/// `JL(d, c_w, nu)` parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressorConfig {
    /// Target dimension `d`.
    pub d: usize,
    /// Clip radius `c_w` in `[1, sqrt(5/4))`.
    pub clip: f64,
    /// Dither radius `nu` in `(0, 1]`.
    pub dither: f64,
}

impl CompressorConfig {
    pub fn new(d: usize, clip: f64, dither: f64) -> Result<Self> {
        let cfg = CompressorConfig { d, clip, dither };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default constants for linear instances: `(d, c_w, nu) = (1, 1, 0.4)`.
    pub fn linear_default() -> Self {
        CompressorConfig { d: 1, clip: 1.0, dither: 0.4 }
    }

    /// Default constants for generalized-linear instances:
    /// `d = ceil(sqrt(n))`, `c_w = 1.1`, `nu = 0.5`.
    pub fn generalized_default(n: usize) -> Self {
        CompressorConfig { d: (n as f64).sqrt().ceil() as usize, clip: 1.1, dither: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(invalid("compressor target dimension must be >= 1"));
        }
        if !(1.0..CLIP_MAX).contains(&self.clip) {
            return Err(invalid(format!(
                "clip radius {} outside [1, sqrt(5/4))",
                self.clip
            )));
        }
        if !(self.dither > 0.0 && self.dither <= 1.0) {
            return Err(invalid(format!("dither radius {} outside (0, 1]", self.dither)));
        }
        Ok(())
    }
}

/// A sampled projection matrix tagged with an identity token, so that
/// estimators conditioning on a fixed projection can detect accidental
/// mixing of draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    mat: Matrix,
    token: u64,
}

impl Projection {
    pub fn sample_gaussian(d_ambient: usize, d: usize, seed: &Seed) -> Result<Self> {
        let mat = sample::sample_gaussian_matrix(d_ambient, d, seed)?;
        Ok(Projection { mat, token: seed.token() })
    }

    pub fn sample_gaussian_with(
        d_ambient: usize,
        d: usize,
        rng: &mut impl Rng,
        token: u64,
    ) -> Result<Self> {
        let mat = sample::sample_gaussian_matrix_with(d_ambient, d, rng)?;
        Ok(Projection { mat, token })
    }

    /// Identity embedding (`d = D`), a degenerate compressor for tests and
    /// distortion baselines.
    pub fn identity(d_ambient: usize) -> Self {
        Projection { mat: Matrix::identity(d_ambient), token: 0 }
    }

    pub fn from_matrix(mat: Matrix, token: u64) -> Self {
        Projection { mat, token }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn token(&self) -> u64 {
        self.token
    }

    pub fn ambient_dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn target_dim(&self) -> usize {
        self.mat.cols()
    }
}

/// How the projection matrix is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionKind {
    Gaussian,
    /// `theta = I` (requires `d = D`); baseline with zero projection loss.
    Identity,
}

pub fn draw_projection(
    kind: ProjectionKind,
    dim: usize,
    cfg: &CompressorConfig,
    rng: &mut impl Rng,
    token: u64,
) -> Result<Projection> {
    match kind {
        ProjectionKind::Gaussian => Projection::sample_gaussian_with(dim, cfg.d, rng, token),
        ProjectionKind::Identity => {
            if cfg.d != dim {
                return Err(invalid(format!(
                    "identity projection needs d = D, got d = {}, D = {dim}",
                    cfg.d
                )));
            }
            Ok(Projection::identity(dim))
        }
    }
}

/// Compressed hypothesis `w_hat` in `B_d(c_w + nu)`, tagged with the token
/// of the projection it was produced under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedHypothesis {
    pub coeffs: Vec<f64>,
    pub theta_token: u64,
}

/// Projection-and-clip step: `theta^T w` when its norm is at most `c_w`
/// (boundary included), the zero vector otherwise.
pub fn clip_project(theta: &Projection, w: &[f64], clip: f64) -> Result<Vec<f64>> {
    let u = theta.mat.t_apply(w)?;
    if norm(&u) <= clip {
        Ok(u)
    } else {
        Ok(vec![0.0; u.len()])
    }
}

/// Dither step: `w_hat = u + v` with `v` uniform on `B_d(nu)`, so
/// `E[w_hat | u] = u`.
pub fn quantize(
    u: &[f64],
    dither: f64,
    theta_token: u64,
    rng: &mut impl Rng,
) -> Result<CompressedHypothesis> {
    let v = sample::sample_uniform_ball_with(u.len(), dither, rng)?;
    let coeffs = u.iter().zip(&v).map(|(a, b)| a + b).collect();
    Ok(CompressedHypothesis { coeffs, theta_token })
}

/// Full compression pipeline for one hypothesis.
pub fn compress(
    theta: &Projection,
    w: &[f64],
    cfg: &CompressorConfig,
    rng: &mut impl Rng,
) -> Result<CompressedHypothesis> {
    let u = clip_project(theta, w, cfg.clip)?;
    quantize(&u, cfg.dither, theta.token, rng)
}

/// Project the compressed hypothesis back to the ambient space:
/// `theta w_hat`. Fails when the compressed value was produced under a
/// different projection draw.
pub fn reconstruct(theta: &Projection, w_hat: &CompressedHypothesis) -> Result<Vec<f64>> {
    if w_hat.theta_token != theta.token {
        return Err(Error::ProjectionMismatch { expected: theta.token, got: w_hat.theta_token });
    }
    theta.mat.apply(&w_hat.coeffs)
}

/// Information cap `d * log((c_w + nu) / nu)` in nats: the compressed value
/// is supported on `B_d(c_w + nu)` and is uniform on a radius-`nu` ball
/// given the projection, so its membership information cannot exceed the
/// log volume ratio.
pub fn cmi_cap(cfg: &CompressorConfig) -> f64 {
    cfg.d as f64 * ((cfg.clip + cfg.dither) / cfg.dither).ln()
}

/// Clip-event tail bound `exp(-0.21 d (c_w^2 - 1)^2)`, valid for
/// hypotheses in the unit ball.
pub fn tail_bound(d: usize, clip: f64) -> Result<f64> {
    if !(1.0..CLIP_MAX).contains(&clip) {
        return Err(invalid(format!("clip radius {clip} outside [1, sqrt(5/4))")));
    }
    Ok((-0.21 * d as f64 * (clip * clip - 1.0).powi(2)).exp())
}

/// Exact moments of the projected-back vector for a hypothesis of norm
/// `wn`: `E ||theta theta^T w||^2 = ((D + d + 1)/d) wn^2` and
/// `E ||theta theta^T w||^4 = ((D+d+3)(D+d+5)(d+2)/d^3) wn^4`.
pub fn pushforward_norm_moments(d_ambient: usize, d: usize, wn: f64) -> (f64, f64) {
    let (big_d, dd) = (d_ambient as f64, d as f64);
    let m2 = (big_d + dd + 1.0) / dd * wn.powi(2);
    let m4 = (big_d + dd + 3.0) * (big_d + dd + 5.0) * (dd + 2.0) / dd.powi(3) * wn.powi(4);
    (m2, m4)
}

/// Lower bound on `E ||theta w_hat||^2` for the full compressor:
/// `m2 - sqrt(m4-ratio) * wn^2 * exp(-0.1 d (c_w^2 - 1)^2) - D nu^2 / d`.
/// May be negative at small scale; it certifies the `D/d` blow-up when `D`
/// is large.
pub fn norm_blowup_lower_bound(
    d_ambient: usize,
    d: usize,
    clip: f64,
    dither: f64,
    wn: f64,
) -> f64 {
    let (big_d, dd) = (d_ambient as f64, d as f64);
    let (m2, _) = pushforward_norm_moments(d_ambient, d, wn);
    let m4_ratio = (big_d + dd + 3.0) * (big_d + dd + 5.0) * (dd + 2.0) / dd.powi(3);
    let tail = (-0.1 * dd * (clip * clip - 1.0).powi(2)).exp();
    m2 - m4_ratio.sqrt() * wn.powi(2) * tail - big_d * dither * dither / dd
}

/// Mean absolute coordinate of a uniform draw from `B_d(nu)`:
/// `nu * Gamma((d+2)/2) / (sqrt(pi) * Gamma((d+3)/2))`, evaluated in log
/// space so it stays finite for very large `d`.
pub fn ball_coord_abs_mean(d: usize, nu: f64) -> Result<f64> {
    if d == 0 {
        return Err(invalid("ball dimension must be >= 1"));
    }
    if nu <= 0.0 {
        return Err(invalid("ball radius must be positive"));
    }
    let dd = d as f64;
    let log_ratio = ln_gamma((dd + 2.0) / 2.0) - ln_gamma((dd + 3.0) / 2.0);
    Ok(nu * (log_ratio - 0.5 * std::f64::consts::PI.ln()).exp())
}
