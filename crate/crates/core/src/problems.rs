//! Loss-function families, risk functionals, and learners.
//!
//! Four loss kinds over the hypothesis ball `B_D(R)`:
//!
//! * linear: `l(z, w) = -L <w, z>`;
//! * strongly convex: `l(z, w) = -L_c <w, z> + (lambda/2) ||w||^2`;
//! * squared distance: `l(z, w) = -L ||w - z||^2`;
//! * generalized linear: `l(z, w) = g(<w, phi(z)>, z) + r(w)` with `g`
//!   Lipschitz in its first argument and `||phi(z)|| <= B`.
//!
//! The squared-norm and offset terms do not move the generalization error,
//! which is why the linear analysis transfers to the other kinds.

use std::fmt;
use std::sync::Arc;

use crate::dist::{DataDistribution, DataPoint};
use crate::linalg::{self, dot};
use crate::mc::{McEstimate, Z95};
use crate::seed::Seed;
use crate::{invalid, Error, Result};

/// Model parameters, a point of `B_D(R)` for learner outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub w: Vec<f64>,
}

impl Hypothesis {
    pub fn new(w: Vec<f64>) -> Self {
        Hypothesis { w }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }
}

pub type LinkFn = Arc<dyn Fn(f64, &DataPoint) -> f64 + Send + Sync>;
pub type FeatureFn = Arc<dyn Fn(&DataPoint) -> Vec<f64> + Send + Sync>;
pub type OffsetFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Link/feature/offset handles for the generalized-linear kind. The claimed
/// Lipschitz constant of `g` and feature bound `B` live on the instance and
/// are audited on probes rather than trusted.
#[derive(Clone)]
pub struct GlLink {
    pub g: LinkFn,
    pub phi: FeatureFn,
    pub offset: OffsetFn,
}

impl GlLink {
    /// `g(t, z) = |t|`, identity features, zero offset.
    pub fn abs_identity() -> Self {
        GlLink {
            g: Arc::new(|t, _| t.abs()),
            phi: Arc::new(|z| z.coords.clone()),
            offset: Arc::new(|_| 0.0),
        }
    }
}

impl fmt::Debug for GlLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("GlLink{..}")
    }
}

#[derive(Debug, Clone)]
pub enum LossKind {
    Linear,
    StronglyConvex,
    Squared,
    GeneralizedLinear(GlLink),
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Linear => "linear",
            LossKind::StronglyConvex => "strongly_convex",
            LossKind::Squared => "squared",
            LossKind::GeneralizedLinear(_) => "generalized_linear",
        }
    }
}

/// A loss family together with its constants.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub kind: LossKind,
    /// `L` (or `L_c` for the strongly convex kind).
    pub lipschitz: f64,
    /// `lambda`, strongly convex kind only.
    pub strong_convexity: f64,
    /// Hypothesis ball radius `R`.
    pub radius: f64,
    /// Feature bound `B`, generalized-linear kind only.
    pub feature_bound: f64,
    /// Ambient dimension `D`.
    pub dim: usize,
}

impl ProblemInstance {
    pub fn linear(dim: usize, lipschitz: f64, radius: f64) -> Self {
        ProblemInstance {
            kind: LossKind::Linear,
            lipschitz,
            strong_convexity: 0.0,
            radius,
            feature_bound: 0.0,
            dim,
        }
    }

    pub fn strongly_convex(dim: usize, lipschitz: f64, lambda: f64, radius: f64) -> Self {
        ProblemInstance {
            kind: LossKind::StronglyConvex,
            lipschitz,
            strong_convexity: lambda,
            radius,
            feature_bound: 0.0,
            dim,
        }
    }

    pub fn squared(dim: usize, lipschitz: f64, radius: f64) -> Self {
        ProblemInstance {
            kind: LossKind::Squared,
            lipschitz,
            strong_convexity: 0.0,
            radius,
            feature_bound: 0.0,
            dim,
        }
    }

    pub fn generalized_linear(
        dim: usize,
        lipschitz: f64,
        feature_bound: f64,
        radius: f64,
        link: GlLink,
    ) -> Self {
        ProblemInstance {
            kind: LossKind::GeneralizedLinear(link),
            lipschitz,
            strong_convexity: 0.0,
            radius,
            feature_bound,
            dim,
        }
    }

    /// Width `C` of the loss range over `B_D(R)` and the unit data ball;
    /// shifting the loss into `[0, C]` changes neither the generalization
    /// error nor any gradient-difference term, so `C` is what the
    /// bounded-loss bounds consume.
    pub fn range_width(&self) -> f64 {
        let lr = self.lipschitz * self.radius;
        match self.kind {
            LossKind::Linear => 2.0 * lr,
            LossKind::StronglyConvex => 2.0 * lr + 0.5 * self.strong_convexity * self.radius.powi(2),
            // -L ||w - z||^2 ranges over [-L (R+1)^2, 0]
            LossKind::Squared => self.lipschitz * (self.radius + 1.0).powi(2),
            LossKind::GeneralizedLinear(_) => 2.0 * self.lipschitz * self.radius * self.feature_bound,
        }
    }

    fn check_dim(&self, len: usize, what: &str) -> Result<()> {
        if len != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "{what} has dimension {len}, instance expects {}",
                self.dim
            )));
        }
        Ok(())
    }
}

/// Loss value `l(z, w)`. `w` may be any vector of the ambient dimension; the
/// ball constraint applies to learner outputs, not to evaluation.
pub fn loss(inst: &ProblemInstance, z: &DataPoint, w: &[f64]) -> Result<f64> {
    inst.check_dim(z.dim(), "data point")?;
    inst.check_dim(w.len(), "hypothesis")?;
    Ok(match &inst.kind {
        LossKind::Linear => -inst.lipschitz * dot(w, &z.coords),
        LossKind::StronglyConvex => {
            -inst.lipschitz * dot(w, &z.coords) + 0.5 * inst.strong_convexity * dot(w, w)
        }
        LossKind::Squared => {
            let d2: f64 = w
                .iter()
                .zip(&z.coords)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            -inst.lipschitz * d2
        }
        LossKind::GeneralizedLinear(link) => {
            let feats = (link.phi)(z);
            (link.g)(dot(w, &feats), z) + (link.offset)(w)
        }
    })
}

pub fn empirical_risk(inst: &ProblemInstance, data: &[DataPoint], w: &[f64]) -> Result<f64> {
    if data.is_empty() {
        return Err(invalid("empirical risk over an empty dataset"));
    }
    let mut acc = 0.0;
    for z in data {
        acc += loss(inst, z, w)?;
    }
    Ok(acc / data.len() as f64)
}

/// Risk value with the uncertainty of its computation route: closed form
/// (`ci` absent) or Monte Carlo (`ci` present, with sample count).
#[derive(Debug, Clone, PartialEq)]
pub struct RiskValue {
    pub value: f64,
    pub ci: Option<McEstimate>,
}

impl RiskValue {
    fn exact(value: f64) -> Self {
        RiskValue { value, ci: None }
    }
}

/// Population risk `E_Z l(Z, w)`.
///
/// Exact via the distribution's mean and second moment for the linear,
/// strongly convex, and squared kinds; Monte Carlo with `mc_samples` draws
/// (seeded) for the generalized-linear kind.
pub fn population_risk(
    inst: &ProblemInstance,
    dist: &DataDistribution,
    w: &[f64],
    seed: &Seed,
    mc_samples: u64,
) -> Result<RiskValue> {
    inst.check_dim(dist.dim(), "distribution")?;
    inst.check_dim(w.len(), "hypothesis")?;
    let mean = dist.mean();
    Ok(match &inst.kind {
        LossKind::Linear => RiskValue::exact(-inst.lipschitz * dot(w, &mean)),
        LossKind::StronglyConvex => RiskValue::exact(
            -inst.lipschitz * dot(w, &mean) + 0.5 * inst.strong_convexity * dot(w, w),
        ),
        LossKind::Squared => {
            // E ||w - Z||^2 = ||w||^2 - 2 <w, E Z> + E ||Z||^2
            let e = dot(w, w) - 2.0 * dot(w, &mean) + dist.second_moment();
            RiskValue::exact(-inst.lipschitz * e)
        }
        LossKind::GeneralizedLinear(_) => {
            let mut rng = seed.rng();
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..mc_samples {
                let z = dist.sample_with(&mut rng);
                let l = loss(inst, &z, w)?;
                s += l;
                s2 += l * l;
            }
            let n = mc_samples.max(1) as f64;
            let m = s / n;
            let var = ((s2 / n) - m * m).max(0.0) * n / (n - 1.0).max(1.0);
            let std_err = (var / n).sqrt();
            RiskValue {
                value: m,
                ci: Some(McEstimate { mean: m, std_err, ci_half: Z95 * std_err, samples: mc_samples }),
            }
        }
    })
}

/// Generalization error `population_risk - empirical_risk`.
pub fn gen_error(
    inst: &ProblemInstance,
    dist: &DataDistribution,
    data: &[DataPoint],
    w: &[f64],
    seed: &Seed,
    mc_samples: u64,
) -> Result<RiskValue> {
    let pop = population_risk(inst, dist, w, seed, mc_samples)?;
    let emp = empirical_risk(inst, data, w)?;
    Ok(RiskValue { value: pop.value - emp, ci: pop.ci })
}

/// A learning algorithm mapping a dataset to a hypothesis. Deterministic
/// learners ignore the seed.
pub trait Learner: Sync {
    fn fit(&self, inst: &ProblemInstance, data: &[DataPoint], seed: &Seed) -> Result<Hypothesis>;
}

/// Exact empirical risk minimizer for the linear and strongly convex kinds.
///
/// The linear empirical risk `-L <w, z_bar>` over `B_D(R)` is minimized by
/// `R z_bar / ||z_bar||`; the strongly convex one by `(L_c/lambda) z_bar`
/// clipped to the ball. A zero sample mean ties every direction, and the
/// origin is the canonical deterministic choice.
#[derive(Debug, Clone, Copy, Default)]
pub struct ErmLinear;

impl Learner for ErmLinear {
    fn fit(&self, inst: &ProblemInstance, data: &[DataPoint], _seed: &Seed) -> Result<Hypothesis> {
        if data.is_empty() {
            return Err(invalid("ERM over an empty dataset"));
        }
        let mut zbar = vec![0.0; inst.dim];
        for z in data {
            inst.check_dim(z.dim(), "data point")?;
            linalg::axpy(&mut zbar, 1.0 / data.len() as f64, &z.coords);
        }
        let nz = linalg::norm(&zbar);
        let w = match inst.kind {
            LossKind::Linear => {
                if nz == 0.0 {
                    zbar
                } else {
                    linalg::scale(&mut zbar, inst.radius / nz);
                    zbar
                }
            }
            LossKind::StronglyConvex => {
                linalg::scale(&mut zbar, inst.lipschitz / inst.strong_convexity);
                linalg::project_ball(&mut zbar, inst.radius);
                zbar
            }
            _ => {
                return Err(Error::Unsupported(format!(
                    "ErmLinear does not handle the {} kind",
                    inst.kind.name()
                )))
            }
        };
        Ok(Hypothesis::new(w))
    }
}

/// Empirically audit the claimed Lipschitz constant of a generalized-linear
/// instance: probes random `(z, w1, w2)` triples and returns the largest
/// observed ratio `|l(z,w1) - l(z,w2)| / (L B ||w1 - w2||)`, which must not
/// exceed 1.
pub fn audit_lipschitz(
    inst: &ProblemInstance,
    dist: &DataDistribution,
    probes: usize,
    seed: &Seed,
) -> Result<f64> {
    let LossKind::GeneralizedLinear(_) = inst.kind else {
        return Err(Error::Unsupported("lipschitz audit targets the generalized-linear kind".into()));
    };
    let mut rng = seed.rng();
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let z = dist.sample_with(&mut rng);
        let mut w1 = crate::sample::sample_uniform_ball_with(inst.dim, inst.radius, &mut rng)?;
        let mut w2 = crate::sample::sample_uniform_ball_with(inst.dim, inst.radius, &mut rng)?;
        linalg::project_ball(&mut w1, inst.radius);
        linalg::project_ball(&mut w2, inst.radius);
        let gap = (loss(inst, &z, &w1)? - loss(inst, &z, &w2)?).abs();
        let denom = inst.lipschitz
            * inst.feature_bound
            * w1.iter().zip(&w2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if denom > 0.0 {
            worst = worst.max(gap / denom);
        }
    }
    Ok(worst)
}
