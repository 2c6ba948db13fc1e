//! Random-subspace SGD/SGLD training with trajectory instrumentation, and
//! the lossless/lossy generalization-bound evaluators.
//!
//! Training runs in a frozen `d`-dimensional subspace spanned by a Stiefel
//! matrix `theta` (orthonormal columns): with minibatches `V_t` drawn
//! uniformly with replacement before training starts,
//!
//! ```text
//! w'_t = Proj_{B_d(R)} { w'_{t-1} - eta_t grad L_{V_t}(theta w'_{t-1}) + sigma_t e_t }
//! ```
//!
//! The lossless bound charges, for every index `i` and step `t` touching
//! it, the selector mutual information `f(eta_t Delta_{t,i} / (b sigma_t),
//! 1/2)`, where `Delta_{t,i}` is the norm of the gradient gap between the
//! two super-sample columns of `i`. The worst-case weight 1/2 replaces the
//! intractable posterior. With `sigma_t = 0` (plain SGD) each touch costs
//! the full `log 2` and the bound grows with the touch count: the lossy
//! variant fixes this by coupling a perturbed trajectory with extra noise
//! `nu_t e'_t`, discounting old touches by forgetting factors `q_r` and
//! paying a distortion term
//! `2 sqrt(2) L Gamma((d+1)/2)/Gamma(d/2) sum_t nu_t alpha^{T-t}`.
//!
//! The coupling inequality `||w_hat_t - w'_t|| <= sum_r alpha^{t-r} nu_r
//! ||e'_r||` is asserted online at every step; a violation means the
//! declared contraction constant is too small for the loss geometry.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::dist::{DataDistribution, MembershipVector, SuperSample};
use crate::linalg::{self, norm, Matrix};
use crate::mc::{self, ChunkSum, McEstimate};
use crate::mixent::{selector_mi, MixtureParams};
use crate::problems::{empirical_risk, population_risk, LossKind, ProblemInstance};
use crate::sample;
use crate::seed::Seed;
use crate::{invalid, Error, Result};

const ORTHO_TOL: f64 = 1e-8;
const COUPLING_FUZZ: f64 = 1e-9;

/// Per-step scalar schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Schedule {
    Constant(f64),
    PerStep(Vec<f64>),
}

impl Schedule {
    /// Value at step `t` (1-based).
    pub fn at(&self, t: usize) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::PerStep(vs) => vs[t - 1],
        }
    }

    fn check(&self, steps: usize, name: &str, allow_zero: bool) -> Result<()> {
        let ok = |v: f64| v.is_finite() && (v > 0.0 || (allow_zero && v == 0.0));
        match self {
            Schedule::Constant(v) if ok(*v) => Ok(()),
            Schedule::PerStep(vs) if vs.len() == steps && vs.iter().all(|&v| ok(v)) => Ok(()),
            _ => Err(invalid(format!("invalid {name} schedule"))),
        }
    }

    pub fn all_zero(&self) -> bool {
        match self {
            Schedule::Constant(v) => *v == 0.0,
            Schedule::PerStep(vs) => vs.iter().all(|&v| v == 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgldConfig {
    /// Subspace dimension `d`.
    pub subspace_dim: usize,
    /// Step count `T`.
    pub steps: usize,
    /// Minibatch size `b`.
    pub batch: usize,
    pub eta: Schedule,
    pub sigma: Schedule,
    pub nu: Schedule,
    /// Projection-ball radius `R`.
    pub radius: f64,
    /// Declared contraction constant `alpha` of the drift map; audited by
    /// the coupling assertion, not derived.
    pub contraction: f64,
    /// Declared Lipschitz constant of `w' -> l(z, theta w')`.
    pub lipschitz: f64,
}

impl SgldConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.subspace_dim == 0 {
            return Err(invalid("subspace dimension must be >= 1"));
        }
        if self.steps == 0 {
            return Err(invalid("step count must be >= 1"));
        }
        if self.batch == 0 || self.batch > n {
            return Err(invalid(format!("batch size must lie in [1, n = {n}]")));
        }
        self.eta.check(self.steps, "eta", false)?;
        self.sigma.check(self.steps, "sigma", true)?;
        self.nu.check(self.steps, "nu", true)?;
        if self.radius <= 0.0 {
            return Err(invalid("projection radius must be positive"));
        }
        if self.contraction <= 0.0 {
            return Err(invalid("contraction constant must be positive"));
        }
        if self.lipschitz <= 0.0 {
            return Err(invalid("lipschitz constant must be positive"));
        }
        Ok(())
    }
}

/// Instrumented training run: per-step states, batches, gradient gaps for
/// every touched index, and the recorded noise draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `states[t]` is `w'_t`; `states[0]` the initialization.
    pub states: Vec<Vec<f64>>,
    pub batches: Vec<Vec<usize>>,
    /// Per step: `(i, Delta_{t,i})` for each distinct touched index.
    pub grad_gaps: Vec<Vec<(usize, f64)>>,
    /// Gaussian draws `e_t` (unit scale, before multiplying by `sigma_t`).
    pub noise: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }
}

/// Perturbed companion trajectory with its pathwise coupling audit.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedTrajectory {
    pub traj: Trajectory,
    /// `||w_hat_t - w'_t||` per step.
    pub coupling_gap: Vec<f64>,
    /// `sum_r alpha^{t-r} nu_r ||e'_r||` per step.
    pub coupling_bound: Vec<f64>,
}

fn subspace_gradient(
    inst: &ProblemInstance,
    projected_z: &[f64],
    w: &[f64],
    out: &mut Vec<f64>,
) -> Result<()> {
    out.clear();
    match inst.kind {
        LossKind::Linear => {
            out.extend(projected_z.iter().map(|&p| -inst.lipschitz * p));
        }
        LossKind::StronglyConvex => {
            out.extend(
                projected_z
                    .iter()
                    .zip(w)
                    .map(|(&p, &wi)| -inst.lipschitz * p + inst.strong_convexity * wi),
            );
        }
        LossKind::Squared => {
            out.extend(
                projected_z
                    .iter()
                    .zip(w)
                    .map(|(&p, &wi)| -2.0 * inst.lipschitz * (wi - p)),
            );
        }
        LossKind::GeneralizedLinear(_) => {
            return Err(Error::Unsupported(
                "subspace training has analytic gradients for the linear, strongly convex, \
                 and squared kinds only"
                    .into(),
            ))
        }
    }
    Ok(())
}

struct SubspaceData {
    /// `theta^T z_{i,j}` for every super-sample entry.
    projected: Vec<[Vec<f64>; 2]>,
}

fn project_supersample(ss: &SuperSample, theta: &Matrix) -> Result<SubspaceData> {
    let mut projected = Vec::with_capacity(ss.n());
    for i in 0..ss.n() {
        projected.push([
            theta.t_apply(&ss.point(i, 0).coords)?,
            theta.t_apply(&ss.point(i, 1).coords)?,
        ]);
    }
    Ok(SubspaceData { projected })
}

fn check_stiefel(theta: &Matrix) -> Result<()> {
    if theta.orthonormality_defect() > ORTHO_TOL {
        return Err(invalid("projection matrix does not have orthonormal columns"));
    }
    Ok(())
}

fn sample_batches(n: usize, cfg: &SgldConfig, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    (0..cfg.steps)
        .map(|_| (0..cfg.batch).map(|_| rng.gen_range(0..n)).collect())
        .collect()
}

struct StepRecord {
    gaps: Vec<(usize, f64)>,
    grad: Vec<f64>,
}

/// Gradient of the minibatch risk at the current state, plus the per-index
/// gradient gaps between the two columns; all evaluated pre-update.
fn step_gradients(
    inst: &ProblemInstance,
    data: &SubspaceData,
    j: &MembershipVector,
    batch: &[usize],
    w: &[f64],
) -> Result<StepRecord> {
    let d = w.len();
    let mut grad = vec![0.0; d];
    let mut scratch = Vec::with_capacity(d);
    let mut gap_buf: Vec<(usize, f64)> = Vec::new();
    for &i in batch {
        let col = j.bits[i] as usize;
        subspace_gradient(inst, &data.projected[i][col], w, &mut scratch)?;
        linalg::axpy(&mut grad, 1.0 / batch.len() as f64, &scratch);
        if !gap_buf.iter().any(|(k, _)| *k == i) {
            let mut g0 = Vec::with_capacity(d);
            subspace_gradient(inst, &data.projected[i][0], w, &mut g0)?;
            subspace_gradient(inst, &data.projected[i][1], w, &mut scratch)?;
            let gap = g0
                .iter()
                .zip(&scratch)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            gap_buf.push((i, gap));
        }
    }
    Ok(StepRecord { gaps: gap_buf, grad })
}

/// Run the subspace iteration on `theta` from the zero initialization.
pub fn train_subspace(
    cfg: &SgldConfig,
    inst: &ProblemInstance,
    ss: &SuperSample,
    j: &MembershipVector,
    theta: &Matrix,
    seed: &Seed,
) -> Result<Trajectory> {
    cfg.validate(ss.n())?;
    check_stiefel(theta)?;
    if ss.n() != j.n() {
        return Err(Error::ShapeMismatch("membership length != super-sample rows".into()));
    }
    let data = project_supersample(ss, theta)?;
    let mut rng = seed.rng();
    let batches = sample_batches(ss.n(), cfg, &mut rng);
    let d = cfg.subspace_dim;

    let mut states = Vec::with_capacity(cfg.steps + 1);
    let mut noise = Vec::with_capacity(cfg.steps);
    let mut grad_gaps = Vec::with_capacity(cfg.steps);
    let mut w = vec![0.0; d];
    states.push(w.clone());
    for t in 1..=cfg.steps {
        let rec = step_gradients(inst, &data, j, &batches[t - 1], &w)?;
        let eps = sample::gaussian_vector_with(&mut rng, d, 1.0);
        linalg::axpy(&mut w, -cfg.eta.at(t), &rec.grad);
        linalg::axpy(&mut w, cfg.sigma.at(t), &eps);
        linalg::project_ball(&mut w, cfg.radius);
        states.push(w.clone());
        noise.push(eps);
        grad_gaps.push(rec.gaps);
    }
    Ok(Trajectory { states, batches, grad_gaps, noise })
}

/// Re-run the reference iteration with the same batches and shared noise
/// draws plus extra dither `nu_t e'_t`, asserting the coupling inequality
/// at every step.
pub fn perturbed_trajectory(
    cfg: &SgldConfig,
    inst: &ProblemInstance,
    ss: &SuperSample,
    j: &MembershipVector,
    theta: &Matrix,
    reference: &Trajectory,
    seed: &Seed,
) -> Result<PerturbedTrajectory> {
    cfg.validate(ss.n())?;
    check_stiefel(theta)?;
    let data = project_supersample(ss, theta)?;
    let mut rng = seed.rng();
    let d = cfg.subspace_dim;

    let mut states = Vec::with_capacity(cfg.steps + 1);
    let mut noise = Vec::with_capacity(cfg.steps);
    let mut grad_gaps = Vec::with_capacity(cfg.steps);
    let mut coupling_gap = Vec::with_capacity(cfg.steps);
    let mut coupling_bound = Vec::with_capacity(cfg.steps);
    let mut w = reference.states[0].clone();
    states.push(w.clone());
    let mut bound = 0.0;
    for t in 1..=cfg.steps {
        let rec = step_gradients(inst, &data, j, &reference.batches[t - 1], &w)?;
        let extra = sample::gaussian_vector_with(&mut rng, d, 1.0);
        let nu_t = cfg.nu.at(t);
        linalg::axpy(&mut w, -cfg.eta.at(t), &rec.grad);
        linalg::axpy(&mut w, cfg.sigma.at(t), &reference.noise[t - 1]);
        linalg::axpy(&mut w, nu_t, &extra);
        linalg::project_ball(&mut w, cfg.radius);

        bound = cfg.contraction * bound + nu_t * norm(&extra);
        let gap = w
            .iter()
            .zip(&reference.states[t])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if gap > bound + COUPLING_FUZZ {
            return Err(Error::CouplingViolated { step: t, gap, bound });
        }
        coupling_gap.push(gap);
        coupling_bound.push(bound);
        states.push(w.clone());
        noise.push(extra);
        grad_gaps.push(rec.gaps);
    }
    Ok(PerturbedTrajectory {
        traj: Trajectory { states, batches: reference.batches.clone(), grad_gaps, noise },
        coupling_gap,
        coupling_bound,
    })
}

/// Selector-MI charge of one touch: zero gradient gap carries nothing;
/// zero noise scale maps to the infinite-separation limit `log 2`.
fn touch_mi(eta: f64, gap: f64, b: usize, noise_scale: f64) -> Result<f64> {
    if gap == 0.0 {
        return Ok(0.0);
    }
    let params = if noise_scale == 0.0 {
        MixtureParams::infinite(0.5)?
    } else {
        MixtureParams::new(eta * gap / (b as f64 * noise_scale), 0.5)?
    };
    selector_mi(&params)
}

/// Forgetting factor `q = 1 - 2 PhiBar((R + eta L)/sigma_hat)`, with
/// `PhiBar` the standard normal complementary CDF; `sigma_hat = 0` gives 1.
pub fn forgetting_factor(radius: f64, eta: f64, lipschitz: f64, sigma_hat: f64) -> f64 {
    if sigma_hat == 0.0 {
        return 1.0;
    }
    let x = (radius + eta * lipschitz) / sigma_hat;
    1.0 - erfc(x / std::f64::consts::SQRT_2)
}

/// Per-replica value of the lossless bound together with the per-index
/// square-root sums.
fn lossless_value(
    traj: &Trajectory,
    n: usize,
    range_width: f64,
    cfg: &SgldConfig,
) -> Result<(f64, Vec<f64>)> {
    let mut per_index_sum = vec![0.0; n];
    for (t0, gaps) in traj.grad_gaps.iter().enumerate() {
        let t = t0 + 1;
        for &(i, gap) in gaps {
            per_index_sum[i] += touch_mi(cfg.eta.at(t), gap, cfg.batch, cfg.sigma.at(t))?;
        }
    }
    let roots: Vec<f64> = per_index_sum.iter().map(|&s| s.sqrt()).collect();
    let value = range_width * 2f64.sqrt() / n as f64 * roots.iter().sum::<f64>();
    Ok((value, roots))
}

/// Per-replica rate value of the lossy bound (distortion term excluded).
/// `force_q_one` switches every forgetting factor to 1, the convention
/// under which the all-`nu`-zero case reduces exactly to the lossless
/// bound.
fn lossy_rate_value(
    perturbed: &Trajectory,
    n: usize,
    range_width: f64,
    cfg: &SgldConfig,
    force_q_one: bool,
) -> Result<(f64, Vec<f64>)> {
    let t_max = cfg.steps;
    let q: Vec<f64> = (1..=t_max)
        .map(|t| {
            if force_q_one {
                1.0
            } else {
                let sigma_hat =
                    (cfg.sigma.at(t).powi(2) + cfg.nu.at(t).powi(2)).sqrt();
                forgetting_factor(cfg.radius, cfg.eta.at(t), cfg.lipschitz, sigma_hat)
            }
        })
        .collect();
    let touched: Vec<std::collections::HashSet<usize>> = perturbed
        .batches
        .iter()
        .map(|b| b.iter().copied().collect())
        .collect();

    let mut per_index_sum = vec![0.0; n];
    for (i, acc) in per_index_sum.iter_mut().enumerate() {
        // walk backward keeping the product of q_r over later steps not
        // touching i
        let mut discount = 1.0;
        for t in (1..=t_max).rev() {
            if touched[t - 1].contains(&i) {
                let gap = perturbed.grad_gaps[t - 1]
                    .iter()
                    .find(|(k, _)| *k == i)
                    .map(|(_, g)| *g)
                    .unwrap_or(0.0);
                let sigma_hat = (cfg.sigma.at(t).powi(2) + cfg.nu.at(t).powi(2)).sqrt();
                *acc += discount * touch_mi(cfg.eta.at(t), gap, cfg.batch, sigma_hat)?;
            } else {
                discount *= q[t - 1];
            }
        }
    }
    let roots: Vec<f64> = per_index_sum.iter().map(|&s| s.sqrt()).collect();
    let value = range_width * 2f64.sqrt() / n as f64 * roots.iter().sum::<f64>();
    Ok((value, roots))
}

/// Distortion term `2 sqrt(2) L Gamma((d+1)/2)/Gamma(d/2) sum_t nu_t
/// alpha^{T-t}` of the lossy bound.
pub fn lossy_distortion_term(cfg: &SgldConfig) -> f64 {
    let d = cfg.subspace_dim as f64;
    let chi_mean_over_sqrt2 = (ln_gamma((d + 1.0) / 2.0) - ln_gamma(d / 2.0)).exp();
    let mut sum = 0.0;
    for t in 1..=cfg.steps {
        sum += cfg.nu.at(t) * cfg.contraction.powi((cfg.steps - t) as i32);
    }
    2.0 * 2f64.sqrt() * cfg.lipschitz * chi_mean_over_sqrt2 * sum
}

/// Lossless bound evaluated on an ensemble of trajectories.
pub fn lossless_bound(
    ensemble: &[Trajectory],
    n: usize,
    range_width: f64,
    cfg: &SgldConfig,
) -> Result<SgldBoundReport> {
    if ensemble.is_empty() {
        return Err(invalid("lossless bound needs a non-empty ensemble"));
    }
    let mut sum = ChunkSum::default();
    let mut per_index = vec![0.0; n];
    for traj in ensemble {
        let (v, roots) = lossless_value(traj, n, range_width, cfg)?;
        sum.push(v);
        for (acc, r) in per_index.iter_mut().zip(&roots) {
            *acc += r / ensemble.len() as f64;
        }
    }
    let est = mc::aggregate(&[sum]);
    Ok(SgldBoundReport {
        lossless_total: est.mean,
        lossless_ci: est.ci_half,
        lossy_rate: est.mean,
        lossy_rate_ci: est.ci_half,
        distortion_term: 0.0,
        lossy_total: est.mean,
        per_index,
        sgd_mode: cfg.sigma.all_zero(),
        nu_zero_reduction: true,
    })
}

/// Everything the lossy evaluator reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgldBoundReport {
    pub lossless_total: f64,
    pub lossless_ci: f64,
    pub lossy_rate: f64,
    pub lossy_rate_ci: f64,
    pub distortion_term: f64,
    pub lossy_total: f64,
    /// Mean per-index square-root contribution of the lossless sum.
    pub per_index: Vec<f64>,
    /// All noise scales are zero: plain projected SGD, where the lossless
    /// value charges `log 2` per touch.
    pub sgd_mode: bool,
    /// All `nu_t` were zero, so the lossy rate used the `q_r = 1`
    /// convention and collapses onto the lossless value.
    pub nu_zero_reduction: bool,
}

/// Lossy bound evaluated on coupled (reference, perturbed) ensembles. The
/// lossless value from the reference ensemble rides along for comparison.
pub fn lossy_bound(
    reference: &[Trajectory],
    perturbed: &[PerturbedTrajectory],
    n: usize,
    range_width: f64,
    cfg: &SgldConfig,
) -> Result<SgldBoundReport> {
    if reference.is_empty() || reference.len() != perturbed.len() {
        return Err(invalid("lossy bound needs matching non-empty ensembles"));
    }
    let nu_zero = cfg.nu.all_zero();
    let mut lossless_sum = ChunkSum::default();
    let mut rate_sum = ChunkSum::default();
    let mut per_index = vec![0.0; n];
    for (traj, pert) in reference.iter().zip(perturbed) {
        let (v, roots) = lossless_value(traj, n, range_width, cfg)?;
        lossless_sum.push(v);
        for (acc, r) in per_index.iter_mut().zip(&roots) {
            *acc += r / reference.len() as f64;
        }
        let (rate, _) = lossy_rate_value(&pert.traj, n, range_width, cfg, nu_zero)?;
        rate_sum.push(rate);
    }
    let lossless = mc::aggregate(&[lossless_sum]);
    let rate = mc::aggregate(&[rate_sum]);
    let distortion_term = if nu_zero { 0.0 } else { lossy_distortion_term(cfg) };
    Ok(SgldBoundReport {
        lossless_total: lossless.mean,
        lossless_ci: lossless.ci_half,
        lossy_rate: rate.mean,
        lossy_rate_ci: rate.ci_half,
        distortion_term,
        lossy_total: rate.mean + distortion_term,
        per_index,
        sgd_mode: cfg.sigma.all_zero(),
        nu_zero_reduction: nu_zero,
    })
}

/// Per-step CSV dump of a trajectory (and the coupling audit when a
/// perturbed companion is supplied).
pub fn trajectory_steps_csv(traj: &Trajectory, perturbed: Option<&PerturbedTrajectory>) -> String {
    let mut out = String::from(
        "# columns: step, state_norm, touched, max_grad_gap, coupling_gap, coupling_bound\n",
    );
    for t in 1..=traj.batches.len() {
        let gaps = &traj.grad_gaps[t - 1];
        let max_gap = gaps.iter().map(|(_, g)| *g).fold(0.0f64, f64::max);
        let (cg, cb) = perturbed
            .map(|p| (p.coupling_gap[t - 1], p.coupling_bound[t - 1]))
            .unwrap_or((0.0, 0.0));
        out.push_str(&format!(
            "{},{:.17e},{},{:.17e},{:.17e},{:.17e}\n",
            t,
            norm(&traj.states[t]),
            gaps.len(),
            max_gap,
            cg,
            cb
        ));
    }
    out
}

/// Measured generalization gap of the trained subspace model over fresh
/// `(S~, J, theta, noise)` replicas.
pub fn measure_gen_gap(
    cfg: &SgldConfig,
    inst: &ProblemInstance,
    dist: &DataDistribution,
    n: usize,
    replicas: usize,
    seed: &Seed,
) -> Result<McEstimate> {
    if replicas == 0 {
        return Err(invalid("gen-gap measurement needs replicas >= 1"));
    }
    let chunks: Vec<Result<ChunkSum>> = mc::run_chunks(seed, replicas, |_r, s| {
        let mut rng = s.rng();
        let ss = crate::dist::sample_supersample_with(dist, n, &mut rng);
        let j = crate::dist::sample_membership_with(n, &mut rng);
        let theta = sample::sample_stiefel_with(inst.dim, cfg.subspace_dim, &mut rng)?;
        let traj = train_subspace(cfg, inst, &ss, &j, &theta, &s.child(0))?;
        let mut c = ChunkSum::default();
        c.push(replica_gen_gap(inst, dist, &ss, &j, &theta, &traj, &s)?);
        Ok(c)
    });
    let chunks = chunks.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(mc::aggregate(&chunks))
}

fn replica_gen_gap(
    inst: &ProblemInstance,
    dist: &DataDistribution,
    ss: &SuperSample,
    j: &MembershipVector,
    theta: &Matrix,
    traj: &Trajectory,
    seed: &Seed,
) -> Result<f64> {
    let back = theta.apply(traj.final_state())?;
    let train = crate::dist::select_train(ss, j)?;
    let pop = population_risk(inst, dist, &back, seed, 2_000)?;
    Ok(pop.value - empirical_risk(inst, &train, &back)?)
}

/// One replica of the full experiment: train, couple, and evaluate.
pub struct SgldReplica {
    pub trajectory: Trajectory,
    pub perturbed: PerturbedTrajectory,
    pub gen_gap: f64,
    pub max_coupling_ratio: f64,
}

pub fn run_replica(
    cfg: &SgldConfig,
    inst: &ProblemInstance,
    dist: &DataDistribution,
    n: usize,
    seed: &Seed,
) -> Result<SgldReplica> {
    let mut rng = seed.rng();
    let ss = crate::dist::sample_supersample_with(dist, n, &mut rng);
    let j = crate::dist::sample_membership_with(n, &mut rng);
    let theta = sample::sample_stiefel_with(inst.dim, cfg.subspace_dim, &mut rng)?;
    let trajectory = train_subspace(cfg, inst, &ss, &j, &theta, &seed.child(0))?;
    let perturbed =
        perturbed_trajectory(cfg, inst, &ss, &j, &theta, &trajectory, &seed.child(1))?;
    let gen_gap = replica_gen_gap(inst, dist, &ss, &j, &theta, &trajectory, seed)?;
    let max_coupling_ratio = perturbed
        .coupling_gap
        .iter()
        .zip(&perturbed.coupling_bound)
        .map(|(g, b)| if *b > 0.0 { g / b } else { 0.0 })
        .fold(0.0f64, f64::max);
    Ok(SgldReplica { trajectory, perturbed, gen_gap, max_coupling_ratio })
}

/// Aggregated experiment: measured gap vs lossless and lossy bounds on a
/// shared replica ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgldExperimentReport {
    pub gen_gap: McEstimate,
    pub bounds: SgldBoundReport,
    pub max_coupling_ratio: f64,
    pub replicas: usize,
}

pub fn run_sgld_experiment(
    cfg: &SgldConfig,
    inst: &ProblemInstance,
    dist: &DataDistribution,
    n: usize,
    replicas: usize,
    seed: &Seed,
) -> Result<SgldExperimentReport> {
    if replicas == 0 {
        return Err(invalid("experiment needs replicas >= 1"));
    }
    cfg.validate(n)?;
    dist.validate()?;
    let runs: Vec<Result<SgldReplica>> =
        mc::run_chunks(seed, replicas, |_r, s| run_replica(cfg, inst, dist, n, &s));
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut gap_sum = ChunkSum::default();
    let mut max_ratio = 0.0f64;
    for r in &runs {
        gap_sum.push(r.gen_gap);
        max_ratio = max_ratio.max(r.max_coupling_ratio);
    }
    let reference: Vec<Trajectory> = runs.iter().map(|r| r.trajectory.clone()).collect();
    let perturbed: Vec<PerturbedTrajectory> =
        runs.iter().map(|r| r.perturbed.clone()).collect();
    let bounds = lossy_bound(&reference, &perturbed, n, inst.range_width(), cfg)?;
    Ok(SgldExperimentReport {
        gen_gap: mc::aggregate(&[gap_sum]),
        bounds,
        max_coupling_ratio: max_ratio,
        replicas,
    })
}
