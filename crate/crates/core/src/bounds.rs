//! Assembly and estimation of the compressed-CMI generalization bounds.
//!
//! The headline quantity is, for a compressor with information cap `IC`
//! (nats) and distortion tolerance `eps`,
//!
//! ```text
//! gen <= E_{S~, theta} sqrt( 2 * dl(S~, theta) * IC / n ) + eps
//! ```
//!
//! where `dl(S~, theta)` is the mean squared loss gap between paired
//! super-sample columns under the projected-back compressed model, and
//! `eps` bounds `E[gen(S, W) - gen(S, theta W_hat)]`. The information cap
//! is the analytic `d log((c_w + nu)/nu)` from the compressor — a
//! high-dimensional mutual-information estimate is never needed; an exact
//! brute-force CMI oracle exists for tiny `n` to validate the cap.
//!
//! Estimators are chunked per replica with derived seeds (see [`crate::mc`]),
//! so identical budgets rebuild identical reports, and a reduced budget
//! rebuilds a prefix of the replicas.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::compress::{self, draw_projection, CompressorConfig, Projection};
pub use crate::compress::ProjectionKind;
use crate::dist::{
    sample_membership_with, sample_supersample_with, DataDistribution, DataPoint, MembershipVector,
    SuperSample,
};
use crate::mc::{self, ChunkSum, McEstimate};
use crate::problems::{empirical_risk, loss, population_risk, Learner, ProblemInstance};
use crate::seed::Seed;
use crate::{invalid, Error, Result};

/// Monte Carlo budget: `outer` replicas over `(S~, theta)`, each with
/// `inner` samples over `(J, W, W_hat)`. Derived streams: `seed.child(0)`
/// feeds the replicas, `seed.child(1)` the distortion chunks, and
/// `seed.child(2)` the measured-generalization chunks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McBudget {
    pub outer: usize,
    pub inner: usize,
    pub seed: Seed,
}

impl McBudget {
    pub fn new(outer: usize, inner: usize, seed: Seed) -> Result<Self> {
        if outer == 0 || inner == 0 {
            return Err(invalid("Monte Carlo budget must have outer, inner >= 1"));
        }
        Ok(McBudget { outer, inner, seed })
    }

    /// The ~10% prefix budget used by report spot checks.
    pub fn spot(&self) -> McBudget {
        McBudget { outer: mc::spot_chunks(self.outer), inner: self.inner, seed: self.seed.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    ProjectedCmi,
    PerDatum,
    ClosedFormLinear,
    ClosedFormRate,
    ClassicCmi,
}

/// Scalar term with the uncertainty of its estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub value: f64,
    pub ci_half: f64,
}

impl From<McEstimate> for Term {
    fn from(e: McEstimate) -> Self {
        Term { value: e.mean, ci_half: e.ci_half }
    }
}

/// Every term of one assembled bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub mode: BoundMode,
    pub n: usize,
    pub d: usize,
    /// Information term in nats (analytic cap, or an exact oracle value).
    pub cmi_term: f64,
    /// Mean squared loss gap `dl` across replicas.
    pub loss_gap: Term,
    /// `E sqrt(2 dl IC / n)` across replicas.
    pub rate_term: Term,
    /// Estimated distortion `E[gen(W) - gen(theta W_hat)]`.
    pub distortion: Term,
    /// Distortion tolerance used in the total: point estimate plus upper
    /// confidence edge.
    pub epsilon: f64,
    /// `rate_term + epsilon`.
    pub total: f64,
    pub outer: usize,
    pub inner: usize,
    pub seed: Seed,
}

fn gl_pop_samples(n: usize) -> u64 {
    (4 * n).max(2_000) as u64
}

/// One replica of the loss-gap estimate: fixes `(S~, theta)` from the
/// replica seed and averages over `inner` draws of `(J, W, W_hat)`.
/// Returns the overall mean and the per-index means.
#[allow(clippy::too_many_arguments)]
fn replica_loss_gaps(
    inst: &ProblemInstance,
    ss: &SuperSample,
    theta: &Projection,
    learner: &dyn Learner,
    cfg: &CompressorConfig,
    inner: usize,
    rng: &mut impl Rng,
    seed: &Seed,
) -> Result<(f64, Vec<f64>)> {
    let n = ss.n();
    let mut per_index = vec![0.0; n];
    let mut overall = 0.0;
    for k in 0..inner {
        let j = sample_membership_with(n, rng);
        let train = crate::dist::select_train(ss, &j)?;
        let w = learner.fit(inst, &train, &seed.child(k as u64))?.w;
        let w_hat = compress::compress(theta, &w, cfg, rng)?;
        let back = compress::reconstruct(theta, &w_hat)?;
        let mut sample_total = 0.0;
        for (i, acc) in per_index.iter_mut().enumerate() {
            let gap = loss(inst, ss.point(i, 0), &back)? - loss(inst, ss.point(i, 1), &back)?;
            let g2 = gap * gap;
            *acc += g2;
            sample_total += g2;
        }
        overall += sample_total / n as f64;
    }
    for v in per_index.iter_mut() {
        *v /= inner as f64;
    }
    Ok((overall / inner as f64, per_index))
}

/// Monte Carlo estimate of the loss-gap term `dl(S~, theta)` for a fixed
/// super-sample and projection.
pub fn loss_gap_moment(
    inst: &ProblemInstance,
    ss: &SuperSample,
    theta: &Projection,
    learner: &dyn Learner,
    cfg: &CompressorConfig,
    inner: usize,
    seed: &Seed,
) -> Result<McEstimate> {
    if inner == 0 {
        return Err(invalid("loss-gap estimate needs inner >= 1"));
    }
    let n = ss.n();
    let mut rng = seed.rng();
    let mut sum = ChunkSum::default();
    for k in 0..inner {
        let j = sample_membership_with(n, &mut rng);
        let train = crate::dist::select_train(ss, &j)?;
        let w = learner.fit(inst, &train, &seed.child(k as u64))?.w;
        let w_hat = compress::compress(theta, &w, cfg, &mut rng)?;
        let back = compress::reconstruct(theta, &w_hat)?;
        let mut total = 0.0;
        for i in 0..n {
            let gap = loss(inst, ss.point(i, 0), &back)? - loss(inst, ss.point(i, 1), &back)?;
            total += gap * gap;
        }
        sum.push(total / n as f64);
    }
    Ok(mc::aggregate(&[sum]))
}

/// Monte Carlo estimate of the distortion
/// `E[gen(S, W) - gen(S, theta W_hat)]` with a two-sided CI.
pub fn distortion_estimate(
    inst: &ProblemInstance,
    dist: &DataDistribution,
    learner: &dyn Learner,
    cfg: &CompressorConfig,
    projection: ProjectionKind,
    n: usize,
    budget: &McBudget,
) -> Result<McEstimate> {
    let stream = budget.seed.child(1);
    let chunks: Vec<Result<ChunkSum>> = mc::run_chunks(&stream, budget.outer, |_r, s| {
        let mut rng = s.rng();
        let mut c = ChunkSum::default();
        for k in 0..budget.inner {
            let data: Vec<DataPoint> = (0..n).map(|_| dist.sample_with(&mut rng)).collect();
            let w = learner.fit(inst, &data, &s.child(budget.inner as u64 + k as u64))?.w;
            let theta = draw_projection(projection, inst.dim, cfg, &mut rng, s.token())?;
            let w_hat = compress::compress(&theta, &w, cfg, &mut rng)?;
            let back = compress::reconstruct(&theta, &w_hat)?;
            let pop_seed = s.child(k as u64);
            let gen_w =
                gen_value(inst, dist, &data, &w, &pop_seed)?;
            let gen_back = gen_value(inst, dist, &data, &back, &pop_seed)?;
            c.push(gen_w - gen_back);
        }
        Ok(c)
    });
    let chunks = chunks.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(mc::aggregate(&chunks))
}

fn gen_value(
    inst: &ProblemInstance,
    dist: &DataDistribution,
    data: &[DataPoint],
    w: &[f64],
    seed: &Seed,
) -> Result<f64> {
    let pop = population_risk(inst, dist, w, seed, gl_pop_samples(data.len()))?;
    Ok(pop.value - empirical_risk(inst, data, w)?)
}

/// Measured mean generalization error of the (uncompressed) learner.
pub fn measured_gen(
    inst: &ProblemInstance,
    dist: &DataDistribution,
    learner: &dyn Learner,
    n: usize,
    budget: &McBudget,
) -> Result<McEstimate> {
    let stream = budget.seed.child(2);
    let chunks: Vec<Result<ChunkSum>> = mc::run_chunks(&stream, budget.outer, |_r, s| {
        let mut rng = s.rng();
        let mut c = ChunkSum::default();
        for k in 0..budget.inner {
            let data: Vec<DataPoint> = (0..n).map(|_| dist.sample_with(&mut rng)).collect();
            let w = learner.fit(inst, &data, &s.child(budget.inner as u64 + k as u64))?.w;
            c.push(gen_value(inst, dist, &data, &w, &s.child(k as u64))?);
        }
        Ok(c)
    });
    let chunks = chunks.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(mc::aggregate(&chunks))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    mode: BoundMode,
    inst: &ProblemInstance,
    dist: &DataDistribution,
    learner: &dyn Learner,
    cfg: &CompressorConfig,
    projection: ProjectionKind,
    n: usize,
    budget: &McBudget,
) -> Result<BoundReport> {
    cfg.validate()?;
    dist.validate()?;
    if n == 0 {
        return Err(invalid("bound needs n >= 1"));
    }
    let cap = compress::cmi_cap(cfg);
    let per_datum = matches!(mode, BoundMode::PerDatum);

    let stream = budget.seed.child(0);
    let replicas: Vec<Result<(f64, f64)>> = mc::run_chunks(&stream, budget.outer, |_r, s| {
        let mut rng = s.rng();
        let ss = sample_supersample_with(dist, n, &mut rng);
        let theta = draw_projection(projection, inst.dim, cfg, &mut rng, s.token())?;
        let (dl, per_index) =
            replica_loss_gaps(inst, &ss, &theta, learner, cfg, budget.inner, &mut rng, &s)?;
        let term = if per_datum {
            per_index.iter().map(|&dli| (2.0 * dli * cap).sqrt()).sum::<f64>() / n as f64
        } else {
            (2.0 * dl * cap / n as f64).sqrt()
        };
        Ok((dl, term))
    });
    let mut dl_sum = ChunkSum::default();
    let mut term_sum = ChunkSum::default();
    for r in replicas {
        let (dl, term) = r?;
        dl_sum.push(dl);
        term_sum.push(term);
    }
    let loss_gap = mc::aggregate(&[dl_sum]);
    let rate = mc::aggregate(&[term_sum]);

    let distortion = distortion_estimate(inst, dist, learner, cfg, projection, n, budget)?;
    let epsilon = distortion.mean + distortion.ci_half;
    Ok(BoundReport {
        mode,
        n,
        d: cfg.d,
        cmi_term: cap,
        loss_gap: loss_gap.into(),
        rate_term: rate.into(),
        distortion: distortion.into(),
        epsilon,
        total: rate.mean + epsilon,
        outer: budget.outer,
        inner: budget.inner,
        seed: budget.seed.clone(),
    })
}

/// The compressed-CMI bound: outer expectation of
/// `sqrt(2 dl(S~, theta) IC / n)` plus the distortion tolerance.
pub fn compressed_cmi_bound(
    inst: &ProblemInstance,
    dist: &DataDistribution,
    learner: &dyn Learner,
    cfg: &CompressorConfig,
    projection: ProjectionKind,
    n: usize,
    budget: &McBudget,
) -> Result<BoundReport> {
    assemble(BoundMode::ProjectedCmi, inst, dist, learner, cfg, projection, n, budget)
}

/// Per-datum variant: `(1/n) sum_i E sqrt(2 dl_i(S~, theta) IC)` plus the
/// distortion tolerance. The information term per index is the global cap
/// (no tighter per-index cap is available), which leaves slack.
pub fn per_datum_cmi_bound(
    inst: &ProblemInstance,
    dist: &DataDistribution,
    learner: &dyn Learner,
    cfg: &CompressorConfig,
    projection: ProjectionKind,
    n: usize,
    budget: &McBudget,
) -> Result<BoundReport> {
    assemble(BoundMode::PerDatum, inst, dist, learner, cfg, projection, n, budget)
}

/// Closed form `8 L R / sqrt(n)` for linear instances (also the strongly
/// convex case with `L = L_c`).
pub fn linear_instance_bound(lipschitz: f64, radius: f64, n: usize) -> Result<f64> {
    if lipschitz <= 0.0 || radius <= 0.0 || n == 0 {
        return Err(invalid("linear closed form needs positive L, R, n"));
    }
    Ok(8.0 * lipschitz * radius / (n as f64).sqrt())
}

/// Closed-form rate of the projection-clip-dither scheme on unit-constant
/// linear instances:
/// `sqrt(8 d (c+v)^2 log((c+v)/v) / n) + (2/sqrt(n)) (1 + 2/d)^{1/4}
///  exp(-(0.21/4) d (c^2-1)^2)`.
pub fn jl_scheme_bound(d: usize, clip: f64, dither: f64, n: usize) -> Result<f64> {
    CompressorConfig::new(d, clip, dither)?;
    if n == 0 {
        return Err(invalid("rate bound needs n >= 1"));
    }
    let dd = d as f64;
    let nf = n as f64;
    let cv = clip + dither;
    let rate = (8.0 * dd * cv * cv * (cv / dither).ln() / nf).sqrt();
    let distortion =
        (2.0 / nf.sqrt()) * (1.0 + 2.0 / dd).powf(0.25) * (-(0.21 / 4.0) * dd * (clip * clip - 1.0).powi(2)).exp();
    Ok(rate + distortion)
}

/// Classic bounds from a raw CMI value in nats: `sqrt(2 cmi / n)` for
/// `[0, 1]`-losses, and `L R sqrt(8 cmi / n)` for Lipschitz-bounded linear
/// instances.
pub fn classic_cmi_bounds(cmi: f64, n: usize, lipschitz: f64, radius: f64) -> Result<(f64, f64)> {
    if cmi < 0.0 {
        return Err(invalid("CMI must be nonnegative"));
    }
    if n == 0 {
        return Err(invalid("classic bound needs n >= 1"));
    }
    let plain = (2.0 * cmi / n as f64).sqrt();
    let clb = lipschitz * radius * (8.0 * cmi / n as f64).sqrt();
    Ok((plain, clb))
}

/// Output-grouping rule for the brute-force CMI oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellRule {
    /// Group outputs equal within this Euclidean tolerance.
    Tolerance(f64),
    /// Exact cell identity of the clip-project output: per-coordinate grid
    /// of width `2 * dither` anchored at `-clip` (the clip branch lands in
    /// the zero cell). Cell counts stay below `((clip + dither)/dither)^d`,
    /// so the resulting entropy cannot exceed the analytic cap.
    Grid { clip: f64, dither: f64 },
}

const ORACLE_MAX_N: usize = 14;

/// Exact disintegrated CMI `I(model; J | S~)` in nats for a deterministic
/// `J -> model` map under uniform membership bits: enumerates all `2^n`
/// assignments and returns the entropy of the grouped outputs.
pub fn brute_force_cmi(
    n: usize,
    rule: &CellRule,
    model_of: impl Fn(&MembershipVector) -> Result<Vec<f64>>,
) -> Result<f64> {
    if n == 0 {
        return Err(invalid("oracle needs n >= 1"));
    }
    if n > ORACLE_MAX_N {
        return Err(Error::Capacity(format!(
            "brute-force CMI enumerates 2^n memberships; n = {n} exceeds the cap {ORACLE_MAX_N}"
        )));
    }
    let total = 1usize << n;
    let mut counts: Vec<u64> = Vec::new();
    match rule {
        CellRule::Tolerance(tol) => {
            let mut reps: Vec<Vec<f64>> = Vec::new();
            for mask in 0..total {
                let bits: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
                let out = model_of(&MembershipVector { bits })?;
                let mut found = false;
                for (g, rep) in reps.iter().enumerate() {
                    if rep.len() == out.len()
                        && (rep[0] - out[0]).abs() <= *tol
                        && rep.iter().zip(&out).all(|(a, b)| (a - b).abs() <= *tol)
                    {
                        counts[g] += 1;
                        found = true;
                        break;
                    }
                }
                if !found {
                    reps.push(out);
                    counts.push(1);
                }
            }
        }
        CellRule::Grid { clip, dither } => {
            if *dither <= 0.0 {
                return Err(invalid("grid rule needs a positive dither radius"));
            }
            let mut cells: std::collections::HashMap<Vec<i64>, u64> = std::collections::HashMap::new();
            for mask in 0..total {
                let bits: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
                let out = model_of(&MembershipVector { bits })?;
                let key: Vec<i64> = out
                    .iter()
                    .map(|u| ((u + clip) / (2.0 * dither)).floor() as i64)
                    .collect();
                *cells.entry(key).or_insert(0) += 1;
            }
            counts = cells.into_values().collect();
        }
    }
    let tot = total as f64;
    let mut entropy = 0.0;
    for c in counts {
        let p = c as f64 / tot;
        entropy -= p * p.ln();
    }
    Ok(entropy.max(0.0))
}

/// Convenience: the clip-project output of a learner on a fixed
/// `(S~, theta)` as a deterministic function of `J`, for feeding the
/// oracle's grid rule.
pub fn clipped_projection_model<'a>(
    inst: &'a ProblemInstance,
    ss: &'a SuperSample,
    theta: &'a Projection,
    learner: &'a dyn Learner,
    clip: f64,
    seed: &'a Seed,
) -> impl Fn(&MembershipVector) -> Result<Vec<f64>> + 'a {
    move |j| {
        let train = crate::dist::select_train(ss, j)?;
        let w = learner.fit(inst, &train, seed)?.w;
        compress::clip_project(theta, &w, clip)
    }
}

/// Raw learner output on a fixed super-sample as a function of `J`.
pub fn raw_model<'a>(
    inst: &'a ProblemInstance,
    ss: &'a SuperSample,
    learner: &'a dyn Learner,
    seed: &'a Seed,
) -> impl Fn(&MembershipVector) -> Result<Vec<f64>> + 'a {
    move |j| {
        let train = crate::dist::select_train(ss, j)?;
        Ok(learner.fit(inst, &train, seed)?.w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ErmLinear;

    const LN2: f64 = std::f64::consts::LN_2;

    fn linear_setup(dim: usize) -> (ProblemInstance, DataDistribution) {
        (
            ProblemInstance::linear(dim, 1.0, 1.0),
            DataDistribution::cube_random_pstar(dim, &Seed::new(100)),
        )
    }

    #[test]
    fn loss_gap_zero_for_identical_columns() {
        let dim = 8;
        let (inst, _) = linear_setup(dim);
        let atom = DataPoint::new(vec![1.0 / (dim as f64).sqrt(); dim]);
        let degenerate = DataDistribution::FiniteSupport { atoms: vec![atom], weights: vec![1.0] };
        let ss = crate::dist::sample_supersample(&degenerate, 6, &Seed::new(1)).unwrap();
        let theta = Projection::sample_gaussian(dim, 2, &Seed::new(2)).unwrap();
        let cfg = CompressorConfig::new(2, 1.0, 0.4).unwrap();
        let est =
            loss_gap_moment(&inst, &ss, &theta, &ErmLinear, &cfg, 32, &Seed::new(3)).unwrap();
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn loss_gap_respects_ceilings() {
        let dim = 32;
        let (inst, dist) = linear_setup(dim);
        let ss = crate::dist::sample_supersample(&dist, 24, &Seed::new(4)).unwrap();
        let cfg = CompressorConfig::linear_default();
        let theta = Projection::sample_gaussian(dim, cfg.d, &Seed::new(5)).unwrap();
        let est =
            loss_gap_moment(&inst, &ss, &theta, &ErmLinear, &cfg, 64, &Seed::new(6)).unwrap();
        // range-width ceiling C^2 and the linear-instance ceiling 4 (c+v)^2
        let c = inst.range_width();
        assert!(est.mean <= c * c);
        let ceiling = 4.0 * (cfg.clip + cfg.dither).powi(2);
        assert!(est.mean <= ceiling + 3.0 * est.std_err, "{} vs {ceiling}", est.mean);
    }

    #[test]
    fn distortion_vanishes_for_identity_compressor() {
        let dim = 6;
        let (inst, dist) = linear_setup(dim);
        // clip above the ERM radius so the boundary never trips
        let cfg = CompressorConfig::new(dim, 1.05, 1e-6).unwrap();
        let budget = McBudget::new(16, 40, Seed::new(7)).unwrap();
        let est = distortion_estimate(
            &inst,
            &dist,
            &ErmLinear,
            &cfg,
            ProjectionKind::Identity,
            30,
            &budget,
        )
        .unwrap();
        assert!(est.mean.abs() <= est.ci_half.max(1e-6), "{est:?}");
    }

    #[test]
    fn distortion_stable_across_seeds() {
        let dim = 64;
        let (inst, dist) = linear_setup(dim);
        let cfg = CompressorConfig::linear_default();
        let n = 50;
        let a = distortion_estimate(
            &inst,
            &dist,
            &ErmLinear,
            &cfg,
            ProjectionKind::Gaussian,
            n,
            &McBudget::new(24, 50, Seed::new(8)).unwrap(),
        )
        .unwrap();
        let b = distortion_estimate(
            &inst,
            &dist,
            &ErmLinear,
            &cfg,
            ProjectionKind::Gaussian,
            n,
            &McBudget::new(24, 50, Seed::new(9)).unwrap(),
        )
        .unwrap();
        assert!(
            (a.mean - b.mean).abs() <= a.ci_half + b.ci_half,
            "CIs do not overlap: {a:?} vs {b:?}"
        );
        // and below the closed-form distortion ceiling
        let ceiling = (2.0 / (n as f64).sqrt()) * 3f64.powf(0.25);
        assert!(a.mean <= ceiling);
    }

    #[test]
    fn compressed_bound_dominates_measured_gen() {
        let dim = 64;
        let (inst, dist) = linear_setup(dim);
        let cfg = CompressorConfig::linear_default();
        let n = 100;
        let budget = McBudget::new(16, 32, Seed::new(10)).unwrap();
        let report = compressed_cmi_bound(
            &inst,
            &dist,
            &ErmLinear,
            &cfg,
            ProjectionKind::Gaussian,
            n,
            &budget,
        )
        .unwrap();
        assert!(report.total <= 0.8, "total {} above 8 L R / sqrt(n)", report.total);
        assert!((report.total - (report.rate_term.value + report.epsilon)).abs() < 1e-12);
        assert!((report.cmi_term - 1.252762968495368).abs() < 1e-12);

        let gen = measured_gen(&inst, &dist, &ErmLinear, n, &budget).unwrap();
        assert!(
            gen.mean <= report.total + 2.0 * gen.ci_half,
            "gen {} vs bound {}",
            gen.mean,
            report.total
        );
    }

    #[test]
    fn bound_reproducible_and_spot_prefix() {
        let dim = 16;
        let (inst, dist) = linear_setup(dim);
        let cfg = CompressorConfig::linear_default();
        let budget = McBudget::new(10, 8, Seed::new(11)).unwrap();
        let a = compressed_cmi_bound(&inst, &dist, &ErmLinear, &cfg, ProjectionKind::Gaussian, 20, &budget)
            .unwrap();
        let b = compressed_cmi_bound(&inst, &dist, &ErmLinear, &cfg, ProjectionKind::Gaussian, 20, &budget)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn per_datum_matches_global_at_n_one() {
        let dim = 12;
        let (inst, dist) = linear_setup(dim);
        let cfg = CompressorConfig::linear_default();
        let budget = McBudget::new(8, 16, Seed::new(12)).unwrap();
        let global = compressed_cmi_bound(
            &inst, &dist, &ErmLinear, &cfg, ProjectionKind::Gaussian, 1, &budget,
        )
        .unwrap();
        let per = per_datum_cmi_bound(
            &inst, &dist, &ErmLinear, &cfg, ProjectionKind::Gaussian, 1, &budget,
        )
        .unwrap();
        assert!((global.rate_term.value - per.rate_term.value).abs() < 1e-12);
        assert!((global.total - per.total).abs() < 1e-12);
    }

    #[test]
    fn per_datum_finite_on_linear_instance() {
        let dim = 32;
        let (inst, dist) = linear_setup(dim);
        let cfg = CompressorConfig::linear_default();
        let budget = McBudget::new(8, 16, Seed::new(13)).unwrap();
        let report =
            per_datum_cmi_bound(&inst, &dist, &ErmLinear, &cfg, ProjectionKind::Gaussian, 50, &budget)
                .unwrap();
        assert!(report.total.is_finite());
        assert!(report.rate_term.value > 0.0);
    }

    #[test]
    fn closed_forms() {
        assert!((linear_instance_bound(1.0, 1.0, 100).unwrap() - 0.8).abs() < 1e-15);
        assert!(
            (linear_instance_bound(2.0, 1.0, 100).unwrap()
                - 2.0 * linear_instance_bound(1.0, 1.0, 100).unwrap())
            .abs()
                < 1e-15
        );
        assert!((linear_instance_bound(1.0, 1.0, 10_000).unwrap() - 0.08).abs() < 1e-15);

        let r100 = jl_scheme_bound(1, 1.0, 0.4, 100).unwrap();
        assert!((r100 - 0.7064226922541119).abs() < 1e-12, "{r100}");
        assert!(r100 <= 0.8);
        // exact 1/sqrt(n) scaling
        let r400 = jl_scheme_bound(1, 1.0, 0.4, 400).unwrap();
        assert!((r400 - r100 / 2.0).abs() < 1e-12);
        // log factor shrinks as the dither grows at fixed clip
        let wide = jl_scheme_bound(1, 1.0, 1.0, 100).unwrap();
        let cap_narrow = (1.4f64 / 0.4).ln();
        let cap_wide = (2.0f64 / 1.0).ln();
        assert!(cap_wide < cap_narrow);
        assert!(wide.is_finite());
    }

    #[test]
    fn classic_forms() {
        assert_eq!(classic_cmi_bounds(0.0, 50, 1.0, 1.0).unwrap(), (0.0, 0.0));
        let n = 64;
        let (_, clb) = classic_cmi_bounds(n as f64 * LN2, n, 1.0, 1.0).unwrap();
        assert!((clb - 2.3548200450309493).abs() < 1e-12);
        let (_, small) = classic_cmi_bounds(1.252762968495368, 100, 1.0, 1.0).unwrap();
        assert!((small - 0.3165770640454382).abs() < 1e-12);
        assert!(classic_cmi_bounds(-1.0, 10, 1.0, 1.0).is_err());
    }

    // the generalized-linear scheme (d = sqrt(n), c_w = 1.1, nu = 0.5)
    // decays with exponent about -1/4; only the exponent is claimed
    #[test]
    fn generalized_scheme_decay_exponent() {
        let grid = [64usize, 256, 1024, 4096];
        let points: Vec<(f64, f64)> = grid
            .iter()
            .map(|&n| {
                let cfg = CompressorConfig::generalized_default(n);
                let v = jl_scheme_bound(cfg.d, cfg.clip, cfg.dither, n).unwrap();
                ((n as f64).ln(), v.ln())
            })
            .collect();
        let mx = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
        let my = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
        let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        let slope = sxy / sxx;
        assert!((-0.3..=-0.2).contains(&slope), "slope {slope}");
    }

    #[test]
    fn generalized_linear_pipeline_end_to_end() {
        use crate::problems::{GlLink, Hypothesis};

        // mean-direction learner usable for any loss kind
        struct MeanDirection;
        impl Learner for MeanDirection {
            fn fit(
                &self,
                inst: &ProblemInstance,
                data: &[DataPoint],
                _seed: &Seed,
            ) -> crate::Result<Hypothesis> {
                let mut m = vec![0.0; inst.dim];
                for z in data {
                    crate::linalg::axpy(&mut m, 1.0 / data.len() as f64, &z.coords);
                }
                let nm = crate::linalg::norm(&m);
                if nm > 0.0 {
                    crate::linalg::scale(&mut m, inst.radius / nm);
                }
                Ok(Hypothesis::new(m))
            }
        }

        let dim = 36;
        let n = 25;
        let inst =
            ProblemInstance::generalized_linear(dim, 1.0, 1.0, 1.0, GlLink::abs_identity());
        let dist = DataDistribution::cube_symmetric(dim);
        let cfg = CompressorConfig::generalized_default(n);
        assert_eq!((cfg.d, cfg.clip, cfg.dither), (5, 1.1, 0.5));
        let budget = McBudget::new(6, 6, Seed::new(17)).unwrap();
        let report = compressed_cmi_bound(
            &inst,
            &dist,
            &MeanDirection,
            &cfg,
            ProjectionKind::Gaussian,
            n,
            &budget,
        )
        .unwrap();
        assert!(report.total.is_finite() && report.rate_term.value > 0.0);
        assert!(report.distortion.ci_half > 0.0, "mc population route must carry a ci");
        let gen = measured_gen(&inst, &dist, &MeanDirection, n, &budget).unwrap();
        assert!(
            gen.mean <= report.total + 3.0 * gen.ci_half,
            "gl gen {} above bound {}",
            gen.mean,
            report.total
        );
    }

    #[test]
    fn oracle_constant_and_identity_learners() {
        let n = 6;
        let constant = |_j: &MembershipVector| Ok(vec![1.0, 2.0]);
        assert_eq!(brute_force_cmi(n, &CellRule::Tolerance(1e-9), constant).unwrap(), 0.0);

        // learner that encodes J verbatim: full information n log 2
        let encode = |j: &MembershipVector| Ok(j.bits.iter().map(|&b| b as f64).collect());
        let v = brute_force_cmi(n, &CellRule::Tolerance(1e-9), encode).unwrap();
        assert!((v - n as f64 * LN2).abs() < 1e-12);

        assert!(matches!(
            brute_force_cmi(15, &CellRule::Tolerance(1e-9), constant),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn oracle_erm_near_full_information_raw_but_capped_compressed() {
        let dim = 64;
        let n = 10;
        let (inst, dist) = linear_setup(dim);
        let ss = crate::dist::sample_supersample(&dist, n, &Seed::new(14)).unwrap();
        let seed = Seed::new(15);
        let raw = raw_model(&inst, &ss, &ErmLinear, &seed);
        let v = brute_force_cmi(n, &CellRule::Tolerance(1e-9), raw).unwrap();
        assert!(v <= n as f64 * LN2 + 1e-9);
        assert!(v >= 0.9 * n as f64 * LN2, "raw CMI {v}");

        let cfg = CompressorConfig::linear_default();
        let theta = Projection::sample_gaussian(dim, cfg.d, &Seed::new(16)).unwrap();
        let compressed = clipped_projection_model(&inst, &ss, &theta, &ErmLinear, cfg.clip, &seed);
        let rule = CellRule::Grid { clip: cfg.clip, dither: cfg.dither };
        let vc = brute_force_cmi(n, &rule, compressed).unwrap();
        assert!(vc <= compress::cmi_cap(&cfg) + 1e-12, "cell CMI {vc} above cap");
    }
}
