//! The recall game: membership-guessing adversaries, tracing verdicts, and
//! the dummy-adversary feasibility region.
//!
//! Each trial draws a super-sample and membership vector, trains on the
//! selected column, and hands the adversary the model output, one data
//! point, and the data distribution descriptor. Per round the adversary is
//! queried twice, independently: once on the ghost point (soundness side)
//! and once on the training member (recall side). An adversary is
//! `xi`-sound when the probability that any ghost gets flagged is at most
//! `xi`, and certifies recall of `m` samples with probability `q` when
//! `P(sum of member flags >= m) >= q`; achieving both is `(m, q, xi)`-
//! tracing. Simulated probabilities carry Wilson intervals, so verdicts
//! are CI-qualified rather than exact.
//!
//! A dummy adversary ignores its inputs: with probability `alpha` it
//! answers 0 for the whole game, otherwise it answers 0 with probability
//! `r` per query. Its closed-form soundness `(1-alpha)(1-r^n)` and recall
//! tail `(1-alpha) P(Bin(n, 1-r) >= m)` delimit what tracing power means
//! before any actual information leaks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::compress::{self, CompressorConfig, ProjectionKind};
use crate::dist::{DataDistribution, DataPoint};
use crate::linalg::dot;
use crate::mc::{self, wilson_interval, Z95};
use crate::problems::{Learner, ProblemInstance};
use crate::seed::Seed;
use crate::{invalid, Result};

/// Membership-guessing strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Adversary {
    /// Input-blind: with probability `alpha` answers 0 all game; otherwise
    /// answers 0 with probability `r` per query.
    Dummy { alpha: f64, r: f64 },
    /// Flags `z` when `<model, z> >= tau`.
    Correlation { tau: f64 },
}

pub fn dummy_adversary(alpha: f64, r: f64) -> Result<Adversary> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("dummy alpha {alpha} outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&r) {
        return Err(invalid(format!("dummy r {r} outside [0, 1]")));
    }
    Ok(Adversary::Dummy { alpha, r })
}

/// Which model the adversary observes.
pub enum ModelSource<'a> {
    Raw(&'a dyn Learner),
    /// Projected-back compressed model `theta w_hat`; the adversary
    /// effectively holds both the projection and the compressed value.
    Compressed {
        learner: &'a dyn Learner,
        config: CompressorConfig,
        projection: ProjectionKind,
    },
}

impl ModelSource<'_> {
    fn produce(
        &self,
        inst: &ProblemInstance,
        train: &[DataPoint],
        rng: &mut impl Rng,
        seed: &Seed,
    ) -> Result<Vec<f64>> {
        match self {
            ModelSource::Raw(learner) => Ok(learner.fit(inst, train, seed)?.w),
            ModelSource::Compressed { learner, config, projection } => {
                let w = learner.fit(inst, train, seed)?.w;
                let theta =
                    compress::draw_projection(*projection, inst.dim, config, rng, seed.token())?;
                let w_hat = compress::compress(&theta, &w, config, rng)?;
                compress::reconstruct(&theta, &w_hat)
            }
        }
    }
}

/// Per-trial record: the two independent guess vectors of one game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameTranscript {
    pub member_guesses: Vec<bool>,
    pub ghost_guesses: Vec<bool>,
}

/// Tracing query `(m, q, xi)` and its CI-qualified verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceVerdict {
    pub m: usize,
    pub q: f64,
    pub xi: f64,
    pub recall_prob: f64,
    pub recall_wilson: (f64, f64),
    /// Point-estimate verdict; the Wilson bounds delimit its confidence.
    pub traces: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub trials: u64,
    pub soundness: f64,
    pub soundness_wilson: (f64, f64),
    /// Histogram of member-flag counts, length `n + 1`.
    pub recall_dist: Vec<u64>,
    pub recall_mean: f64,
    pub verdicts: Vec<TraceVerdict>,
    pub transcripts: Option<Vec<GameTranscript>>,
}

fn adversary_guesses(
    adversary: &Adversary,
    model: &[f64],
    members: &[DataPoint],
    ghosts: &[DataPoint],
    _mu: &DataDistribution,
    rng: &mut impl Rng,
) -> (Vec<bool>, Vec<bool>) {
    match adversary {
        Adversary::Dummy { alpha, r } => {
            let silent = rng.gen::<f64>() < *alpha;
            let mut flag = |_z: &DataPoint| {
                if silent {
                    false
                } else {
                    rng.gen::<f64>() >= *r
                }
            };
            // ghost queries first, then members; both input-blind
            let ghost_guesses: Vec<bool> = ghosts.iter().map(&mut flag).collect();
            let member_guesses: Vec<bool> = members.iter().map(&mut flag).collect();
            (member_guesses, ghost_guesses)
        }
        Adversary::Correlation { tau } => {
            let flag = |z: &DataPoint| dot(model, &z.coords) >= *tau;
            (members.iter().map(flag).collect(), ghosts.iter().map(flag).collect())
        }
    }
}

/// Simulate the recall game and estimate soundness, the recall-count
/// distribution, and verdicts for the requested `(m, q, xi)` queries.
#[allow(clippy::too_many_arguments)]
pub fn play_recall_game(
    model: &ModelSource,
    inst: &ProblemInstance,
    dist: &DataDistribution,
    n: usize,
    adversary: &Adversary,
    queries: &[(usize, f64, f64)],
    trials: u64,
    seed: &Seed,
    keep_transcripts: bool,
) -> Result<TraceReport> {
    if trials == 0 {
        return Err(invalid("recall game needs trials >= 1"));
    }
    if n == 0 {
        return Err(invalid("recall game needs n >= 1"));
    }
    dist.validate()?;
    struct TrialChunk {
        sound: u64,
        hist: Vec<u64>,
        transcripts: Vec<GameTranscript>,
    }
    let chunk_count = 64usize.min(trials as usize);
    let per_chunk: Vec<u64> = (0..chunk_count)
        .map(|c| trials / chunk_count as u64 + u64::from((c as u64) < trials % chunk_count as u64))
        .collect();
    let chunks: Vec<Result<TrialChunk>> = mc::run_chunks(seed, chunk_count, |c, s| {
        let mut rng = s.rng();
        let mut chunk =
            TrialChunk { sound: 0, hist: vec![0; n + 1], transcripts: Vec::new() };
        for trial in 0..per_chunk[c] {
            let ss = crate::dist::sample_supersample_with(dist, n, &mut rng);
            let j = crate::dist::sample_membership_with(n, &mut rng);
            let members = crate::dist::select_train(&ss, &j)?;
            let ghosts = crate::dist::select_ghost(&ss, &j)?;
            let model_vec = model.produce(inst, &members, &mut rng, &s.child(trial))?;
            let (member_guesses, ghost_guesses) =
                adversary_guesses(adversary, &model_vec, &members, &ghosts, dist, &mut rng);
            if ghost_guesses.iter().any(|&g| g) {
                chunk.sound += 1;
            }
            let recall = member_guesses.iter().filter(|&&g| g).count();
            chunk.hist[recall] += 1;
            if keep_transcripts {
                chunk.transcripts.push(GameTranscript { member_guesses, ghost_guesses });
            }
        }
        Ok(chunk)
    });
    let mut sound = 0u64;
    let mut hist = vec![0u64; n + 1];
    let mut transcripts = Vec::new();
    for c in chunks {
        let c = c?;
        sound += c.sound;
        for (h, v) in hist.iter_mut().zip(&c.hist) {
            *h += v;
        }
        transcripts.extend(c.transcripts);
    }
    let soundness = sound as f64 / trials as f64;
    let recall_mean = hist
        .iter()
        .enumerate()
        .map(|(k, &c)| k as f64 * c as f64)
        .sum::<f64>()
        / trials as f64;
    let verdicts = queries
        .iter()
        .map(|&(m, q, xi)| {
            let at_least: u64 = hist.iter().skip(m).sum();
            let recall_prob = at_least as f64 / trials as f64;
            TraceVerdict {
                m,
                q,
                xi,
                recall_prob,
                recall_wilson: wilson_interval(at_least, trials, Z95),
                traces: recall_prob >= q && soundness <= xi,
            }
        })
        .collect();
    Ok(TraceReport {
        trials,
        soundness,
        soundness_wilson: wilson_interval(sound, trials, Z95),
        recall_dist: hist,
        recall_mean,
        verdicts,
        transcripts: if keep_transcripts { Some(transcripts) } else { None },
    })
}

/// Why a tuple is (or is not) reachable by a dummy adversary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibleVia {
    /// `xi >= q`: flag everything with probability `q`.
    SoundnessCoversRecall,
    /// `m = 0`: the all-zero adversary recalls zero samples always.
    ZeroRecallTarget,
    /// The quantitative mixing condition found a witness `alpha`.
    AlphaWitness,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DummyFeasibility {
    pub feasible: bool,
    pub via: FeasibleVia,
    pub witness_alpha: Option<f64>,
}

/// Sufficient condition for a dummy adversary to `(m, q, xi)`-trace:
/// either `xi >= q`, or some `alpha` in `[0, 1 - xi] ∩ [0, 1)` satisfies
///
/// ```text
/// (1 - xi/(1-alpha))^(1/n) + sqrt(log(1/(1 - q/(1-alpha))) / (2n)) + m/n <= 1.
/// ```
///
/// The grid search walks `alpha` in steps of 1e-3.
pub fn dummy_feasible(m: usize, q: f64, xi: f64, n: usize) -> Result<DummyFeasibility> {
    if n == 0 || m > n {
        return Err(invalid("need n >= 1 and m <= n"));
    }
    if !(0.0..=1.0).contains(&q) || !(0.0..=1.0).contains(&xi) {
        return Err(invalid("q and xi must lie in [0, 1]"));
    }
    if m == 0 {
        return Ok(DummyFeasibility {
            feasible: true,
            via: FeasibleVia::ZeroRecallTarget,
            witness_alpha: Some(1.0),
        });
    }
    if xi >= q {
        return Ok(DummyFeasibility {
            feasible: true,
            via: FeasibleVia::SoundnessCoversRecall,
            witness_alpha: Some(1.0 - q),
        });
    }
    let nf = n as f64;
    let mut alpha = 0.0;
    while alpha < 1.0 - xi + 1e-12 && alpha < 1.0 {
        let keep = 1.0 - alpha;
        if q / keep < 1.0 && xi / keep <= 1.0 {
            let first = (1.0 - xi / keep).powf(1.0 / nf);
            let second = ((1.0 / (1.0 - q / keep)).ln() / (2.0 * nf)).sqrt();
            if first + second + m as f64 / nf <= 1.0 {
                return Ok(DummyFeasibility {
                    feasible: true,
                    via: FeasibleVia::AlphaWitness,
                    witness_alpha: Some(alpha),
                });
            }
        }
        alpha += 1e-3;
    }
    Ok(DummyFeasibility { feasible: false, via: FeasibleVia::Infeasible, witness_alpha: None })
}

/// Concrete `(alpha, r)` realizing a feasible tuple, for simulation.
pub fn dummy_witness_params(m: usize, q: f64, xi: f64, n: usize) -> Result<Option<(f64, f64)>> {
    let feas = dummy_feasible(m, q, xi, n)?;
    Ok(match feas.via {
        FeasibleVia::ZeroRecallTarget => Some((1.0, 1.0)),
        FeasibleVia::SoundnessCoversRecall => Some((1.0 - q, 0.0)),
        FeasibleVia::AlphaWitness => {
            let alpha = feas.witness_alpha.unwrap();
            let keep = 1.0 - alpha;
            let r = 1.0
                - m as f64 / n as f64
                - ((1.0 / (1.0 - q / keep)).ln() / (2.0 * n as f64)).sqrt();
            Some((alpha, r.clamp(0.0, 1.0)))
        }
        FeasibleVia::Infeasible => None,
    })
}

/// Closed-form dummy-adversary operating point: the exact soundness and
/// recall probabilities of `Dummy { alpha, r }` at `(m, n)`.
pub fn dummy_operating_point(alpha: f64, r: f64, m: usize, n: usize) -> (f64, f64) {
    let soundness = (1.0 - alpha) * (1.0 - r.powi(n as i32));
    let recall = (1.0 - alpha) * binomial_tail(n, 1.0 - r, m);
    (soundness, recall)
}

/// `P(Bin(n, p) >= m)` by direct summation of log-space terms.
fn binomial_tail(n: usize, p: f64, m: usize) -> f64 {
    if m == 0 {
        return 1.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let ln_p = p.ln();
    let ln_q = (1.0 - p).ln();
    let mut total = 0.0;
    let mut ln_choose = 0.0; // log C(n, 0)
    for k in 0..=n {
        if k > 0 {
            ln_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        if k >= m {
            total += (ln_choose + k as f64 * ln_p + (n - k) as f64 * ln_q).exp();
        }
    }
    total.min(1.0)
}

/// One threshold of a correlation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub tau: f64,
    pub recall_rate: f64,
    /// `P(recall >= ceil(n/2))` with Wilson bounds.
    pub q_at_half: f64,
    pub q_wilson: (f64, f64),
    pub soundness: f64,
    pub soundness_wilson: (f64, f64),
}

/// Sweep correlation thresholds against one model family, sharing trials
/// across thresholds. The grid is the deterministic quantile grid of the
/// pooled member and ghost statistics, which covers whatever scale the
/// model's correlations live on.
pub fn correlation_sweep(
    model: &ModelSource,
    inst: &ProblemInstance,
    dist: &DataDistribution,
    n: usize,
    tau_count: usize,
    trials: u64,
    seed: &Seed,
) -> Result<Vec<SweepPoint>> {
    if trials == 0 || tau_count == 0 {
        return Err(invalid("sweep needs trials >= 1 and tau_count >= 1"));
    }
    struct StatChunk {
        members: Vec<Vec<f64>>,
        ghosts: Vec<Vec<f64>>,
    }
    let chunk_count = 32usize.min(trials as usize);
    let per_chunk: Vec<u64> = (0..chunk_count)
        .map(|c| trials / chunk_count as u64 + u64::from((c as u64) < trials % chunk_count as u64))
        .collect();
    let chunks: Vec<Result<StatChunk>> = mc::run_chunks(seed, chunk_count, |c, s| {
        let mut rng = s.rng();
        let mut chunk = StatChunk { members: Vec::new(), ghosts: Vec::new() };
        for trial in 0..per_chunk[c] {
            let ss = crate::dist::sample_supersample_with(dist, n, &mut rng);
            let j = crate::dist::sample_membership_with(n, &mut rng);
            let members = crate::dist::select_train(&ss, &j)?;
            let ghosts = crate::dist::select_ghost(&ss, &j)?;
            let model_vec = model.produce(inst, &members, &mut rng, &s.child(trial))?;
            chunk.members.push(members.iter().map(|z| dot(&model_vec, &z.coords)).collect());
            chunk.ghosts.push(ghosts.iter().map(|z| dot(&model_vec, &z.coords)).collect());
        }
        Ok(chunk)
    });
    let mut member_stats: Vec<Vec<f64>> = Vec::new();
    let mut ghost_stats: Vec<Vec<f64>> = Vec::new();
    for c in chunks {
        let c = c?;
        member_stats.extend(c.members);
        ghost_stats.extend(c.ghosts);
    }

    let mut pooled: Vec<f64> = member_stats
        .iter()
        .chain(&ghost_stats)
        .flat_map(|v| v.iter().copied())
        .collect();
    pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut taus: Vec<f64> = (1..=tau_count)
        .map(|k| {
            let idx = (k as f64 / (tau_count + 1) as f64 * pooled.len() as f64) as usize;
            pooled[idx.min(pooled.len() - 1)]
        })
        .collect();
    taus.dedup();

    let half = n.div_ceil(2);
    let t = trials;
    Ok(taus
        .into_iter()
        .map(|tau| {
            let mut sound = 0u64;
            let mut at_half = 0u64;
            let mut recall_total = 0u64;
            for (mem, gho) in member_stats.iter().zip(&ghost_stats) {
                let recall = mem.iter().filter(|&&v| v >= tau).count();
                recall_total += recall as u64;
                if recall >= half {
                    at_half += 1;
                }
                if gho.iter().any(|&v| v >= tau) {
                    sound += 1;
                }
            }
            SweepPoint {
                tau,
                recall_rate: recall_total as f64 / (t * n as u64) as f64,
                q_at_half: at_half as f64 / t as f64,
                q_wilson: wilson_interval(at_half, t, Z95),
                soundness: sound as f64 / t as f64,
                soundness_wilson: wilson_interval(sound, t, Z95),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub n: usize,
    /// Compression dimension; `None` marks the raw model.
    pub d: Option<usize>,
    pub tau: f64,
    pub recall_rate: f64,
    pub q_at_half: f64,
    pub soundness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierReport {
    pub rows: Vec<FrontierRow>,
    pub trials: u64,
}

impl FrontierReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# columns: n, d (0 = raw), tau, recall_rate, q_at_half, soundness\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                r.n,
                r.d.unwrap_or(0),
                r.tau,
                r.recall_rate,
                r.q_at_half,
                r.soundness
            ));
        }
        out
    }
}

/// Sweep the correlation family against the raw model and against the
/// compressed model across dimensions, reporting both frontiers.
#[allow(clippy::too_many_arguments)]
pub fn compressed_tracing_probe(
    learner: &dyn Learner,
    base: &CompressorConfig,
    inst: &ProblemInstance,
    dist: &DataDistribution,
    n_grid: &[usize],
    d_grid: &[usize],
    tau_count: usize,
    trials: u64,
    seed: &Seed,
) -> Result<FrontierReport> {
    let mut rows = Vec::new();
    for (gi, &n) in n_grid.iter().enumerate() {
        let raw = correlation_sweep(
            &ModelSource::Raw(learner),
            inst,
            dist,
            n,
            tau_count,
            trials,
            &seed.child(gi as u64).child(0),
        )?;
        rows.extend(raw.into_iter().map(|p| FrontierRow {
            n,
            d: None,
            tau: p.tau,
            recall_rate: p.recall_rate,
            q_at_half: p.q_at_half,
            soundness: p.soundness,
        }));
        for (di, &d) in d_grid.iter().enumerate() {
            let cfg = CompressorConfig { d, ..*base };
            cfg.validate()?;
            let sweep = correlation_sweep(
                &ModelSource::Compressed { learner, config: cfg, projection: ProjectionKind::Gaussian },
                inst,
                dist,
                n,
                tau_count,
                trials,
                &seed.child(gi as u64).child(1 + di as u64),
            )?;
            rows.extend(sweep.into_iter().map(|p| FrontierRow {
                n,
                d: Some(d),
                tau: p.tau,
                recall_rate: p.recall_rate,
                q_at_half: p.q_at_half,
                soundness: p.soundness,
            }));
        }
    }
    Ok(FrontierReport { rows, trials })
}
