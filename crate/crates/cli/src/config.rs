//! Experiment configuration: TOML with nested blocks. Unknown keys are
//! rejected so a typo cannot silently fall back to a default.

use cmilab::compress::CompressorConfig;
use cmilab::dist::{DataDistribution, DataPoint};
use cmilab::memor::Adversary;
use cmilab::problems::{GlLink, ProblemInstance};
use cmilab::seed::Seed;
use cmilab::sgld::{Schedule, SgldConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    /// File stem for the report and CSV sidecars.
    pub output: String,
    #[serde(default)]
    pub problem: Option<ProblemSpec>,
    #[serde(default)]
    pub distribution: Option<DistSpec>,
    #[serde(default)]
    pub compressor: Option<CompressorSpec>,
    #[serde(default)]
    pub moments: Option<MomentsSpec>,
    #[serde(default)]
    pub curve: Option<CurveSpec>,
    #[serde(default)]
    pub counterexample: Option<CounterexampleSpec>,
    #[serde(default)]
    pub sgld: Option<SgldSpec>,
    #[serde(default)]
    pub recall: Option<RecallSpec>,
    #[serde(default)]
    pub ftable: Option<FtableSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MomentsCheck,
    BoundCurve,
    Counterexample,
    SgldBound,
    RecallGame,
    FTable,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::MomentsCheck => "moments-check",
            ExperimentKind::BoundCurve => "bound-curve",
            ExperimentKind::Counterexample => "counterexample",
            ExperimentKind::SgldBound => "sgld-bound",
            ExperimentKind::RecallGame => "recall-game",
            ExperimentKind::FTable => "f-table",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: String,
    pub dim: usize,
    #[serde(default = "one")]
    pub lipschitz: f64,
    #[serde(default = "one")]
    pub radius: f64,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub feature_bound: Option<f64>,
    #[serde(default)]
    pub link: Option<String>,
}

fn one() -> f64 {
    1.0
}

impl ProblemSpec {
    pub fn build(&self) -> Result<ProblemInstance, String> {
        match self.kind.as_str() {
            "linear" => Ok(ProblemInstance::linear(self.dim, self.lipschitz, self.radius)),
            "strongly_convex" => {
                let lambda = self.lambda.ok_or("strongly_convex needs lambda")?;
                Ok(ProblemInstance::strongly_convex(self.dim, self.lipschitz, lambda, self.radius))
            }
            "squared" => Ok(ProblemInstance::squared(self.dim, self.lipschitz, self.radius)),
            "generalized_linear" => {
                let link = match self.link.as_deref() {
                    Some("abs_identity") | None => GlLink::abs_identity(),
                    Some(other) => return Err(format!("unknown link {other}")),
                };
                Ok(ProblemInstance::generalized_linear(
                    self.dim,
                    self.lipschitz,
                    self.feature_bound.unwrap_or(1.0),
                    self.radius,
                    link,
                ))
            }
            other => Err(format!("unknown problem kind {other}")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    CubeSymmetric { dim: usize },
    /// Bias vector drawn uniformly from `[-1, 1]^D` off the experiment seed.
    CubeRandom { dim: usize },
    CubeP { pstar: Vec<f64> },
    FiniteSupport { atoms: Vec<Vec<f64>>, weights: Vec<f64> },
    SphereUniform { dim: usize },
}

impl DistSpec {
    pub fn build(&self, seed: &Seed) -> DataDistribution {
        match self {
            DistSpec::CubeSymmetric { dim } => DataDistribution::cube_symmetric(*dim),
            DistSpec::CubeRandom { dim } => {
                DataDistribution::cube_random_pstar(*dim, &seed.child(u64::from(u32::MAX)))
            }
            DistSpec::CubeP { pstar } => DataDistribution::CubeP { pstar: pstar.clone() },
            DistSpec::FiniteSupport { atoms, weights } => DataDistribution::FiniteSupport {
                atoms: atoms.iter().map(|a| DataPoint::new(a.clone())).collect(),
                weights: weights.clone(),
            },
            DistSpec::SphereUniform { dim } => DataDistribution::SphereUniform { dim: *dim },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressorSpec {
    pub target_dim: usize,
    pub clip: f64,
    pub dither: f64,
}

impl CompressorSpec {
    pub fn build(&self) -> Result<CompressorConfig, String> {
        CompressorConfig::new(self.target_dim, self.clip, self.dither).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsSpec {
    pub ambient_dim: usize,
    pub target_dim: usize,
    pub samples: usize,
    pub ball_dims: Vec<usize>,
    pub ball_samples: usize,
    pub tail_dims: Vec<usize>,
    pub tail_clips: Vec<f64>,
    pub tail_samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub n_grid: Vec<usize>,
    pub outer: usize,
    pub inner: usize,
    #[serde(default)]
    pub per_datum: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleSpec {
    pub n_grid: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgldSpec {
    pub n: usize,
    pub replicas: usize,
    pub subspace_dim: usize,
    pub steps: usize,
    pub batch: usize,
    pub eta: ScheduleSpec,
    pub sigma: ScheduleSpec,
    pub nu: ScheduleSpec,
    pub radius: f64,
    pub contraction: f64,
    pub lipschitz: f64,
    /// Also emit a per-step CSV for the first replica.
    #[serde(default)]
    pub dump_steps: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSpec {
    Constant(f64),
    PerStep(Vec<f64>),
}

impl ScheduleSpec {
    fn build(&self) -> Schedule {
        match self {
            ScheduleSpec::Constant(v) => Schedule::Constant(*v),
            ScheduleSpec::PerStep(v) => Schedule::PerStep(v.clone()),
        }
    }
}

impl SgldSpec {
    pub fn build(&self) -> SgldConfig {
        SgldConfig {
            subspace_dim: self.subspace_dim,
            steps: self.steps,
            batch: self.batch,
            eta: self.eta.build(),
            sigma: self.sigma.build(),
            nu: self.nu.build(),
            radius: self.radius,
            contraction: self.contraction,
            lipschitz: self.lipschitz,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecallSpec {
    pub n: usize,
    pub trials: u64,
    pub adversary: AdversarySpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversarySpec {
    /// Fixed dummy adversary against one model, with tracing queries.
    Dummy {
        alpha: f64,
        r: f64,
        #[serde(default)]
        queries: Vec<(usize, f64, f64)>,
        #[serde(default)]
        compressed: bool,
    },
    /// Correlation-threshold sweep building the raw-vs-compressed frontier.
    CorrelationSweep { d_grid: Vec<usize>, tau_count: usize },
}

impl AdversarySpec {
    pub fn dummy(&self) -> Option<Adversary> {
        match self {
            AdversarySpec::Dummy { alpha, r, .. } => Some(Adversary::Dummy { alpha: *alpha, r: *r }),
            AdversarySpec::CorrelationSweep { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FtableSpec {
    pub gap_min: f64,
    pub gap_max: f64,
    pub gap_steps: usize,
    pub weight_min: f64,
    pub weight_max: f64,
    pub weight_steps: usize,
}

impl FtableSpec {
    pub fn gaps(&self) -> Vec<f64> {
        grid(self.gap_min, self.gap_max, self.gap_steps)
    }

    pub fn weights(&self) -> Vec<f64> {
        grid(self.weight_min, self.weight_max, self.weight_steps)
    }
}

fn grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![lo];
    }
    (0..steps)
        .map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64)
        .collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn root_seed(&self) -> Seed {
        Seed::new(self.seed)
    }

    fn require<'a, T>(block: &'a Option<T>, name: &str) -> Result<&'a T, String> {
        block.as_ref().ok_or_else(|| format!("missing [{name}] block"))
    }

    pub fn validate(&self) -> Result<(), String> {
        match self.experiment {
            ExperimentKind::MomentsCheck => {
                let m = Self::require(&self.moments, "moments")?;
                if m.samples == 0 || m.ball_samples == 0 || m.tail_samples == 0 {
                    return Err("moments sample counts must be positive".into());
                }
                if m.target_dim == 0 || m.target_dim > m.ambient_dim {
                    return Err("moments needs 1 <= target_dim <= ambient_dim".into());
                }
            }
            ExperimentKind::BoundCurve => {
                let p = Self::require(&self.problem, "problem")?;
                p.build()?;
                let d = Self::require(&self.distribution, "distribution")?;
                d.build(&self.root_seed()).validate().map_err(|e| e.to_string())?;
                Self::require(&self.compressor, "compressor")?.build()?;
                let c = Self::require(&self.curve, "curve")?;
                if c.n_grid.is_empty() || c.outer == 0 || c.inner == 0 {
                    return Err("curve needs a non-empty n_grid and positive budgets".into());
                }
            }
            ExperimentKind::Counterexample => {
                Self::require(&self.problem, "problem")?.build()?;
                Self::require(&self.distribution, "distribution")?;
                Self::require(&self.compressor, "compressor")?.build()?;
                let c = Self::require(&self.counterexample, "counterexample")?;
                if c.n_grid.is_empty() || c.n_grid.iter().any(|&n| n == 0 || n > 14) {
                    return Err("counterexample n_grid must lie in [1, 14]".into());
                }
            }
            ExperimentKind::SgldBound => {
                Self::require(&self.problem, "problem")?.build()?;
                Self::require(&self.distribution, "distribution")?;
                let s = Self::require(&self.sgld, "sgld")?;
                s.build().validate(s.n).map_err(|e| e.to_string())?;
                if s.replicas == 0 {
                    return Err("sgld needs replicas >= 1".into());
                }
            }
            ExperimentKind::RecallGame => {
                Self::require(&self.problem, "problem")?.build()?;
                Self::require(&self.distribution, "distribution")?;
                let r = Self::require(&self.recall, "recall")?;
                if r.n == 0 || r.trials == 0 {
                    return Err("recall needs n >= 1 and trials >= 1".into());
                }
                match &r.adversary {
                    AdversarySpec::Dummy { alpha, r: rr, compressed, .. } => {
                        if !(0.0..=1.0).contains(alpha) || !(0.0..=1.0).contains(rr) {
                            return Err("dummy parameters must lie in [0, 1]".into());
                        }
                        if *compressed {
                            Self::require(&self.compressor, "compressor")?.build()?;
                        }
                    }
                    AdversarySpec::CorrelationSweep { d_grid, tau_count } => {
                        if d_grid.is_empty() || *tau_count == 0 {
                            return Err("correlation sweep needs d_grid and tau_count".into());
                        }
                        Self::require(&self.compressor, "compressor")?.build()?;
                    }
                }
            }
            ExperimentKind::FTable => {
                let f = Self::require(&self.ftable, "ftable")?;
                if f.gap_steps == 0 || f.weight_steps == 0 {
                    return Err("ftable needs positive grid sizes".into());
                }
                if !(0.0..=1.0).contains(&f.weight_min) || !(0.0..=1.0).contains(&f.weight_max) {
                    return Err("ftable weights must lie in [0, 1]".into());
                }
            }
        }
        Ok(())
    }

    /// Derived ~10% budget used for the report spot check. Deterministic,
    /// recomputed by `verify`.
    pub fn spot_config(&self) -> ExperimentConfig {
        let mut cfg = self.clone();
        let shrink = |x: usize| x.div_ceil(10).max(1);
        match cfg.experiment {
            ExperimentKind::MomentsCheck => {
                if let Some(m) = cfg.moments.as_mut() {
                    m.samples = shrink(m.samples);
                    m.ball_samples = shrink(m.ball_samples);
                    m.tail_samples = shrink(m.tail_samples);
                }
            }
            ExperimentKind::BoundCurve => {
                if let Some(c) = cfg.curve.as_mut() {
                    c.outer = shrink(c.outer);
                }
            }
            ExperimentKind::Counterexample => {
                if let Some(c) = cfg.counterexample.as_mut() {
                    c.n_grid.truncate(1);
                }
            }
            ExperimentKind::SgldBound => {
                if let Some(s) = cfg.sgld.as_mut() {
                    s.replicas = shrink(s.replicas);
                }
            }
            ExperimentKind::RecallGame => {
                if let Some(r) = cfg.recall.as_mut() {
                    r.trials = (r.trials).div_ceil(10).max(1);
                }
            }
            ExperimentKind::FTable => {
                if let Some(f) = cfg.ftable.as_mut() {
                    f.gap_steps = shrink(f.gap_steps);
                }
            }
        }
        cfg
    }
}
