//! Monte Carlo experiment runners and their CSV/JSON output.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::Config;
use super::data::{gen_distribution, random_concept, DistributionSpec, Sampler};
use crate::domain::{generalization_error, Concept, ConceptClass};
use crate::error::{Error, Result};
use crate::learners::{
    learn_generic, learn_label_private, learn_point, learn_rectangle, learn_threshold,
    LearnerOutput, LearnerParams, PointFallback, RectangleKnobs,
};
use crate::parallel::{map_trials, map_trials_sequential};
use crate::recconcave::RecTrace;
use crate::reductions::{
    learn_from_sanitizer, BlockPlan, FixedSize, LabelSanitizer, PointsSanitizer,
};
use crate::rng::Randomness;
use crate::sanitizers::{
    max_class_error, san_k_points, san_points, san_thresholds, SanitizerParams,
};

/// Wilson score interval for `k` successes in `n` trials at normal quantile `z`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (nf, p) = (n as f64, k as f64 / n as f64);
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * nf)) / (1.0 + z2 / nf);
    let half = z / (1.0 + z2 / nf) * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: u64,
    /// Generalization error for learners, maximum query error for sanitizers.
    pub error: f64,
    pub success: bool,
    pub fell_back: bool,
    pub proper: bool,
    pub hypothesis: String,
    pub wall_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<RecTrace>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub mean_error: f64,
    pub max_error: f64,
    pub fallbacks: u64,
    pub proper_rate: f64,
}

pub fn summarize(results: &[TrialResult]) -> Summary {
    let n = results.len() as u64;
    let successes = results.iter().filter(|r| r.success).count() as u64;
    let (wilson_low, wilson_high) = wilson_interval(successes, n, 1.96);
    let nf = (n as f64).max(1.0);
    Summary {
        trials: n,
        successes,
        success_rate: successes as f64 / nf,
        wilson_low,
        wilson_high,
        mean_error: results.iter().map(|r| r.error).sum::<f64>() / nf,
        max_error: results.iter().map(|r| r.error).fold(0.0, f64::max),
        fallbacks: results.iter().filter(|r| r.fell_back).count() as u64,
        proper_rate: results.iter().filter(|r| r.proper).count() as f64 / nf,
    }
}

/// One row per trial. Wall time is omitted unless `timing`, so output is reproducible.
pub fn results_csv(results: &[TrialResult], timing: bool) -> String {
    let mut out = String::from("trial,error,success,fell_back,proper,hypothesis");
    out.push_str(if timing { ",wall_secs\n" } else { "\n" });
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},\"{}\"",
            r.trial, r.error, r.success as u8, r.fell_back as u8, r.proper as u8, r.hypothesis
        ));
        if timing {
            out.push_str(&format!(",{}", r.wall_secs));
        }
        out.push('\n');
    }
    out
}

pub fn summary_json(summary: &Summary) -> String {
    serde_json::to_string_pretty(summary).expect("summary serializes")
}

fn describe(c: &Concept) -> String {
    match c {
        Concept::Point { j, .. } => format!("point({j})"),
        Concept::Threshold { t, .. } => format!("threshold({t})"),
        Concept::KPoint { members, .. } => format!("kpoint({members:?})"),
        Concept::Rectangle { bounds: None, .. } => "rectangle(empty)".into(),
        Concept::Rectangle {
            bounds: Some(b), ..
        } => format!("rectangle({b:?})"),
        Concept::Labeled(base) => format!("label({})", describe(base)),
    }
}

/// Parses `point`, `thresh`, `kpoint` or `rect` with the bit-width and optional `k` / axes.
pub fn parse_class(kind: &str, bits: u32, k: u32, axes: u32) -> Result<ConceptClass> {
    match kind {
        "point" => ConceptClass::point(bits),
        "thresh" | "threshold" => ConceptClass::threshold(bits),
        "kpoint" => ConceptClass::k_point(bits, k),
        "rect" | "rectangle" => ConceptClass::rectangle(bits, axes),
        _ => Err(Error::Parameter(format!("unknown class `{kind}`"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LearnerKind {
    Point,
    Threshold,
    Rectangle,
    Generic,
    LabelPrivate,
}

impl LearnerKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "point" => Self::Point,
            "thresh" | "threshold" => Self::Threshold,
            "rect" | "rectangle" => Self::Rectangle,
            "generic" => Self::Generic,
            "label_private" => Self::LabelPrivate,
            _ => return Err(Error::Parameter(format!("unknown learner `{s}`"))),
        })
    }

    /// The dedicated learner for a class, or the generic one.
    pub fn default_for(class: &ConceptClass) -> Self {
        match class {
            ConceptClass::Point { .. } => Self::Point,
            ConceptClass::Threshold { .. } => Self::Threshold,
            ConceptClass::Rectangle { .. } => Self::Rectangle,
            _ => Self::Generic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacConfig {
    pub class: ConceptClass,
    pub learner: LearnerKind,
    pub distribution: DistributionSpec,
    /// Fixed target, or a fresh uniformly random member per trial.
    pub target: Option<Concept>,
    pub m: usize,
    pub trials: u64,
    pub params: LearnerParams,
    pub knobs: RectangleKnobs,
    pub fallback: PointFallback,
    pub seed: u64,
}

impl PacConfig {
    /// Keys: `class d k n learner distribution target m trials alpha beta eps delta N gamma_c
    /// validate c_r c_p fallback`.
    pub fn from_config(c: &Config, seed: u64) -> Result<Self> {
        let bits: u32 = c.require("d")?;
        let class = parse_class(
            c.get_str("class").unwrap_or("thresh"),
            bits,
            c.get_or("k", 1)?,
            c.get_or("n", 1)?,
        )?;
        let learner = match c.get_str("learner") {
            Some(s) => LearnerKind::parse(s)?,
            None => LearnerKind::default_for(&class),
        };
        let mut params = LearnerParams::new(
            c.require("alpha")?,
            c.require("beta")?,
            c.require("eps")?,
            c.get_or("delta", 1e-6)?,
        )?
        .with_scale(c.get_or("gamma_c", 1.0)?);
        if let Some(n) = c.get("N")? {
            params = params.with_budget(n);
        }
        if !c.get_or("validate", true)? {
            params = params.unvalidated();
        }
        let target = match c.get::<u64>("target")? {
            None => None,
            Some(v) => Some(match class {
                ConceptClass::Point { bits } => Concept::point(bits, v)?,
                ConceptClass::Threshold { bits } => Concept::threshold(bits, v)?,
                _ => {
                    return Err(Error::Parameter(
                        "`target` is supported for point and threshold classes".into(),
                    ))
                }
            }),
        };
        let fallback = match c.get_str("fallback").unwrap_or("random") {
            "random" => PointFallback::RandomPoint,
            "zero" => PointFallback::AllZero,
            f => return Err(Error::Parameter(format!("unknown fallback `{f}`"))),
        };
        let defaults = RectangleKnobs::default();
        Ok(Self {
            class,
            learner,
            distribution: DistributionSpec::parse(c.get_str("distribution").unwrap_or("uniform"))?,
            target,
            m: c.require("m")?,
            trials: c.get_or("trials", 100)?,
            params,
            knobs: RectangleKnobs {
                c_r: c.get_or("c_r", defaults.c_r)?,
                c_p: c.get_or("c_p", defaults.c_p)?,
                noiseless: c.get_or("noiseless", false)?,
            },
            fallback,
            seed,
        })
    }
}

fn run_learner(
    cfg: &PacConfig,
    sample: &crate::domain::LabeledSample,
    rng: &mut Randomness,
) -> Result<LearnerOutput> {
    match (cfg.learner, &cfg.class) {
        (LearnerKind::Point, _) => learn_point(sample, &cfg.params, cfg.fallback, rng),
        (LearnerKind::Threshold, _) => learn_threshold(sample, &cfg.params, rng),
        (LearnerKind::Rectangle, ConceptClass::Rectangle { axes, .. }) => {
            learn_rectangle(sample, *axes, &cfg.params, &cfg.knobs, rng)
        }
        (LearnerKind::Rectangle, _) => Err(Error::Parameter(
            "the rectangle learner needs a rectangle class".into(),
        )),
        (LearnerKind::Generic, class) => learn_generic(sample, class, &cfg.params, rng),
        (LearnerKind::LabelPrivate, class) => learn_label_private(
            &sample.unlabeled(),
            sample.labels(),
            class,
            &cfg.params,
            rng,
        ),
    }
}

fn trials<T, F>(parallel: bool, n: u64, master: &Randomness, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut Randomness) -> T + Sync + Send,
{
    if parallel {
        map_trials(n, master, f)
    } else {
        map_trials_sequential(n, master, f)
    }
}

/// Runs `cfg.trials` independent learning trials; trial `i` uses stream `i` of the seed.
pub fn run_pac_experiment(cfg: &PacConfig) -> Result<Vec<TrialResult>> {
    run_pac_experiment_with(cfg, true)
}

/// As [`run_pac_experiment`], choosing between the thread pool and a plain loop. Both give
/// identical results.
pub fn run_pac_experiment_with(cfg: &PacConfig, parallel: bool) -> Result<Vec<TrialResult>> {
    let sampler = Sampler::new(gen_distribution(cfg.class.input_bits(), &cfg.distribution)?)?;
    let master = Randomness::from_seed(cfg.seed);
    trials(
        parallel,
        cfg.trials,
        &master,
        |i, rng| -> Result<TrialResult> {
            let start = Instant::now();
            let target = match &cfg.target {
                Some(t) => t.clone(),
                None => random_concept(&cfg.class, rng)?,
            };
            let sample = sampler.labeled(&target, cfg.m, rng)?;
            let out = run_learner(cfg, &sample, rng)?;
            let error = generalization_error(&target, &out.hypothesis, sampler.distribution())?;
            Ok(TrialResult {
                trial: i,
                error,
                success: error <= cfg.params.alpha,
                fell_back: out.diagnostics.fell_back,
                proper: cfg.class.contains_concept(&out.hypothesis),
                hypothesis: describe(&out.hypothesis),
                wall_secs: start.elapsed().as_secs_f64(),
                trace: out.diagnostics.rec_trace,
            })
        },
    )
    .into_iter()
    .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SanitizerKind {
    Points,
    KPoints(u32),
    Thresholds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SanConfig {
    pub bits: u32,
    pub sanitizer: SanitizerKind,
    pub distribution: DistributionSpec,
    pub m: usize,
    pub trials: u64,
    pub params: SanitizerParams,
    pub seed: u64,
}

impl SanConfig {
    /// Keys: `class d k distribution m trials alpha beta eps delta gamma_c validate`.
    pub fn from_config(c: &Config, seed: u64) -> Result<Self> {
        let sanitizer = match c.get_str("class").unwrap_or("thresh") {
            "point" => SanitizerKind::Points,
            "kpoint" => SanitizerKind::KPoints(c.require("k")?),
            "thresh" | "threshold" => SanitizerKind::Thresholds,
            other => {
                return Err(Error::Parameter(format!(
                    "no sanitizer for class `{other}`"
                )))
            }
        };
        let mut params = SanitizerParams::new(
            c.require("alpha")?,
            c.require("beta")?,
            c.require("eps")?,
            c.get_or("delta", 1e-6)?,
        )?
        .with_scale(c.get_or("gamma_c", 1.0)?);
        if !c.get_or("validate", true)? {
            params = params.unvalidated();
        }
        Ok(Self {
            bits: c.require("d")?,
            sanitizer,
            distribution: DistributionSpec::parse(c.get_str("distribution").unwrap_or("uniform"))?,
            m: c.require("m")?,
            trials: c.get_or("trials", 100)?,
            params,
            seed,
        })
    }
}

/// Sanitizes a fresh database per trial and records the largest class-query error.
pub fn run_san_experiment(cfg: &SanConfig) -> Result<Vec<TrialResult>> {
    let sampler = Sampler::new(gen_distribution(cfg.bits, &cfg.distribution)?)?;
    let master = Randomness::from_seed(cfg.seed);
    map_trials(cfg.trials, &master, |i, rng| -> Result<TrialResult> {
        let start = Instant::now();
        let db = sampler.database(cfg.m, rng)?;
        let (error, fell_back, label) = match cfg.sanitizer {
            SanitizerKind::Points => {
                let est = san_points(&db, &cfg.params, rng)?;
                let chosen = est.rounds.iter().flatten().count();
                (
                    max_class_error(&ConceptClass::point(cfg.bits)?, &db, &est, u64::MAX)?,
                    false,
                    format!("points({chosen})"),
                )
            }
            SanitizerKind::KPoints(k) => {
                let est = san_k_points(&db, k as usize, &cfg.params, rng)?;
                let class = ConceptClass::k_point(cfg.bits, k)?;
                (
                    max_class_error(&class, &db, &est, crate::domain::DEFAULT_ENUMERATION_BUDGET)?,
                    false,
                    format!("kpoints({k})"),
                )
            }
            SanitizerKind::Thresholds => {
                let (out, trace) = san_thresholds(&db, &cfg.params, rng)?;
                let err =
                    max_class_error(&ConceptClass::threshold(cfg.bits)?, &db, &out, u64::MAX)?;
                (
                    err,
                    trace.halted_on_budget > 0,
                    format!("weighted({} points)", out.weights().len()),
                )
            }
        };
        Ok(TrialResult {
            trial: i,
            error,
            success: error <= cfg.params.alpha,
            fell_back,
            proper: true,
            hypothesis: label,
            wall_secs: start.elapsed().as_secs_f64(),
            trace: None,
        })
    })
    .into_iter()
    .collect()
}

/// Point-class learning through the label sanitizer built on the point sanitizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReduceConfig {
    pub bits: u32,
    pub distribution: DistributionSpec,
    pub target: Option<u64>,
    /// Base sanitizer accuracy and block size.
    pub base: SanitizerParams,
    pub block: usize,
    pub plan: BlockPlan,
    pub epsilon: f64,
    /// Success when the generalization error is at most this.
    pub tolerance: f64,
    pub trials: u64,
    pub seed: u64,
}

impl ReduceConfig {
    /// Keys: `d distribution target alpha beta eps delta block M t tolerance trials`.
    /// `M` and `t` default to 10 and 60 blocks.
    pub fn from_config(c: &Config, seed: u64) -> Result<Self> {
        let block: usize = c.get_or("block", 500)?;
        let epsilon: f64 = c.require("eps")?;
        let base = SanitizerParams::new(
            c.get_or("alpha", 0.3)?,
            c.get_or("beta", 0.1)?,
            epsilon,
            c.get_or("delta", 0.05)?,
        )?
        .unvalidated();
        let plan = BlockPlan::custom(
            block,
            c.get_or("M", 10 * block)?,
            c.get_or("t", 60 * block)?,
        )?;
        Ok(Self {
            bits: c.get_or("d", 6)?,
            distribution: DistributionSpec::parse(c.get_str("distribution").unwrap_or("uniform"))?,
            target: c.get("target")?,
            base,
            block,
            plan,
            epsilon,
            tolerance: c.get_or("tolerance", 0.3)?,
            trials: c.get_or("trials", 100)?,
            seed,
        })
    }
}

pub fn run_reduce_experiment(cfg: &ReduceConfig) -> Result<Vec<TrialResult>> {
    let class = ConceptClass::point(cfg.bits)?;
    let base = FixedSize {
        inner: PointsSanitizer {
            params: cfg.base,
            m: cfg.block,
        },
        class: class.clone(),
        size: cfg.block,
    };
    let san = LabelSanitizer::new(base, cfg.epsilon, cfg.plan)?;
    let sampler = Sampler::new(gen_distribution(cfg.bits, &cfg.distribution)?)?;
    let master = Randomness::from_seed(cfg.seed);
    map_trials(cfg.trials, &master, |i, rng| -> Result<TrialResult> {
        let start = Instant::now();
        let target = match cfg.target {
            Some(j) => Concept::point(cfg.bits, j)?,
            None => random_concept(&class, rng)?,
        };
        let sample = sampler.labeled(&target, cfg.plan.t, rng)?;
        let out = learn_from_sanitizer(&san, &class, &sample, rng)?;
        let error = generalization_error(&target, &out.hypothesis, sampler.distribution())?;
        Ok(TrialResult {
            trial: i,
            error,
            success: error <= cfg.tolerance,
            fell_back: false,
            proper: class.contains_concept(&out.hypothesis),
            hypothesis: describe(&out.hypothesis),
            wall_secs: start.elapsed().as_secs_f64(),
            trace: None,
        })
    })
    .into_iter()
    .collect()
}
