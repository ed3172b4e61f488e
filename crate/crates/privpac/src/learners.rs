//! Private PAC learners: points, thresholds, rectangles, the generic exponential-mechanism
//! learner and the label-private learner.

use serde::{Deserialize, Serialize};

use crate::domain::project_class;
use crate::domain::{
    domain_size, Concept, ConceptClass, Database, LabeledSample, DEFAULT_ENUMERATION_BUDGET,
};
use crate::error::{check_positive, check_unit_open, Error, Result};
use crate::privacy::{
    adist_release, exponential_mechanism_index, laplace_unchecked, per_mechanism_epsilon,
    PrivacyParams,
};
use crate::recconcave::{
    log_star_of_power_of_two, min_promise, rec_concave, QuasiConcaveProblem, RecTrace, StepFunction,
};
use crate::rng::Randomness;
use crate::sanitizers::{
    san_thresholds, san_thresholds_calls, CountingAnswers, SanitizerParams, WeightedDatabase,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerParams {
    pub alpha: f64,
    pub beta: f64,
    pub privacy: PrivacyParams,
    /// Recursion budget for the threshold learner; `None` uses the largest admissible value.
    pub budget: Option<u32>,
    /// Multiplier on sample-size constants.
    pub scale: f64,
    /// Enforce sample-size preconditions.
    pub validate: bool,
}

impl LearnerParams {
    pub fn new(alpha: f64, beta: f64, epsilon: f64, delta: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            privacy: PrivacyParams::new(epsilon, delta)?,
            budget: None,
            scale: 1.0,
            validate: true,
        };
        p.check()?;
        Ok(p)
    }

    pub fn with_budget(self, n: u32) -> Self {
        Self {
            budget: Some(n),
            ..self
        }
    }

    pub fn with_scale(self, scale: f64) -> Self {
        Self { scale, ..self }
    }

    pub fn unvalidated(self) -> Self {
        Self {
            validate: false,
            ..self
        }
    }

    fn check(&self) -> Result<()> {
        check_unit_open("alpha", self.alpha)?;
        check_unit_open("beta", self.beta)?;
        check_positive("epsilon", self.privacy.epsilon)?;
        check_positive("scale", self.scale)
    }

    fn needs_delta(&self) -> Result<()> {
        check_unit_open("delta", self.privacy.delta)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LearnerDiagnostics {
    /// The private selection produced ⊥ and a fallback hypothesis was returned.
    pub fell_back: bool,
    pub rec_trace: Option<RecTrace>,
    /// Number of hypotheses the final selection ranged over.
    pub candidates: Option<usize>,
    /// Size of the label-free planning prefix.
    pub split: Option<usize>,
    /// Partition cells per axis.
    pub axis_cells: Vec<usize>,
    /// Privacy of each elementary mechanism.
    pub per_mechanism: Option<PrivacyParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerOutput {
    pub hypothesis: Concept,
    pub diagnostics: LearnerDiagnostics,
}

/// What the point learner returns when the stability check fails.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointFallback {
    /// A uniformly random point concept.
    #[default]
    RandomPoint,
    /// The constant-0 hypothesis, represented as the empty k-point concept (improper).
    AllZero,
}

fn nonempty(s: &LabeledSample) -> Result<()> {
    if s.is_empty() {
        Err(Error::Precondition("the sample is empty".into()))
    } else {
        Ok(())
    }
}

/// `⌈(8/(αε))·ln(4/(βδ))⌉`.
pub fn point_learner_sample_size(alpha: f64, beta: f64, epsilon: f64, delta: f64) -> u64 {
    (8.0 / (alpha * epsilon) * (4.0 / (beta * delta)).ln()).ceil() as u64
}

/// Counts positive examples per point and releases the most frequent one when it clearly
/// beats the runner-up.
pub fn learn_point(
    s: &LabeledSample,
    params: &LearnerParams,
    fallback: PointFallback,
    rng: &mut Randomness,
) -> Result<LearnerOutput> {
    params.check()?;
    params.needs_delta()?;
    nonempty(s)?;
    let bits = s.bits();
    if 1.0 / (params.alpha * params.beta) > domain_size(bits) as f64 {
        return Err(Error::Precondition(format!(
            "1/(αβ) = {} exceeds the domain size 2^{bits}",
            1.0 / (params.alpha * params.beta)
        )));
    }
    let mut counts: Vec<(u64, u64)> = {
        let mut h = std::collections::BTreeMap::new();
        for x in s.pairs().filter(|p| p.1).map(|p| p.0) {
            *h.entry(x).or_insert(0u64) += 1;
        }
        h.into_iter().collect()
    };
    // descending count, ascending point
    counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let (best, top) = counts.first().copied().unwrap_or((0, 0));
    let second = counts.get(1).map_or(0, |c| c.1);
    let released = adist_release(
        top as f64 - second as f64,
        params.privacy.epsilon,
        params.privacy.delta,
        rng,
    );
    let hypothesis = match (released, fallback) {
        (true, _) => Concept::point(bits, best)?,
        (false, PointFallback::RandomPoint) => Concept::point(bits, rng.below(domain_size(bits)))?,
        (false, PointFallback::AllZero) => Concept::k_point(bits, &[])?,
    };
    Ok(LearnerOutput {
        hypothesis,
        diagnostics: LearnerDiagnostics {
            fell_back: !released,
            ..Default::default()
        },
    })
}

/// `Q(j) = |{i : c_j(x_i) = y_i}|` over `j ∈ [0, 2^d]`, with `c_j(x) = 1` iff `x < j`.
pub fn threshold_agreement(s: &LabeledSample) -> Result<StepFunction> {
    let mut deltas: std::collections::BTreeMap<u64, i64> = std::collections::BTreeMap::new();
    let mut negatives = 0i64;
    for (x, y) in s.pairs() {
        // c_j starts covering x at j = x + 1
        *deltas.entry(x + 1).or_insert(0) += if y { 1 } else { -1 };
        negatives += i64::from(!y);
    }
    let mut starts = vec![0];
    let mut values = vec![negatives as f64];
    let mut level = negatives;
    for (j, d) in deltas {
        level += d;
        if d != 0 {
            starts.push(j);
            values.push(level as f64);
        }
    }
    StepFunction::new(domain_size(s.bits()), starts, values)
}

/// Threshold learner: solves the agreement promise problem privately over `[0, 2^d]`.
pub fn learn_threshold(
    s: &LabeledSample,
    params: &LearnerParams,
    rng: &mut Randomness,
) -> Result<LearnerOutput> {
    params.check()?;
    params.needs_delta()?;
    nonempty(s)?;
    let max_budget = log_star_of_power_of_two(u64::from(s.bits()));
    let n = params.budget.unwrap_or(max_budget);
    if n == 0 || n > max_budget {
        return Err(Error::Parameter(format!(
            "recursion budget must be in 1..={max_budget}, got {n}"
        )));
    }
    let share = 3.0 * f64::from(n);
    let (eps, delta) = (params.privacy.epsilon / share, params.privacy.delta / share);
    if params.validate {
        let need = params.scale
            * min_promise(
                params.alpha / 2.0,
                params.beta,
                eps,
                delta,
                n,
                domain_size(s.bits()),
            )?;
        if (s.len() as f64) < need {
            return Err(Error::Precondition(format!(
                "threshold learning needs {need:.0} examples, got {}",
                s.len()
            )));
        }
    }
    let problem = QuasiConcaveProblem {
        quality: threshold_agreement(s)?,
        promise: s.len() as f64,
        alpha: params.alpha / 2.0,
        budget: Some(n),
    };
    let (k, trace) = rec_concave(&problem, eps, delta, rng)?;
    Ok(LearnerOutput {
        hypothesis: Concept::threshold(s.bits(), k)?,
        diagnostics: LearnerDiagnostics {
            rec_trace: Some(trace),
            per_mechanism: Some(PrivacyParams {
                epsilon: eps,
                delta,
            }),
            ..Default::default()
        },
    })
}

fn agreement(h: &Concept, s: &LabeledSample) -> f64 {
    s.pairs().filter(|&(x, y)| h.contains(x) == y).count() as f64
}

/// Exponential mechanism over every concept of `class`, scored by agreement with `s`.
pub fn learn_generic(
    s: &LabeledSample,
    class: &ConceptClass,
    params: &LearnerParams,
    rng: &mut Randomness,
) -> Result<LearnerOutput> {
    params.check()?;
    nonempty(s)?;
    if class.input_bits() != s.bits() {
        return Err(Error::Domain("sample and class bit-widths differ".into()));
    }
    let concepts = class.enumerate(DEFAULT_ENUMERATION_BUDGET)?;
    let scores: Vec<f64> = concepts.iter().map(|h| agreement(h, s)).collect();
    let i = exponential_mechanism_index(&scores, params.privacy.epsilon, rng)?;
    Ok(LearnerOutput {
        hypothesis: concepts[i].clone(),
        diagnostics: LearnerDiagnostics {
            candidates: Some(concepts.len()),
            ..Default::default()
        },
    })
}

/// Knobs of the rectangle learner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectangleKnobs {
    /// Per-axis sanitizer accuracy is `α/(c_r·n)`.
    pub c_r: f64,
    /// Each axis is cut into `⌈c_p·n/α⌉` cells. With `c_p = 2` a cell inside the target
    /// carries twice the significance threshold, and each boundary costs at most one cell.
    pub c_p: f64,
    /// Skip all noise (exact axis distributions and histograms); not private.
    pub noiseless: bool,
}

impl Default for RectangleKnobs {
    fn default() -> Self {
        Self {
            c_r: 1.0,
            c_p: 2.0,
            noiseless: false,
        }
    }
}

/// `⌈c_p·n/α⌉`.
pub fn rectangle_cells_per_axis(c_p: f64, axes: u32, alpha: f64) -> usize {
    (c_p * f64::from(axes) / alpha).ceil() as usize
}

/// Cuts `[0, 2^d − 1]` into at most `cells` intervals of near-equal mass under `answers`.
pub fn equal_mass_cells(
    answers: &impl CountingAnswers,
    bits: u32,
    cells: usize,
) -> Vec<(u64, u64)> {
    let last = domain_size(bits) - 1;
    let masses = answers.point_masses();
    let total: f64 = masses.iter().map(|m| m.1).sum();
    let mut cuts: Vec<u64> = Vec::new();
    if total > 0.0 {
        let mut cum = 0.0;
        let mut q = 1;
        for &(x, w) in &masses {
            cum += w / total;
            while q < cells && cum >= q as f64 / cells as f64 - 1e-12 {
                if x < last && cuts.last() != Some(&x) {
                    cuts.push(x);
                }
                q += 1;
            }
        }
    }
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut lo = 0;
    for c in cuts {
        out.push((lo, c));
        lo = c + 1;
    }
    out.push((lo, last));
    out
}

/// Axis-by-axis rectangle learner.
///
/// Each axis gets a private threshold sanitization of its coordinates, a partition into
/// equal-mass cells, and a noisy histogram of positive examples per cell. The hypothesis
/// spans the outermost cells whose positive mass clears `τ = α/(4n)`.
pub fn learn_rectangle(
    s: &LabeledSample,
    axes: u32,
    params: &LearnerParams,
    knobs: &RectangleKnobs,
    rng: &mut Randomness,
) -> Result<LearnerOutput> {
    params.check()?;
    params.needs_delta()?;
    nonempty(s)?;
    check_positive("c_r", knobs.c_r)?;
    check_positive("c_p", knobs.c_p)?;
    if axes == 0 || s.bits() % axes != 0 {
        return Err(Error::Domain(format!(
            "{} bits cannot be split into {axes} axes",
            s.bits()
        )));
    }
    let bits = s.bits() / axes;
    let nf = f64::from(axes);
    let m = s.len();
    let axis_alpha = params.alpha / (knobs.c_r * nf);
    let (eps, delta) = (params.privacy.epsilon, params.privacy.delta);

    // 2n groups under advanced composition with slack δ/2; each group gets δ/(4n)
    let eps_group = per_mechanism_epsilon(eps, 2 * u64::from(axes), delta / 2.0)?;
    let delta_group = delta / (4.0 * nf);
    let calls = san_thresholds_calls(axis_alpha.min(0.999));
    let eps_mech = per_mechanism_epsilon(eps_group, 4 * calls, delta_group / 2.0)?;
    let delta_mech = delta_group / (8.0 * calls as f64);
    let sanitizer = SanitizerParams {
        alpha: axis_alpha.min(0.999),
        beta: params.beta / (2.0 * nf),
        epsilon: eps_mech,
        delta: delta_mech,
        scale: params.scale,
        validate: params.validate,
    };

    let tau = params.alpha / (4.0 * nf);
    let cells_wanted = rectangle_cells_per_axis(knobs.c_p, axes, params.alpha);
    let mask = domain_size(bits) - 1;
    let mut bounds = Vec::with_capacity(axes as usize);
    let mut axis_cells = Vec::with_capacity(axes as usize);
    let mut empty = false;
    for axis in 0..axes {
        let coord = |x: u64| (x >> (axis * bits)) & mask;
        let projected = Database::new(bits, s.points().iter().map(|&x| coord(x)).collect())?;
        let axis_distribution = if knobs.noiseless {
            WeightedDatabase::from_database(&projected)
        } else {
            san_thresholds(&projected, &sanitizer, rng)?.0
        };
        let cells = equal_mass_cells(&axis_distribution, bits, cells_wanted);
        axis_cells.push(cells.len());
        let mut positives = vec![0usize; cells.len()];
        for (x, y) in s.pairs() {
            if y {
                let c = coord(x);
                positives[cells.partition_point(|cell| cell.1 < c)] += 1;
            }
        }
        // replacing one example moves at most one count between two cells: L1 sensitivity 2
        let estimates: Vec<f64> = positives
            .iter()
            .map(|&p| {
                let noise = if knobs.noiseless {
                    0.0
                } else {
                    laplace_unchecked(2.0 / eps_group, rng)
                };
                (p as f64 + noise) / m as f64
            })
            .collect();
        let first = estimates.iter().position(|&p| p > tau);
        let last = estimates.iter().rposition(|&p| p > tau);
        match (first, last) {
            (Some(a), Some(b)) => bounds.push((cells[a].0, cells[b].1)),
            _ => empty = true,
        }
    }
    let hypothesis = if empty {
        Concept::empty_rectangle(bits, axes)?
    } else {
        let (lo, hi): (Vec<u64>, Vec<u64>) = bounds.into_iter().unzip();
        Concept::rectangle(bits, &lo, &hi)?
    };
    Ok(LearnerOutput {
        hypothesis,
        diagnostics: LearnerDiagnostics {
            axis_cells,
            per_mechanism: Some(PrivacyParams {
                epsilon: eps_mech,
                delta: delta_mech,
            }),
            ..Default::default()
        },
    })
}

/// `(768/(α²ε))·(VC·ln(64/α) + 2·ln(8/β))`.
pub fn label_private_min_sample(vc: u32, alpha: f64, beta: f64, epsilon: f64) -> f64 {
    768.0 / (alpha * alpha * epsilon)
        * (f64::from(vc) * (64.0 / alpha).ln() + 2.0 * (8.0 / beta).ln())
}

/// `⌈scale·(32/α)·(VC·ln(64/α) + ln(8/β))⌉`.
pub fn label_private_split(vc: u32, alpha: f64, beta: f64, scale: f64) -> usize {
    (scale * 32.0 / alpha * (f64::from(vc) * (64.0 / alpha).ln() + (8.0 / beta).ln())).ceil()
        as usize
}

/// The label-free part of the label-private learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelPrivatePlan {
    pub split: usize,
    /// Distinct points of the planning prefix, ascending.
    pub distinct: Vec<u64>,
    /// One concept per labeling of `distinct` realisable by the class.
    pub hypotheses: Vec<Concept>,
}

/// Builds the hypothesis set from the unlabeled points alone.
pub fn plan_label_private(
    points: &Database,
    class: &ConceptClass,
    params: &LearnerParams,
) -> Result<LabelPrivatePlan> {
    params.check()?;
    if class.input_bits() != points.bits() {
        return Err(Error::Domain("points and class bit-widths differ".into()));
    }
    let m = points.len();
    let vc = class.vc_dimension().upper();
    let need = (params.scale
        * label_private_min_sample(vc, params.alpha, params.beta, params.privacy.epsilon))
    .ceil();
    if m == 0 || (params.validate && (m as f64) < need) {
        return Err(Error::Precondition(format!(
            "label-private learning needs {need} examples, got {m}"
        )));
    }
    let split = label_private_split(vc, params.alpha, params.beta, params.scale).min(m - 1);
    let prefix = &points.entries()[..split];
    let projections = project_class(class, prefix, DEFAULT_ENUMERATION_BUDGET)?;
    let mut distinct = prefix.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    Ok(LabelPrivatePlan {
        split,
        distinct,
        hypotheses: projections.into_iter().map(|p| p.concept).collect(),
    })
}

/// Label-private learner: plan on the unlabeled prefix, then one exponential mechanism over
/// the remaining labeled examples.
pub fn learn_label_private(
    points: &Database,
    labels: &[bool],
    class: &ConceptClass,
    params: &LearnerParams,
    rng: &mut Randomness,
) -> Result<LearnerOutput> {
    if labels.len() != points.len() {
        return Err(Error::Shape(format!(
            "{} points but {} labels",
            points.len(),
            labels.len()
        )));
    }
    let plan = plan_label_private(points, class, params)?;
    let rest = LabeledSample::new(
        points.bits(),
        points.entries()[plan.split..].to_vec(),
        labels[plan.split..].to_vec(),
    )?;
    let scores: Vec<f64> = plan
        .hypotheses
        .iter()
        .map(|h| agreement(h, &rest))
        .collect();
    let i = exponential_mechanism_index(&scores, params.privacy.epsilon, rng)?;
    Ok(LearnerOutput {
        hypothesis: plan.hypotheses[i].clone(),
        diagnostics: LearnerDiagnostics {
            candidates: Some(plan.hypotheses.len()),
            split: Some(plan.split),
            ..Default::default()
        },
    })
}
