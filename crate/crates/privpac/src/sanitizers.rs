//! Private sanitizers for point, k-point and threshold queries, and the step that turns a
//! sanitized answer set back into an ordinary database.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::choosing::min_sample as choose_min_sample;
use crate::choosing::{choose_from_support, ChoiceOutcome, ChooseParams, StaggeredBlockCount};
use crate::domain::{
    counting_query, domain_size, Concept, ConceptClass, Database, DEFAULT_ENUMERATION_BUDGET,
};
use crate::error::{check_positive, check_unit_open, Error, Result};
use crate::privacy::{compose_advanced, laplace_unchecked, PrivacyParams};
use crate::recconcave::{ceil_log2, log_star, rec_concave, QuasiConcaveProblem, StepFunction};
use crate::rng::Randomness;

/// Accuracy, confidence and privacy of a sanitizer run.
///
/// `scale` multiplies the sample-size bound that [`validate`](Self::validate) enforces;
/// 1 keeps the bound as derived.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SanitizerParams {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub scale: f64,
    pub validate: bool,
}

impl SanitizerParams {
    pub fn new(alpha: f64, beta: f64, epsilon: f64, delta: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            epsilon,
            delta,
            scale: 1.0,
            validate: true,
        };
        p.check()?;
        Ok(p)
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
        check_positive("epsilon", self.epsilon)?;
        check_unit_open("delta", self.delta)?;
        check_positive("scale", self.scale)
    }

    fn require(&self, m: usize, bound: f64) -> Result<()> {
        if m == 0 {
            return Err(Error::Precondition(
                "cannot sanitize an empty database".into(),
            ));
        }
        let need = (self.scale * bound).ceil();
        if self.validate && (m as f64) < need {
            return Err(Error::Precondition(format!(
                "database has {m} entries but needs {need}"
            )));
        }
        Ok(())
    }
}

/// Anything that answers counting queries.
pub trait CountingAnswers {
    fn bits(&self) -> u32;

    fn answer(&self, c: &Concept) -> Result<f64>;

    /// Nonzero single-point answers, ascending by point.
    fn point_masses(&self) -> Vec<(u64, f64)>;
}

impl CountingAnswers for Database {
    fn bits(&self) -> u32 {
        Database::bits(self)
    }

    fn answer(&self, c: &Concept) -> Result<f64> {
        counting_query(c, self)
    }

    fn point_masses(&self) -> Vec<(u64, f64)> {
        let m = self.len() as f64;
        self.histogram()
            .into_iter()
            .map(|(x, c)| (x, c as f64 / m))
            .collect()
    }
}

/// Point estimates from the point sanitizer; unlisted points estimate 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    bits: u32,
    k: usize,
    values: BTreeMap<u64, f64>,
    /// Outcome of each selection round.
    pub rounds: Vec<Option<u64>>,
}

impl Estimate {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn point(&self, x: u64) -> f64 {
        self.values.get(&x).copied().unwrap_or(0.0)
    }

    pub fn values(&self) -> &BTreeMap<u64, f64> {
        &self.values
    }

    /// `e(I) = Σ_{i∈I} Est(i)`, clamped to `[0, 1]`.
    pub fn subset(&self, members: &[u64]) -> Result<f64> {
        let distinct: BTreeSet<u64> = members.iter().copied().collect();
        if distinct.len() != members.len() || members.len() != self.k {
            return Err(Error::Query(format!(
                "expected {} distinct points, got {members:?}",
                self.k
            )));
        }
        Ok(members
            .iter()
            .map(|&x| self.point(x))
            .sum::<f64>()
            .clamp(0.0, 1.0))
    }
}

impl CountingAnswers for Estimate {
    fn bits(&self) -> u32 {
        self.bits
    }

    fn answer(&self, c: &Concept) -> Result<f64> {
        if c.input_bits() != self.bits {
            return Err(Error::Domain("query and estimate bit-widths differ".into()));
        }
        match c {
            Concept::Point { j, .. } => Ok(self.point(*j)),
            Concept::KPoint { members, .. } => self.subset(members),
            other => Err(Error::Query(format!(
                "point estimates cannot answer {} queries",
                other.class_kind()
            ))),
        }
    }

    fn point_masses(&self) -> Vec<(u64, f64)> {
        self.values
            .iter()
            .filter(|(_, &v)| v > 0.0)
            .map(|(&x, &v)| (x, v))
            .collect()
    }
}

/// A database with nonnegative real multiplicities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedDatabase {
    bits: u32,
    weights: BTreeMap<u64, f64>,
}

impl WeightedDatabase {
    pub fn new(bits: u32) -> Result<Self> {
        Database::empty(bits)?;
        Ok(Self {
            bits,
            weights: BTreeMap::new(),
        })
    }

    pub fn from_database(db: &Database) -> Self {
        let weights = db
            .histogram()
            .into_iter()
            .map(|(x, c)| (x, c as f64))
            .collect();
        Self {
            bits: db.bits(),
            weights,
        }
    }

    pub fn add(&mut self, x: u64, w: f64) -> Result<()> {
        if x >= domain_size(self.bits) {
            return Err(Error::Domain(format!(
                "point {x} does not fit in {} bits",
                self.bits
            )));
        }
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::Parameter(format!(
                "weights must be nonnegative, got {w}"
            )));
        }
        if w > 0.0 {
            *self.weights.entry(x).or_insert(0.0) += w;
        }
        Ok(())
    }

    pub fn weights(&self) -> &BTreeMap<u64, f64> {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    /// The same shape rescaled to total weight `total` (empty stays empty).
    pub fn rescaled(&self, total: f64) -> Self {
        let w = self.total();
        let weights = if w > 0.0 {
            self.weights
                .iter()
                .map(|(&x, &v)| (x, v * total / w))
                .collect()
        } else {
            BTreeMap::new()
        };
        Self {
            bits: self.bits,
            weights,
        }
    }
}

impl CountingAnswers for WeightedDatabase {
    fn bits(&self) -> u32 {
        self.bits
    }

    /// Weight fraction satisfying `c`; an empty database answers 0.
    fn answer(&self, c: &Concept) -> Result<f64> {
        if c.input_bits() != self.bits {
            return Err(Error::Domain("query and database bit-widths differ".into()));
        }
        let w = self.total();
        if w == 0.0 {
            return Ok(0.0);
        }
        Ok(self
            .weights
            .iter()
            .filter(|(&x, _)| c.contains(x))
            .map(|(_, &v)| v)
            .sum::<f64>()
            / w)
    }

    fn point_masses(&self) -> Vec<(u64, f64)> {
        let w = self.total();
        if w == 0.0 {
            return Vec::new();
        }
        self.weights.iter().map(|(&x, &v)| (x, v / w)).collect()
    }
}

/// Sample size for the point sanitizer, before scaling: the larger of the Laplace-accuracy
/// term `(6/(α^{1.5}ε))·ln(4/(αβ))·√ln(5/δ)` and the selection requirement of each round.
pub fn san_points_min_sample(alpha: f64, beta: f64, epsilon: f64, delta: f64) -> Result<f64> {
    SanitizerParams::new(alpha, beta, epsilon, delta)?;
    let accuracy =
        6.0 / (alpha.powf(1.5) * epsilon) * (4.0 / (alpha * beta)).ln() * (5.0 / delta).ln().sqrt();
    let (eps_r, delta_r) = round_privacy(alpha, epsilon, delta);
    let selection = choose_min_sample(alpha / 2.0, alpha * beta / 4.0, eps_r, delta_r, 1)? as f64;
    Ok(accuracy.max(selection))
}

/// Per-round `(ε̃, δ̃) = (ε/√((32/α)·ln(5/δ)), αδ/5)`.
fn round_privacy(alpha: f64, epsilon: f64, delta: f64) -> (f64, f64) {
    (
        epsilon / ((32.0 / alpha) * (5.0 / delta).ln()).sqrt(),
        alpha * delta / 5.0,
    )
}

pub fn san_points_rounds(alpha: f64) -> usize {
    (2.0 / alpha).ceil() as usize
}

/// Point sanitizer: `⌈2/α⌉` rounds, each privately picking a heavy point not yet picked and
/// releasing its noisy frequency.
pub fn san_points(
    db: &Database,
    params: &SanitizerParams,
    rng: &mut Randomness,
) -> Result<Estimate> {
    params.check()?;
    params.require(
        db.len(),
        san_points_min_sample(params.alpha, params.beta, params.epsilon, params.delta)?,
    )?;
    let alpha = params.alpha;
    let (eps_r, delta_r) = round_privacy(alpha, params.epsilon, params.delta);
    let choose =
        ChooseParams::new(alpha / 2.0, alpha * params.beta / 4.0, eps_r, delta_r)?.unvalidated();
    let m = db.len();
    let mut remaining: Vec<(u64, u64)> = db.histogram().into_iter().collect();
    let mut values = BTreeMap::new();
    let mut rounds = Vec::new();
    for _ in 0..san_points_rounds(alpha) {
        let picked = choose_from_support(&remaining, m, 1, &choose, rng)?.chosen();
        if let Some(b) = picked {
            let pos = remaining
                .iter()
                .position(|e| e.0 == b)
                .expect("choice lies in the support");
            let (_, count) = remaining.remove(pos);
            let est = count as f64 / m as f64 + laplace_unchecked(1.0 / (eps_r * m as f64), rng);
            values.insert(b, est.clamp(0.0, 1.0));
        }
        rounds.push(picked);
    }
    Ok(Estimate {
        bits: db.bits(),
        k: 1,
        values,
        rounds,
    })
}

/// k-point sanitizer: the point sanitizer at accuracy `α/k`, answering `e(I)` lazily.
pub fn san_k_points(
    db: &Database,
    k: usize,
    params: &SanitizerParams,
    rng: &mut Randomness,
) -> Result<Estimate> {
    if k == 0 {
        return Err(Error::Parameter("k must be positive".into()));
    }
    let inner = SanitizerParams {
        alpha: params.alpha / k as f64,
        ..*params
    };
    let mut est = san_points(db, &inner, rng)?;
    est.k = k;
    Ok(est)
}

/// `#_S[a, b]`.
pub fn count_range(db: &Database, a: u64, b: u64) -> usize {
    db.entries().iter().filter(|&&x| a <= x && x <= b).count()
}

/// Most entries in any window of at most `2^j` points inside `[k, ℓ]`.
pub fn interval_stat(db: &Database, k: u64, l: u64, j: u32) -> Result<usize> {
    if k > l || j > 63 {
        return Err(Error::Parameter(format!(
            "bad range [{k},{l}] or window exponent {j}"
        )));
    }
    let pts: Vec<u64> = db
        .sorted_entries()
        .into_iter()
        .filter(|&x| k <= x && x <= l)
        .collect();
    Ok(max_window(&pts, 1u64 << j))
}

/// Most of the sorted `pts` inside any window of `width` consecutive points.
fn max_window(pts: &[u64], width: u64) -> usize {
    let mut best = 0;
    let mut lo = 0;
    for hi in 0..pts.len() {
        while pts[hi] - pts[lo] >= width {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best
}

/// Window statistics `I(j)` for `j = 0..=log T` over sorted points of one range.
fn window_stats(pts: &[u64], log_t: u64) -> Vec<usize> {
    (0..=log_t).map(|j| max_window(pts, 1u64 << j)).collect()
}

fn step_quality_from_stats(stats: &[usize], m: usize, alpha: f64) -> Vec<f64> {
    let unit = alpha * m as f64 / 32.0;
    (0..stats.len())
        .map(|j| {
            let prev = if j == 0 { 0.0 } else { stats[j - 1] as f64 };
            (stats[j] as f64 - unit).min(3.0 * unit - prev)
        })
        .collect()
}

/// `Q(j) = min(I(j) − αm/32, 3αm/32 − I(j−1))` with `I(−1) = 0`, for `j = 0..=log T`.
pub fn san_step_quality(db: &Database, k: u64, l: u64, m: usize, alpha: f64) -> Result<Vec<f64>> {
    if k > l {
        return Err(Error::Parameter(format!("empty range [{k},{l}]")));
    }
    let pts: Vec<u64> = db
        .sorted_entries()
        .into_iter()
        .filter(|&x| k <= x && x <= l)
        .collect();
    let log_t = ceil_log2(l - k + 1);
    Ok(step_quality_from_stats(
        &window_stats(&pts, log_t),
        m,
        alpha,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Emission {
    pub range: (u64, u64),
    pub interval: (u64, u64),
    pub point: u64,
    pub weight: f64,
}

/// Mechanism census and emissions of one threshold-sanitizer run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SanThresholdsTrace {
    pub calls_budget: u64,
    pub calls_used: u64,
    /// Noise of every Laplace draw, in order.
    pub laplace_noise: Vec<f64>,
    pub rec_concave_runs: u32,
    pub choose_runs: u32,
    pub choose_bottoms: u32,
    pub halted_on_budget: u32,
    pub emissions: Vec<Emission>,
}

/// Shared state of one threshold-sanitizer run.
#[derive(Clone, Debug)]
pub struct SanState {
    pub output: WeightedDatabase,
    pub calls: u64,
    pub trace: SanThresholdsTrace,
}

impl SanState {
    pub fn new(bits: u32, alpha: f64) -> Result<Self> {
        let calls = san_thresholds_calls(alpha);
        Ok(Self {
            output: WeightedDatabase::new(bits)?,
            calls,
            trace: SanThresholdsTrace {
                calls_budget: calls,
                ..Default::default()
            },
        })
    }
}

/// `⌈77/α⌉`.
pub fn san_thresholds_calls(alpha: f64) -> u64 {
    (77.0 / alpha).ceil() as u64
}

fn log_star_bits(bits: u32) -> u32 {
    log_star(u64::from(bits)).max(1)
}

/// Sample size for the threshold sanitizer, before scaling: the larger of the selection bound
/// `(1024/(αε))·ln(2048/(αβεδ))` and `8^{log* d}·(60c/(αε))·log* d·log₂(12·log* d/(βεδ))`.
pub fn san_thresholds_min_sample(
    alpha: f64,
    beta: f64,
    epsilon: f64,
    delta: f64,
    bits: u32,
) -> Result<f64> {
    SanitizerParams::new(alpha, beta, epsilon, delta)?;
    let c = san_thresholds_calls(alpha) as f64;
    let ls = f64::from(log_star_bits(bits));
    let select = 1024.0 / (alpha * epsilon) * (2048.0 / (alpha * beta * epsilon * delta)).ln();
    let recursion = 8f64.powf(ls) * 60.0 * c / (alpha * epsilon)
        * ls
        * (12.0 * ls / (beta * epsilon * delta)).log2();
    Ok(select.max(recursion))
}

/// Overall guarantee of a run whose mechanisms are each `(ε, δ)`: `4c` mechanisms under
/// advanced composition with slack `cδ`.
pub fn san_thresholds_privacy(alpha: f64, epsilon: f64, delta: f64) -> Result<PrivacyParams> {
    let c = san_thresholds_calls(alpha);
    compose_advanced(4 * c, epsilon, delta, c as f64 * delta)
}

/// Threshold sanitizer over the whole domain. `params.epsilon`/`delta` are per-mechanism.
pub fn san_thresholds(
    db: &Database,
    params: &SanitizerParams,
    rng: &mut Randomness,
) -> Result<(WeightedDatabase, SanThresholdsTrace)> {
    params.check()?;
    let bound = san_thresholds_min_sample(
        params.alpha,
        params.beta,
        params.epsilon,
        params.delta,
        db.bits(),
    )?;
    params.require(db.len(), bound)?;
    let mut state = SanState::new(db.bits(), params.alpha)?;
    san_thresholds_on_range(db, (0, domain_size(db.bits()) - 1), params, &mut state, rng)?;
    Ok((state.output, state.trace))
}

/// Runs the recursion on `[k, ℓ]`, depth-first with the left part first.
pub fn san_thresholds_on_range(
    db: &Database,
    range: (u64, u64),
    params: &SanitizerParams,
    state: &mut SanState,
    rng: &mut Randomness,
) -> Result<()> {
    params.check()?;
    let m = db.len();
    if m == 0 {
        return Err(Error::Precondition(
            "cannot sanitize an empty database".into(),
        ));
    }
    if range.0 > range.1 || range.1 >= domain_size(db.bits()) {
        return Err(Error::Parameter(format!(
            "range {range:?} is not inside the domain"
        )));
    }
    let (alpha, eps) = (params.alpha, params.epsilon);
    let mf = m as f64;
    let ls = f64::from(log_star_bits(db.bits()));
    let choose = ChooseParams::new(alpha / 64.0, params.beta, eps, params.delta)?.unvalidated();
    let sorted = db.sorted_entries();

    let mut stack = vec![range];
    while let Some((k, l)) = stack.pop() {
        if state.calls == 0 {
            state.trace.halted_on_budget += 1;
            continue;
        }
        state.calls -= 1;
        state.trace.calls_used += 1;

        let pts = &sorted[sorted.partition_point(|&x| x < k)..sorted.partition_point(|&x| x <= l)];
        let noise = laplace_unchecked(1.0 / eps, rng);
        state.trace.laplace_noise.push(noise);
        let noisy_range = pts.len() as f64 + noise;
        let emit = |state: &mut SanState, interval: (u64, u64), weight: f64| -> Result<()> {
            let weight = weight.max(0.0);
            state.output.add(interval.1, weight)?;
            state.trace.emissions.push(Emission {
                range: (k, l),
                interval,
                point: interval.1,
                weight,
            });
            Ok(())
        };
        if noisy_range < alpha * mf / 8.0 {
            emit(state, (k, l), noisy_range)?;
            continue;
        }

        let log_t = ceil_log2(l - k + 1);
        let quality = step_quality_from_stats(&window_stats(pts, log_t), m, alpha);
        let problem = QuasiConcaveProblem {
            quality: StepFunction::from_values(&quality)?,
            promise: alpha * mf / 32.0,
            alpha: 0.25,
            budget: Some(log_star_bits(db.bits())),
        };
        let (z, _) = rec_concave(&problem, eps / (3.0 * ls), params.delta / (3.0 * ls), rng)?;
        state.trace.rec_concave_runs += 1;

        state.trace.choose_runs += 1;
        let picked = if z == 0 {
            let mut support: Vec<(u64, u64)> = Vec::new();
            for &x in pts {
                match support.last_mut() {
                    Some(last) if last.0 == x => last.1 += 1,
                    _ => support.push((x, 1)),
                }
            }
            choose_from_support(&support, m, 1, &choose, rng)?
                .chosen()
                .map(|b| (b, b))
        } else {
            let big_z = 1u64 << z;
            let blocks = StaggeredBlockCount {
                lo: k,
                hi: l,
                width: 2 * big_z,
                shift: big_z,
            };
            match choose_from_support(&blocks.support_of_points(pts), m, 2, &choose, rng)? {
                ChoiceOutcome::Chosen(iv) => Some(iv),
                ChoiceOutcome::Bottom => None,
            }
        };
        let Some((a, b)) = picked else {
            // nothing frequent enough: close the whole range like the small-mass case
            state.trace.choose_bottoms += 1;
            emit(state, (k, l), noisy_range)?;
            continue;
        };

        let inside = pts.partition_point(|&x| x <= b) - pts.partition_point(|&x| x < a);
        let noise = laplace_unchecked(1.0 / eps, rng);
        state.trace.laplace_noise.push(noise);
        emit(state, (a, b), inside as f64 + noise)?;
        if b < l {
            stack.push((b + 1, l));
        }
        if a > k {
            stack.push((k, a - 1));
        }
    }
    Ok(())
}

/// `max_t |Pr_S[x < t] − answers(x < t)|` using the point masses of both sides.
pub fn max_threshold_error(db: &Database, answers: &impl CountingAnswers) -> f64 {
    let exact = db.point_masses();
    let approx = answers.point_masses();
    cdf_distance(&exact, &approx)
}

fn cdf_distance(a: &[(u64, f64)], b: &[(u64, f64)]) -> f64 {
    let mut merged: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for &(x, w) in a {
        merged.entry(x).or_default().0 += w;
    }
    for &(x, w) in b {
        merged.entry(x).or_default().1 += w;
    }
    let (mut fa, mut fb, mut worst) = (0.0f64, 0.0f64, 0.0f64);
    for (wa, wb) in merged.values() {
        fa += wa;
        fb += wb;
        worst = worst.max((fa - fb).abs());
    }
    worst
}

/// `max_x |Pr_S[x] − answers(point x)|`; points absent from both sides contribute 0.
pub fn max_point_error(db: &Database, answers: &impl CountingAnswers) -> f64 {
    let mut merged: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for (x, w) in db.point_masses() {
        merged.entry(x).or_default().0 = w;
    }
    for (x, w) in answers.point_masses() {
        merged.entry(x).or_default().1 = w;
    }
    merged
        .values()
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Largest counting-query error of `answers` against `db` over every member of `class`.
///
/// Points and thresholds use direct scans; other classes are enumerated within `budget`.
pub fn max_class_error(
    class: &ConceptClass,
    db: &Database,
    answers: &impl CountingAnswers,
    budget: u64,
) -> Result<f64> {
    match class {
        ConceptClass::Point { .. } => Ok(max_point_error(db, answers)),
        ConceptClass::Threshold { .. } => Ok(max_threshold_error(db, answers)),
        _ => {
            let mut worst = 0.0f64;
            for c in class.enumerate(budget)? {
                worst = worst.max((counting_query(&c, db)? - answers.answer(&c)?).abs());
            }
            Ok(worst)
        }
    }
}

/// Largest-remainder rounding of nonnegative `quotas` to integers summing to `total`.
fn largest_remainder(quotas: &[f64], total: u64) -> Vec<u64> {
    let mut out: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&i, &j| {
        (quotas[j] - quotas[j].floor())
            .total_cmp(&(quotas[i] - quotas[i].floor()))
            .then(i.cmp(&j))
    });
    for &i in order.iter().take(total.saturating_sub(assigned) as usize) {
        out[i] += 1;
    }
    out
}

fn fit_points(masses: &[(u64, f64)], bits: u32, n: usize) -> Result<Database> {
    let clamped: Vec<(u64, f64)> = masses
        .iter()
        .map(|&(x, v)| (x, v.clamp(0.0, 1.0)))
        .collect();
    let sum: f64 = clamped.iter().map(|e| e.1).sum();
    let nf = n as f64;
    let (quotas, placed): (Vec<f64>, u64) = if sum > 1.0 {
        (clamped.iter().map(|e| e.1 / sum * nf).collect(), n as u64)
    } else {
        (
            clamped.iter().map(|e| e.1 * nf).collect(),
            (sum * nf).round() as u64,
        )
    };
    let counts = largest_remainder(&quotas, placed);
    let mut entries = Vec::with_capacity(n);
    for (&(x, _), &c) in clamped.iter().zip(&counts) {
        entries.extend(std::iter::repeat(x).take(c as usize));
    }
    // spread what is left over points the estimate puts at zero, one copy at a time
    let taken: BTreeSet<u64> = clamped.iter().map(|e| e.0).collect();
    let mut leftover = n - entries.len();
    let free = domain_size(bits) - taken.len() as u64;
    if leftover > 0 && free == 0 {
        return Err(Error::Resource(
            "no zero-estimate point left to absorb leftover mass".into(),
        ));
    }
    let zeros: Vec<u64> = (0..domain_size(bits))
        .filter(|x| !taken.contains(x))
        .take(leftover.min(free as usize))
        .collect();
    let mut i = 0;
    while leftover > 0 {
        entries.push(zeros[i % zeros.len()]);
        i += 1;
        leftover -= 1;
    }
    Database::new(bits, entries)
}

/// `point_i = min{x : F(x+1) ≥ (i − ½)/n}` for the normalised cumulative mass `F`.
fn fit_thresholds(masses: &[(u64, f64)], bits: u32, n: usize) -> Result<Database> {
    let total: f64 = masses.iter().map(|e| e.1.max(0.0)).sum();
    if total <= 0.0 {
        return Err(Error::Resource("no mass to place".into()));
    }
    let mut entries = Vec::with_capacity(n);
    let mut cum = 0.0;
    let mut it = masses.iter().peekable();
    for i in 1..=n {
        let target = (i as f64 - 0.5) / n as f64;
        loop {
            let &&(x, w) = it
                .peek()
                .ok_or_else(|| Error::Resource("cumulative mass ran out".into()))?;
            if (cum + w.max(0.0)) / total >= target {
                entries.push(x);
                break;
            }
            cum += w.max(0.0);
            it.next();
        }
    }
    Database::new(bits, entries)
}

/// Greedy search: repeatedly add the domain point that most reduces the worst query error.
fn fit_greedy(class: &ConceptClass, answers: &impl CountingAnswers, n: usize) -> Result<Database> {
    let bits = class.input_bits();
    let concepts = class.enumerate(DEFAULT_ENUMERATION_BUDGET)?;
    let targets: Vec<f64> = concepts
        .iter()
        .map(|c| answers.answer(c))
        .collect::<Result<_>>()?;
    let members: Vec<Vec<bool>> = (0..domain_size(bits))
        .map(|x| concepts.iter().map(|c| c.contains(x)).collect())
        .collect();
    let mut counts = vec![0u64; concepts.len()];
    let mut entries = Vec::with_capacity(n);
    for step in 1..=n {
        let sf = step as f64;
        let mut best = (f64::INFINITY, 0u64);
        for (x, row) in members.iter().enumerate() {
            let worst = counts
                .iter()
                .zip(row)
                .zip(&targets)
                .map(|((&c, &hit), &t)| ((c + u64::from(hit)) as f64 / sf - t).abs())
                .fold(0.0, f64::max);
            if worst < best.0 {
                best = (worst, x as u64);
            }
        }
        for (c, &hit) in counts.iter_mut().zip(&members[best.1 as usize]) {
            *c += u64::from(hit);
        }
        entries.push(best.1);
    }
    Database::new(bits, entries)
}

/// A database of `n` entries whose counting queries over `class` are within `alpha` of
/// `answers`.
///
/// Points use proportional rounding, thresholds use quantile matching, and other classes
/// on at most 8 bits use a greedy search after trying proportional rounding.
pub fn fit_proper_db(
    answers: &impl CountingAnswers,
    class: &ConceptClass,
    n: usize,
    alpha: f64,
) -> Result<Database> {
    if n == 0 {
        return Err(Error::Parameter("target size must be positive".into()));
    }
    let bits = class.input_bits();
    if answers.bits() != bits {
        return Err(Error::Domain("answers and class bit-widths differ".into()));
    }
    let masses = answers.point_masses();
    let candidate = match class {
        ConceptClass::Point { .. } => fit_points(&masses, bits, n)?,
        ConceptClass::Threshold { .. } => fit_thresholds(&masses, bits, n)?,
        _ => {
            let first = fit_points(&masses, bits, n)?;
            if max_answer_gap(class, &first, answers)? <= alpha {
                return Ok(first);
            }
            if bits > 8 {
                return Err(Error::Resource(format!(
                    "no fit within {alpha} and the domain is too large to search"
                )));
            }
            fit_greedy(class, answers, n)?
        }
    };
    let gap = max_answer_gap(class, &candidate, answers)?;
    if gap <= alpha {
        Ok(candidate)
    } else {
        Err(Error::Resource(format!(
            "best database found is {gap:.4} away, above {alpha}"
        )))
    }
}

fn max_answer_gap(
    class: &ConceptClass,
    db: &Database,
    answers: &impl CountingAnswers,
) -> Result<f64> {
    match class {
        ConceptClass::Threshold { .. } => {
            // the answers' own cumulative mass, unnormalised for estimates
            Ok(cdf_distance(&db.point_masses(), &answers.point_masses()))
        }
        _ => max_class_error(class, db, answers, DEFAULT_ENUMERATION_BUDGET),
    }
}
