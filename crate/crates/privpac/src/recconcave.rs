//! Recursive private optimizer for quasi-concave promise problems.
//!
//! Qualities are piecewise-constant over a range `[0, T]` and are stored as runs, so a range
//! of size `2^62` costs only as much as the number of breakpoints. Each recursion level shrinks
//! the range to `[0, ⌈log₂ T⌉]`, which makes every level below the top one tiny.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::privacy::{adist_release, exponential_mechanism_index};
use crate::rng::Randomness;

/// Ranges at or below this size are solved directly.
pub const BASE_CASE_RANGE: u64 = 32;

/// A real-valued function on `[0, upper]`, constant on runs.
///
/// Run `r` covers `[starts[r], starts[r+1] − 1]`, the last run ends at `upper`. Adjacent runs
/// always hold different values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    upper: u64,
    starts: Vec<u64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(upper: u64, starts: Vec<u64>, values: Vec<f64>) -> Result<Self> {
        if starts.is_empty() || starts.len() != values.len() || starts[0] != 0 {
            return Err(Error::Shape(
                "runs must start at 0 and pair each start with a value".into(),
            ));
        }
        if starts.windows(2).any(|w| w[0] >= w[1]) || *starts.last().unwrap() > upper {
            return Err(Error::Shape(
                "run starts must increase strictly and stay in range".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("qualities must be finite".into()));
        }
        let mut f = Self {
            upper,
            starts: Vec::with_capacity(values.len()),
            values: Vec::with_capacity(values.len()),
        };
        for (s, v) in starts.into_iter().zip(values) {
            f.push_run(s, v);
        }
        Ok(f)
    }

    /// One value per point of `[0, values.len() − 1]`.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Shape("a quality needs at least one point".into()));
        }
        Self::new(
            values.len() as u64 - 1,
            (0..values.len() as u64).collect(),
            values.to_vec(),
        )
    }

    pub fn constant(upper: u64, value: f64) -> Result<Self> {
        Self::new(upper, vec![0], vec![value])
    }

    fn push_run(&mut self, start: u64, value: f64) {
        if self.values.last() != Some(&value) {
            self.starts.push(start);
            self.values.push(value);
        }
    }

    pub fn upper(&self) -> u64 {
        self.upper
    }

    pub fn run_count(&self) -> usize {
        self.values.len()
    }

    /// Runs as `(first, last, value)`.
    pub fn runs(&self) -> impl Iterator<Item = (u64, u64, f64)> + '_ {
        (0..self.values.len()).map(move |r| {
            let end = self.starts.get(r + 1).map_or(self.upper, |s| s - 1);
            (self.starts[r], end, self.values[r])
        })
    }

    pub fn eval(&self, i: u64) -> f64 {
        let r = self.starts.partition_point(|&s| s <= i) - 1;
        self.values[r]
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Every point value; only sensible for small ranges.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.upper as usize + 1);
        for (a, b, v) in self.runs() {
            out.extend(std::iter::repeat(v).take((b - a + 1) as usize));
        }
        out
    }

    /// Quasi-concavity over the whole range (run values suffice, since runs are constant).
    pub fn is_quasi_concave(&self) -> bool {
        quasi_concave(&self.values)
    }
}

/// Whether `Q(ℓ) ≥ min(Q(i), Q(j))` for all `i ≤ ℓ ≤ j`.
pub fn quasi_concave(values: &[f64]) -> bool {
    let n = values.len();
    let mut suffix = vec![f64::NEG_INFINITY; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1].max(values[i]);
    }
    let mut prefix = f64::NEG_INFINITY;
    for (l, &v) in values.iter().enumerate() {
        if v < prefix.min(suffix[l + 1]) {
            return false;
        }
        prefix = prefix.max(v);
    }
    true
}

/// `⌈log₂ x⌉`, with every `x ≤ 1` mapped to 0.
pub fn ceil_log2(x: u64) -> u64 {
    if x <= 1 {
        0
    } else {
        64 - u64::from((x - 1).leading_zeros())
    }
}

/// `N`-fold application of [`ceil_log2`].
pub fn iter_log(n: u32, t: u64) -> u64 {
    (0..n).fold(t, |x, _| ceil_log2(x))
}

/// Number of [`ceil_log2`] applications before the value drops to at most 1.
pub fn log_star(t: u64) -> u32 {
    let (mut x, mut n) = (t, 0);
    while x > 1 {
        x = ceil_log2(x);
        n += 1;
    }
    n
}

/// `log*(2^e)`, for exponents too large to materialise.
pub fn log_star_of_power_of_two(e: u64) -> u32 {
    1 + log_star(e)
}

/// Recursive calls made on the range `[0, 2^e]` when ranges at or below `cutoff` are solved
/// directly and the budget is unbounded. Only log sizes are tracked.
pub fn simulated_recursive_calls(e: u64, cutoff: u64) -> u32 {
    // the top range 2^e is above any cutoff that fits in a u64 when e ≥ 64
    if e < 64 && (1u64 << e) <= cutoff {
        return 0;
    }
    let mut t = e;
    let mut calls = 1;
    while t > cutoff {
        t = ceil_log2(t);
        calls += 1;
    }
    calls
}

/// The promise under which the optimizer succeeds with probability `1 − β`:
/// `8^N·(36N/(αε))·(log₂(6N/(βδ)) + iter_log(N, T))`.
pub fn min_promise(alpha: f64, beta: f64, epsilon: f64, delta: f64, n: u32, t: u64) -> Result<f64> {
    check_positive("alpha", alpha)?;
    check_positive("beta", beta)?;
    check_positive("epsilon", epsilon)?;
    check_positive("delta", delta)?;
    if n == 0 || n > log_star(t) {
        return Err(Error::Parameter(format!(
            "recursion budget must be in 1..={}, got {n}",
            log_star(t)
        )));
    }
    let nf = f64::from(n);
    Ok(8f64.powi(n as i32)
        * (36.0 * nf / (alpha * epsilon))
        * ((6.0 * nf / (beta * delta)).log2() + iter_log(n, t) as f64))
}

/// Window-minimum profile of a quality extended to `[0, T′]`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalProfile {
    /// The smallest power of two at least `T` (at least 1).
    pub t_prime: u64,
    pub log_t_prime: u64,
    /// `L(j)` for `j = 0..=log T′ + 1`.
    pub l: Vec<f64>,
}

/// `Q` extended past `T` to `[0, T′]` by `min(0, Q(T))`.
pub fn extend_to_power_of_two(q: &StepFunction) -> StepFunction {
    let t_prime = q.upper.max(1).next_power_of_two();
    let mut ext = q.clone();
    ext.upper = t_prime;
    if t_prime > q.upper {
        let tail = q.values.last().unwrap().min(0.0);
        ext.push_run(q.upper + 1, tail);
    }
    ext
}

/// `L(j)`: the best minimum of `Q` over a window of `2^j` consecutive points of `[0, T′]`.
///
/// A window's minimum is the value of one of its runs, and that run's maximal surrounding span of
/// values at least as large contains the window. So `L(j)` is the largest run value whose span
/// holds `2^j` points; spans come from a monotonic stack.
pub fn interval_profile(q: &StepFunction) -> IntervalProfile {
    let ext = extend_to_power_of_two(q);
    let t_prime = ext.upper;
    let log_t_prime = ceil_log2(t_prime);
    let runs: Vec<(u64, u64, f64)> = ext.runs().collect();
    let n = runs.len();

    let mut left = vec![0usize; n];
    let mut stack: Vec<usize> = Vec::new();
    for r in 0..n {
        while stack.last().is_some_and(|&s| runs[s].2 >= runs[r].2) {
            stack.pop();
        }
        left[r] = stack.last().map_or(0, |&s| s + 1);
        stack.push(r);
    }
    let mut right = vec![n - 1; n];
    stack.clear();
    for r in (0..n).rev() {
        while stack.last().is_some_and(|&s| runs[s].2 >= runs[r].2) {
            stack.pop();
        }
        right[r] = stack.last().map_or(n - 1, |&s| s - 1);
        stack.push(r);
    }

    let mut bucket = vec![f64::NEG_INFINITY; log_t_prime as usize + 1];
    for r in 0..n {
        let width = runs[right[r]].1 - runs[left[r]].0 + 1;
        let b = (63 - u64::from(width.leading_zeros())).min(log_t_prime) as usize;
        bucket[b] = bucket[b].max(runs[r].2);
    }
    for j in (0..log_t_prime as usize).rev() {
        bucket[j] = bucket[j].max(bucket[j + 1]);
    }
    let last = bucket[log_t_prime as usize].min(0.0);
    bucket.push(last);
    IntervalProfile {
        t_prime,
        log_t_prime,
        l: bucket,
    }
}

pub fn interval_quality(q: &StepFunction, j: u64) -> Result<f64> {
    let p = interval_profile(q);
    p.l.get(j as usize).copied().ok_or_else(|| {
        Error::Parameter(format!("window exponent {j} exceeds {}", p.log_t_prime + 1))
    })
}

/// `q(j) = min(L(j) − (1−α)r, r − L(j+1))` over `[0, log T′]`.
pub fn step_quality(q: &StepFunction, r: f64, alpha: f64) -> StepFunction {
    let p = interval_profile(q);
    let vals: Vec<f64> = (0..=p.log_t_prime as usize)
        .map(|j| (p.l[j] - (1.0 - alpha) * r).min(r - p.l[j + 1]))
        .collect();
    StepFunction::from_values(&vals).expect("profile is nonempty and finite")
}

pub fn step_quality_at(q: &StepFunction, j: u64, r: f64, alpha: f64) -> Result<f64> {
    let s = step_quality(q, r, alpha);
    if j > s.upper {
        return Err(Error::Parameter(format!(
            "step index {j} exceeds {}",
            s.upper
        )));
    }
    Ok(s.eval(j))
}

/// A quality over `[0, T]` with its promise, approximation and recursion budget.
#[derive(Clone, Debug, PartialEq)]
pub struct QuasiConcaveProblem {
    pub quality: StepFunction,
    pub promise: f64,
    pub alpha: f64,
    /// Remaining levels including the current one; `None` is unbounded.
    pub budget: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub range_upper: u64,
    pub base_case: bool,
    /// Exponent returned by the child level.
    pub k: Option<u64>,
    pub a_interval: Option<(u64, u64)>,
    pub b_interval: Option<(u64, u64)>,
    /// Both interval selections produced nothing usable inside `[0, T]`.
    pub full_range_fallback: bool,
    pub chosen: u64,
    /// Private mechanisms run at this level.
    pub invocations: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RecTrace {
    /// Outermost level first.
    pub levels: Vec<LevelTrace>,
}

impl RecTrace {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn invocations(&self) -> u32 {
        self.levels.iter().map(|l| l.invocations).sum()
    }
}

/// Exponential mechanism over the points of `segments` (disjoint, inside the range of `q`).
fn sample_segments(
    q: &StepFunction,
    segments: &[(u64, u64)],
    epsilon: f64,
    rng: &mut Randomness,
) -> Result<u64> {
    let mut pieces: Vec<(u64, u64, f64)> = Vec::new();
    for &(lo, hi) in segments {
        for (a, b, v) in q.runs() {
            let (a, b) = (a.max(lo), b.min(hi));
            if a <= b {
                pieces.push((a, b, v));
            }
        }
    }
    // a piece of length len is len equally weighted points: shift its log-weight by ln(len)·2/ε
    let scores: Vec<f64> = pieces
        .iter()
        .map(|&(a, b, v)| v + 2.0 * ((b - a + 1) as f64).ln() / epsilon)
        .collect();
    let i = exponential_mechanism_index(&scores, epsilon, rng)?;
    let (a, b, _) = pieces[i];
    Ok(a + rng.below(b - a + 1))
}

/// Block family `[offset + i·width, offset + (i+1)·width − 1]` over `[0, end]`.
struct Blocks {
    offset: u128,
    width: u128,
    count: u128,
}

impl Blocks {
    fn new(offset: u128, width: u128, end: u64) -> Self {
        let span = u128::from(end) + 1 - offset;
        Self {
            offset,
            width,
            count: span.div_ceil(width),
        }
    }

    fn index(&self, x: u64) -> u128 {
        (u128::from(x) - self.offset) / self.width
    }

    fn interval(&self, i: u128, end: u64) -> (u64, u64) {
        let a = self.offset + i * self.width;
        let b = (a + self.width - 1).min(u128::from(end));
        (a as u64, b as u64)
    }

    /// Best block by `max Q` (smallest index on ties) with the best and runner-up block scores.
    fn top_two(&self, runs: &[(u64, u64, f64)]) -> (u128, f64, f64) {
        let touched: Vec<(u128, u128, f64)> = runs
            .iter()
            .filter(|&&(_, b, _)| u128::from(b) >= self.offset)
            .map(|&(a, b, v)| (self.index(a.max(self.offset as u64)), self.index(b), v))
            .collect();
        let (mut best, mut best_v) = (0u128, f64::NEG_INFINITY);
        for &(lo, _, v) in &touched {
            if v > best_v || (v == best_v && lo < best) {
                best = lo;
                best_v = v;
            }
        }
        if self.count == 1 {
            return (best, best_v, 0.0);
        }
        let second = touched
            .iter()
            .filter(|&&(lo, hi, _)| lo != best || hi != best)
            .map(|t| t.2)
            .fold(f64::NEG_INFINITY, f64::max);
        (best, best_v, second)
    }
}

fn clip(iv: (u64, u64), upper: u64) -> Option<(u64, u64)> {
    (iv.0 <= upper).then(|| (iv.0, iv.1.min(upper)))
}

/// Solves the promise problem privately, returning an index of `[0, T]` and a per-level trace.
///
/// `epsilon`/`delta` are per-mechanism values. At most three mechanisms run per level, so `N`
/// levels cost `(3Nε, 3Nδ)` in total.
pub fn rec_concave(
    problem: &QuasiConcaveProblem,
    epsilon: f64,
    delta: f64,
    rng: &mut Randomness,
) -> Result<(u64, RecTrace)> {
    check_positive("epsilon", epsilon)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!(
            "delta must be in (0,1), got {delta}"
        )));
    }
    if !(problem.alpha > 0.0 && problem.alpha <= 0.5) {
        return Err(Error::Parameter(format!(
            "alpha must be in (0, 1/2], got {}",
            problem.alpha
        )));
    }
    if !(problem.promise.is_finite() && problem.promise > 0.0) {
        return Err(Error::Parameter(format!(
            "promise must be positive, got {}",
            problem.promise
        )));
    }
    if problem.budget == Some(0) {
        return Err(Error::Parameter(
            "recursion budget must be at least 1".into(),
        ));
    }
    solve(problem, epsilon, delta, rng)
}

fn solve(
    p: &QuasiConcaveProblem,
    epsilon: f64,
    delta: f64,
    rng: &mut Randomness,
) -> Result<(u64, RecTrace)> {
    let q = &p.quality;
    let t = q.upper;
    if t <= BASE_CASE_RANGE || p.budget == Some(1) {
        let chosen = sample_segments(q, &[(0, t)], epsilon, rng)?;
        let level = LevelTrace {
            range_upper: t,
            base_case: true,
            k: None,
            a_interval: None,
            b_interval: None,
            full_range_fallback: false,
            chosen,
            invocations: 1,
        };
        return Ok((
            chosen,
            RecTrace {
                levels: vec![level],
            },
        ));
    }

    let child = QuasiConcaveProblem {
        quality: step_quality(q, p.promise, p.alpha),
        promise: p.alpha / 2.0 * p.promise,
        alpha: 0.25,
        budget: p.budget.map(|n| n - 1),
    };
    let (k, mut trace) = solve(&child, epsilon, delta, rng)?;

    let ext = extend_to_power_of_two(q);
    let t_prime = ext.upper;
    let runs: Vec<(u64, u64, f64)> = ext.runs().collect();
    let big_k = 1u128 << k;
    let a_blocks = Blocks::new(0, 8 * big_k, t_prime);
    let b_blocks = if 4 * big_k <= u128::from(t_prime) {
        Blocks::new(4 * big_k, 8 * big_k, t_prime)
    } else {
        // no shifted block fits: a single block at the last point
        Blocks::new(u128::from(t_prime), 1, t_prime)
    };

    let mut pick = |blocks: &Blocks| {
        let (best, s1, s2) = blocks.top_two(&runs);
        adist_release(s1 - s2, epsilon, delta, rng).then(|| blocks.interval(best, t_prime))
    };
    let a = pick(&a_blocks);
    let b = pick(&b_blocks);

    let mut segments: Vec<(u64, u64)> = [a, b]
        .into_iter()
        .flatten()
        .filter_map(|iv| clip(iv, t))
        .collect();
    segments.sort_unstable();
    if segments.len() == 2 && segments[1].0 <= segments[0].1 + 1 {
        segments = vec![(segments[0].0, segments[0].1.max(segments[1].1))];
    }
    let fallback = segments.is_empty();
    if fallback {
        segments.push((0, t));
    }
    let chosen = sample_segments(q, &segments, epsilon, rng)?;
    trace.levels.insert(
        0,
        LevelTrace {
            range_upper: t,
            base_case: false,
            k: Some(k),
            a_interval: a,
            b_interval: b,
            full_range_fallback: fallback,
            chosen,
            invocations: 3,
        },
    );
    Ok((chosen, trace))
}
