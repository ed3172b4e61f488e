//! Laplace noise, the exponential mechanism, the stability-based selector and composition.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::rng::Randomness;

/// An `(ε, δ)` privacy guarantee; `δ = 0` is pure privacy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        check_positive("epsilon", epsilon)?;
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::Parameter(format!(
                "delta must lie in [0,1), got {delta}"
            )));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }
}

/// One draw from the Laplace distribution with density `exp(-|x|/b) / 2b`.
///
/// Uses inverse-CDF sampling from a single uniform draw.
pub fn laplace(scale: f64, rng: &mut Randomness) -> Result<f64> {
    check_positive("laplace scale", scale)?;
    Ok(laplace_unchecked(scale, rng))
}

pub(crate) fn laplace_unchecked(scale: f64, rng: &mut Randomness) -> f64 {
    let u = rng.uniform_open() - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Samples an index with probability proportional to `weight(i)`, given the total.
fn sample_proportional(
    weights: impl Iterator<Item = f64>,
    total: f64,
    rng: &mut Randomness,
) -> usize {
    let target = rng.uniform_open() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last_positive = i;
        }
        acc += w;
        if target < acc {
            return i;
        }
    }
    // floating-point slack at the top end
    last_positive
}

/// Exponential mechanism over scores: index `i` with probability `∝ exp(ε·score_i / 2)`.
///
/// Scores may be negative; weights are computed after subtracting the maximum score.
pub fn exponential_mechanism_index(
    scores: &[f64],
    epsilon: f64,
    rng: &mut Randomness,
) -> Result<usize> {
    check_positive("epsilon", epsilon)?;
    if scores.is_empty() {
        return Err(Error::Precondition(
            "exponential mechanism over an empty solution set".into(),
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Parameter("qualities must be finite".into()));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores
        .iter()
        .map(|s| (epsilon * (s - max) / 2.0).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(sample_proportional(weights.into_iter(), total, rng))
}

/// Exponential mechanism over an ordered solution set with quality `q`.
pub fn exponential_mechanism<'a, T>(
    solutions: &'a [T],
    quality: impl Fn(&T) -> f64,
    epsilon: f64,
    rng: &mut Randomness,
) -> Result<&'a T> {
    let scores: Vec<f64> = solutions.iter().map(&quality).collect();
    Ok(&solutions[exponential_mechanism_index(&scores, epsilon, rng)?])
}

/// `|H|·exp(-ε·Δ·m/2)` clamped to `[0, 1]`, with `Δ` the fractional quality gap.
pub fn exp_mechanism_failure_bound(h: usize, epsilon: f64, gap: f64, m: usize) -> f64 {
    (h as f64 * (-epsilon * gap * m as f64 / 2.0).exp()).clamp(0.0, 1.0)
}

fn check_adist(epsilon: f64, delta: f64) -> Result<()> {
    check_positive("epsilon", epsilon)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!(
            "the stability selector needs delta in (0,1), got {delta}"
        )));
    }
    Ok(())
}

/// Releases `top` when the noisy gap to the runner-up clears `(1/ε)·ln(1/δ)`.
pub(crate) fn adist_release(gap: f64, epsilon: f64, delta: f64, rng: &mut Randomness) -> bool {
    let noisy = gap + laplace_unchecked(1.0 / epsilon, rng);
    noisy >= (1.0 / delta).ln() / epsilon
}

/// The two highest scores as `(index of best, best score, runner-up score)`.
///
/// Ties go to the smallest index. A single solution has runner-up score 0.
pub fn top_two(scores: &[f64]) -> Option<(usize, f64, f64)> {
    let (mut best, mut best_score) = (0usize, *scores.first()?);
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    let second = scores
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, &s)| s)
        .fold(None, |acc: Option<f64>, s| {
            Some(acc.map_or(s, |a| a.max(s)))
        })
        .unwrap_or(0.0);
    Some((best, best_score, second))
}

/// Stability-based selection over scores: the index of the best score, or `None` (⊥).
pub fn a_dist_index(
    scores: &[f64],
    epsilon: f64,
    delta: f64,
    rng: &mut Randomness,
) -> Result<Option<usize>> {
    check_adist(epsilon, delta)?;
    let (best, s1, s2) = top_two(scores).ok_or_else(|| {
        Error::Precondition("stability selector over an empty solution set".into())
    })?;
    Ok(adist_release(s1 - s2, epsilon, delta, rng).then_some(best))
}

/// Stability-based selection over an ordered solution set with quality `q`.
pub fn a_dist<'a, T>(
    solutions: &'a [T],
    quality: impl Fn(&T) -> f64,
    epsilon: f64,
    delta: f64,
    rng: &mut Randomness,
) -> Result<Option<&'a T>> {
    let scores: Vec<f64> = solutions.iter().map(&quality).collect();
    Ok(a_dist_index(&scores, epsilon, delta, rng)?.map(|i| &solutions[i]))
}

/// Basic composition: `(Σε_i, Σδ_i)`.
pub fn compose_basic(parts: &[PrivacyParams]) -> Result<PrivacyParams> {
    if parts.is_empty() {
        return Err(Error::Precondition("nothing to compose".into()));
    }
    Ok(PrivacyParams {
        epsilon: parts.iter().map(|p| p.epsilon).sum(),
        delta: parts.iter().map(|p| p.delta).sum(),
    })
}

/// Advanced composition of `k` `(ε, δ)` mechanisms: `(√(2k ln(1/δ'))·ε + 2kε², kδ + δ')`.
pub fn compose_advanced(
    k: u64,
    epsilon: f64,
    delta: f64,
    delta_prime: f64,
) -> Result<PrivacyParams> {
    if k == 0 {
        return Err(Error::Parameter("k must be positive".into()));
    }
    check_positive("epsilon", epsilon)?;
    if !(delta_prime > 0.0 && delta_prime <= 1.0) {
        return Err(Error::Parameter(format!(
            "delta' must lie in (0,1], got {delta_prime}"
        )));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Parameter(format!(
            "delta must lie in [0,1], got {delta}"
        )));
    }
    let k = k as f64;
    Ok(PrivacyParams {
        epsilon: (2.0 * k * (1.0 / delta_prime).ln()).sqrt() * epsilon
            + 2.0 * k * epsilon * epsilon,
        delta: k * delta + delta_prime,
    })
}

/// Largest per-mechanism ε whose `k`-fold composition stays within `total`.
///
/// Takes the better of basic composition (`total/k`) and the inverse of
/// [`compose_advanced`] at slack `delta_prime`.
pub fn per_mechanism_epsilon(total: f64, k: u64, delta_prime: f64) -> Result<f64> {
    check_positive("total epsilon", total)?;
    if k == 0 {
        return Err(Error::Parameter("k must be positive".into()));
    }
    let kf = k as f64;
    let basic = total / kf;
    if !(delta_prime > 0.0 && delta_prime < 1.0) {
        return Ok(basic);
    }
    // 2k·x² + b·x − total = 0 with b = √(2k ln(1/δ'))
    let b = (2.0 * kf * (1.0 / delta_prime).ln()).sqrt();
    let advanced = (-b + (b * b + 8.0 * kf * total).sqrt()) / (4.0 * kf);
    Ok(basic.max(advanced))
}
