//! Empirical differential-privacy auditing.
//!
//! A mechanism adapter runs the mechanism on one side of a fixed neighbor pair and maps its
//! output into a finite event id. Event probabilities on both sides get Clopper–Pearson
//! intervals, and a violation is reported only when some event's lower bound on one side
//! exceeds `e^ε` times its upper bound on the other side plus `δ`. A violation is therefore a
//! high-confidence counterexample; passing proves nothing.

use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use statrs::function::beta::inv_beta_reg;

use crate::choosing::{choose, ChooseParams, PointHistogram};
use crate::domain::{ConceptClass, Database, LabeledSample};
use crate::error::{Error, Result};
use crate::learners::{learn_label_private, learn_point, LearnerParams, PointFallback};
use crate::parallel::map_trials;
use crate::privacy::{a_dist_index, laplace_unchecked, PrivacyParams};
use crate::rng::Randomness;
use crate::sanitizers::{san_points, san_points_min_sample, SanitizerParams};

pub const MIN_AUDIT_TRIALS: u64 = 10_000;
/// Family-wise confidence of all bounds in one report is at least `1 − AUDIT_RISK`.
pub const AUDIT_RISK: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Two-sided Clopper–Pearson interval for `k` successes in `n` trials at level `1 − risk`.
pub fn clopper_pearson(k: u64, n: u64, risk: f64) -> (f64, f64) {
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 {
        0.0
    } else {
        inv_beta_reg(kf, nf - kf + 1.0, risk / 2.0)
    };
    let hi = if k == n {
        1.0
    } else {
        inv_beta_reg(kf + 1.0, nf - kf, 1.0 - risk / 2.0)
    };
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventEstimate {
    pub event: u64,
    pub left: u64,
    pub right: u64,
    pub left_bounds: (f64, f64),
    pub right_bounds: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpAuditReport {
    pub mechanism: String,
    pub pair: String,
    pub epsilon: f64,
    pub delta: f64,
    pub trials: u64,
    pub events: Vec<EventEstimate>,
    /// Largest `ln((lower − δ)/upper)` over events and orientations, floored at 0.
    pub epsilon_hat: f64,
    pub worst_event: Option<u64>,
    pub violation: bool,
}

/// Runs `trials` executions per side and tests every event in both orientations.
pub fn audit_dp<F>(
    mechanism: &str,
    pair: &str,
    run: F,
    epsilon: f64,
    delta: f64,
    trials: u64,
    rng: &mut Randomness,
) -> Result<DpAuditReport>
where
    F: Fn(Side, &mut Randomness) -> u64 + Sync + Send,
{
    if trials < MIN_AUDIT_TRIALS {
        return Err(Error::Precondition(format!(
            "an audit needs at least {MIN_AUDIT_TRIALS} trials per side, got {trials}"
        )));
    }
    let master = Randomness::from_seed(rng.next_u64());
    let tally = |side: Side, stream: u64| {
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for e in map_trials(trials, &master.split(stream), |_, r| run(side, r)) {
            *counts.entry(e).or_default() += 1;
        }
        counts
    };
    let (left, right) = (tally(Side::Left, 0), tally(Side::Right, 1));
    let mut ids: Vec<u64> = left.keys().chain(right.keys()).copied().collect();
    ids.sort_unstable();
    ids.dedup();
    // Bonferroni over two intervals per event
    let risk = AUDIT_RISK / (2 * ids.len()) as f64;
    let ratio = epsilon.exp();
    let (mut epsilon_hat, mut worst, mut violation) = (0.0f64, None, false);
    let mut events = Vec::with_capacity(ids.len());
    for id in ids {
        let (l, r) = (*left.get(&id).unwrap_or(&0), *right.get(&id).unwrap_or(&0));
        let (lb, rb) = (
            clopper_pearson(l, trials, risk),
            clopper_pearson(r, trials, risk),
        );
        for (lower, upper) in [(lb.0, rb.1), (rb.0, lb.1)] {
            if lower > ratio * upper + delta {
                violation = true;
            }
            if lower > delta {
                let e = ((lower - delta) / upper).ln();
                if e > epsilon_hat {
                    epsilon_hat = e;
                    worst = Some(id);
                }
            }
        }
        events.push(EventEstimate {
            event: id,
            left: l,
            right: r,
            left_bounds: lb,
            right_bounds: rb,
        });
    }
    Ok(DpAuditReport {
        mechanism: mechanism.into(),
        pair: pair.into(),
        epsilon,
        delta,
        trials,
        events,
        epsilon_hat,
        worst_event: worst,
        violation,
    })
}

/// A mechanism on a fixed neighbor pair with the guarantee it is audited against.
pub struct AuditCase {
    pub mechanism: String,
    pub pair: String,
    pub declared: PrivacyParams,
    pub run: Box<dyn Fn(Side, &mut Randomness) -> u64 + Sync + Send>,
}

impl AuditCase {
    pub fn audit(&self, trials: u64, rng: &mut Randomness) -> Result<DpAuditReport> {
        audit_dp(
            &self.mechanism,
            &self.pair,
            &self.run,
            self.declared.epsilon,
            self.declared.delta,
            trials,
            rng,
        )
    }

    pub fn declared_as(self, declared: PrivacyParams) -> Self {
        Self { declared, ..self }
    }
}

/// Replacement-neighbor guarantee of the stability selector: changing one entry moves the
/// top-two gap by up to 2, so `(2ε, ½·e^{2ε}·δ)` when `ln(1/δ)/ε ≥ 2`.
pub fn stability_selector_guarantee(epsilon: f64, delta: f64) -> PrivacyParams {
    PrivacyParams {
        epsilon: 2.0 * epsilon,
        delta: (0.5 * (2.0 * epsilon).exp() * delta).min(1.0),
    }
}

fn side<T>(s: Side, left: T, right: T) -> T {
    match s {
        Side::Left => left,
        Side::Right => right,
    }
}

fn two_point_pair(bits: u32, m: usize, right_ones: usize) -> Result<(Database, Database)> {
    let db = |ones: usize| Database::new(bits, (0..m).map(|i| u64::from(i < ones)).collect());
    Ok((db(right_ones.saturating_sub(1))?, db(right_ones)?))
}

/// Counting release `count + Lap(1/ε_true)` on counts 0 and 1, bucketed by floor into
/// `[−3, 4]`.
pub fn laplace_case(true_epsilon: f64, declared_epsilon: f64) -> AuditCase {
    AuditCase {
        mechanism: format!("laplace_count(eps={true_epsilon})"),
        pair: "count 0 vs count 1".into(),
        declared: PrivacyParams {
            epsilon: declared_epsilon,
            delta: 0.0,
        },
        run: Box::new(move |s, r| {
            let count = side(s, 0.0, 1.0);
            let v = (count + laplace_unchecked(1.0 / true_epsilon, r))
                .floor()
                .clamp(-3.0, 4.0);
            (v + 3.0) as u64
        }),
    }
}

/// The stability selector on point counts, with `m − 1` vs `m − 2` copies of 0 (rest 1), so
/// the gap drops by 2. Event: selected point, or `2^d` for ⊥.
pub fn a_dist_case(bits: u32, m: usize, epsilon: f64, delta: f64) -> Result<AuditCase> {
    if m < 2 {
        return Err(Error::Parameter("the selector audit needs m ≥ 2".into()));
    }
    let (l, r) = two_point_pair(bits, m, 2)?;
    let size = crate::domain::domain_size(bits);
    let scores = move |db: &Database| {
        let h = db.histogram();
        (0..size)
            .map(|x| *h.get(&x).unwrap_or(&0) as f64)
            .collect::<Vec<f64>>()
    };
    let (sl, sr) = (scores(&l), scores(&r));
    Ok(AuditCase {
        mechanism: format!("a_dist(eps={epsilon},delta={delta})"),
        pair: format!("{m} entries over X_{bits}: one vs two copies of 1"),
        declared: stability_selector_guarantee(epsilon, delta),
        run: Box::new(move |s, rng| {
            a_dist_index(side(s, &sl, &sr), epsilon, delta, rng)
                .unwrap()
                .map_or(size, |i| i as u64)
        }),
    })
}

/// The choosing mechanism on point histograms: all zeros vs one entry moved to 1.
pub fn choose_case(bits: u32, m: usize, params: ChooseParams) -> Result<AuditCase> {
    let (l, r) = two_point_pair(bits, m, 1)?;
    let size = crate::domain::domain_size(bits);
    let q = PointHistogram;
    // fail fast on the size precondition
    choose(&l, &q, &params, &mut Randomness::from_seed(0))?;
    Ok(AuditCase {
        mechanism: format!("choose(alpha={},beta={})", params.alpha, params.beta),
        pair: format!("{m} entries over X_{bits}: all 0 vs one 1"),
        declared: PrivacyParams {
            epsilon: params.epsilon,
            delta: params.delta,
        },
        run: Box::new(move |s, rng| {
            choose(side(s, &l, &r), &q, &params, rng)
                .unwrap()
                .chosen()
                .unwrap_or(size)
        }),
    })
}

/// Point sanitizer; event is the bitmask of points selected across rounds. Without `m` the
/// smallest validated size is used.
pub fn san_points_case(bits: u32, m: Option<usize>, params: SanitizerParams) -> Result<AuditCase> {
    if bits > 6 {
        return Err(Error::Parameter(
            "the point-sanitizer audit encodes selections as a 64-bit mask; use bits ≤ 6".into(),
        ));
    }
    // an explicit size below the utility bound is audited as given; privacy is still declared
    let (m, params) = match m {
        Some(m) => (m, params.unvalidated()),
        None => (
            san_points_min_sample(params.alpha, params.beta, params.epsilon, params.delta)?.ceil()
                as usize,
            params,
        ),
    };
    let (l, r) = two_point_pair(bits, m, 1)?;
    san_points(&l, &params, &mut Randomness::from_seed(0))?;
    Ok(AuditCase {
        mechanism: format!("san_points(alpha={},beta={})", params.alpha, params.beta),
        pair: format!("{m} entries over X_{bits}: all 0 vs one 1"),
        declared: PrivacyParams {
            epsilon: params.epsilon,
            delta: params.delta,
        },
        run: Box::new(move |s, rng| {
            let est = san_points(side(s, &l, &r), &params, rng).unwrap();
            est.rounds
                .iter()
                .flatten()
                .fold(0u64, |mask, &x| mask | (1 << x))
        }),
    })
}

/// Point learner with the all-zero fallback, on positives split `m−2:2` vs `m−3:3` between 0
/// and 1, which moves the count gap by 2.
pub fn learn_point_case(bits: u32, m: usize, params: LearnerParams) -> Result<AuditCase> {
    if m < 4 {
        return Err(Error::Parameter(
            "the point-learner audit needs m ≥ 4".into(),
        ));
    }
    let sample = |ones: usize| {
        LabeledSample::from_pairs(
            bits,
            &(0..m)
                .map(|i| (u64::from(i < ones), true))
                .collect::<Vec<_>>(),
        )
    };
    let split = (m + 2) / 2 - 1;
    let (l, r) = (sample(split)?, sample(split + 1)?);
    learn_point(
        &l,
        &params,
        PointFallback::AllZero,
        &mut Randomness::from_seed(0),
    )?;
    let size = crate::domain::domain_size(bits);
    Ok(AuditCase {
        mechanism: format!("learn_point(alpha={},beta={})", params.alpha, params.beta),
        pair: format!(
            "{m} positives over X_{bits}: {split} vs {} copies of 1",
            split + 1
        ),
        declared: stability_selector_guarantee(params.privacy.epsilon, params.privacy.delta),
        run: Box::new(move |s, rng| {
            match learn_point(side(s, &l, &r), &params, PointFallback::AllZero, rng)
                .unwrap()
                .hypothesis
            {
                crate::domain::Concept::Point { j, .. } => j,
                _ => size,
            }
        }),
    })
}

/// Label-private learner on the point class: identical points, one label flipped in the
/// labeled part. Event: index of the returned point.
pub fn label_private_case(
    bits: u32,
    m: usize,
    params: LearnerParams,
    seed: u64,
) -> Result<AuditCase> {
    let mut rng = Randomness::from_seed(seed);
    let size = crate::domain::domain_size(bits);
    let target = rng.below(size);
    let points: Vec<u64> = (0..m)
        .map(|i| if i % 4 == 0 { target } else { rng.below(size) })
        .collect();
    let labels: Vec<bool> = points.iter().map(|&x| x == target).collect();
    let db = Database::new(bits, points)?;
    let class = ConceptClass::point(bits)?;
    let mut flipped = labels.clone();
    let last = m - 1;
    flipped[last] = !flipped[last];
    learn_label_private(&db, &labels, &class, &params, &mut Randomness::from_seed(0))?;
    Ok(AuditCase {
        mechanism: format!("learn_label_private(eps={})", params.privacy.epsilon),
        pair: format!("{m} points over X_{bits}: label {last} flipped"),
        declared: PrivacyParams {
            epsilon: params.privacy.epsilon,
            delta: 0.0,
        },
        run: Box::new(move |s, rng| {
            match learn_label_private(&db, side(s, &labels, &flipped), &class, &params, rng)
                .unwrap()
                .hypothesis
            {
                crate::domain::Concept::Point { j, .. } => j,
                _ => size,
            }
        }),
    })
}

/// Names accepted by [`build_case`].
pub const AUDIT_MECHANISMS: [&str; 6] = [
    "laplace",
    "a_dist",
    "choose",
    "san_points",
    "learn_point",
    "label_private",
];

/// The micro-scale configuration of each audited mechanism. `bits` and `m` override the
/// defaults where the mechanism allows it.
pub fn build_case(name: &str, bits: Option<u32>, m: Option<usize>) -> Result<AuditCase> {
    match name {
        "laplace" => Ok(laplace_case(1.0, 1.0)),
        "laplace_misdeclared" => Ok(laplace_case(1.0, 0.5)),
        "a_dist" => a_dist_case(bits.unwrap_or(2), m.unwrap_or(4), 1.0, 0.05),
        "choose" => choose_case(
            bits.unwrap_or(2),
            m.unwrap_or(66),
            ChooseParams::new(0.9, 0.9, 1.0, 0.5)?,
        ),
        "san_points" => san_points_case(
            bits.unwrap_or(2),
            m,
            SanitizerParams::new(0.9, 0.9, 5.0, 0.5)?,
        ),
        "learn_point" => learn_point_case(
            bits.unwrap_or(2),
            m.unwrap_or(8),
            LearnerParams::new(0.5, 0.5, 1.0, 0.05)?,
        ),
        "label_private" => label_private_case(
            bits.unwrap_or(8),
            m.unwrap_or(300),
            LearnerParams::new(0.2, 0.1, 1.0, 0.01)?.with_scale(0.001),
            1,
        ),
        _ => Err(Error::Parameter(format!(
            "unknown mechanism `{name}`; expected one of {AUDIT_MECHANISMS:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clopper_pearson_edges() {
        let (lo, hi) = clopper_pearson(0, 100, 0.05);
        assert_eq!(lo, 0.0);
        // exact upper bound for zero successes: 1 − (α/2)^{1/n}
        assert!((hi - (1.0 - 0.025f64.powf(0.01))).abs() < 1e-9);
        let (lo, hi) = clopper_pearson(50, 100, 0.05);
        assert!(lo < 0.5 && hi > 0.5);
        assert!((lo - 0.3983).abs() < 1e-3 && (hi - 0.6017).abs() < 1e-3);
    }

    #[test]
    fn constant_mechanism_passes() {
        let r = audit_dp(
            "const",
            "any",
            |_, _| 7,
            0.1,
            0.0,
            10_000,
            &mut Randomness::from_seed(1),
        )
        .unwrap();
        assert!(!r.violation);
        assert_eq!(r.epsilon_hat, 0.0);
        assert_eq!(r.events.len(), 1);
    }

    #[test]
    fn underpowered_audits_are_rejected() {
        assert!(audit_dp(
            "c",
            "p",
            |_, _| 0,
            1.0,
            0.0,
            999,
            &mut Randomness::from_seed(1)
        )
        .is_err());
    }

    #[test]
    fn known_probabilities_fall_inside_bounds() {
        let case = laplace_case(1.0, 1.0);
        let r = case.audit(200_000, &mut Randomness::from_seed(4)).unwrap();
        // bucket [0,1) on count 0: ½(1 − e^{-1})
        let e = r.events.iter().find(|e| e.event == 3).unwrap();
        let p = 0.5 * (1.0 - (-1.0f64).exp());
        assert!(e.left_bounds.0 <= p && p <= e.left_bounds.1);
        assert!(!r.violation);
    }

    #[test]
    fn misdeclared_laplace_is_flagged() {
        let r = laplace_case(1.0, 0.5)
            .audit(200_000, &mut Randomness::from_seed(5))
            .unwrap();
        assert!(r.violation);
        assert!(r.epsilon_hat > 0.5);
    }

    #[test]
    fn selector_at_printed_budget_is_flagged() {
        // gap 2 vs 0 at threshold ln 20: release rates ½e^{-(ln 20 − 2)} and 1/40
        let case = a_dist_case(2, 4, 1.0, 0.05)
            .unwrap()
            .declared_as(PrivacyParams {
                epsilon: 1.0,
                delta: 0.05,
            });
        assert!(
            case.audit(100_000, &mut Randomness::from_seed(6))
                .unwrap()
                .violation
        );
        let fixed = a_dist_case(2, 4, 1.0, 0.05).unwrap();
        assert!(
            !fixed
                .audit(100_000, &mut Randomness::from_seed(6))
                .unwrap()
                .violation
        );
    }

    #[test]
    fn cases_build() {
        for name in AUDIT_MECHANISMS {
            assert!(build_case(name, None, None).is_ok(), "{name}");
        }
        assert!(build_case("nope", None, None).is_err());
    }
}
