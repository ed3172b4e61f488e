//! Private selection for bounded-growth choice problems.
//!
//! A quality function has growth bound `k` when it is zero on the empty database and appending
//! one element raises at most `k` scores, each by exactly one. For such functions the support
//! `G(S) = {f : q(S,f) ≥ 1}` has at most `k·m` members, so selection never has to scan the full
//! solution space.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::Database;
use crate::error::{check_positive, check_unit_open, Error, Result};
use crate::privacy::{exponential_mechanism_index, laplace_unchecked};
use crate::rng::Randomness;

/// Integer-valued quality with an explicit support enumerator.
pub trait BoundedGrowthQuality {
    type Solution: Clone + Ord;

    fn growth_bound(&self) -> usize;

    fn score(&self, db: &Database, f: &Self::Solution) -> u64;

    /// Every solution with score at least one, paired with its score.
    fn support(&self, db: &Database) -> Vec<(Self::Solution, u64)>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChooseParams {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Reject databases smaller than [`min_sample`].
    pub validate: bool,
}

impl ChooseParams {
    pub fn new(alpha: f64, beta: f64, epsilon: f64, delta: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            epsilon,
            delta,
            validate: true,
        };
        p.check()?;
        Ok(p)
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
        check_unit_open("delta", self.delta)
    }
}

/// A solution or ⊥.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChoiceOutcome<T> {
    Chosen(T),
    Bottom,
}

impl<T> ChoiceOutcome<T> {
    pub fn chosen(self) -> Option<T> {
        match self {
            ChoiceOutcome::Chosen(t) => Some(t),
            ChoiceOutcome::Bottom => None,
        }
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, ChoiceOutcome::Bottom)
    }
}

/// `⌈(16/(αε))·ln(16k/(αβεδ))⌉`.
pub fn min_sample(alpha: f64, beta: f64, epsilon: f64, delta: f64, k: usize) -> Result<u64> {
    ChooseParams::new(alpha, beta, epsilon, delta)?;
    if k == 0 {
        return Err(Error::Parameter("growth bound must be positive".into()));
    }
    let v = 16.0 / (alpha * epsilon) * (16.0 * k as f64 / (alpha * beta * epsilon * delta)).ln();
    Ok(v.ceil() as u64)
}

/// Threshold-gated selection from a precomputed support.
///
/// `support` lists the solutions of score at least one; `m` is the database size and `k` the
/// growth bound.
pub fn choose_from_support<T: Clone>(
    support: &[(T, u64)],
    m: usize,
    k: usize,
    params: &ChooseParams,
    rng: &mut Randomness,
) -> Result<ChoiceOutcome<T>> {
    params.check()?;
    if params.validate {
        let need = min_sample(params.alpha, params.beta, params.epsilon, params.delta, k)?;
        if (m as u64) < need {
            return Err(Error::Precondition(format!(
                "selection needs at least {need} entries, got {m}"
            )));
        }
    }
    let best = support.iter().map(|s| s.1).max().unwrap_or(0) as f64
        + laplace_unchecked(4.0 / params.epsilon, rng);
    if best < params.alpha * m as f64 / 2.0 {
        return Ok(ChoiceOutcome::Bottom);
    }
    let live: Vec<&(T, u64)> = support.iter().filter(|s| s.1 >= 1).collect();
    if live.is_empty() {
        return Ok(ChoiceOutcome::Bottom);
    }
    let scores: Vec<f64> = live.iter().map(|s| s.1 as f64).collect();
    let i = exponential_mechanism_index(&scores, params.epsilon / 2.0, rng)?;
    Ok(ChoiceOutcome::Chosen(live[i].0.clone()))
}

/// Selects an approximately best solution of `q` on `db`, or ⊥.
pub fn choose<Q: BoundedGrowthQuality>(
    db: &Database,
    q: &Q,
    params: &ChooseParams,
    rng: &mut Randomness,
) -> Result<ChoiceOutcome<Q::Solution>> {
    let support = q.support(db);
    choose_from_support(&support, db.len(), q.growth_bound(), params, rng)
}

/// Whether appending `x` to `db` raises at most `k` scores by exactly one and leaves the rest.
pub fn check_growth_bound<Q: BoundedGrowthQuality>(q: &Q, db: &Database, x: u64) -> Result<bool> {
    let mut grown = db.clone();
    grown.push(x)?;
    let before: BTreeMap<Q::Solution, u64> = q.support(db).into_iter().collect();
    let after: BTreeMap<Q::Solution, u64> = q.support(&grown).into_iter().collect();
    let keys: std::collections::BTreeSet<&Q::Solution> =
        before.keys().chain(after.keys()).collect();
    let mut raised = 0;
    for key in keys {
        let b = before.get(key).copied().unwrap_or(0);
        let a = after.get(key).copied().unwrap_or(0);
        match a.checked_sub(b) {
            Some(0) => {}
            Some(1) => raised += 1,
            _ => return Ok(false),
        }
    }
    Ok(raised <= q.growth_bound())
}

/// Number of appearances of each point (growth bound 1).
#[derive(Clone, Copy, Debug, Default)]
pub struct PointHistogram;

impl BoundedGrowthQuality for PointHistogram {
    type Solution = u64;

    fn growth_bound(&self) -> usize {
        1
    }

    fn score(&self, db: &Database, f: &u64) -> u64 {
        db.entries().iter().filter(|&&x| x == *f).count() as u64
    }

    fn support(&self, db: &Database) -> Vec<(u64, u64)> {
        db.histogram().into_iter().collect()
    }
}

/// Appearances of each point inside `[lo, hi]` (growth bound 1).
#[derive(Clone, Copy, Debug)]
pub struct RangeHistogram {
    pub lo: u64,
    pub hi: u64,
}

impl BoundedGrowthQuality for RangeHistogram {
    type Solution = u64;

    fn growth_bound(&self) -> usize {
        1
    }

    fn score(&self, db: &Database, f: &u64) -> u64 {
        if (self.lo..=self.hi).contains(f) {
            PointHistogram.score(db, f)
        } else {
            0
        }
    }

    fn support(&self, db: &Database) -> Vec<(u64, u64)> {
        db.histogram()
            .into_iter()
            .filter(|(x, _)| (self.lo..=self.hi).contains(x))
            .collect()
    }
}

/// Point counts of the two staggered block families over `[lo, hi]`.
///
/// Family A has blocks `[lo + i·w, lo + (i+1)·w − 1]`, family B the same blocks shifted right
/// by `shift`; both are trimmed at `hi`. Each point lies in at most one block of each family,
/// so the growth bound is 2. Solutions are the closed intervals themselves.
#[derive(Clone, Copy, Debug)]
pub struct StaggeredBlockCount {
    pub lo: u64,
    pub hi: u64,
    pub width: u64,
    pub shift: u64,
}

impl StaggeredBlockCount {
    fn block(&self, start: u64, i: u64) -> (u64, u64) {
        let a = start + i * self.width;
        (a, (a + self.width - 1).min(self.hi))
    }

    /// The A-block and (if any) B-block containing `x`.
    pub fn blocks_of(&self, x: u64) -> Vec<(u64, u64)> {
        let mut out = Vec::with_capacity(2);
        if x < self.lo || x > self.hi {
            return out;
        }
        out.push(self.block(self.lo, (x - self.lo) / self.width));
        let b0 = self.lo + self.shift;
        if x >= b0 {
            out.push(self.block(b0, (x - b0) / self.width));
        }
        out
    }
}

impl StaggeredBlockCount {
    /// Block counts over raw points, ascending by block.
    pub fn support_of_points(&self, points: &[u64]) -> Vec<((u64, u64), u64)> {
        let mut counts: BTreeMap<(u64, u64), u64> = BTreeMap::new();
        for &x in points {
            for b in self.blocks_of(x) {
                *counts.entry(b).or_insert(0) += 1;
            }
        }
        counts.into_iter().collect()
    }
}

impl BoundedGrowthQuality for StaggeredBlockCount {
    type Solution = (u64, u64);

    fn growth_bound(&self) -> usize {
        2
    }

    fn score(&self, db: &Database, f: &(u64, u64)) -> u64 {
        db.entries()
            .iter()
            .filter(|&&x| f.0 <= x && x <= f.1)
            .count() as u64
    }

    fn support(&self, db: &Database) -> Vec<((u64, u64), u64)> {
        self.support_of_points(db.entries())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(alpha: f64, eps: f64) -> ChooseParams {
        ChooseParams::new(alpha, 0.1, eps, 0.1)
            .unwrap()
            .unvalidated()
    }

    #[test]
    fn min_sample_examples() {
        // 16/(αε) = 1600 at these parameters, so the formula gives 1600·ln(160000)
        let oracle = (1600.0 * 160000f64.ln()).ceil() as u64;
        assert_eq!(oracle, 19173);
        assert_eq!(min_sample(0.1, 0.1, 0.1, 0.1, 1).unwrap(), oracle);
        let two = (1600.0 * 320000f64.ln()).ceil() as u64;
        assert_eq!(min_sample(0.1, 0.1, 0.1, 0.1, 2).unwrap(), two);
        assert!((two - oracle) as f64 - 1600.0 * 2f64.ln() < 1.0);
        let doubled = min_sample(0.2, 0.1, 0.1, 0.1, 1).unwrap() as f64;
        assert!(doubled < 0.5 * oracle as f64 && doubled > 0.4 * oracle as f64);
        assert!(min_sample(0.1, 0.1, 0.1, 0.1, 0).is_err());
    }

    #[test]
    fn validation_rejects_small_databases() {
        let db = Database::new(3, vec![1; 50]).unwrap();
        let p = ChooseParams::new(0.1, 0.1, 0.1, 0.1).unwrap();
        let mut r = Randomness::from_seed(0);
        assert!(matches!(
            choose(&db, &PointHistogram, &p, &mut r),
            Err(Error::Precondition(_))
        ));
        assert!(choose(&db, &PointHistogram, &p.unvalidated(), &mut r).is_ok());
    }

    #[test]
    fn concentrated_histogram_returns_the_point() {
        // best(S) < 10 needs Lap(4) < -90: probability ½e^{-22.5}
        let db = Database::new(4, vec![9; 100]).unwrap();
        let mut r = Randomness::from_seed(2);
        for _ in 0..2000 {
            assert_eq!(
                choose(&db, &PointHistogram, &params(0.2, 1.0), &mut r).unwrap(),
                ChoiceOutcome::Chosen(9)
            );
        }
    }

    #[test]
    fn empty_support_bottom_rate() {
        // all scores zero: passes only if Lap(4) ≥ 10, probability ½e^{-2.5}
        let db = Database::new(4, vec![0; 100]).unwrap();
        let q = RangeHistogram { lo: 1, hi: 15 };
        let mut r = Randomness::from_seed(3);
        let n = 100_000;
        let bottoms = (0..n)
            .filter(|_| {
                choose(&db, &q, &params(0.2, 1.0), &mut r)
                    .unwrap()
                    .is_bottom()
            })
            .count();
        // with an empty support even a passing draw yields ⊥
        assert_eq!(bottoms, n);
        let db2 = Database::new(4, vec![1; 100]).unwrap();
        let q2 = RangeHistogram { lo: 0, hi: 0 };
        let mut r = Randomness::from_seed(4);
        let b2 = (0..n)
            .filter(|_| {
                choose(&db2, &q2, &params(0.2, 1.0), &mut r)
                    .unwrap()
                    .is_bottom()
            })
            .count();
        assert_eq!(b2, n);
    }

    #[test]
    fn sensitivity_two_quality_fails_growth_check() {
        struct Doubled;
        impl BoundedGrowthQuality for Doubled {
            type Solution = u64;
            fn growth_bound(&self) -> usize {
                1
            }
            fn score(&self, db: &Database, f: &u64) -> u64 {
                2 * PointHistogram.score(db, f)
            }
            fn support(&self, db: &Database) -> Vec<(u64, u64)> {
                db.histogram()
                    .into_iter()
                    .map(|(x, c)| (x, 2 * c))
                    .collect()
            }
        }
        let db = Database::new(3, vec![1, 2]).unwrap();
        assert!(!check_growth_bound(&Doubled, &db, 1).unwrap());
        assert!(check_growth_bound(&PointHistogram, &db, 1).unwrap());
    }

    proptest! {
        #[test]
        fn histogram_grows_by_one(entries in proptest::collection::vec(0u64..16, 0..12), x in 0u64..16) {
            let db = Database::new(4, entries).unwrap();
            prop_assert!(check_growth_bound(&PointHistogram, &db, x).unwrap());
            let before = PointHistogram.support(&db);
            let mut grown = db.clone();
            grown.push(x).unwrap();
            let after = PointHistogram.support(&grown);
            let total_before: u64 = before.iter().map(|s| s.1).sum();
            let total_after: u64 = after.iter().map(|s| s.1).sum();
            prop_assert_eq!(total_after, total_before + 1);
        }

        #[test]
        fn staggered_blocks_grow_by_at_most_two(
            entries in proptest::collection::vec(0u64..64, 0..20),
            x in 0u64..64,
            lo in 0u64..20,
            span in 1u64..44,
            zexp in 0u32..4,
        ) {
            let z = 1u64 << zexp;
            let q = StaggeredBlockCount { lo, hi: lo + span, width: 2 * z, shift: z };
            let db = Database::new(6, entries).unwrap();
            prop_assert!(check_growth_bound(&q, &db, x).unwrap());
            prop_assert!(q.blocks_of(x).len() <= 2);
            for (f, s) in q.support(&db) {
                prop_assert_eq!(q.score(&db, &f), s);
            }
        }

        #[test]
        fn support_size_at_most_k_m(entries in proptest::collection::vec(0u64..64, 0..30)) {
            let db = Database::new(6, entries).unwrap();
            let q = StaggeredBlockCount { lo: 3, hi: 60, width: 4, shift: 2 };
            prop_assert!(q.support(&db).len() <= 2 * db.len());
            prop_assert!(PointHistogram.support(&db).len() <= db.len());
        }

        #[test]
        fn output_is_in_support_or_bottom(entries in proptest::collection::vec(0u64..4, 1..8), seed in 0u64..1000) {
            let db = Database::new(2, entries).unwrap();
            let mut r = Randomness::from_seed(seed);
            let support: Vec<u64> = PointHistogram.support(&db).into_iter().map(|s| s.0).collect();
            for _ in 0..50 {
                match choose(&db, &PointHistogram, &params(0.5, 5.0), &mut r).unwrap() {
                    ChoiceOutcome::Chosen(x) => prop_assert!(support.contains(&x)),
                    ChoiceOutcome::Bottom => {}
                }
            }
        }
    }
}
