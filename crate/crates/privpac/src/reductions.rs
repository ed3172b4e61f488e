//! Sanitizer-to-learner reductions: block amplification, the sanitizer for the label class
//! built from a sanitizer for the base class, and learning by empirical-error minimization
//! over a sanitized labeled sample.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::domain::{Concept, ConceptClass, Database, LabeledSample, DEFAULT_ENUMERATION_BUDGET};
use crate::error::{check_positive, check_unit_open, Error, Result};
use crate::parallel::map_trials;
use crate::privacy::laplace_unchecked;
use crate::rng::Randomness;
use crate::sanitizers::{
    fit_proper_db, san_points, san_thresholds, CountingAnswers, Estimate, SanitizerParams,
    WeightedDatabase,
};

/// Declared `(α, β, ε, δ, m)` guarantee of a sanitizer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub m: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Sanitized {
    Estimate(Estimate),
    Database(Database),
    Weighted(WeightedDatabase),
}

impl CountingAnswers for Sanitized {
    fn bits(&self) -> u32 {
        match self {
            Sanitized::Estimate(e) => e.bits(),
            Sanitized::Database(d) => d.bits(),
            Sanitized::Weighted(w) => w.bits(),
        }
    }

    fn answer(&self, c: &Concept) -> Result<f64> {
        match self {
            Sanitized::Estimate(e) => e.answer(c),
            Sanitized::Database(d) => d.answer(c),
            Sanitized::Weighted(w) => w.answer(c),
        }
    }

    fn point_masses(&self) -> Vec<(u64, f64)> {
        match self {
            Sanitized::Estimate(e) => e.point_masses(),
            Sanitized::Database(d) => d.point_masses(),
            Sanitized::Weighted(w) => w.point_masses(),
        }
    }
}

pub trait Sanitizer: Sync {
    fn contract(&self) -> Contract;
    fn sanitize(&self, db: &Database, rng: &mut Randomness) -> Result<Sanitized>;
}

/// Returns its input. Not private; used as a reference point.
#[derive(Clone, Copy, Debug)]
pub struct Identity {
    pub contract: Contract,
}

impl Sanitizer for Identity {
    fn contract(&self) -> Contract {
        self.contract
    }

    fn sanitize(&self, db: &Database, _: &mut Randomness) -> Result<Sanitized> {
        Ok(Sanitized::Database(db.clone()))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PointsSanitizer {
    pub params: SanitizerParams,
    pub m: usize,
}

impl Sanitizer for PointsSanitizer {
    fn contract(&self) -> Contract {
        let p = self.params;
        Contract {
            alpha: p.alpha,
            beta: p.beta,
            epsilon: p.epsilon,
            delta: p.delta,
            m: self.m,
        }
    }

    fn sanitize(&self, db: &Database, rng: &mut Randomness) -> Result<Sanitized> {
        Ok(Sanitized::Estimate(san_points(db, &self.params, rng)?))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ThresholdsSanitizer {
    pub params: SanitizerParams,
    pub m: usize,
}

impl Sanitizer for ThresholdsSanitizer {
    fn contract(&self) -> Contract {
        let p = self.params;
        Contract {
            alpha: p.alpha,
            beta: p.beta,
            epsilon: p.epsilon,
            delta: p.delta,
            m: self.m,
        }
    }

    fn sanitize(&self, db: &Database, rng: &mut Randomness) -> Result<Sanitized> {
        Ok(Sanitized::Weighted(
            san_thresholds(db, &self.params, rng)?.0,
        ))
    }
}

/// Converts another sanitizer's output into a database of exactly `size` entries.
///
/// The fitted database answers within `α` of the inner output, so the contract doubles `α`.
#[derive(Clone, Debug)]
pub struct FixedSize<S> {
    pub inner: S,
    pub class: ConceptClass,
    pub size: usize,
}

impl<S: Sanitizer> Sanitizer for FixedSize<S> {
    fn contract(&self) -> Contract {
        let c = self.inner.contract();
        Contract {
            alpha: 2.0 * c.alpha,
            ..c
        }
    }

    fn sanitize(&self, db: &Database, rng: &mut Randomness) -> Result<Sanitized> {
        let out = self.inner.sanitize(db, rng)?;
        match out {
            Sanitized::Database(d) if d.len() == self.size => Ok(Sanitized::Database(d)),
            other => Ok(Sanitized::Database(fit_proper_db(
                &other,
                &self.class,
                self.size,
                self.inner.contract().alpha,
            )?)),
        }
    }
}

/// `⌈(18/β)·ln(1/β)⌉`, the fewest blocks for which amplification keeps confidence `β`.
pub fn min_blocks(beta: f64) -> u64 {
    (18.0 / beta * (1.0 / beta).ln()).ceil() as u64
}

/// Runs a fixed-output-size base sanitizer on `q` contiguous blocks and concatenates the
/// results. Input length must be `q·m`.
#[derive(Clone, Debug)]
pub struct Amplified<S> {
    pub base: S,
    pub q: u64,
}

impl<S: Sanitizer> Amplified<S> {
    /// Sanitizes any multiple of the base size, using as many blocks as it takes.
    pub fn sanitize_blocks(&self, db: &Database, rng: &mut Randomness) -> Result<Database> {
        let m = self.base.contract().m;
        if m == 0 || db.len() % m != 0 {
            return Err(Error::Shape(format!(
                "input of {} entries is not a multiple of the block size {m}",
                db.len()
            )));
        }
        let blocks = (db.len() / m) as u64;
        let master = Randomness::from_seed(rng.next_u64());
        let parts = map_trials(blocks, &master, |i, r| -> Result<Database> {
            let lo = i as usize * m;
            let block = Database::new(db.bits(), db.entries()[lo..lo + m].to_vec())?;
            match self.base.sanitize(&block, r)? {
                Sanitized::Database(d) => Ok(d),
                _ => Err(Error::Unsupported(
                    "amplification needs a database-valued base sanitizer".into(),
                )),
            }
        });
        let mut out = Database::empty(db.bits())?;
        for part in parts {
            for x in part?.into_entries() {
                out.push(x)?;
            }
        }
        Ok(out)
    }
}

impl<S: Sanitizer> Sanitizer for Amplified<S> {
    fn contract(&self) -> Contract {
        let c = self.base.contract();
        Contract {
            alpha: 2.0 * c.alpha + 2.0 * c.beta,
            m: c.m * self.q as usize,
            ..c
        }
    }

    fn sanitize(&self, db: &Database, rng: &mut Randomness) -> Result<Sanitized> {
        let want = self.contract().m;
        if db.len() != want {
            return Err(Error::Shape(format!(
                "expected {want} entries, got {}",
                db.len()
            )));
        }
        if self.q == 1 {
            return self.base.sanitize(db, rng);
        }
        Ok(Sanitized::Database(self.sanitize_blocks(db, rng)?))
    }
}

/// Block size `m`, rounding unit `M` (a multiple of `m`) and input size `t` for the
/// label-class sanitizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub m: usize,
    pub big_m: usize,
    pub t: usize,
}

impl BlockPlan {
    /// `M = m·⌈(18/β)·ln(2/(αβ))·(1 + 1/(mε))⌉` and `t = ⌈6/α²⌉·M`.
    pub fn standard(m: usize, alpha: f64, beta: f64, epsilon: f64) -> Result<Self> {
        check_unit_open("alpha", alpha)?;
        check_unit_open("beta", beta)?;
        check_positive("epsilon", epsilon)?;
        let units = (18.0 / beta * (2.0 / (alpha * beta)).ln() * (1.0 + 1.0 / (m as f64 * epsilon)))
            .ceil() as usize;
        let big_m = m * units;
        Ok(Self {
            m,
            big_m,
            t: (6.0 / (alpha * alpha)).ceil() as usize * big_m,
        })
    }

    pub fn custom(m: usize, big_m: usize, t: usize) -> Result<Self> {
        if m == 0 || big_m == 0 || big_m % m != 0 {
            return Err(Error::Parameter(format!(
                "M = {big_m} must be a positive multiple of m = {m}"
            )));
        }
        Ok(Self { m, big_m, t })
    }

    /// `⌊m_σ/M + 1/2⌋·M`.
    pub fn round(&self, m_sigma: usize) -> usize {
        ((m_sigma as f64 / self.big_m as f64 + 0.5).floor() as usize) * self.big_m
    }

    /// `(100m/α²)·ln(1/(αβ))` and `(150/(α²β))·ln(2/(αβ))·(m + 1/ε)`; only the lower end gates.
    pub fn t_window(&self, alpha: f64, beta: f64, epsilon: f64) -> (f64, f64) {
        let m = self.m as f64;
        let a2 = alpha * alpha;
        (
            100.0 * m / a2 * (1.0 / (alpha * beta)).ln(),
            150.0 / (a2 * beta) * (2.0 / (alpha * beta)).ln() * (m + 1.0 / epsilon),
        )
    }
}

/// Mechanism invocations made by one run of [`LabelSanitizer`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub laplace: u32,
    pub sanitizer_calls: u32,
}

/// Per-side details of a [`LabelSanitizer`] run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelSanitizerTrace {
    pub census: Census,
    pub sizes: [usize; 2],
    pub noise: [i64; 2],
    pub rounded: [usize; 2],
}

/// Sanitizer for the label-lifted class from a fixed-size sanitizer for the base class.
///
/// Input entries are lifted points `x∘y` over `d + 1` bits. Each label side is resized to a
/// noisy multiple of `M`, sanitized by block amplification, and weighted back by its noisy
/// size.
#[derive(Clone, Debug)]
pub struct LabelSanitizer<S> {
    pub base: S,
    pub epsilon: f64,
    pub plan: BlockPlan,
    pub validate: bool,
}

impl<S: Sanitizer> LabelSanitizer<S> {
    pub fn new(base: S, epsilon: f64, plan: BlockPlan) -> Result<Self> {
        check_positive("epsilon", epsilon)?;
        if base.contract().m != plan.m {
            return Err(Error::Parameter(format!(
                "base sanitizer block size {} differs from the plan's {}",
                base.contract().m,
                plan.m
            )));
        }
        Ok(Self {
            base,
            epsilon,
            plan,
            validate: true,
        })
    }

    pub fn run(
        &self,
        lifted: &Database,
        rng: &mut Randomness,
    ) -> Result<(WeightedDatabase, LabelSanitizerTrace)> {
        if self.validate && lifted.len() != self.plan.t {
            return Err(Error::Shape(format!(
                "expected {} examples, got {}",
                self.plan.t,
                lifted.len()
            )));
        }
        let sample = LabeledSample::from_lifted(lifted)?;
        let bits = sample.bits();
        let amplifier = Amplified {
            base: &self.base,
            q: 1,
        };
        let mut trace = LabelSanitizerTrace::default();
        let mut out = WeightedDatabase::new(bits + 1)?;
        for (side, label) in [false, true].into_iter().enumerate() {
            let mut points: Vec<u64> = sample
                .pairs()
                .filter(|p| p.1 == label)
                .map(|p| p.0)
                .collect();
            let noise = laplace_unchecked(1.0 / self.epsilon, rng).floor() as i64;
            trace.census.laplace += 1;
            let noisy = (points.len() as i64 + noise).max(0) as usize;
            let target = self.plan.round(noisy);
            points.resize(target, 0);
            let sanitized = amplifier.sanitize_blocks(&Database::new(bits, points)?, rng)?;
            trace.census.sanitizer_calls += 1;
            trace.sizes[side] = sample.pairs().filter(|p| p.1 == label).count();
            trace.noise[side] = noise;
            trace.rounded[side] = target;
            if !sanitized.is_empty() {
                let w = target as f64 / sanitized.len() as f64;
                for &x in sanitized.entries() {
                    out.add((x << 1) | u64::from(label), w)?;
                }
            }
        }
        Ok((out, trace))
    }
}

impl<S: Sanitizer> Sanitizer for &S {
    fn contract(&self) -> Contract {
        (**self).contract()
    }

    fn sanitize(&self, db: &Database, rng: &mut Randomness) -> Result<Sanitized> {
        (**self).sanitize(db, rng)
    }
}

impl<S: Sanitizer> Sanitizer for LabelSanitizer<S> {
    /// `(5α + 4β, 5β, 6ε, t)` in terms of the base contract.
    fn contract(&self) -> Contract {
        let c = self.base.contract();
        Contract {
            alpha: 5.0 * c.alpha + 4.0 * c.beta,
            beta: 5.0 * c.beta,
            epsilon: 6.0 * c.epsilon.max(self.epsilon),
            delta: c.delta,
            m: self.plan.t,
        }
    }

    fn sanitize(&self, db: &Database, rng: &mut Randomness) -> Result<Sanitized> {
        Ok(Sanitized::Weighted(self.run(db, rng)?.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionOutput {
    pub hypothesis: Concept,
    /// Sanitized empirical error of the returned hypothesis.
    pub sanitized_error: f64,
    pub candidates: usize,
}

/// Returns the concept of `class` with the smallest error on the sanitized sample; ties go
/// to the earliest concept in enumeration order.
pub fn learn_from_sanitizer(
    san: &impl Sanitizer,
    class: &ConceptClass,
    sample: &LabeledSample,
    rng: &mut Randomness,
) -> Result<ReductionOutput> {
    if class.input_bits() != sample.bits() {
        return Err(Error::Domain("sample and class bit-widths differ".into()));
    }
    let sanitized = san.sanitize(&sample.lifted()?, rng)?;
    let concepts = class.enumerate(DEFAULT_ENUMERATION_BUDGET)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in concepts.iter().enumerate() {
        let err = sanitized.answer(&Concept::labeled(c.clone())?)?;
        if best.map_or(true, |(_, e)| err < e) {
            best = Some((i, err));
        }
    }
    let (i, err) = best.ok_or_else(|| Error::Unsupported("empty concept class".into()))?;
    Ok(ReductionOutput {
        hypothesis: concepts[i].clone(),
        sanitized_error: err,
        candidates: concepts.len(),
    })
}
