//! Synthetic distributions and i.i.d. sampling.

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::domain::{
    domain_size, Concept, ConceptClass, Database, FiniteDistribution, LabeledSample,
};
use crate::error::{Error, Result};
use crate::rng::Randomness;

/// Largest bit-width for which a distribution is stored densely.
pub const MAX_DENSE_BITS: u32 = 22;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DistributionSpec {
    Uniform,
    /// Point masses, renormalised.
    Mixture(Vec<(u64, f64)>),
    /// Mass `1 − 5α` at 0 and `5α/k` on each of `k` other points.
    Adversarial {
        alpha: f64,
        points: Vec<u64>,
    },
    /// `Pr[x] ∝ ratio^x` over the whole domain.
    Geometric {
        ratio: f64,
    },
    /// Weighted combination of other specs.
    Blend(Vec<(f64, DistributionSpec)>),
}

impl DistributionSpec {
    /// Parses `uniform`, `mixture:100=0.5,60000=0.5`, `adversarial:0.1:3,9` or
    /// `geometric:0.999`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Parse(format!("distribution `{s}`: {why}"));
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        match kind.trim() {
            "uniform" => Ok(Self::Uniform),
            "mixture" => {
                let mut masses = Vec::new();
                for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
                    let (x, w) = part
                        .split_once('=')
                        .ok_or_else(|| bad("expected point=weight"))?;
                    masses.push((
                        x.trim().parse().map_err(|_| bad("bad point"))?,
                        w.trim().parse().map_err(|_| bad("bad weight"))?,
                    ));
                }
                Ok(Self::Mixture(masses))
            }
            "adversarial" => {
                let (a, pts) = rest
                    .split_once(':')
                    .ok_or_else(|| bad("expected alpha:points"))?;
                let points = pts
                    .split(',')
                    .map(|p| p.trim().parse().map_err(|_| bad("bad point")))
                    .collect::<Result<_>>()?;
                Ok(Self::Adversarial {
                    alpha: a.trim().parse().map_err(|_| bad("bad alpha"))?,
                    points,
                })
            }
            "geometric" => Ok(Self::Geometric {
                ratio: rest.trim().parse().map_err(|_| bad("bad ratio"))?,
            }),
            _ => Err(bad("unknown kind")),
        }
    }
}

fn weights(bits: u32, spec: &DistributionSpec) -> Result<Vec<f64>> {
    let n = domain_size(bits) as usize;
    let mut w = vec![0.0; n];
    match spec {
        DistributionSpec::Uniform => w.iter_mut().for_each(|v| *v = 1.0 / n as f64),
        DistributionSpec::Mixture(masses) => {
            let total: f64 = masses.iter().map(|m| m.1).sum();
            if masses.is_empty() || !(total > 0.0) || masses.iter().any(|m| m.1 < 0.0) {
                return Err(Error::Parameter(
                    "mixture weights must be nonnegative with a positive sum".into(),
                ));
            }
            for &(x, p) in masses {
                *w.get_mut(x as usize)
                    .ok_or_else(|| Error::Domain(format!("{x} is outside X_{bits}")))? += p / total;
            }
        }
        DistributionSpec::Adversarial { alpha, points } => {
            if !(*alpha > 0.0 && *alpha <= 0.2) || points.is_empty() {
                return Err(Error::Parameter(
                    "adversarial family needs α ∈ (0, 0.2] and k ≥ 1 points".into(),
                ));
            }
            let mut distinct = points.clone();
            distinct.sort_unstable();
            distinct.dedup();
            if distinct.len() != points.len() || distinct[0] == 0 {
                return Err(Error::Parameter(
                    "adversarial points must be distinct and nonzero".into(),
                ));
            }
            w[0] = 1.0 - 5.0 * alpha;
            for &x in points {
                *w.get_mut(x as usize)
                    .ok_or_else(|| Error::Domain(format!("{x} is outside X_{bits}")))? =
                    5.0 * alpha / points.len() as f64;
            }
        }
        DistributionSpec::Geometric { ratio } => {
            if !(*ratio > 0.0 && *ratio <= 1.0) {
                return Err(Error::Parameter("geometric ratio must be in (0, 1]".into()));
            }
            let mut p = 1.0;
            for v in w.iter_mut() {
                *v = p;
                p *= ratio;
            }
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
        }
        DistributionSpec::Blend(parts) => {
            let total: f64 = parts.iter().map(|p| p.0).sum();
            if parts.is_empty() || !(total > 0.0) || parts.iter().any(|p| p.0 < 0.0) {
                return Err(Error::Parameter(
                    "blend weights must be nonnegative with a positive sum".into(),
                ));
            }
            for (c, inner) in parts {
                for (v, u) in w.iter_mut().zip(weights(bits, inner)?) {
                    *v += c / total * u;
                }
            }
        }
    }
    Ok(w)
}

/// Builds a normalised distribution over `X_bits`, keeping only points of positive mass.
pub fn gen_distribution(bits: u32, spec: &DistributionSpec) -> Result<FiniteDistribution> {
    if bits == 0 || bits > MAX_DENSE_BITS {
        return Err(Error::Resource(format!(
            "distributions are dense; bits must be in 1..={MAX_DENSE_BITS}"
        )));
    }
    let w = weights(bits, spec)?;
    FiniteDistribution::from_weights(bits, (0..).zip(w).filter(|p| p.1 > 0.0).collect())
}

/// Draws i.i.d. points from a fixed distribution.
#[derive(Clone, Debug)]
pub struct Sampler {
    dist: FiniteDistribution,
    index: WeightedIndex<f64>,
}

impl Sampler {
    pub fn new(dist: FiniteDistribution) -> Result<Self> {
        let index = WeightedIndex::new(dist.support().iter().map(|s| s.1))
            .map_err(|e| Error::Parameter(format!("cannot sample: {e}")))?;
        Ok(Self { dist, index })
    }

    pub fn distribution(&self) -> &FiniteDistribution {
        &self.dist
    }

    pub fn draw(&self, rng: &mut Randomness) -> u64 {
        self.dist.support()[self.index.sample(rng)].0
    }

    pub fn database(&self, m: usize, rng: &mut Randomness) -> Result<Database> {
        Database::new(self.dist.bits(), (0..m).map(|_| self.draw(rng)).collect())
    }

    /// `m` i.i.d. points labeled by `c`.
    pub fn labeled(&self, c: &Concept, m: usize, rng: &mut Randomness) -> Result<LabeledSample> {
        if m == 0 {
            return Err(Error::Precondition(
                "a sample needs at least one example".into(),
            ));
        }
        if c.input_bits() != self.dist.bits() {
            return Err(Error::Domain(
                "concept and distribution bit-widths differ".into(),
            ));
        }
        let points: Vec<u64> = (0..m).map(|_| self.draw(rng)).collect();
        let labels = points.iter().map(|&x| c.contains(x)).collect();
        LabeledSample::new(self.dist.bits(), points, labels)
    }
}

pub fn sample_labeled(
    d: &FiniteDistribution,
    c: &Concept,
    m: usize,
    rng: &mut Randomness,
) -> Result<LabeledSample> {
    Sampler::new(d.clone())?.labeled(c, m, rng)
}

/// A uniformly random member of `class` (rectangles draw each axis interval uniformly among
/// ordered pairs).
pub fn random_concept(class: &ConceptClass, rng: &mut Randomness) -> Result<Concept> {
    match class {
        ConceptClass::Point { bits } => Concept::point(*bits, rng.below(domain_size(*bits))),
        ConceptClass::Threshold { bits } => {
            Concept::threshold(*bits, rng.below(domain_size(*bits) + 1))
        }
        ConceptClass::KPoint { bits, k } => {
            let mut members = std::collections::BTreeSet::new();
            while members.len() < *k as usize {
                members.insert(rng.below(domain_size(*bits)));
            }
            Concept::k_point(*bits, &members.into_iter().collect::<Vec<_>>())
        }
        ConceptClass::Rectangle { bits, axes } => {
            let size = domain_size(*bits);
            let (mut lo, mut hi) = (Vec::new(), Vec::new());
            for _ in 0..*axes {
                let (a, b) = (rng.below(size), rng.below(size));
                lo.push(a.min(b));
                hi.push(a.max(b));
            }
            Concept::rectangle(*bits, &lo, &hi)
        }
        ConceptClass::Labeled(base) => Concept::labeled(random_concept(base, rng)?),
    }
}
