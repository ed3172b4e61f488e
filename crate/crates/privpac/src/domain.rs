//! Discrete domains, databases, concept classes and counting queries.
//!
//! Points of `X_d = {0,1}^d` are machine integers below `2^d`. Multi-axis points used by
//! rectangles pack axis `i` into bits `[i*d, (i+1)*d)`, and labeled points append the label as
//! the lowest bit, so every database in the crate is a flat sequence of `u64` values.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{check_unit_open, Error, Result};

/// Largest supported bit-width.
pub const MAX_BITS: u32 = 62;

/// Default cap on the number of concepts materialised by enumeration.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1 << 22;

pub(crate) fn check_bits(bits: u32) -> Result<()> {
    if (1..=MAX_BITS).contains(&bits) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "bit-width must be in 1..={MAX_BITS}, got {bits}"
        )))
    }
}

/// Number of points in `X_bits`.
pub fn domain_size(bits: u32) -> u64 {
    1u64 << bits
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DomainPoint {
    value: u64,
    bits: u32,
}

impl DomainPoint {
    pub fn new(value: u64, bits: u32) -> Result<Self> {
        check_bits(bits)?;
        if value >= domain_size(bits) {
            return Err(Error::Domain(format!(
                "point {value} does not fit in {bits} bits"
            )));
        }
        Ok(Self { value, bits })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// The labeled point `x ∘ σ` over `bits + 1` bits.
    pub fn with_label(&self, label: bool) -> Result<Self> {
        Self::new((self.value << 1) | label as u64, self.bits + 1)
    }
}

/// An ordered sequence of points sharing one bit-width.
///
/// Neighbouring databases have equal length and differ in exactly one position.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Database {
    bits: u32,
    entries: Vec<u64>,
}

impl Database {
    pub fn new(bits: u32, entries: Vec<u64>) -> Result<Self> {
        check_bits(bits)?;
        let size = domain_size(bits);
        if let Some(x) = entries.iter().find(|&&x| x >= size) {
            return Err(Error::Domain(format!(
                "entry {x} does not fit in {bits} bits"
            )));
        }
        Ok(Self { bits, entries })
    }

    pub fn empty(bits: u32) -> Result<Self> {
        Self::new(bits, Vec::new())
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<u64> {
        self.entries
    }

    pub fn push(&mut self, x: u64) -> Result<()> {
        if x >= domain_size(self.bits) {
            return Err(Error::Domain(format!(
                "entry {x} does not fit in {} bits",
                self.bits
            )));
        }
        self.entries.push(x);
        Ok(())
    }

    /// The neighbour obtained by replacing entry `i` with `x`.
    pub fn replaced(&self, i: usize, x: u64) -> Result<Self> {
        if i >= self.len() {
            return Err(Error::Domain(format!("position {i} out of range")));
        }
        let mut out = self.clone();
        out.entries[i] = x;
        Self::new(out.bits, out.entries)
    }

    pub fn is_neighbor(&self, other: &Database) -> bool {
        self.bits == other.bits
            && self.len() == other.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .filter(|(a, b)| a != b)
                .count()
                == 1
    }

    /// Multiset view: point -> multiplicity.
    pub fn histogram(&self) -> BTreeMap<u64, u64> {
        let mut h = BTreeMap::new();
        for &x in &self.entries {
            *h.entry(x).or_insert(0) += 1;
        }
        h
    }

    pub fn sorted_entries(&self) -> Vec<u64> {
        let mut v = self.entries.clone();
        v.sort_unstable();
        v
    }
}

/// A sequence of labeled points `(x_i, y_i)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledSample {
    bits: u32,
    points: Vec<u64>,
    labels: Vec<bool>,
}

impl LabeledSample {
    pub fn new(bits: u32, points: Vec<u64>, labels: Vec<bool>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        let db = Database::new(bits, points)?;
        Ok(Self {
            bits,
            points: db.entries,
            labels,
        })
    }

    pub fn from_pairs(bits: u32, pairs: &[(u64, bool)]) -> Result<Self> {
        Self::new(
            bits,
            pairs.iter().map(|p| p.0).collect(),
            pairs.iter().map(|p| p.1).collect(),
        )
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[u64] {
        &self.points
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u64, bool)> + '_ {
        self.points.iter().copied().zip(self.labels.iter().copied())
    }

    pub fn unlabeled(&self) -> Database {
        Database {
            bits: self.bits,
            entries: self.points.clone(),
        }
    }

    /// The sample as a database over `X_{bits+1}` with entries `x ∘ y`.
    pub fn lifted(&self) -> Result<Database> {
        Database::new(
            self.bits + 1,
            self.pairs().map(|(x, y)| (x << 1) | y as u64).collect(),
        )
    }

    /// Inverse of [`LabeledSample::lifted`].
    pub fn from_lifted(db: &Database) -> Result<Self> {
        if db.bits() < 2 {
            return Err(Error::Domain(
                "a lifted database needs at least 2 bits".into(),
            ));
        }
        Self::new(
            db.bits() - 1,
            db.entries().iter().map(|v| v >> 1).collect(),
            db.entries().iter().map(|v| v & 1 == 1).collect(),
        )
    }

    pub fn with_labels(&self, labels: Vec<bool>) -> Result<Self> {
        Self::new(self.bits, self.points.clone(), labels)
    }
}

/// An evaluable predicate over a discrete domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Concept {
    /// `c_j(x) = 1` iff `x = j`.
    Point { bits: u32, j: u64 },
    /// `c_t(x) = 1` iff `x < t`, for `t ∈ [0, 2^bits]`.
    Threshold { bits: u32, t: u64 },
    /// Indicator of a set of distinct points (sorted). The empty set is the constant-0 concept.
    KPoint { bits: u32, members: Vec<u64> },
    /// Axis-aligned box over `axes` coordinates of `bits` bits each; `None` is the empty box.
    Rectangle {
        bits: u32,
        axes: u32,
        bounds: Option<Vec<(u64, u64)>>,
    },
    /// `c^label(x ∘ σ) = σ ⊕ c(x)`.
    Labeled(Box<Concept>),
}

impl Concept {
    pub fn point(bits: u32, j: u64) -> Result<Self> {
        DomainPoint::new(j, bits)?;
        Ok(Concept::Point { bits, j })
    }

    pub fn threshold(bits: u32, t: u64) -> Result<Self> {
        check_bits(bits)?;
        if t > domain_size(bits) {
            return Err(Error::Domain(format!("threshold {t} exceeds 2^{bits}")));
        }
        Ok(Concept::Threshold { bits, t })
    }

    pub fn k_point(bits: u32, members: &[u64]) -> Result<Self> {
        check_bits(bits)?;
        let set: BTreeSet<u64> = members.iter().copied().collect();
        if set.len() != members.len() {
            return Err(Error::Domain("k-point members must be distinct".into()));
        }
        for &x in &set {
            DomainPoint::new(x, bits)?;
        }
        Ok(Concept::KPoint {
            bits,
            members: set.into_iter().collect(),
        })
    }

    /// Box `[lo_i, hi_i]` on every axis. Any `lo_i > hi_i` yields the constant-0 rectangle.
    pub fn rectangle(bits: u32, lo: &[u64], hi: &[u64]) -> Result<Self> {
        check_bits(bits)?;
        let axes = lo.len() as u32;
        if lo.len() != hi.len() || axes == 0 {
            return Err(Error::Domain(
                "rectangle bounds need one (lo, hi) per axis".into(),
            ));
        }
        if bits.checked_mul(axes).map_or(true, |w| w > MAX_BITS) {
            return Err(Error::Domain(format!(
                "{axes} axes of {bits} bits exceed {MAX_BITS} bits"
            )));
        }
        for &v in lo.iter().chain(hi) {
            DomainPoint::new(v, bits)?;
        }
        let bounds = if lo.iter().zip(hi).any(|(a, b)| a > b) {
            None
        } else {
            Some(lo.iter().copied().zip(hi.iter().copied()).collect())
        };
        Ok(Concept::Rectangle { bits, axes, bounds })
    }

    pub fn empty_rectangle(bits: u32, axes: u32) -> Result<Self> {
        check_bits(bits)?;
        if axes == 0 || bits * axes > MAX_BITS {
            return Err(Error::Domain("invalid rectangle shape".into()));
        }
        Ok(Concept::Rectangle {
            bits,
            axes,
            bounds: None,
        })
    }

    pub fn labeled(base: Concept) -> Result<Self> {
        if matches!(base, Concept::Labeled(_)) {
            return Err(Error::Domain("cannot lift a labeled concept twice".into()));
        }
        if base.input_bits() + 1 > MAX_BITS {
            return Err(Error::Domain("labeled domain exceeds the bit limit".into()));
        }
        Ok(Concept::Labeled(Box::new(base)))
    }

    /// Bit-width of the points this concept accepts.
    pub fn input_bits(&self) -> u32 {
        match self {
            Concept::Point { bits, .. }
            | Concept::Threshold { bits, .. }
            | Concept::KPoint { bits, .. } => *bits,
            Concept::Rectangle { bits, axes, .. } => bits * axes,
            Concept::Labeled(base) => base.input_bits() + 1,
        }
    }

    /// Evaluation on a raw point that is assumed to fit [`Concept::input_bits`].
    pub fn contains(&self, x: u64) -> bool {
        match self {
            Concept::Point { j, .. } => x == *j,
            Concept::Threshold { t, .. } => x < *t,
            Concept::KPoint { members, .. } => members.binary_search(&x).is_ok(),
            Concept::Rectangle { bits, bounds, .. } => match bounds {
                None => false,
                Some(b) => {
                    let mask = (1u64 << bits) - 1;
                    b.iter().enumerate().all(|(i, &(lo, hi))| {
                        let v = (x >> (i as u32 * bits)) & mask;
                        lo <= v && v <= hi
                    })
                }
            },
            Concept::Labeled(base) => ((x & 1) == 1) ^ base.contains(x >> 1),
        }
    }

    pub fn evaluate(&self, x: &DomainPoint) -> Result<bool> {
        if x.bits() != self.input_bits() {
            return Err(Error::Domain(format!(
                "point has {} bits but the concept expects {}",
                x.bits(),
                self.input_bits()
            )));
        }
        Ok(self.contains(x.value()))
    }

    /// Evaluation on a labeled point `x ∘ label` for a `Labeled` concept.
    pub fn evaluate_labeled(&self, x: &DomainPoint, label: bool) -> Result<bool> {
        self.evaluate(&x.with_label(label)?)
    }

    pub fn class_kind(&self) -> &'static str {
        match self {
            Concept::Point { .. } => "point",
            Concept::Threshold { .. } => "threshold",
            Concept::KPoint { .. } => "k-point",
            Concept::Rectangle { .. } => "rectangle",
            Concept::Labeled(_) => "labeled",
        }
    }

    pub fn lifted(&self) -> Result<Concept> {
        Concept::labeled(self.clone())
    }
}

/// Shape of a concept class.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConceptClass {
    Point { bits: u32 },
    Threshold { bits: u32 },
    KPoint { bits: u32, k: u32 },
    Rectangle { bits: u32, axes: u32 },
    Labeled(Box<ConceptClass>),
}

/// VC dimension, exact or bracketed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VcDimension {
    Exact(u32),
    Bounds { lower: u32, upper: u32 },
}

impl VcDimension {
    /// Largest value consistent with the bound; what sample-size formulas should use.
    pub fn upper(&self) -> u32 {
        match *self {
            VcDimension::Exact(v) => v,
            VcDimension::Bounds { upper, .. } => upper,
        }
    }

    pub fn lower(&self) -> u32 {
        match *self {
            VcDimension::Exact(v) => v,
            VcDimension::Bounds { lower, .. } => lower,
        }
    }
}

/// One realisable labeling of a point set together with a concept producing it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Projection {
    pub dichotomy: Vec<bool>,
    pub concept: Concept,
}

fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

impl ConceptClass {
    pub fn point(bits: u32) -> Result<Self> {
        check_bits(bits)?;
        Ok(ConceptClass::Point { bits })
    }

    pub fn threshold(bits: u32) -> Result<Self> {
        check_bits(bits)?;
        Ok(ConceptClass::Threshold { bits })
    }

    pub fn k_point(bits: u32, k: u32) -> Result<Self> {
        check_bits(bits)?;
        if k == 0 || (bits < 63 && k as u64 > domain_size(bits)) {
            return Err(Error::Domain(format!("k={k} is invalid for {bits} bits")));
        }
        Ok(ConceptClass::KPoint { bits, k })
    }

    pub fn rectangle(bits: u32, axes: u32) -> Result<Self> {
        check_bits(bits)?;
        if axes == 0 || bits * axes > MAX_BITS {
            return Err(Error::Domain(format!(
                "{axes} axes of {bits} bits are not representable"
            )));
        }
        Ok(ConceptClass::Rectangle { bits, axes })
    }

    /// The class `C^label` over one extra bit.
    pub fn labeled(base: ConceptClass) -> Result<Self> {
        if matches!(base, ConceptClass::Labeled(_)) {
            return Err(Error::Unsupported("nested label lift".into()));
        }
        if base.input_bits() + 1 > MAX_BITS {
            return Err(Error::Domain("labeled domain exceeds the bit limit".into()));
        }
        Ok(ConceptClass::Labeled(Box::new(base)))
    }

    pub fn input_bits(&self) -> u32 {
        match self {
            ConceptClass::Point { bits }
            | ConceptClass::Threshold { bits }
            | ConceptClass::KPoint { bits, .. } => *bits,
            ConceptClass::Rectangle { bits, axes } => bits * axes,
            ConceptClass::Labeled(b) => b.input_bits() + 1,
        }
    }

    /// Number of distinct concepts, if it fits in a `u128`.
    pub fn size(&self) -> Option<u128> {
        match self {
            ConceptClass::Point { bits } => Some(1u128 << bits),
            ConceptClass::Threshold { bits } => Some((1u128 << bits) + 1),
            ConceptClass::KPoint { bits, k } => binomial(domain_size(*bits), *k as u64),
            ConceptClass::Rectangle { bits, axes } => {
                let s = 1u128 << bits;
                let per_axis = s * (s + 1) / 2;
                let mut acc: u128 = 1;
                for _ in 0..*axes {
                    acc = acc.checked_mul(per_axis)?;
                }
                acc.checked_add(1)
            }
            ConceptClass::Labeled(b) => b.size(),
        }
    }

    pub fn vc_dimension(&self) -> VcDimension {
        match self {
            ConceptClass::Point { .. } | ConceptClass::Threshold { .. } => VcDimension::Exact(1),
            ConceptClass::KPoint { k, .. } => VcDimension::Exact(*k),
            ConceptClass::Rectangle { axes, .. } => VcDimension::Exact(2 * axes),
            ConceptClass::Labeled(b) => {
                let v = b.vc_dimension().upper();
                VcDimension::Bounds {
                    lower: v,
                    upper: 2 * v,
                }
            }
        }
    }

    /// Whether `c` is a member of this class (used for properness checks).
    pub fn contains_concept(&self, c: &Concept) -> bool {
        match (self, c) {
            (ConceptClass::Point { bits }, Concept::Point { bits: b, .. }) => bits == b,
            (ConceptClass::Threshold { bits }, Concept::Threshold { bits: b, .. }) => bits == b,
            (ConceptClass::KPoint { bits, k }, Concept::KPoint { bits: b, members }) => {
                bits == b && members.len() == *k as usize
            }
            (
                ConceptClass::Rectangle { bits, axes },
                Concept::Rectangle {
                    bits: b, axes: a, ..
                },
            ) => bits == b && axes == a,
            (ConceptClass::Labeled(base), Concept::Labeled(inner)) => base.contains_concept(inner),
            _ => false,
        }
    }

    /// All concepts in canonical index order, failing if the class exceeds `budget`.
    ///
    /// Order: points and thresholds ascending; k-point sets lexicographically; the empty
    /// rectangle first, then boxes ordered lexicographically by `(lo_0, hi_0, lo_1, hi_1, ...)`.
    pub fn enumerate(&self, budget: u64) -> Result<Vec<Concept>> {
        match self.size() {
            Some(s) if s <= budget as u128 => {}
            _ => {
                return Err(Error::Resource(format!(
                    "class of size {:?} exceeds the enumeration budget {budget}",
                    self.size()
                )))
            }
        }
        Ok(match self {
            ConceptClass::Point { bits } => (0..domain_size(*bits))
                .map(|j| Concept::Point { bits: *bits, j })
                .collect(),
            ConceptClass::Threshold { bits } => (0..=domain_size(*bits))
                .map(|t| Concept::Threshold { bits: *bits, t })
                .collect(),
            ConceptClass::KPoint { bits, k } => {
                let n = domain_size(*bits);
                let k = *k as usize;
                let mut out = Vec::new();
                let mut idx: Vec<u64> = (0..k as u64).collect();
                loop {
                    out.push(Concept::KPoint {
                        bits: *bits,
                        members: idx.clone(),
                    });
                    // advance to the next combination
                    let mut i = k;
                    loop {
                        if i == 0 {
                            return Ok(out);
                        }
                        i -= 1;
                        if idx[i] < n - (k - i) as u64 {
                            break;
                        }
                    }
                    idx[i] += 1;
                    for t in i + 1..k {
                        idx[t] = idx[t - 1] + 1;
                    }
                }
            }
            ConceptClass::Rectangle { bits, axes } => {
                let s = domain_size(*bits);
                let intervals: Vec<(u64, u64)> =
                    (0..s).flat_map(|a| (a..s).map(move |b| (a, b))).collect();
                let mut out = vec![Concept::Rectangle {
                    bits: *bits,
                    axes: *axes,
                    bounds: None,
                }];
                let mut counter = vec![0usize; *axes as usize];
                loop {
                    out.push(Concept::Rectangle {
                        bits: *bits,
                        axes: *axes,
                        bounds: Some(counter.iter().map(|&c| intervals[c]).collect()),
                    });
                    let mut i = counter.len();
                    loop {
                        if i == 0 {
                            return Ok(out);
                        }
                        i -= 1;
                        counter[i] += 1;
                        if counter[i] < intervals.len() {
                            break;
                        }
                        counter[i] = 0;
                    }
                }
            }
            ConceptClass::Labeled(base) => base
                .enumerate(budget)?
                .into_iter()
                .map(|c| Concept::Labeled(Box::new(c)))
                .collect(),
        })
    }

    /// The label-lifted class (`C -> C^label`).
    pub fn lift(&self) -> Result<ConceptClass> {
        ConceptClass::labeled(self.clone())
    }

    pub fn name(&self) -> String {
        match self {
            ConceptClass::Point { bits } => format!("POINT_{bits}"),
            ConceptClass::Threshold { bits } => format!("THRESH_{bits}"),
            ConceptClass::KPoint { bits, k } => format!("{k}-POINT_{bits}"),
            ConceptClass::Rectangle { bits, axes } => format!("RECTANGLE_{bits}^{axes}"),
            ConceptClass::Labeled(b) => format!("LABEL({})", b.name()),
        }
    }
}

/// Distinct points of `b`, ascending.
fn canonical_set(b: &[u64]) -> Vec<u64> {
    let set: BTreeSet<u64> = b.iter().copied().collect();
    set.into_iter().collect()
}

/// One canonical concept per dichotomy of `class` realisable on the point set `b`.
///
/// Points, thresholds and rectangles use direct constructors; other classes are enumerated
/// within `budget`. The point set is deduplicated and sorted, and dichotomies refer to that
/// order.
pub fn project_class(class: &ConceptClass, b: &[u64], budget: u64) -> Result<Vec<Projection>> {
    let bits = class.input_bits();
    for &x in b {
        DomainPoint::new(x, bits)?;
    }
    let pts = canonical_set(b);
    let l = pts.len();
    match class {
        ConceptClass::Point { bits } => {
            let mut out = Vec::with_capacity(l + 1);
            if (l as u64) < domain_size(*bits) {
                // smallest point outside the set realises the all-zero labeling
                let mut z = 0;
                for &p in &pts {
                    if p == z {
                        z += 1;
                    } else if p > z {
                        break;
                    }
                }
                out.push(Projection {
                    dichotomy: vec![false; l],
                    concept: Concept::Point { bits: *bits, j: z },
                });
            }
            for (i, &p) in pts.iter().enumerate() {
                let mut d = vec![false; l];
                d[i] = true;
                out.push(Projection {
                    dichotomy: d,
                    concept: Concept::Point { bits: *bits, j: p },
                });
            }
            Ok(out)
        }
        ConceptClass::Threshold { bits } => Ok((0..=l)
            .map(|i| Projection {
                dichotomy: (0..l).map(|k| k < i).collect(),
                concept: Concept::Threshold {
                    bits: *bits,
                    t: if i == 0 { 0 } else { pts[i - 1] + 1 },
                },
            })
            .collect()),
        ConceptClass::Rectangle { bits, axes } => {
            let mask = (1u64 << bits) - 1;
            let coord = |x: u64, a: u32| (x >> (a * bits)) & mask;
            let mut seen: BTreeMap<Vec<bool>, Concept> = BTreeMap::new();
            seen.insert(
                vec![false; l],
                Concept::Rectangle {
                    bits: *bits,
                    axes: *axes,
                    bounds: None,
                },
            );
            if l == 0 {
                return Ok(seen
                    .into_iter()
                    .map(|(dichotomy, concept)| Projection { dichotomy, concept })
                    .collect());
            }
            // Every non-empty realisable subset equals B ∩ (its bounding box); bounding boxes
            // have coordinates taken from B, so scanning those boxes finds every dichotomy.
            let per_axis: Vec<Vec<u64>> = (0..*axes)
                .map(|a| canonical_set(&pts.iter().map(|&x| coord(x, a)).collect::<Vec<_>>()))
                .collect();
            let candidates: u128 = per_axis
                .iter()
                .map(|v| (v.len() * v.len()) as u128)
                .product();
            if candidates > budget as u128 {
                return Err(Error::Resource(format!(
                    "{candidates} candidate boxes exceed the budget {budget}"
                )));
            }
            let mut choice = vec![(0usize, 0usize); *axes as usize];
            'outer: loop {
                if choice.iter().all(|&(lo, hi)| lo <= hi) {
                    let bounds: Vec<(u64, u64)> = choice
                        .iter()
                        .enumerate()
                        .map(|(a, &(lo, hi))| (per_axis[a][lo], per_axis[a][hi]))
                        .collect();
                    let c = Concept::Rectangle {
                        bits: *bits,
                        axes: *axes,
                        bounds: Some(bounds),
                    };
                    let d: Vec<bool> = pts.iter().map(|&x| c.contains(x)).collect();
                    if d.iter().any(|&v| v) {
                        // keep the tightest box: the bounding box of the realised subset
                        let sub: Vec<u64> = pts
                            .iter()
                            .zip(&d)
                            .filter(|(_, &v)| v)
                            .map(|(&x, _)| x)
                            .collect();
                        let bb: Vec<(u64, u64)> = (0..*axes)
                            .map(|a| {
                                let cs = sub.iter().map(|&x| coord(x, a));
                                (cs.clone().min().unwrap(), cs.max().unwrap())
                            })
                            .collect();
                        seen.entry(d).or_insert(Concept::Rectangle {
                            bits: *bits,
                            axes: *axes,
                            bounds: Some(bb),
                        });
                    }
                }
                let mut a = choice.len();
                loop {
                    if a == 0 {
                        break 'outer;
                    }
                    a -= 1;
                    let n = per_axis[a].len();
                    choice[a].1 += 1;
                    if choice[a].1 < n {
                        break;
                    }
                    choice[a].0 += 1;
                    if choice[a].0 < n {
                        choice[a].1 = choice[a].0;
                        break;
                    }
                    choice[a] = (0, 0);
                }
            }
            Ok(seen
                .into_iter()
                .map(|(dichotomy, concept)| Projection { dichotomy, concept })
                .collect())
        }
        _ => {
            let mut seen: BTreeMap<Vec<bool>, Concept> = BTreeMap::new();
            for c in class.enumerate(budget)? {
                let d: Vec<bool> = pts.iter().map(|&x| c.contains(x)).collect();
                seen.entry(d).or_insert(c);
            }
            Ok(seen
                .into_iter()
                .map(|(dichotomy, concept)| Projection { dichotomy, concept })
                .collect())
        }
    }
}

/// Fraction of entries of `s` satisfying `c`.
pub fn counting_query(c: &Concept, s: &Database) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::Precondition(
            "counting query on an empty database".into(),
        ));
    }
    if s.bits() != c.input_bits() {
        return Err(Error::Domain(format!(
            "database has {} bits but the concept expects {}",
            s.bits(),
            c.input_bits()
        )));
    }
    Ok(s.entries().iter().filter(|&&x| c.contains(x)).count() as f64 / s.len() as f64)
}

/// Fraction of sample entries where `h` disagrees with the label.
pub fn empirical_error(h: &Concept, s: &LabeledSample) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::Precondition(
            "empirical error on an empty sample".into(),
        ));
    }
    if s.bits() != h.input_bits() {
        return Err(Error::Domain(
            "sample and hypothesis bit-widths differ".into(),
        ));
    }
    Ok(s.pairs().filter(|&(x, y)| h.contains(x) != y).count() as f64 / s.len() as f64)
}

/// A finite probability distribution over `X_bits`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteDistribution {
    bits: u32,
    support: Vec<(u64, f64)>,
}

impl FiniteDistribution {
    /// Masses must be nonnegative and sum to 1 within `1e-12`.
    pub fn new(bits: u32, support: Vec<(u64, f64)>) -> Result<Self> {
        check_bits(bits)?;
        let mut total = 0.0;
        for &(x, p) in &support {
            DomainPoint::new(x, bits)?;
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::Parameter(format!(
                    "mass {p} at {x} is not a probability"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { bits, support })
    }

    /// Normalises nonnegative weights to a distribution.
    pub fn from_weights(bits: u32, weights: Vec<(u64, f64)>) -> Result<Self> {
        let total: f64 = weights.iter().map(|w| w.1).sum();
        if !(total > 0.0 && total.is_finite()) || weights.iter().any(|w| w.1 < 0.0) {
            return Err(Error::Parameter(
                "weights must be nonnegative with a positive sum".into(),
            ));
        }
        let mut support: Vec<(u64, f64)> =
            weights.into_iter().map(|(x, w)| (x, w / total)).collect();
        // absorb rounding so the sum is 1 within the constructor tolerance
        let s: f64 = support.iter().map(|w| w.1).sum();
        if let Some(last) = support.iter_mut().rev().find(|w| w.1 > 0.0) {
            last.1 = (last.1 + (1.0 - s)).max(0.0);
        }
        Self::new(bits, support)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn support(&self) -> &[(u64, f64)] {
        &self.support
    }

    /// `D(J)` for the set of points accepted by `c`.
    pub fn mass_of(&self, c: &Concept) -> f64 {
        self.support
            .iter()
            .filter(|(x, _)| c.contains(*x))
            .map(|w| w.1)
            .sum()
    }
}

/// `Pr_{x~D}[h(x) != c(x)]`, computed exactly over the support.
pub fn generalization_error(c: &Concept, h: &Concept, d: &FiniteDistribution) -> Result<f64> {
    if c.input_bits() != d.bits() || h.input_bits() != d.bits() {
        return Err(Error::Domain(
            "concepts and distribution use different bit-widths".into(),
        ));
    }
    Ok(d.support()
        .iter()
        .filter(|(x, _)| c.contains(*x) != h.contains(*x))
        .map(|w| w.1)
        .sum())
}

/// `⌈50·vc/α² · ln(1/(αβ))⌉`: agnostic uniform-convergence sample size.
pub fn agnostic_sample_bound(vc: u32, alpha: f64, beta: f64) -> Result<u64> {
    check_unit_open("alpha", alpha)?;
    check_unit_open("beta", beta)?;
    Ok((50.0 * vc as f64 / (alpha * alpha) * (1.0 / (alpha * beta)).ln()).ceil() as u64)
}

/// `⌈(8/α)(vc·ln(16/α) + ln(2/β))⌉`: realizable-case sample size.
pub fn realizable_sample_bound(vc: u32, alpha: f64, beta: f64) -> Result<u64> {
    check_unit_open("alpha", alpha)?;
    check_unit_open("beta", beta)?;
    Ok((8.0 / alpha * (vc as f64 * (16.0 / alpha).ln() + (2.0 / beta).ln())).ceil() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn db(bits: u32, v: &[u64]) -> Database {
        Database::new(bits, v.to_vec()).unwrap()
    }

    #[test]
    fn evaluation_examples() {
        let p5 = Concept::point(4, 5).unwrap();
        assert!(p5.evaluate(&DomainPoint::new(5, 4).unwrap()).unwrap());
        let t0 = Concept::threshold(4, 0).unwrap();
        assert!((0..16).all(|x| !t0.contains(x)));
        let l3 = Concept::labeled(Concept::point(4, 3).unwrap()).unwrap();
        let x3 = DomainPoint::new(3, 4).unwrap();
        assert!(!l3.evaluate_labeled(&x3, true).unwrap());
        assert!(l3.evaluate_labeled(&x3, false).unwrap());
        assert!(matches!(
            p5.evaluate(&DomainPoint::new(5, 5).unwrap()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn bit_width_limits() {
        assert!(DomainPoint::new(0, 63).is_err());
        assert!(DomainPoint::new(8, 3).is_err());
        assert!(Database::new(3, vec![1, 9]).is_err());
        assert!(Concept::threshold(3, 8).is_ok());
        assert!(Concept::threshold(3, 9).is_err());
    }

    #[test]
    fn empty_rectangle_is_normalised() {
        let r = Concept::rectangle(3, &[4, 1], &[2, 5]).unwrap();
        assert_eq!(r, Concept::empty_rectangle(3, 2).unwrap());
        assert!((0..64).all(|x| !r.contains(x)));
        let b = Concept::rectangle(3, &[1, 2], &[3, 2]).unwrap();
        // axis 0 in the low bits: x = x0 + 8*x1
        assert!(b.contains(1 + 8 * 2));
        assert!(!b.contains(1 + 8 * 3));
        assert!(!b.contains(4 + 8 * 2));
    }

    #[test]
    fn counting_query_examples() {
        let s = db(3, &[1, 2, 3, 3]);
        assert_eq!(
            counting_query(&Concept::point(3, 3).unwrap(), &s).unwrap(),
            0.5
        );
        assert_eq!(
            counting_query(&Concept::threshold(3, 8).unwrap(), &s).unwrap(),
            1.0
        );
        assert_eq!(
            counting_query(&Concept::threshold(3, 0).unwrap(), &s).unwrap(),
            0.0
        );
        assert!(matches!(
            counting_query(&Concept::point(3, 3).unwrap(), &db(3, &[])),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn empirical_error_examples() {
        let s = LabeledSample::from_pairs(3, &[(2, true), (5, false)]).unwrap();
        assert_eq!(
            empirical_error(&Concept::threshold(3, 4).unwrap(), &s).unwrap(),
            0.0
        );
        let flipped = s.with_labels(vec![false, true]).unwrap();
        assert_eq!(
            empirical_error(&Concept::threshold(3, 4).unwrap(), &flipped).unwrap(),
            1.0
        );
    }

    #[test]
    fn generalization_error_examples() {
        let d = FiniteDistribution::from_weights(3, (0..8).map(|x| (x, 1.0)).collect()).unwrap();
        let c = Concept::threshold(3, 4).unwrap();
        let h = Concept::threshold(3, 6).unwrap();
        assert!((generalization_error(&c, &h, &d).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(generalization_error(&c, &c, &d).unwrap(), 0.0);
        // complement of THRESH(4) on 3 bits is the box [4,7]
        let comp = Concept::rectangle(3, &[4], &[7]).unwrap();
        assert!((generalization_error(&c, &comp, &d).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distribution_validation() {
        assert!(FiniteDistribution::new(2, vec![(0, 0.5), (1, 0.4)]).is_err());
        assert!(FiniteDistribution::new(2, vec![(0, 0.5), (1, 0.5)]).is_ok());
        assert!(FiniteDistribution::new(2, vec![(0, 1.5), (1, -0.5)]).is_err());
    }

    #[test]
    fn vc_table() {
        assert_eq!(
            ConceptClass::rectangle(4, 3).unwrap().vc_dimension(),
            VcDimension::Exact(6)
        );
        assert_eq!(
            ConceptClass::point(10).unwrap().vc_dimension(),
            VcDimension::Exact(1)
        );
        assert_eq!(
            ConceptClass::threshold(5)
                .unwrap()
                .lift()
                .unwrap()
                .vc_dimension(),
            VcDimension::Bounds { lower: 1, upper: 2 }
        );
        assert_eq!(
            ConceptClass::k_point(4, 3).unwrap().vc_dimension(),
            VcDimension::Exact(3)
        );
        assert!(ConceptClass::labeled(ConceptClass::point(3).unwrap().lift().unwrap()).is_err());
    }

    /// Largest shattered subset, by exhaustive search.
    fn brute_vc(class: &ConceptClass) -> u32 {
        let concepts = class.enumerate(1 << 20).unwrap();
        let n = domain_size(class.input_bits());
        let points: Vec<u64> = (0..n).collect();
        let mut best = 0;
        for size in 1..=6usize.min(n as usize) {
            let mut found = false;
            let mut idx: Vec<usize> = (0..size).collect();
            'combo: loop {
                let set: Vec<u64> = idx.iter().map(|&i| points[i]).collect();
                let patterns: BTreeSet<u64> = concepts
                    .iter()
                    .map(|c| {
                        set.iter()
                            .enumerate()
                            .fold(0u64, |acc, (i, &x)| acc | ((c.contains(x) as u64) << i))
                    })
                    .collect();
                if patterns.len() == 1 << size {
                    found = true;
                    break 'combo;
                }
                let mut i = size;
                loop {
                    if i == 0 {
                        break 'combo;
                    }
                    i -= 1;
                    if idx[i] < n as usize - (size - i) {
                        break;
                    }
                }
                idx[i] += 1;
                for t in i + 1..size {
                    idx[t] = idx[t - 1] + 1;
                }
            }
            if found {
                best = size as u32;
            } else {
                break;
            }
        }
        best
    }

    #[test]
    fn vc_matches_shattering_search() {
        for bits in 1..=4 {
            assert_eq!(brute_vc(&ConceptClass::point(bits).unwrap()), 1);
            assert_eq!(brute_vc(&ConceptClass::threshold(bits).unwrap()), 1);
        }
        for bits in 2..=4 {
            for k in 1..=2 {
                let c = ConceptClass::k_point(bits, k).unwrap();
                assert_eq!(brute_vc(&c), c.vc_dimension().upper());
            }
        }
        assert_eq!(brute_vc(&ConceptClass::rectangle(2, 1).unwrap()), 2);
        assert_eq!(brute_vc(&ConceptClass::rectangle(2, 2).unwrap()), 4);
        let lifted = ConceptClass::point(2).unwrap().lift().unwrap();
        let v = brute_vc(&lifted);
        let b = lifted.vc_dimension();
        assert!(b.lower() <= v && v <= b.upper());
    }

    #[test]
    fn sample_bounds() {
        assert_eq!(agnostic_sample_bound(1, 0.1, 0.1).unwrap(), 23026);
        assert_eq!(agnostic_sample_bound(2, 0.1, 0.1).unwrap(), 46052);
        // the log term is symmetric in (α, β); only the 1/α² factor differs on a swap
        let ab = agnostic_sample_bound(3, 0.2, 0.05).unwrap() as f64 * 0.04;
        let ba = agnostic_sample_bound(3, 0.05, 0.2).unwrap() as f64 * 0.0025;
        assert!((ab - ba).abs() < 0.05);
        // 32·(ln 64 + ln 20) = 228.95
        assert_eq!(realizable_sample_bound(1, 0.25, 0.1).unwrap(), 229);
        assert!(
            realizable_sample_bound(1, 0.99, 0.1).unwrap()
                < realizable_sample_bound(1, 0.01, 0.1).unwrap()
        );
        let one = 8.0 / 0.25 * (16.0f64 / 0.25).ln();
        let diff = realizable_sample_bound(2, 0.25, 0.1).unwrap() as f64
            - realizable_sample_bound(1, 0.25, 0.1).unwrap() as f64;
        assert!((diff - one).abs() <= 1.0);
        assert!(agnostic_sample_bound(1, 0.0, 0.1).is_err());
    }

    #[test]
    fn projection_examples() {
        let p = project_class(&ConceptClass::point(3).unwrap(), &[3, 5], 1 << 20).unwrap();
        let d: BTreeSet<Vec<bool>> = p.iter().map(|x| x.dichotomy.clone()).collect();
        assert_eq!(
            d,
            [vec![false, false], vec![true, false], vec![false, true]]
                .into_iter()
                .collect()
        );
        let t = project_class(&ConceptClass::threshold(3).unwrap(), &[2, 7], 1 << 20).unwrap();
        let d: Vec<Vec<bool>> = t.iter().map(|x| x.dichotomy.clone()).collect();
        assert_eq!(
            d,
            vec![vec![false, false], vec![true, false], vec![true, true]]
        );
        let e = project_class(&ConceptClass::point(3).unwrap(), &[], 1 << 20).unwrap();
        assert_eq!(e.len(), 1);
        assert!(e[0].dichotomy.is_empty());
    }

    /// Projection via full enumeration: the reference for the direct constructors.
    fn projection_oracle(class: &ConceptClass, b: &[u64]) -> BTreeSet<Vec<bool>> {
        let pts = canonical_set(b);
        class
            .enumerate(1 << 22)
            .unwrap()
            .iter()
            .map(|c| pts.iter().map(|&x| c.contains(x)).collect())
            .collect()
    }

    proptest! {
        #[test]
        fn projection_matches_enumeration(
            kind in 0usize..4,
            raw in proptest::collection::vec(0u64..16, 0..7),
        ) {
            let class = match kind {
                0 => ConceptClass::point(4).unwrap(),
                1 => ConceptClass::threshold(4).unwrap(),
                2 => ConceptClass::rectangle(2, 2).unwrap(),
                _ => ConceptClass::k_point(4, 2).unwrap(),
            };
            let proj = project_class(&class, &raw, 1 << 22).unwrap();
            let pts = canonical_set(&raw);
            let got: BTreeSet<Vec<bool>> = proj.iter().map(|p| p.dichotomy.clone()).collect();
            prop_assert_eq!(got.len(), proj.len());
            prop_assert_eq!(&got, &projection_oracle(&class, &raw));
            prop_assert!((proj.len() as u128) <= (1u128 << pts.len()).min(class.size().unwrap()));
            for p in &proj {
                prop_assert!(class.contains_concept(&p.concept));
                let real: Vec<bool> = pts.iter().map(|&x| p.concept.contains(x)).collect();
                prop_assert_eq!(&real, &p.dichotomy);
            }
        }

        #[test]
        fn counting_query_has_sensitivity_one_over_m(
            entries in proptest::collection::vec(0u64..8, 1..5),
            pos in 0usize..4,
            replacement in 0u64..8,
        ) {
            let s = Database::new(3, entries.clone()).unwrap();
            let pos = pos % entries.len();
            let s2 = s.replaced(pos, replacement).unwrap();
            for c in ConceptClass::threshold(3).unwrap().enumerate(100).unwrap()
                .into_iter()
                .chain(ConceptClass::point(3).unwrap().enumerate(100).unwrap())
            {
                let a = counting_query(&c, &s).unwrap();
                let b = counting_query(&c, &s2).unwrap();
                prop_assert!((0.0..=1.0).contains(&a));
                prop_assert!((a - b).abs() <= 1.0 / entries.len() as f64 + 1e-12);
            }
        }
    }

    #[test]
    fn lifted_counting_query_equals_empirical_error() {
        // exhaustive over all labeled samples of size ≤ 3 on 2 bits, every point/threshold
        let classes = [
            ConceptClass::point(2).unwrap(),
            ConceptClass::threshold(2).unwrap(),
        ];
        for m in 1..=3u32 {
            for code in 0..(8u64.pow(m)) {
                let pairs: Vec<(u64, bool)> = (0..m)
                    .map(|i| {
                        let z = (code >> (3 * i)) & 7;
                        (z >> 1, z & 1 == 1)
                    })
                    .collect();
                let s = LabeledSample::from_pairs(2, &pairs).unwrap();
                let lifted = s.lifted().unwrap();
                assert_eq!(LabeledSample::from_lifted(&lifted).unwrap(), s);
                for class in &classes {
                    for c in class.enumerate(100).unwrap() {
                        let q = counting_query(&c.lifted().unwrap(), &lifted).unwrap();
                        assert!((q - empirical_error(&c, &s).unwrap()).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn enumeration_sizes_and_budget() {
        for class in [
            ConceptClass::point(3).unwrap(),
            ConceptClass::threshold(3).unwrap(),
            ConceptClass::k_point(3, 3).unwrap(),
            ConceptClass::rectangle(2, 2).unwrap(),
            ConceptClass::threshold(3).unwrap().lift().unwrap(),
        ] {
            let all = class.enumerate(1 << 20).unwrap();
            assert_eq!(all.len() as u128, class.size().unwrap());
            let distinct: BTreeSet<&Concept> = all.iter().collect();
            assert_eq!(distinct.len(), all.len());
            assert!(all.iter().all(|c| class.contains_concept(c)));
        }
        assert!(matches!(
            ConceptClass::point(30).unwrap().enumerate(1000),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn neighbor_relation_is_positional() {
        let a = db(3, &[1, 2, 3]);
        assert!(a.is_neighbor(&db(3, &[1, 7, 3])));
        assert!(!a.is_neighbor(&db(3, &[3, 2, 1])));
        assert!(!a.is_neighbor(&db(3, &[1, 2])));
    }
}
