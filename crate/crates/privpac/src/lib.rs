//! Differentially private learners and sanitizers over discrete domains.
//!
//! The crate is organised bottom-up:
//!
//! * [`domain`]: points, databases, concepts, counting queries and sample-size calculators.
//! * [`privacy`]: Laplace noise, the exponential mechanism, the stability-based selector and
//!   composition arithmetic.
//! * [`choosing`]: threshold-gated selection for bounded-growth quality functions.
//! * [`recconcave`]: the recursive solver for quasi-concave promise problems.
//! * [`learners`]: private PAC learners for points, thresholds, rectangles and generic classes.
//! * [`sanitizers`]: private sanitizers for points, k-points and thresholds.
//! * [`reductions`]: block amplification, the label lift and sanitizer-to-learner reductions.
//! * [`harness`]: data generation, experiment runners, the empirical DP auditor and configs.
//!
//! Every randomized routine takes an explicit [`Randomness`] stream so results are reproducible
//! from a 64-bit seed.

pub mod choosing;
pub mod domain;
pub mod error;
pub mod harness;
pub mod learners;
pub mod parallel;
pub mod privacy;
pub mod recconcave;
pub mod reductions;
pub mod rng;
pub mod sanitizers;
pub mod text;

pub use error::{Error, Result};
pub use rng::Randomness;
