//! Symbolic dynamics of the accelerated `3x+1` map.
//!
//! The accelerated map sends an integer `x` coprime to 6 to `(3x+1)/2^k`,
//! where `k` is the exact 2-adic valuation of `3x+1`. Recording the
//! successive valuations `(k_1, ..., k_m)` together with the class of `x`
//! modulo 6 gives a symbol word, and the starting points admitting a fixed
//! word form one arithmetic progression modulo `6 * 2^K` whose image after
//! `m` steps is one residue class modulo `6 * 3^m`.
//!
//! Modules:
//!
//! * [`core_map`]: the map itself, orbits and the log-ratio statistic.
//! * [`structure`]: progression/image pairs built by congruence solving, plus
//!   a brute-force scanning oracle.
//! * [`walk`]: the residue walk `(r_j, delta_j)`, its admissibility rule, the
//!   backward recursion and the exact `rho = kappa + theta / 3^m` split.
//! * [`ensemble`]: the geometric symbol measure, exhaustive preimage tables,
//!   entropy and bucket-mass checks.
//! * [`montecarlo`]: seeded sampling for CLT, drift, Wiener covariance and
//!   `theta` concentration.

pub mod arith;
pub mod core_map;
pub mod ensemble;
mod error;
pub mod montecarlo;
pub mod structure;
pub mod walk;

pub use core_map::{is_pi_member, orbit, t_apply, t_apply_k, z_statistic, OrbitRecord, PiClass, PiElement};
pub use error::{Error, Result};
pub use structure::{
    brute_force_progression, build, delta_from_k, LambdaClass, SamePOutcome, Sign, SigmaProgression,
    StructurePair, StructureRecord, SymbolSequence,
};
pub use walk::{ThetaDecomposition, WalkPath};

/// Exact rational scalar used for residue ratios and dyadic probabilities.
pub type ExactRational = num_rational::BigRational;
