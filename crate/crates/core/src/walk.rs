//! The residue walk `(r_j, delta_j)` traced by a word, and the exact
//! `rho = kappa + theta / 3^m` split of the normalized image residue.
//!
//! One step from depth `j-1` to `j` satisfies
//! `2^k r_j - 3^j t_j = 3 r_{j-1} + c(k, delta_j, delta_{j-1})` with
//! `-c = (a1 delta_j - delta_{j-1}) / 2` and `2^k = delta_j + 3 a1`.
//! The walk starts at `(r_0, delta_0) = (0, eps)`.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{pow2, pow3};
use crate::structure::{build_prefixes, delta_from_k, Sign, SymbolSequence};
use crate::{Error, Result};

/// `2^k = delta + 3 a1`, `a1 = 2 a2 + 1`, `a2 = g + 3 a3`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KDecomposition {
    pub k: u32,
    pub delta: Sign,
    pub a1: BigInt,
    pub a2: BigInt,
    pub a3: BigInt,
    pub g: u8,
}

pub fn k_decompose(k: u32) -> KDecomposition {
    let delta = delta_from_k(k);
    let a1: BigInt = (BigInt::from(pow2(k as u64)) - delta.value()) / 3;
    debug_assert!(a1.is_odd());
    let a2: BigInt = (&a1 - 1) / 2;
    let (a3, g) = a2.div_mod_floor(&BigInt::from(3));
    KDecomposition { k, delta, a1, a2, a3, g: g.to_u8().expect("g in 0..3") }
}

/// `r = h + 3 r1` with `h in {0, 1, 2}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RDecomposition {
    pub r: BigUint,
    pub h: u8,
    pub r1: BigUint,
}

impl RDecomposition {
    pub fn new(r: &BigUint) -> Self {
        let (r1, h) = r.div_rem(&BigUint::from(3u8));
        RDecomposition { r: r.clone(), h: h.to_u8().expect("h in 0..3"), r1 }
    }
}

/// `c(k, delta, delta_prev) = (delta_prev - a1 delta) / 2`.
pub fn c_coefficient(k: u32, delta: Sign, delta_prev: Sign) -> Result<BigInt> {
    let forced = delta_from_k(k);
    if delta != forced {
        return Err(Error::DeltaMismatch { k, expected: forced.value(), got: delta.value() });
    }
    let a1 = k_decompose(k).a1;
    let twice = BigInt::from(delta_prev.value()) - a1 * delta.value();
    debug_assert!(twice.is_even());
    Ok(twice / 2)
}

/// Whether a step with symbol `k` can end in `(r, delta)` coming from sign
/// `delta_prev`: `delta` must match the parity of `k`, and
/// `h + g + (1 - delta_prev delta)/2 = 0 (mod 3)`.
pub fn admissible_k(r: &BigUint, delta: Sign, delta_prev: Sign, k: u32) -> bool {
    if delta_from_k(k) != delta {
        return false;
    }
    let h = RDecomposition::new(r).h as u32;
    let g = k_decompose(k).g as u32;
    let flip = if delta_prev == delta { 0 } else { 1 };
    (h + g + flip).is_multiple_of(3)
}

/// Recovers `r_{m-1} in [0, 3^{m-1})` from `(r_m, delta_m, k_m, delta_{m-1})`.
pub fn backward_step(r: &BigUint, delta: Sign, k: u32, delta_prev: Sign, m: usize) -> Result<BigUint> {
    if m == 0 || r >= &pow3(m) {
        return Err(Error::InvalidArgument(format!("r={r} is not a residue mod 3^{m}")));
    }
    if !admissible_k(r, delta, delta_prev, k) {
        return Err(Error::Inadmissible { r: r.to_string(), delta: delta.value(), delta_prev: delta_prev.value(), k });
    }
    let c = c_coefficient(k, delta, delta_prev)?;
    let n = BigInt::from(pow2(k as u64) * r) - c;
    let (third, rem) = n.div_mod_floor(&BigInt::from(3));
    debug_assert!(rem.is_zero(), "admissibility makes 2^k r - c divisible by 3");
    let prev = third.mod_floor(&BigInt::from(pow3(m - 1)));
    Ok(prev.to_biguint().expect("nonnegative"))
}

/// States `(r_j, delta_j)` for `j = 0..=m`, starting at `(0, eps)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkPath {
    pub seq: SymbolSequence,
    pub states: Vec<(BigUint, Sign)>,
}

pub fn walk_path(seq: &SymbolSequence) -> WalkPath {
    let mut states = vec![(BigUint::zero(), seq.eps())];
    states.extend(build_prefixes(seq).into_iter().map(|p| (p.lambda.r, p.lambda.delta)));
    for (j, &k) in seq.ks().iter().enumerate() {
        let (r, delta) = &states[j + 1];
        let prev = backward_step(r, *delta, k, states[j].1, j + 1).expect("forward state is admissible");
        assert_eq!(prev, states[j].0, "backward step disagrees with forward walk at depth {}", j + 1);
    }
    WalkPath { seq: seq.clone(), states }
}

/// Runs [`backward_step`] from `(r_m, delta_m)` down to depth 0 along the
/// reversed word. Returns `r_m, r_{m-1}, ..., r_0`.
pub fn backward_fold(seq: &SymbolSequence, r_m: &BigUint, delta_m: Sign) -> Result<Vec<BigUint>> {
    let ks = seq.ks();
    let mut out = vec![r_m.clone()];
    let mut r = r_m.clone();
    let mut delta = delta_m;
    for j in (1..=ks.len()).rev() {
        let delta_prev = if j >= 2 { delta_from_k(ks[j - 2]) } else { seq.eps() };
        r = backward_step(&r, delta, ks[j - 1], delta_prev, j)?;
        delta = delta_prev;
        out.push(r.clone());
    }
    Ok(out)
}

/// `rho = R / 3^m`, `kappa = q / 2^K`, and `theta` with
/// `rho = kappa + theta / 3^m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThetaDecomposition {
    #[serde(with = "rational_wire")]
    pub rho: BigRational,
    #[serde(with = "rational_wire")]
    pub kappa: BigRational,
    #[serde(with = "rational_wire")]
    pub theta: BigRational,
}

/// `theta * 2^K` as an integer, with `K`:
/// `theta = sum_s 3^{m-s} c_s / 2^{k_s + ... + k_m}` and `delta_0 = eps`.
pub fn theta_dyadic(seq: &SymbolSequence) -> (BigInt, u64) {
    let mut acc = BigInt::zero();
    let mut shift = 0u64;
    let mut delta_prev = seq.eps();
    for &k in seq.ks() {
        let delta = delta_from_k(k);
        let c = c_coefficient(k, delta, delta_prev).expect("delta forced by k");
        acc = acc * 3 + (c << shift);
        shift += k as u64;
        delta_prev = delta;
    }
    (acc, shift)
}

pub fn theta(seq: &SymbolSequence) -> BigRational {
    let (num, bits) = theta_dyadic(seq);
    BigRational::new(num, BigInt::from(pow2(bits)))
}

pub fn theta_decompose(seq: &SymbolSequence) -> ThetaDecomposition {
    let pair = build_prefixes(seq).pop().expect("nonempty word");
    let scale = BigInt::from(pow3(seq.depth()));
    let rho = BigRational::new(BigInt::from(pair.image_base.clone()), scale.clone());
    let kappa = BigRational::new(BigInt::from(pair.sigma.q.clone()), BigInt::from(pair.sigma.period()));
    let theta = theta(seq);
    assert_eq!(rho, &kappa + &theta / BigRational::from_integer(scale), "rho = kappa + theta/3^m for {seq}");
    ThetaDecomposition { rho, kappa, theta }
}

/// Rationals on the wire as `{"num": "...", "den": "..."}`.
pub mod rational_wire {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wire {
        num: String,
        den: String,
    }

    pub fn serialize<S: Serializer>(v: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        Wire { num: v.numer().to_string(), den: v.denom().to_string() }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        use serde::de::Error;
        let w = Wire::deserialize(d)?;
        let num: BigInt = w.num.parse().map_err(D::Error::custom)?;
        let den: BigInt = w.den.parse().map_err(D::Error::custom)?;
        if den == BigInt::from(0) {
            return Err(D::Error::custom("zero denominator"));
        }
        Ok(BigRational::new(num, den))
    }
}
