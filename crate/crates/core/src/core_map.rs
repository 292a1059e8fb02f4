//! The accelerated map `T(x) = (3x+1) / 2^k` on positive integers coprime
//! to 6, with `k` the exact 2-adic valuation of `3x+1`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::arith::ln_biguint;
use crate::{Error, Result};

/// Class of an element of `Pi` modulo 6. `1` is tagged separately.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PiClass {
    /// `x = 1 (mod 6)`, `x > 1`.
    Plus,
    /// `x = 5 (mod 6)`.
    Minus,
    /// `x = 1`.
    FixedPoint,
}

pub fn is_pi_member(x: &BigUint) -> Option<PiClass> {
    if x.is_one() {
        return Some(PiClass::FixedPoint);
    }
    match (x % 6u8).to_u8() {
        Some(1) => Some(PiClass::Plus),
        Some(5) => Some(PiClass::Minus),
        _ => None,
    }
}

/// A positive integer that is odd and not divisible by 3.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PiElement(BigUint);

impl PiElement {
    pub fn new(value: BigUint) -> Result<Self> {
        match is_pi_member(&value) {
            Some(_) => Ok(PiElement(value)),
            None => Err(Error::NotInPi(value.to_string())),
        }
    }

    pub fn one() -> Self {
        PiElement(BigUint::one())
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn into_inner(self) -> BigUint {
        self.0
    }

    pub fn class(&self) -> PiClass {
        is_pi_member(&self.0).expect("PiElement invariant")
    }

    pub fn is_fixed_point(&self) -> bool {
        self.0.is_one()
    }
}

impl TryFrom<u64> for PiElement {
    type Error = Error;

    fn try_from(v: u64) -> Result<Self> {
        PiElement::new(BigUint::from(v))
    }
}

impl TryFrom<String> for PiElement {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PiElement> for String {
    fn from(x: PiElement) -> String {
        x.0.to_string()
    }
}

impl FromStr for PiElement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v = BigUint::from_str(s.trim()).map_err(|_| Error::NotInPi(s.to_string()))?;
        PiElement::new(v)
    }
}

impl fmt::Display for PiElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One step of `T`: returns `(y, k)` with `3x + 1 = 2^k * y`, `y` odd.
pub fn t_apply(x: &PiElement) -> (PiElement, u64) {
    let n = x.value() * 3u8 + 1u8;
    let k = n.trailing_zeros().expect("3x+1 > 0");
    // 2^k * y = 3x + 1 = 1 (mod 3), so 3 does not divide y
    (PiElement(n >> k), k)
}

/// The branch `T^(k)`: defined only where the valuation of `3x+1` is exactly `k`.
pub fn t_apply_k(x: &PiElement, k: u64) -> Option<PiElement> {
    let n = x.value() * 3u8 + 1u8;
    if n.trailing_zeros() == Some(k) {
        Some(PiElement(n >> k))
    } else {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitStep {
    pub x: PiElement,
    pub k: u64,
}

/// `m` successive applications of `T` from `origin`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub origin: PiElement,
    pub steps: Vec<OrbitStep>,
    /// 1-based index of the first step that lands on the fixed point, if any.
    /// The orbit keeps looping on `(1, 2)` afterwards.
    pub fixed_point_at: Option<usize>,
}

impl OrbitRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last(&self) -> &PiElement {
        self.steps.last().map(|s| &s.x).unwrap_or(&self.origin)
    }

    pub fn k_sum(&self) -> u64 {
        self.steps.iter().map(|s| s.k).sum()
    }

    /// `m ln 3 - (k_1 + ... + k_m) ln 2`, the symbol-sum approximation of the
    /// log ratio `ln(x_m / x_0)`.
    pub fn symbol_sum_form(&self) -> f64 {
        self.len() as f64 * 3f64.ln() - self.k_sum() as f64 * std::f64::consts::LN_2
    }

    /// Upper bound `sum_j 1/(3 x_{j-1})` on `z - symbol_sum_form()`, which is
    /// always nonnegative.
    pub fn symbol_form_error_bound(&self) -> f64 {
        std::iter::once(&self.origin)
            .chain(self.steps.iter().map(|s| &s.x))
            .take(self.len())
            .map(|x| 1.0 / (3.0 * x.value().to_f64().unwrap_or(f64::INFINITY)))
            .sum()
    }
}

pub fn orbit(x0: &PiElement, m: usize) -> OrbitRecord {
    let mut steps = Vec::with_capacity(m);
    let mut fixed_point_at = None;
    let mut x = x0.clone();
    for j in 1..=m {
        let (y, k) = t_apply(&x);
        if fixed_point_at.is_none() && y.is_fixed_point() {
            fixed_point_at = Some(j);
        }
        steps.push(OrbitStep { x: y.clone(), k });
        x = y;
    }
    OrbitRecord { origin: x0.clone(), steps, fixed_point_at }
}

/// `z_m = ln(x_m) - ln(x_0)`, computed from the integers themselves.
pub fn z_statistic(record: &OrbitRecord) -> Result<f64> {
    if record.is_empty() {
        return Err(Error::EmptyRecord);
    }
    Ok(ln_biguint(record.last().value()) - ln_biguint(record.origin.value()))
}
