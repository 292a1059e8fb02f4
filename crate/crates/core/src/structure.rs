//! Progressions of starting points sharing a valuation word.
//!
//! For a word `(k_1, ..., k_m)` and a sign `eps`, the starting points
//! `x = eps (mod 6)` whose first `m` valuations are exactly the `k_j` form the
//! progression `{6(2^K p + q) + eps}` with `K = k_1 + ... + k_m`, and the
//! `m`-th iterate of its `p`-th member is `6(3^m p + R) + delta` for the same
//! `p`. [`build`] obtains `(q, R, delta)` by one linear congruence per symbol;
//! [`brute_force_progression`] reads them off a direct scan.
//!
//! Residues are stored in half-open ranges `q in [0, 2^K)`, `r in [0, 3^m)`.
//! The closed ranges `[1, 2^K]`, `[1, 3^m]` are only a presentation.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{mod_inverse, pow2, pow3, two_adic_valuation};
use crate::core_map::{t_apply_k, PiElement};
use crate::{Error, Result};

/// A residue sign `+1` / `-1`, used for both `eps` and `delta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn value(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn from_i64(v: i64) -> Option<Sign> {
        match v {
            1 => Some(Sign::Plus),
            -1 => Some(Sign::Minus),
            _ => None,
        }
    }

    /// Sign of an integer prime to 6 from its residue mod 6.
    pub fn of_residue(x: &BigInt) -> Option<Sign> {
        match x.mod_floor(&BigInt::from(6)).to_u8()? {
            1 => Some(Sign::Plus),
            5 => Some(Sign::Minus),
            _ => None,
        }
    }

    pub fn both() -> [Sign; 2] {
        [Sign::Plus, Sign::Minus]
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;

    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        s.value()
    }
}

impl TryFrom<i8> for Sign {
    type Error = Error;

    fn try_from(v: i8) -> Result<Sign> {
        Sign::from_i64(v as i64).ok_or_else(|| Error::InvalidArgument(format!("sign must be +1 or -1, got {v}")))
    }
}

impl FromStr for Sign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Sign> {
        match s.trim() {
            "+1" | "1" | "+" => Ok(Sign::Plus),
            "-1" | "-" => Ok(Sign::Minus),
            other => Err(Error::InvalidArgument(format!("sign must be +1 or -1, got {other:?}"))),
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+1",
            Sign::Minus => "-1",
        })
    }
}

/// `delta = 2^k (mod 3)`: `+1` for even `k`, `-1` for odd `k`.
pub fn delta_from_k(k: u32) -> Sign {
    if k.is_multiple_of(2) {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

/// A valuation word `(k_1, ..., k_m)` with the starting class `eps`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SymbolSequence {
    ks: Vec<u32>,
    eps: Sign,
}

impl SymbolSequence {
    pub fn new(ks: Vec<u32>, eps: Sign) -> Result<Self> {
        if ks.is_empty() {
            return Err(Error::InvalidSequence("empty word".into()));
        }
        if ks.contains(&0) {
            return Err(Error::InvalidSequence("symbols must be >= 1".into()));
        }
        Ok(SymbolSequence { ks, eps })
    }

    /// Parses a comma separated word such as `"1,2,3"`.
    pub fn parse(ks: &str, eps: Sign) -> Result<Self> {
        let ks = ks
            .split(',')
            .map(|t| t.trim().parse::<u32>().map_err(|_| Error::InvalidSequence(format!("bad symbol {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        SymbolSequence::new(ks, eps)
    }

    pub fn ks(&self) -> &[u32] {
        &self.ks
    }

    pub fn eps(&self) -> Sign {
        self.eps
    }

    pub fn depth(&self) -> usize {
        self.ks.len()
    }

    /// `K = k_1 + ... + k_m`.
    pub fn total(&self) -> u64 {
        self.ks.iter().map(|&k| k as u64).sum()
    }

    pub fn last(&self) -> u32 {
        *self.ks.last().expect("nonempty")
    }

    pub fn prefix(&self, len: usize) -> Result<Self> {
        SymbolSequence::new(self.ks[..len.min(self.ks.len())].to_vec(), self.eps)
    }

    pub fn pushed(&self, k: u32) -> Result<Self> {
        let mut ks = self.ks.clone();
        ks.push(k);
        SymbolSequence::new(ks, self.eps)
    }
}

impl fmt::Display for SymbolSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ks: Vec<String> = self.ks.iter().map(|k| k.to_string()).collect();
        write!(f, "({}; {})", ks.join(","), self.eps)
    }
}

/// `{6(2^K p + q) + eps : p >= 0}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SigmaProgression {
    pub bits: u64,
    pub q: BigUint,
    pub eps: Sign,
}

impl SigmaProgression {
    pub fn period(&self) -> BigUint {
        pow2(self.bits)
    }

    /// Representative in `[1, 2^K]`.
    pub fn presented_q(&self) -> BigUint {
        if self.q.is_zero() {
            self.period()
        } else {
            self.q.clone()
        }
    }

    /// `p`-th member, counted from the presented residue.
    pub fn member(&self, p: &BigUint) -> PiElement {
        let v = BigInt::from(6u8) * BigInt::from(self.period() * p + self.presented_q()) + self.eps.value();
        PiElement::new(v.to_biguint().expect("positive")).expect("progression member lies in Pi")
    }
}

/// `{6(3^m p + r) + delta : p >= 0}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LambdaClass {
    pub depth: usize,
    pub r: BigUint,
    pub delta: Sign,
}

impl LambdaClass {
    pub fn period(&self) -> BigUint {
        pow3(self.depth)
    }

    /// Representative in `[1, 3^m]`.
    pub fn presented_r(&self) -> BigUint {
        if self.r.is_zero() {
            self.period()
        } else {
            self.r.clone()
        }
    }

    pub fn member(&self, p: &BigUint) -> PiElement {
        let v = BigInt::from(6u8) * BigInt::from(self.period() * p + self.presented_r()) + self.delta.value();
        PiElement::new(v.to_biguint().expect("positive")).expect("class member lies in Pi")
    }
}

/// A word together with its progression, image class and digits.
///
/// `image_base` is the exact image offset `R` of the stored residue: for every
/// `p >= 0`, `T^(k_m) ... T^(k_1)` maps `6(2^K p + q) + eps` to
/// `6(3^m p + R) + delta`. `R` lies in `[0, 3^m]` and `lambda.r = R mod 3^m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StructurePair {
    pub seq: SymbolSequence,
    pub sigma: SigmaProgression,
    pub lambda: LambdaClass,
    /// `t_j in [0, 2^{k_j})` with `q = sum_j t_j 2^{k_1 + ... + k_{j-1}}`.
    pub digits: Vec<BigUint>,
    pub image_base: BigUint,
}

/// Solution of one symbol step from a class `6(3^m p + base) + delta`.
struct StepSolution {
    digit: BigUint,
    base: BigUint,
    delta: Sign,
}

/// Finds the unique `p` mod `2^k` for which `3(6(3^m p + base) + delta) + 1`
/// has valuation exactly `k`, and the image class it lands in.
fn solve_step(pow3_m: &BigUint, base: &BigUint, delta: Sign, k: u32) -> StepSolution {
    // 3y + 1 = 2 (a p + b) with a = 9 * 3^m odd
    let a = BigInt::from(pow3_m * 9u8);
    let b = BigInt::from(base * 9u8) + if delta == Sign::Plus { 2 } else { -1 };
    let half = BigInt::from(pow2(k as u64 - 1));
    let inv = mod_inverse(&a, &half).expect("9 * 3^m is odd");
    let neg_b: BigInt = -&b;
    let p0: BigInt = (neg_b * inv).mod_floor(&half);

    let mut found = None;
    for p in [p0.clone(), p0 + &half] {
        let v = &a * &p + &b;
        if two_adic_valuation(&v) == k as u64 - 1 {
            assert!(found.is_none(), "two residues solve the step congruence");
            found = Some((p, v));
        }
    }
    let (p, v) = found.expect("no residue solves the step congruence");
    let z: BigInt = v / &half;
    let new_delta = Sign::of_residue(&z).expect("image is prime to 6");
    assert_eq!(new_delta, delta_from_k(k), "image sign disagrees with parity of k");
    let new_base: BigInt = (z - new_delta.value()) / 6;
    StepSolution {
        digit: p.to_biguint().expect("nonnegative"),
        base: new_base.to_biguint().expect("image offset is nonnegative"),
        delta: new_delta,
    }
}

/// Image offset and sign after one symbol from the class `6(3^m p + base) + delta`.
pub(crate) fn solve_label_step(pow3_m: &BigUint, base: &BigUint, delta: Sign, k: u32) -> (BigUint, Sign) {
    let step = solve_step(pow3_m, base, delta, k);
    (step.base, step.delta)
}

/// Depth-1 pair for the word `(k1)`.
pub fn base_case(k1: u32, eps: Sign) -> Result<StructurePair> {
    let seq = SymbolSequence::new(vec![k1], eps)?;
    let step = solve_step(&BigUint::one(), &BigUint::zero(), eps, k1);
    let r = &step.base % 3u8;
    Ok(StructurePair {
        seq,
        sigma: SigmaProgression { bits: k1 as u64, q: step.digit.clone(), eps },
        lambda: LambdaClass { depth: 1, r, delta: step.delta },
        digits: vec![step.digit],
        image_base: step.base,
    })
}

/// Restricts `pair` to starting points whose next valuation is `k_next`.
pub fn extend(pair: &StructurePair, k_next: u32) -> Result<StructurePair> {
    let seq = pair.seq.pushed(k_next)?;
    let m = pair.lambda.depth;
    let step = solve_step(&pow3(m), &pair.image_base, pair.lambda.delta, k_next);
    let q = &pair.sigma.q + (&step.digit << pair.sigma.bits);
    let r = &step.base % pow3(m + 1);
    let mut digits = pair.digits.clone();
    digits.push(step.digit);
    Ok(StructurePair {
        seq,
        sigma: SigmaProgression { bits: pair.sigma.bits + k_next as u64, q, eps: pair.sigma.eps },
        lambda: LambdaClass { depth: m + 1, r, delta: step.delta },
        digits,
        image_base: step.base,
    })
}

pub fn build(seq: &SymbolSequence) -> StructurePair {
    build_prefixes(seq).pop().expect("nonempty word")
}

/// Pairs for every prefix `(k_1..k_j)`, `j = 1..=m`.
pub fn build_prefixes(seq: &SymbolSequence) -> Vec<StructurePair> {
    let ks = seq.ks();
    let mut out = Vec::with_capacity(ks.len());
    let mut pair = base_case(ks[0], seq.eps()).expect("valid word");
    for &k in &ks[1..] {
        let next = extend(&pair, k).expect("valid word");
        out.push(std::mem::replace(&mut pair, next));
    }
    out.push(pair);
    out
}

/// Splits `q` into the digits `t_j = (q >> (k_1 + ... + k_{j-1})) mod 2^{k_j}`.
pub fn digits_of(q: &BigUint, ks: &[u32]) -> Vec<BigUint> {
    let mut shift = 0u64;
    ks.iter()
        .map(|&k| {
            let t = (q >> shift) % pow2(k as u64);
            shift += k as u64;
            t
        })
        .collect()
}

impl StructurePair {
    pub fn depth(&self) -> usize {
        self.lambda.depth
    }

    /// Exact `m`-th iterate of the `p`-th member of the stored progression.
    pub fn image_at(&self, p: &BigUint) -> BigInt {
        BigInt::from(6u8) * BigInt::from(pow3(self.depth()) * p + &self.image_base) + self.lambda.delta.value()
    }

    /// `(q*, R*)`: presented residue and the image offset matching it under
    /// the same `p`.
    pub fn presented(&self) -> (BigUint, BigUint) {
        if self.sigma.q.is_zero() {
            (self.sigma.period(), &self.image_base + pow3(self.depth()))
        } else {
            (self.sigma.q.clone(), self.image_base.clone())
        }
    }

    /// `q == sum_j t_j 2^{k_1 + ... + k_{j-1}}`.
    pub fn digit_identity_holds(&self) -> bool {
        let mut shift = 0u64;
        let mut acc = BigUint::zero();
        for (t, &k) in self.digits.iter().zip(self.seq.ks()) {
            if t >= &pow2(k as u64) {
                return false;
            }
            acc += t << shift;
            shift += k as u64;
        }
        acc == self.sigma.q && shift == self.sigma.bits
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamePOutcome {
    Holds,
    /// First `p` whose member does not follow the word onto the image class.
    FailsAt(u64),
}

impl SamePOutcome {
    pub fn holds(self) -> bool {
        self == SamePOutcome::Holds
    }
}

/// Checks, for `p = 0..=p_max`, that iterating `T^(k_j)` along the word maps
/// the `p`-th presented member `6(2^K p + q*) + eps` to `6(3^m p + R*) + delta`.
pub fn verify_same_p(pair: &StructurePair, p_max: u64) -> SamePOutcome {
    let (q_star, r_star) = pair.presented();
    let period_x = pair.sigma.period();
    let period_y = pow3(pair.depth());
    for p in 0..=p_max {
        let x = BigInt::from(6u8) * BigInt::from(&period_x * p + &q_star) + pair.sigma.eps.value();
        let expect = BigInt::from(6u8) * BigInt::from(&period_y * p + &r_star) + pair.lambda.delta.value();
        let Some(mut y) = x.to_biguint().and_then(|v| PiElement::new(v).ok()) else {
            return SamePOutcome::FailsAt(p);
        };
        for &k in pair.seq.ks() {
            match t_apply_k(&y, k as u64) {
                Some(next) => y = next,
                None => return SamePOutcome::FailsAt(p),
            }
        }
        if BigInt::from(y.into_inner()) != expect {
            return SamePOutcome::FailsAt(p);
        }
    }
    SamePOutcome::Holds
}

/// Scan size limit for [`brute_force_progression`].
pub const ORACLE_SCAN_LIMIT: u128 = 1 << 32;

/// Reads the pair for `seq` off a direct scan of all `x = eps (mod 6)`,
/// `1 < x < 6 * 2^K * p_count`, keeping those whose first valuations are
/// exactly the word. Fails if the survivors or their images are not a
/// single progression with periods `6 * 2^K` and `6 * 3^m`.
pub fn brute_force_progression(seq: &SymbolSequence, p_count: u64) -> Result<StructurePair> {
    if p_count < 2 {
        return Err(Error::InvalidArgument("p_count must be >= 2".into()));
    }
    let bits = seq.total();
    let m = seq.depth();
    let scan = 1u128
        .checked_shl(bits as u32)
        .and_then(|v| v.checked_mul(p_count as u128))
        .filter(|&v| bits < 100 && v <= ORACLE_SCAN_LIMIT)
        .ok_or(Error::BudgetExceeded { what: "oracle scan", requested: u128::MAX, limit: ORACLE_SCAN_LIMIT })?;
    let limit = 6 * scan;
    let eps = seq.eps().value() as i128;
    let overflow = || Error::BudgetExceeded { what: "oracle orbit magnitude", requested: u128::MAX, limit: u128::MAX };

    let mut survivors: Vec<(u128, u128)> = Vec::new();
    let mut j: u128 = 1;
    loop {
        let x = (6 * j as i128 + eps) as u128;
        if x >= limit {
            break;
        }
        j += 1;
        let mut y = x;
        let mut ok = true;
        for &k in seq.ks() {
            let n = y.checked_mul(3).and_then(|v| v.checked_add(1)).ok_or_else(overflow)?;
            if n.trailing_zeros() != k {
                ok = false;
                break;
            }
            y = n >> k;
        }
        if ok {
            survivors.push((x, y));
        }
    }

    let period_x = 6u128 << bits;
    let period_y = 6 * 3u128.checked_pow(m as u32).ok_or_else(overflow)?;
    let fail = |msg: String| Err(Error::NotAProgression(format!("{seq}: {msg}")));
    if survivors.len() < 2 {
        return fail(format!("{} survivors", survivors.len()));
    }
    let (x0, y0) = survivors[0];
    if x0 >= period_x + 6 {
        return fail(format!("first survivor {x0} beyond first period"));
    }
    for w in survivors.windows(2) {
        if w[1].0 - w[0].0 != period_x {
            return fail(format!("gap {} between {} and {}", w[1].0 - w[0].0, w[0].0, w[1].0));
        }
        if w[1].1 - w[0].1 != period_y {
            return fail(format!("image gap {} between {} and {}", w[1].1 - w[0].1, w[0].1, w[1].1));
        }
    }
    let expected = (limit - 1 - x0) / period_x + 1;
    if survivors.len() as u128 != expected {
        return fail(format!("{} survivors, progression has {expected} members", survivors.len()));
    }

    let q_read = ((x0 as i128 - eps) / 6) as u128;
    let delta = match y0 % 6 {
        1 => Sign::Plus,
        5 => Sign::Minus,
        other => return fail(format!("image residue {other} mod 6")),
    };
    let r_read = ((y0 as i128 - delta.value() as i128) / 6) as u128;
    let (q, base) = if q_read == 1u128 << bits {
        match r_read.checked_sub(period_y / 6) {
            Some(b) => (0, b),
            None => return fail("negative image offset".into()),
        }
    } else {
        (q_read, r_read)
    };

    let q = BigUint::from(q);
    let base = BigUint::from(base);
    Ok(StructurePair {
        seq: seq.clone(),
        digits: digits_of(&q, seq.ks()),
        sigma: SigmaProgression { bits, q, eps: seq.eps() },
        lambda: LambdaClass { depth: m, r: &base % pow3(m), delta },
        image_base: base,
    })
}

/// Wire form of a [`StructurePair`]; big integers as decimal strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureRecord {
    pub ks: Vec<u32>,
    pub eps: Sign,
    #[serde(rename = "K")]
    pub bits: u64,
    pub q: String,
    pub m: usize,
    pub r: String,
    pub delta: Sign,
    pub digits: Vec<String>,
}

impl From<&StructurePair> for StructureRecord {
    fn from(p: &StructurePair) -> Self {
        StructureRecord {
            ks: p.seq.ks().to_vec(),
            eps: p.seq.eps(),
            bits: p.sigma.bits,
            q: p.sigma.q.to_string(),
            m: p.depth(),
            r: p.lambda.r.to_string(),
            delta: p.lambda.delta,
            digits: p.digits.iter().map(|d| d.to_string()).collect(),
        }
    }
}

impl TryFrom<StructureRecord> for StructurePair {
    type Error = Error;

    /// Rebuilds the pair from the word and rejects records that disagree with it.
    fn try_from(rec: StructureRecord) -> Result<Self> {
        let seq = SymbolSequence::new(rec.ks.clone(), rec.eps)?;
        let pair = build(&seq);
        if StructureRecord::from(&pair) != rec {
            return Err(Error::InvalidArgument(format!("record does not match the pair of {seq}")));
        }
        Ok(pair)
    }
}
