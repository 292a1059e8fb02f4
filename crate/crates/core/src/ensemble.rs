//! The symbol measure and the distribution it induces on image classes.
//!
//! Under the measure, `eps = +-1` with probability 1/2 each and the `k_j`
//! are i.i.d. geometric with `P(k = j) = 2^-j`, so a word of total `K` has
//! mass `2^-(K+1)`, the natural density of its progression inside `Pi`.

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{pow2, pow3};
use crate::structure::{build, delta_from_k, SigmaProgression, Sign, SymbolSequence};
use crate::walk::theta_dyadic;
use crate::{Error, Result};

/// Largest number of words any exhaustive routine here will visit.
pub const ENUMERATION_LIMIT: u128 = 100_000_000;

/// `2^-(K+1)`.
pub fn sequence_probability(seq: &SymbolSequence) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(pow2(seq.total() + 1)))
}

/// Share of `Pi` up to `n` covered by the progression, by counting formulas.
pub fn empirical_density(progression: &SigmaProgression, n: &BigUint) -> Result<BigRational> {
    if progression.bits == 0 {
        return Err(Error::InvalidArgument("progression with K = 0".into()));
    }
    let period = progression.period() * 6u8;
    if n < &period {
        return Err(Error::InvalidArgument(format!("N = {n} is below 6 * 2^K = {period}")));
    }
    let n = BigInt::from(n.clone());
    let first = BigInt::from(progression.presented_q() * 6u8) + progression.eps.value();
    let members = if n >= first { (&n - &first).div_floor(&BigInt::from(period)) + BigInt::one() } else { BigInt::zero() };
    let six = BigInt::from(6);
    let ones = (&n - BigInt::one()).div_floor(&six) + BigInt::one();
    let five = BigInt::from(5);
    let fives = if n >= five { (&n - &five).div_floor(&six) + BigInt::one() } else { BigInt::zero() };
    Ok(BigRational::new(members, ones + fives))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    #[serde(with = "crate::walk::rational_wire")]
    pub mass: BigRational,
    pub count: u64,
}

/// Image classes `(r, delta)` at depth `m` of all words with every
/// `k_j <= k_cap`, with their exact mass and number of preimage words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnsembleTable {
    pub m: usize,
    pub k_cap: u32,
    pub entries: BTreeMap<(BigUint, Sign), ClassEntry>,
    /// Mass of the words excluded by the cap: `1 - (1 - 2^-k_cap)^m`.
    pub tail_mass: BigRational,
}

impl EnsembleTable {
    pub fn total_mass(&self) -> BigRational {
        self.entries.values().fold(BigRational::zero(), |acc, e| acc + &e.mass)
    }

    pub fn total_count(&self) -> u64 {
        self.entries.values().map(|e| e.count).sum()
    }

    /// Number of possible labels, `2 * 3^m`.
    pub fn class_space(&self) -> BigUint {
        pow3(self.m) * 2u8
    }
}

/// `1 - (1 - 2^-k_cap)^m`.
pub fn truncation_tail(m: usize, k_cap: u32) -> BigRational {
    let keep = BigRational::one() - BigRational::new(BigInt::one(), BigInt::from(pow2(k_cap as u64)));
    BigRational::one() - num_traits::pow(keep, m)
}

fn check_budget(what: &'static str, requested: Option<u128>) -> Result<u128> {
    match requested {
        Some(r) if r <= ENUMERATION_LIMIT => Ok(r),
        r => Err(Error::BudgetExceeded { what, requested: r.unwrap_or(u128::MAX), limit: ENUMERATION_LIMIT }),
    }
}

/// Next class label `(r', delta')` at depth `j + 1` for symbol `k`, reading
/// `r` as any representative of its class mod `3^j`. Machine-word arithmetic;
/// `None` when an intermediate would not fit.
pub fn step_label_fast(r: u128, delta: Sign, j: usize, k: u32) -> Option<(u128, Sign)> {
    if k > 64 {
        return None;
    }
    let pow3_j = 3u128.checked_pow(j as u32)?;
    let pow3_next = pow3_j.checked_mul(3)?;
    let a = pow3_j.checked_mul(9)?;
    // b = 9r + 2 or 9r - 1, kept nonnegative by adding a (same class)
    let b = r.checked_mul(9)?.checked_add(if delta == Sign::Plus { 2 } else { a - 1 })?;
    let half_bits = k - 1;
    let mask: u128 = if half_bits == 0 { 0 } else { (1u128 << half_bits) - 1 };
    // inverse of odd a mod 2^64 by Newton iteration
    let a64 = a as u64;
    let mut inv: u64 = a64;
    for _ in 0..6 {
        inv = inv.wrapping_mul(2u64.wrapping_sub(a64.wrapping_mul(inv)));
    }
    let p0 = (b as u64).wrapping_neg().wrapping_mul(inv) as u128 & mask;
    let p = [p0, p0 + (1u128 << half_bits)]
        .into_iter()
        .find(|&p| a.checked_mul(p).and_then(|v| v.checked_add(b)).map(|v| v.trailing_zeros() == half_bits) == Some(true))?;
    let z = (a.checked_mul(p)?.checked_add(b)?) >> half_bits;
    let new_delta = match z % 6 {
        1 => Sign::Plus,
        5 => Sign::Minus,
        _ => unreachable!("image class is prime to 6"),
    };
    debug_assert_eq!(new_delta, delta_from_k(k));
    let r_next = (if new_delta == Sign::Plus { (z - 1) / 6 } else { (z + 1) / 6 }) % pow3_next;
    Some((r_next, new_delta))
}

/// Arbitrary-precision version of [`step_label_fast`].
pub fn step_label(r: &BigUint, delta: Sign, j: usize, k: u32) -> (BigUint, Sign) {
    let base = r % pow3(j);
    let pair = crate::structure::solve_label_step(&pow3(j), &base, delta, k);
    (pair.0 % pow3(j + 1), pair.1)
}

type Histogram = HashMap<(u128, Sign), Vec<u64>>;

fn dfs_fast(r: u128, delta: Sign, depth: usize, total: usize, m: usize, k_cap: u32, hist: &mut Histogram) {
    if depth == m {
        let slot = hist.entry((r, delta)).or_insert_with(|| vec![0; m * k_cap as usize + 1]);
        slot[total] += 1;
        return;
    }
    for k in 1..=k_cap {
        let (r2, d2) = step_label_fast(r, delta, depth, k).expect("fast path checked up front");
        dfs_fast(r2, d2, depth + 1, total + k as usize, m, k_cap, hist);
    }
}

type BigHistogram = HashMap<(BigUint, Sign), Vec<u64>>;

fn dfs_big(r: &BigUint, delta: Sign, depth: usize, total: usize, m: usize, k_cap: u32, hist: &mut BigHistogram) {
    if depth == m {
        let slot = hist.entry((r.clone(), delta)).or_insert_with(|| vec![0; m * k_cap as usize + 1]);
        slot[total] += 1;
        return;
    }
    for k in 1..=k_cap {
        let (r2, d2) = step_label(r, delta, depth, k);
        dfs_big(&r2, d2, depth + 1, total + k as usize, m, k_cap, hist);
    }
}

fn mass_of(hist: &[u64]) -> BigRational {
    let top = hist.len() as u64;
    let num = hist.iter().enumerate().fold(BigUint::zero(), |acc, (total, &c)| acc + pow2(top - total as u64) * c);
    BigRational::new(BigInt::from(num), BigInt::from(pow2(top + 1)))
}

/// Exhaustive table over the `2 * k_cap^m` words with all `k_j <= k_cap`.
///
/// Work is split by `(k_1, eps)`; per-class histograms of `K` are merged by
/// addition, so the result does not depend on scheduling.
pub fn enumerate_ensemble(m: usize, k_cap: u32) -> Result<EnsembleTable> {
    if m == 0 || k_cap == 0 {
        return Err(Error::InvalidArgument("m and k_cap must be >= 1".into()));
    }
    check_budget("ensemble words", (k_cap as u128).checked_pow(m as u32).and_then(|v| v.checked_mul(2)))?;

    let roots: Vec<(u32, Sign)> = (1..=k_cap).flat_map(|k| Sign::both().map(|e| (k, e))).collect();
    let fast = m <= 60 && k_cap <= 64 && pow3(m) * 9u8 * pow2(k_cap as u64) < pow2(120);
    let mut merged: BTreeMap<(BigUint, Sign), Vec<u64>> = BTreeMap::new();
    let mut add = |key: (BigUint, Sign), h: Vec<u64>| {
        let slot = merged.entry(key).or_insert_with(|| vec![0; h.len()]);
        slot.iter_mut().zip(h).for_each(|(a, b)| *a += b);
    };
    if fast {
        let parts: Vec<Histogram> = roots
            .par_iter()
            .map(|&(k1, eps)| {
                let mut hist = Histogram::new();
                let (r, d) = step_label_fast(0, eps, 0, k1).expect("fast path");
                dfs_fast(r, d, 1, k1 as usize, m, k_cap, &mut hist);
                hist
            })
            .collect();
        for part in parts {
            for ((r, d), h) in part {
                add((BigUint::from(r), d), h);
            }
        }
    } else {
        let parts: Vec<BigHistogram> = roots
            .par_iter()
            .map(|&(k1, eps)| {
                let mut hist = BigHistogram::new();
                let (r, d) = step_label(&BigUint::zero(), eps, 0, k1);
                dfs_big(&r, d, 1, k1 as usize, m, k_cap, &mut hist);
                hist
            })
            .collect();
        for part in parts {
            for (key, h) in part {
                add(key, h);
            }
        }
    }

    let entries = merged
        .into_iter()
        .map(|(key, h)| (key, ClassEntry { count: h.iter().sum(), mass: mass_of(&h) }))
        .collect();
    Ok(EnsembleTable { m, k_cap, entries, tail_mass: truncation_tail(m, k_cap) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub m: usize,
    pub k_cap: u32,
    /// Entropy in nats of the class distribution renormalized to the table.
    pub h: f64,
    /// `m ln 3 - (2 gamma0 + 7) ln m`.
    pub lower_bound: f64,
    pub gamma0: f64,
    /// `ln 2 + m ln 3`: at most `2 * 3^m` classes.
    pub ceiling: f64,
    /// `tail_mass * (m ln 3 + ln 2)`.
    pub tail_error_bound: f64,
    pub classes: usize,
}

pub fn entropy(table: &EnsembleTable, gamma0: f64) -> Result<EntropyReport> {
    if table.entries.is_empty() {
        return Err(Error::EmptyTable);
    }
    let kept = BigRational::one() - &table.tail_mass;
    let h = table
        .entries
        .values()
        .map(|e| (&e.mass / &kept).to_f64().expect("finite"))
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    let m = table.m as f64;
    let (ln2, ln3) = (2f64.ln(), 3f64.ln());
    Ok(EntropyReport {
        m: table.m,
        k_cap: table.k_cap,
        h,
        lower_bound: m * ln3 - (2.0 * gamma0 + 7.0) * m.ln(),
        gamma0,
        ceiling: ln2 + m * ln3,
        tail_error_bound: table.tail_mass.to_f64().expect("finite") * (m * ln3 + ln2),
        classes: table.entries.len(),
    })
}

/// Number of compositions of `k` into `m` positive parts, `binom(k-1, m-1)`.
pub fn composition_count(m: usize, k: u64) -> BigUint {
    if m == 0 || k < m as u64 {
        return BigUint::zero();
    }
    num_integer::binomial(BigUint::from(k - 1), BigUint::from(m as u64 - 1))
}

/// Compositions of `total` into `parts` positive parts, lexicographic.
pub struct Compositions {
    next: Option<Vec<u32>>,
}

impl Compositions {
    pub fn new(total: u32, parts: usize) -> Self {
        let next = (parts >= 1 && total as usize >= parts).then(|| {
            let mut v = vec![1; parts];
            v[parts - 1] = total - (parts as u32 - 1);
            v
        });
        Compositions { next }
    }
}

impl Iterator for Compositions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let cur = self.next.take()?;
        let n = cur.len();
        // rightmost position i < n-1 that can grow while the tail stays >= 1
        let mut succ = cur.clone();
        let mut found = false;
        for i in (0..n.saturating_sub(1)).rev() {
            let tail: u32 = succ[i + 1..].iter().sum();
            if tail > (n - i - 1) as u32 {
                succ[i] += 1;
                let rest = tail - 1;
                for v in succ[i + 1..n - 1].iter_mut() {
                    *v = 1;
                }
                succ[n - 1] = rest - (n - i - 2) as u32;
                found = true;
                break;
            }
        }
        if found {
            self.next = Some(succ);
        }
        Some(cur)
    }
}

/// `floor(theta * width)`.
pub fn theta_bucket(seq: &SymbolSequence, width: i64) -> i64 {
    let (num, bits) = theta_dyadic(seq);
    (num * width).div_floor(&BigInt::from(pow2(bits))).to_i64().expect("bucket index fits i64")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketCheck {
    pub m: usize,
    pub k: u32,
    pub width: i64,
    /// Nonempty cells `(r, delta, i)`.
    pub cells: usize,
    #[serde(with = "crate::walk::rational_wire")]
    pub max_mass: BigRational,
    /// `1 / (2 width 3^m)`.
    #[serde(with = "crate::walk::rational_wire")]
    pub bound: BigRational,
    /// Lattice rounding allowance: `2 ceil(2^k / (width 3^m)) 2^-(k+1) - bound`.
    #[serde(with = "crate::walk::rational_wire")]
    pub slack: BigRational,
    pub within_bound: bool,
    pub holds: bool,
    /// `max_mass / bound`.
    pub ratio: f64,
}

/// Largest mass of a cell `Phi_m^-1(r, delta) ∩ A_{m,i} ∩ B_k` over all
/// `(r, delta, i)`, where `B_k` is the set of words of total `k` and
/// `A_{m,i}` the words with `floor(width * theta) = i`.
///
/// Within a cell, `kappa = q / 2^k` lies in an interval of length
/// `1 / (width 3^m)` and distinct words of the same `eps` have distinct `q`,
/// so each `eps` contributes at most `ceil(2^k / (width 3^m))` words.
pub fn bucket_mass_bound_check(m: usize, k: u32, width: i64) -> Result<BucketCheck> {
    if m == 0 || width <= 0 {
        return Err(Error::InvalidArgument("m >= 1 and width >= 1 required".into()));
    }
    let words = composition_count(m, k as u64) * 2u8;
    check_budget("bucket words", words.to_u128())?;

    let mut cells: HashMap<(BigUint, Sign, i64), u64> = HashMap::new();
    let mut seen_q: HashMap<(BigUint, Sign, i64, Sign), Vec<BigUint>> = HashMap::new();
    for ks in Compositions::new(k, m) {
        for eps in Sign::both() {
            let seq = SymbolSequence::new(ks.clone(), eps)?;
            let pair = build(&seq);
            let i = theta_bucket(&seq, width);
            let key = (pair.lambda.r.clone(), pair.lambda.delta, i);
            *cells.entry(key.clone()).or_default() += 1;
            seen_q.entry((key.0, key.1, key.2, eps)).or_default().push(pair.sigma.q);
        }
    }
    for qs in seen_q.values_mut() {
        let before = qs.len();
        qs.sort();
        qs.dedup();
        assert_eq!(before, qs.len(), "two words of equal total and eps share q");
    }

    let max_count = cells.values().copied().max().unwrap_or(0);
    let unit = BigRational::new(BigInt::one(), BigInt::from(pow2(k as u64 + 1)));
    let max_mass = &unit * BigInt::from(max_count);
    let denom = BigInt::from(pow3(m)) * width;
    let bound = BigRational::new(BigInt::one(), &denom * 2);
    let per_eps = BigInt::from(pow2(k as u64)).div_ceil(&denom);
    let slack = &unit * (per_eps * 2) - &bound;
    let ratio = (&max_mass / &bound).to_f64().unwrap_or(f64::INFINITY);
    Ok(BucketCheck {
        m,
        k,
        width,
        cells: cells.len(),
        within_bound: max_mass <= bound,
        holds: max_mass <= &bound + &slack,
        max_mass,
        bound,
        slack,
        ratio,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreimageReport {
    pub m: usize,
    pub k_cap: u32,
    /// `2^(2m) 3^-m`.
    pub expected: f64,
    /// Words per class, averaged over all `2 * 3^m` labels.
    pub mean_all: f64,
    /// Words per class, averaged over reached labels.
    pub mean_reached: f64,
    pub median_reached: f64,
    pub reached: usize,
    pub unreached: String,
}

pub fn preimage_scaling_report(m: usize, k_cap: u32) -> Result<PreimageReport> {
    let table = enumerate_ensemble(m, k_cap)?;
    let mut counts: Vec<u64> = table.entries.values().map(|e| e.count).collect();
    counts.sort_unstable();
    let space = table.class_space();
    let total = table.total_count() as f64;
    let median = match counts.len() {
        0 => 0.0,
        n if n % 2 == 1 => counts[n / 2] as f64,
        n => (counts[n / 2 - 1] + counts[n / 2]) as f64 / 2.0,
    };
    Ok(PreimageReport {
        m,
        k_cap,
        expected: (4f64 / 3.0).powi(m as i32),
        mean_all: total / space.to_f64().expect("finite"),
        mean_reached: total / counts.len().max(1) as f64,
        median_reached: median,
        reached: counts.len(),
        unreached: (space - BigUint::from(counts.len())).to_string(),
    })
}
