//! Seeded sampling under the symbol measure and along real trajectories.
//!
//! Every sample index `i` draws from its own ChaCha8 stream `(seed, i)`, and
//! results are reduced in index order, so a report depends only on its
//! configuration and seed.

use num_bigint::BigUint;
use num_traits::Zero;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::arith::{dyadic_to_f64, ln_biguint};
use crate::core_map::{t_apply, PiElement};
use crate::structure::{Sign, SymbolSequence};
use crate::walk::theta_dyadic;
use crate::{Error, Result};

/// Upper limit on `m * n` symbol draws for one report.
pub const SAMPLE_BUDGET: u128 = 20_000_000_000;

/// Variance of a geometric(1/2) symbol.
pub const SYMBOL_VARIANCE: f64 = 2.0;

/// `2 ln 2 - ln 3`: mean decrease of `ln x` per step.
pub fn drift_coefficient() -> f64 {
    2.0 * std::f64::consts::LN_2 - 3f64.ln()
}

/// Diffusion constant of `omega`: `Var(k) (ln 2)^2`.
pub fn wiener_sigma() -> f64 {
    SYMBOL_VARIANCE * std::f64::consts::LN_2 * std::f64::consts::LN_2
}

pub fn version() -> &'static str {
    concat!(env!("CARGO_PKG_VERSION"), "-", env!("COLLATZ_GIT_DESCRIBE"))
}

/// Fair bits from a ChaCha8 stream, consumed least significant first.
///
/// A geometric symbol is the number of bits read up to and including the
/// next set bit, so `P(k = j) = 2^-j` exactly and sums of symbols can skip
/// whole words by popcount.
pub struct BitStream {
    rng: ChaCha8Rng,
    word: u64,
    left: u32,
}

impl BitStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        BitStream { rng, word: 0, left: 0 }
    }

    fn refill(&mut self) {
        self.word = self.rng.next_u64();
        self.left = 64;
    }

    fn consume(&mut self, bits: u32) {
        self.word = if bits >= 64 { 0 } else { self.word >> bits };
        self.left -= bits;
    }

    pub fn bit(&mut self) -> bool {
        if self.left == 0 {
            self.refill();
        }
        let b = self.word & 1 == 1;
        self.consume(1);
        b
    }

    pub fn geometric(&mut self) -> u64 {
        let mut k = 1;
        loop {
            if self.left == 0 {
                self.refill();
            }
            if self.word == 0 {
                k += self.left as u64;
                self.left = 0;
                continue;
            }
            let tz = self.word.trailing_zeros();
            self.consume(tz + 1);
            return k + tz as u64;
        }
    }

    /// Sum of `count` geometric symbols; reads the same bits as `count`
    /// calls to [`BitStream::geometric`].
    pub fn geometric_sum(&mut self, count: u64) -> u64 {
        let mut need = count;
        let mut total = 0u64;
        while need > 0 {
            if self.left == 0 {
                self.refill();
            }
            let ones = self.word.count_ones() as u64;
            if ones < need {
                need -= ones;
                total += self.left as u64;
                self.word = 0;
                self.left = 0;
                continue;
            }
            for _ in 0..need {
                let step = self.word.trailing_zeros() + 1;
                self.consume(step);
                total += step as u64;
            }
            need = 0;
        }
        total
    }

    /// A full 64-bit word, bypassing the bit buffer.
    pub fn word(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// `eps` from one fair bit, then `m` geometric symbols.
pub fn sample_sequence(m: usize, bits: &mut BitStream) -> SymbolSequence {
    let eps = if bits.bit() { Sign::Plus } else { Sign::Minus };
    let ks = (0..m).map(|_| u32::try_from(bits.geometric()).expect("symbol fits u32")).collect();
    SymbolSequence::new(ks, eps).expect("m >= 1 and symbols >= 1")
}

/// Uniform odd integer with exactly `bits` bits, redrawn while divisible by 3.
pub fn random_pi_element(bits: u64, stream: &mut BitStream) -> PiElement {
    assert!(bits >= 3, "need at least 3 bits");
    let words = bits.div_ceil(64) as usize;
    loop {
        let mut digits: Vec<u64> = (0..words).map(|_| stream.word()).collect();
        let top = (bits - 1) % 64;
        let last = digits.last_mut().expect("nonempty");
        *last &= if top == 63 { u64::MAX } else { (1u64 << (top + 1)) - 1 };
        *last |= 1u64 << top;
        digits[0] |= 1;
        let mut bytes = Vec::with_capacity(words * 8);
        for d in digits {
            bytes.extend_from_slice(&d.to_le_bytes());
        }
        let x = BigUint::from_bytes_le(&bytes);
        if !(&x % 3u8).is_zero() {
            return PiElement::new(x).expect("odd and prime to 3");
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    /// Size of trajectory starting points; ignored by symbol-level samplers.
    pub x_bits: u64,
}

impl SampleConfig {
    pub fn symbols(m: usize, n: usize, seed: u64) -> Self {
        SampleConfig { m, n, seed, x_bits: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n < 2 {
            return Err(Error::InvalidArgument("m >= 1 and n >= 2 required".into()));
        }
        let work = self.m as u128 * self.n as u128;
        if work > SAMPLE_BUDGET {
            return Err(Error::BudgetExceeded { what: "symbol draws m*n", requested: work, limit: SAMPLE_BUDGET });
        }
        Ok(())
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// `sup_x |F_n(x) - Phi(x)|`.
pub fn ks_distance_to_normal(samples: &[f64]) -> f64 {
    let normal = Normal::standard();
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = normal.cdf(x);
            ((i + 1) as f64 / n - cdf).max(cdf - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub config: SampleConfig,
    pub version: String,
    pub sample_mean: f64,
    pub sample_variance: f64,
    pub ks_distance: f64,
    /// Variance per symbol used to normalize `(K - 2m) / sqrt(sigma m)`.
    pub sigma_used: f64,
}

pub fn clt_sample(config: &SampleConfig) -> Result<CltReport> {
    config.validate()?;
    let m = config.m as u64;
    let scale = (SYMBOL_VARIANCE * m as f64).sqrt();
    let values: Vec<f64> = (0..config.n as u64)
        .into_par_iter()
        .map(|i| {
            let mut bits = BitStream::new(config.seed, i);
            (bits.geometric_sum(m) as f64 - 2.0 * m as f64) / scale
        })
        .collect();
    let (sample_mean, sample_variance) = mean_var(&values);
    Ok(CltReport {
        config: config.clone(),
        version: version().to_string(),
        sample_mean,
        sample_variance,
        ks_distance: ks_distance_to_normal(&values),
        sigma_used: SYMBOL_VARIANCE,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub config: SampleConfig,
    pub version: String,
    /// Mean of `z_m / m` over trajectories that never reached 1.
    pub mean_z_over_m: f64,
    pub stderr: f64,
    /// Mean of `K / m` over the same trajectories.
    pub mean_k_over_m: f64,
    pub stderr_k: f64,
    /// `-(2 ln 2 - ln 3)`.
    pub expected: f64,
    pub fixed_point_hits: usize,
}

pub fn trajectory_drift(config: &SampleConfig) -> Result<DriftReport> {
    config.validate()?;
    if config.x_bits < 2 * config.m as u64 + 64 {
        return Err(Error::InvalidArgument(format!("x_bits must be >= 2m + 64 = {}", 2 * config.m + 64)));
    }
    let runs: Vec<Option<(f64, f64)>> = (0..config.n as u64)
        .into_par_iter()
        .map(|i| {
            let mut stream = BitStream::new(config.seed, i);
            let x0 = random_pi_element(config.x_bits, &mut stream);
            let mut x = x0.clone();
            let mut k_sum = 0u64;
            for _ in 0..config.m {
                let (y, k) = t_apply(&x);
                if y.is_fixed_point() {
                    return None;
                }
                k_sum += k;
                x = y;
            }
            let z = ln_biguint(x.value()) - ln_biguint(x0.value());
            Some((z / config.m as f64, k_sum as f64 / config.m as f64))
        })
        .collect();
    let kept: Vec<(f64, f64)> = runs.iter().flatten().copied().collect();
    if kept.len() < 2 {
        return Err(Error::InvalidArgument("fewer than two trajectories stayed above 1".into()));
    }
    let zs: Vec<f64> = kept.iter().map(|p| p.0).collect();
    let ks: Vec<f64> = kept.iter().map(|p| p.1).collect();
    let (mz, vz) = mean_var(&zs);
    let (mk, vk) = mean_var(&ks);
    let n = kept.len() as f64;
    Ok(DriftReport {
        config: config.clone(),
        version: version().to_string(),
        mean_z_over_m: mz,
        stderr: (vz / n).sqrt(),
        mean_k_over_m: mk,
        stderr_k: (vk / n).sqrt(),
        expected: -drift_coefficient(),
        fixed_point_hits: runs.len() - kept.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WienerReport {
    pub steps: usize,
    pub n: usize,
    pub seed: u64,
    pub version: String,
    pub times: Vec<f64>,
    pub means: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// `sigma * min(t_i, t_j)`.
    pub expected: Vec<Vec<f64>>,
    pub sigma: f64,
    /// Largest `|cov - expected| / expected` over all entries.
    pub max_relative_deviation: f64,
    /// Largest `|corr|` between increments over consecutive disjoint windows.
    pub max_increment_correlation: f64,
}

/// Covariance of `omega(t) = (z_{tM} + tM (2 ln 2 - ln 3)) / sqrt(M)` at the
/// given times, with `z` at symbol level: `z_j = j ln 3 - K_j ln 2`, so
/// `omega(t) = (2 tM - K_{tM}) ln 2 / sqrt(M)`.
pub fn wiener_fdd(steps: usize, times: &[f64], n: usize, seed: u64) -> Result<WienerReport> {
    SampleConfig::symbols(steps, n, seed).validate()?;
    if times.is_empty() {
        return Err(Error::InvalidArgument("no times given".into()));
    }
    let mut idx = Vec::with_capacity(times.len());
    for &t in times {
        let s = t * steps as f64;
        if !(t > 0.0 && t <= 1.0) || (s - s.round()).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("time {t} is not a multiple of 1/{steps} in (0, 1]")));
        }
        idx.push(s.round() as u64);
    }
    if idx.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("times must be strictly increasing".into()));
    }
    let norm = std::f64::consts::LN_2 / (steps as f64).sqrt();
    let paths: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut bits = BitStream::new(seed, i);
            let mut at = 0u64;
            let mut k_total = 0u64;
            idx.iter()
                .map(|&s| {
                    k_total += bits.geometric_sum(s - at);
                    at = s;
                    (2.0 * s as f64 - k_total as f64) * norm
                })
                .collect()
        })
        .collect();

    let d = times.len();
    let nf = n as f64;
    let means: Vec<f64> = (0..d).map(|a| paths.iter().map(|p| p[a]).sum::<f64>() / nf).collect();
    let cov = |a: usize, b: usize| paths.iter().map(|p| (p[a] - means[a]) * (p[b] - means[b])).sum::<f64>() / (nf - 1.0);
    let covariance: Vec<Vec<f64>> = (0..d).map(|a| (0..d).map(|b| cov(a, b)).collect()).collect();
    let sigma = wiener_sigma();
    let expected: Vec<Vec<f64>> =
        (0..d).map(|a| (0..d).map(|b| sigma * times[a].min(times[b])).collect()).collect();
    let max_relative_deviation = (0..d)
        .flat_map(|a| (0..d).map(move |b| (a, b)))
        .map(|(a, b)| ((covariance[a][b] - expected[a][b]) / expected[a][b]).abs())
        .fold(0.0, f64::max);

    // increments over [0, t1], [t1, t2], ...
    let incs: Vec<Vec<f64>> =
        paths.iter().map(|p| (0..d).map(|a| if a == 0 { p[0] } else { p[a] - p[a - 1] }).collect()).collect();
    let max_increment_correlation = (1..d)
        .map(|a| {
            let x: Vec<f64> = incs.iter().map(|v| v[a - 1]).collect();
            let y: Vec<f64> = incs.iter().map(|v| v[a]).collect();
            correlation(&x, &y).abs()
        })
        .fold(0.0, f64::max);

    Ok(WienerReport {
        steps,
        n,
        seed,
        version: version().to_string(),
        times: times.to_vec(),
        means,
        covariance,
        expected,
        sigma,
        max_relative_deviation,
        max_increment_correlation,
    })
}

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (mx, vx) = mean_var(x);
    let (my, vy) = mean_var(y);
    let c = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() as f64 - 1.0);
    c / (vx * vy).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaConcentration {
    pub config: SampleConfig,
    pub version: String,
    pub gamma0: f64,
    /// `m^gamma0`.
    pub threshold: f64,
    pub exceedances: u64,
    pub estimate: f64,
    /// Two-sided 95% Wilson score interval.
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval for `hits` successes out of `n`.
pub fn wilson_interval(hits: u64, n: u64, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Empirical `P{|theta_m| > m^gamma0}` under the symbol measure.
pub fn theta_concentration(m: usize, n: usize, gamma0: f64, seed: u64) -> Result<ThetaConcentration> {
    let config = SampleConfig::symbols(m, n, seed);
    config.validate()?;
    if m < 2 {
        return Err(Error::InvalidArgument("m >= 2 required".into()));
    }
    let threshold = (m as f64).powf(gamma0);
    let exceedances = (0..n as u64)
        .into_par_iter()
        .filter(|&i| {
            let mut bits = BitStream::new(seed, i);
            let seq = sample_sequence(m, &mut bits);
            let (num, den_bits) = theta_dyadic(&seq);
            dyadic_to_f64(&num, den_bits).abs() > threshold
        })
        .count() as u64;
    let (ci_low, ci_high) = wilson_interval(exceedances, n as u64, 1.959_963_984_540_054);
    Ok(ThetaConcentration {
        config,
        version: version().to_string(),
        gamma0,
        threshold,
        exceedances,
        estimate: exceedances as f64 / n as f64,
        ci_low,
        ci_high,
    })
}

/// Mean and variance of single geometric draws from stream `(seed, 0)`.
pub fn geometric_moments(draws: usize, seed: u64) -> (f64, f64, f64) {
    let mut bits = BitStream::new(seed, 0);
    let xs: Vec<f64> = (0..draws).map(|_| bits.geometric() as f64).collect();
    let (mean, var) = mean_var(&xs);
    let p1 = xs.iter().filter(|&&k| k == 1.0).count() as f64 / draws as f64;
    (mean, var, p1)
}
