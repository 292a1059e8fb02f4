//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use collatz_core::ensemble::{
    bucket_mass_bound_check, composition_count, empirical_density, entropy, enumerate_ensemble, sequence_probability,
    Compositions,
};
use collatz_core::montecarlo::{clt_sample, theta_concentration, trajectory_drift, wiener_fdd, BitStream, SampleConfig};
use collatz_core::structure::{base_case, verify_same_p};
use collatz_core::walk::{backward_fold, theta, theta_decompose};
use collatz_core::{brute_force_progression, build, Sign, SymbolSequence};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

/// Every word with `m <= max_m` symbols and total `<= max_total`, both signs.
fn corpus(max_m: usize, max_total: u32) -> Vec<SymbolSequence> {
    let mut out = Vec::new();
    for total in 1..=max_total {
        for m in 1..=max_m.min(total as usize) {
            for ks in Compositions::new(total, m) {
                for eps in Sign::both() {
                    out.push(SymbolSequence::new(ks.clone(), eps).unwrap());
                }
            }
        }
    }
    out
}

fn c1_structure_exactness() -> Outcome {
    let words = corpus(5, 12);
    for seq in &words {
        let pair = build(seq);
        if !verify_same_p(&pair, 100).holds() {
            return Err(format!("same-p fails for {seq}"));
        }
        let oracle = brute_force_progression(seq, 50).map_err(|e| format!("oracle error for {seq}: {e}"))?;
        if oracle != pair {
            return Err(format!("build and oracle differ for {seq}"));
        }
    }
    Ok(format!("{} words, same-p to p=100 and oracle equality", words.len()))
}

fn presented(ks: &[u32], eps: Sign) -> (BigUint, BigUint, Sign) {
    let pair = build(&SymbolSequence::new(ks.to_vec(), eps).unwrap());
    (pair.sigma.presented_q(), pair.lambda.presented_r(), pair.lambda.delta)
}

fn c2_test_vectors() -> Outcome {
    let expect = |ks: &[u32], eps: Sign, q: u32, r: u32, delta: Sign| -> std::result::Result<(), String> {
        let got = presented(ks, eps);
        if got != (q.into(), r.into(), delta) {
            return Err(format!("{ks:?}/{eps}: got q={} r={} delta={}", got.0, got.1, got.2));
        }
        Ok(())
    };
    expect(&[1], Sign::Plus, 1, 2, Sign::Minus)?;
    expect(&[2], Sign::Plus, 4, 3, Sign::Plus)?;
    expect(&[2], Sign::Minus, 3, 2, Sign::Plus)?;

    // Two printed cases disagree with direct computation; the scan decides.
    let disputed: [(u32, Sign, (u32, u32)); 2] = [(1, Sign::Minus, (1, 3)), (4, Sign::Minus, (16, 3))];
    let mut notes = Vec::new();
    for (k, eps, printed) in disputed {
        let seq = SymbolSequence::new(vec![k], eps).unwrap();
        let oracle = brute_force_progression(&seq, 50).map_err(|e| e.to_string())?;
        let built = base_case(k, eps).map_err(|e| e.to_string())?;
        if built != oracle {
            return Err(format!("[{k}]/{eps}: build disagrees with oracle"));
        }
        let q = oracle.sigma.presented_q();
        let r = oracle.lambda.presented_r();
        let x0 = oracle.sigma.member(&BigUint::zero());
        notes.push(format!(
            "[{k}]/{eps}: printed q={} r={}, oracle q={q} r={r} delta={} (smallest member {x0})",
            printed.0, printed.1, oracle.lambda.delta
        ));
    }
    Ok(notes.join("; "))
}

fn c3_decomposition_identity() -> Outcome {
    let mut bits = BitStream::new(2024, 0);
    for _ in 0..1000 {
        let m = 1 + (bits.word() % 30) as usize;
        let ks: Vec<u32> = (0..m).map(|_| 1 + (bits.word() % 12) as u32).collect();
        let eps = if bits.bit() { Sign::Plus } else { Sign::Minus };
        let seq = SymbolSequence::new(ks, eps).unwrap();
        let pair = build(&seq);
        let scale = BigInt::from(3u8).pow(m as u32);
        let rho = BigRational::new(BigInt::from(pair.image_base.clone()), scale.clone());
        let kappa = BigRational::new(BigInt::from(pair.sigma.q.clone()), BigInt::from(pair.sigma.period()));
        let th = theta(&seq);
        if rho != &kappa + &th / BigRational::from_integer(scale) {
            return Err(format!("identity fails for {seq}"));
        }
        let d = theta_decompose(&seq);
        if d.rho != rho || d.kappa != kappa || d.theta != th {
            return Err(format!("theta_decompose disagrees for {seq}"));
        }
    }
    Ok("1000 words, m <= 30, k <= 12".into())
}

fn c4_backward_consistency() -> Outcome {
    let words = corpus(5, 12);
    for seq in &words {
        let pair = build(seq);
        let rs = backward_fold(seq, &pair.lambda.r, pair.lambda.delta).map_err(|e| format!("{seq}: {e}"))?;
        if !rs.last().unwrap().is_zero() {
            return Err(format!("{seq}: fold ends at r0 = {}", rs.last().unwrap()));
        }
    }
    Ok(format!("{} words fold back to r0 = 0", words.len()))
}

fn c5_density() -> Outcome {
    let n = BigUint::from(10_000_000u32);
    let mut worst = 0f64;
    let words = corpus(6, 6);
    for seq in &words {
        let d = empirical_density(&build(seq).sigma, &n).map_err(|e| e.to_string())?;
        let err = (d - sequence_probability(seq)).to_f64().unwrap().abs();
        worst = worst.max(err);
        if err >= 2e-3 {
            return Err(format!("{seq}: error {err:.3e}"));
        }
    }
    Ok(format!("{} progressions, max error {worst:.3e}", words.len()))
}

fn count_by_recursion(parts: usize, left: u64) -> u64 {
    if parts == 0 {
        return u64::from(left == 0);
    }
    (1..=left).map(|first| count_by_recursion(parts - 1, left - first)).sum()
}

fn c6_compositions() -> Outcome {
    for m in 1..=6usize {
        for k in 0..=20u64 {
            let listed = if k >= 1 { Compositions::new(k as u32, m).count() as u64 } else { 0 };
            let direct = count_by_recursion(m, k);
            if composition_count(m, k) != BigUint::from(direct) || listed != direct {
                return Err(format!("m={m} k={k}"));
            }
        }
    }
    Ok("m <= 6, k <= 20".into())
}

fn c7_clt() -> Outcome {
    let start = Instant::now();
    let r = clt_sample(&SampleConfig::symbols(10_000, 100_000, 42)).map_err(|e| e.to_string())?;
    let msg = format!(
        "ks={:.4} mean={:.4} var={:.4} ({:.1}s)",
        r.ks_distance,
        r.sample_mean,
        r.sample_variance,
        start.elapsed().as_secs_f64()
    );
    if r.ks_distance < 0.01 && r.sample_mean.abs() < 0.02 && (r.sample_variance - 1.0).abs() < 0.02 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c8_wiener() -> Outcome {
    let r = wiener_fdd(1 << 14, &[0.25, 0.5, 1.0], 100_000, 7).map_err(|e| e.to_string())?;
    let msg = format!("max relative deviation {:.4}", r.max_relative_deviation);
    if r.max_relative_deviation <= 0.03 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c9_drift() -> Outcome {
    let cfg = SampleConfig { m: 2000, n: 200, seed: 3, x_bits: 8192 };
    let r = trajectory_drift(&cfg).map_err(|e| e.to_string())?;
    let msg = format!("mean z/m = {:.5} +- {:.5}, fixed-point hits {}", r.mean_z_over_m, r.stderr, r.fixed_point_hits);
    if (r.mean_z_over_m + 0.287682).abs() <= 0.01 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c10_entropy() -> Outcome {
    let mut parts = Vec::new();
    for m in 1..=6usize {
        let table = enumerate_ensemble(m, 12).map_err(|e| e.to_string())?;
        let rep = entropy(&table, 1.0).map_err(|e| e.to_string())?;
        let lower = m as f64 * 3f64.ln() - 9.0 * (m.max(2) as f64).ln();
        let upper = rep.ceiling + rep.tail_error_bound;
        if rep.h < lower || rep.h > upper {
            return Err(format!("m={m}: H={} outside [{lower}, {upper}]", rep.h));
        }
        parts.push(format!("H{m}={:.4}", rep.h));
    }
    Ok(parts.join(" "))
}

fn c11_theta() -> Outcome {
    let r = theta_concentration(100, 100_000, 1.0, 11).map_err(|e| e.to_string())?;
    let msg = format!("estimate {:.5}, 95% CI [{:.5}, {:.5}]", r.estimate, r.ci_low, r.ci_high);
    if r.ci_high <= 0.01 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c12_buckets() -> Outcome {
    let mut checked = 0;
    let mut worst = 0f64;
    for m in 3..=5usize {
        for k in m as u32..=2 * m as u32 + 4 {
            let c = bucket_mass_bound_check(m, k, 10).map_err(|e| e.to_string())?;
            if !c.holds {
                return Err(format!("m={m} k={k}: max mass {} > {} + {}", c.max_mass, c.bound, c.slack));
            }
            worst = worst.max(c.ratio);
            checked += 1;
        }
    }
    Ok(format!("{checked} (m, k) pairs, max mass / (1/(20 3^m)) = {worst:.3}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("progression exactness", c1_structure_exactness),
        ("small-case test vectors", c2_test_vectors),
        ("rho = kappa + theta/3^m", c3_decomposition_identity),
        ("backward consistency", c4_backward_consistency),
        ("progression density", c5_density),
        ("composition counts", c6_compositions),
        ("symbol-level CLT", c7_clt),
        ("Wiener covariance", c8_wiener),
        ("trajectory drift", c9_drift),
        ("entropy bounds", c10_entropy),
        ("theta concentration", c11_theta),
        ("bucket mass bound", c12_buckets),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
