use std::collections::BTreeMap;

use collatz_core::ensemble::{
    bucket_mass_bound_check, composition_count, entropy, enumerate_ensemble, preimage_scaling_report,
    sequence_probability, theta_bucket, truncation_tail, Compositions,
};
use collatz_core::structure::base_case;
use collatz_core::{build, Sign, SymbolSequence};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};

fn seq(ks: &[u32], eps: Sign) -> SymbolSequence {
    SymbolSequence::new(ks.to_vec(), eps).unwrap()
}

/// Class table built word by word through `build`.
fn table_by_build(m: usize, k_cap: u32) -> BTreeMap<(BigUint, Sign), (BigRational, u64)> {
    let mut out: BTreeMap<(BigUint, Sign), (BigRational, u64)> = BTreeMap::new();
    let mut ks = vec![1u32; m];
    loop {
        for eps in Sign::both() {
            let s = seq(&ks, eps);
            let pair = build(&s);
            let e = out.entry((pair.lambda.r, pair.lambda.delta)).or_insert((BigRational::zero(), 0));
            e.0 += sequence_probability(&s);
            e.1 += 1;
        }
        let mut i = 0;
        while i < m && ks[i] == k_cap {
            ks[i] = 1;
            i += 1;
        }
        if i == m {
            return out;
        }
        ks[i] += 1;
    }
}

#[test]
fn mass_is_conserved() {
    for m in 1..=5 {
        for k_cap in [1, 2, 5, 8] {
            let table = enumerate_ensemble(m, k_cap).unwrap();
            assert_eq!(table.total_mass() + &table.tail_mass, BigRational::one(), "m={m} k_cap={k_cap}");
            assert_eq!(table.tail_mass, truncation_tail(m, k_cap));
        }
    }
}

#[test]
fn per_class_mass_matches_word_sums() {
    for (m, k_cap) in [(1, 6), (2, 6), (3, 5), (4, 4)] {
        let table = enumerate_ensemble(m, k_cap).unwrap();
        let direct = table_by_build(m, k_cap);
        assert_eq!(table.entries.len(), direct.len());
        for (key, entry) in &table.entries {
            let (mass, count) = &direct[key];
            assert_eq!(&entry.mass, mass);
            assert_eq!(entry.count, *count);
        }
    }
}

#[test]
fn depth_one_table() {
    let table = enumerate_ensemble(1, 2).unwrap();
    assert_eq!(table.entries.len(), 4);
    for k in 1..=2 {
        for eps in Sign::both() {
            let pair = base_case(k, eps).unwrap();
            let e = &table.entries[&(pair.lambda.r, pair.lambda.delta)];
            assert_eq!(e.mass, BigRational::new(BigInt::one(), BigInt::from(1u32 << (k + 1))));
        }
    }
    assert_eq!(table.total_mass(), BigRational::new(3.into(), 4.into()));
}

#[test]
fn entropy_ceiling_and_trend() {
    for m in 1..=5 {
        let rep = entropy(&enumerate_ensemble(m, 10).unwrap(), 1.0).unwrap();
        assert!(rep.h <= rep.ceiling + rep.tail_error_bound, "m={m}");
        assert!(rep.h > 0.0);
    }
    let h1 = entropy(&enumerate_ensemble(1, 20).unwrap(), 1.0).unwrap().h;
    assert!(h1 <= 6f64.ln());
    let h4 = entropy(&enumerate_ensemble(4, 12).unwrap(), 0.0).unwrap().h;
    assert!(h4 >= 4.0 * 3f64.ln() - 7.0 * 4f64.ln());
}

#[test]
fn depth_one_entropy_limit() {
    // classes at depth 1 are (r, delta) from k1 mod 2 and eps; masses are geometric sums
    let exact = {
        let table = enumerate_ensemble(1, 40).unwrap();
        entropy(&table, 1.0).unwrap().h
    };
    let table = enumerate_ensemble(1, 40).unwrap();
    let mut by_hand: BTreeMap<(BigUint, Sign), f64> = BTreeMap::new();
    for k in 1..=40u32 {
        for eps in Sign::both() {
            let p = base_case(k, eps).unwrap();
            *by_hand.entry((p.lambda.r, p.lambda.delta)).or_default() += 0.5f64.powi(k as i32 + 1);
        }
    }
    assert_eq!(by_hand.len(), table.entries.len());
    let total: f64 = by_hand.values().sum();
    let h: f64 = by_hand.values().map(|p| p / total).map(|p| -p * p.ln()).sum();
    assert!((h - exact).abs() < 1e-12);
}

#[test]
fn compositions_enumerate_exactly() {
    assert_eq!(composition_count(1, 5), BigUint::from(1u8));
    assert_eq!(composition_count(2, 4), BigUint::from(3u8));
    assert_eq!(composition_count(3, 6), BigUint::from(10u8));
    assert_eq!(composition_count(3, 2), BigUint::zero());
    for m in 1..=6usize {
        for k in 1..=20u32 {
            let listed: Vec<Vec<u32>> = Compositions::new(k, m).collect();
            assert!(listed.iter().all(|c| c.len() == m && c.iter().sum::<u32>() == k && c.iter().all(|&x| x >= 1)));
            let mut dedup = listed.clone();
            dedup.sort();
            dedup.dedup();
            assert_eq!(dedup.len(), listed.len());
            assert_eq!(composition_count(m, k as u64), BigUint::from(listed.len()));
        }
    }
}

#[test]
fn buckets() {
    assert_eq!(theta_bucket(&seq(&[1], Sign::Plus), 10), 5);
    assert_eq!(theta_bucket(&seq(&[2], Sign::Minus), 10), -3);
    assert_eq!(theta_bucket(&seq(&[2], Sign::Minus), 1), -1);
    assert!(bucket_mass_bound_check(2, 4, 10).unwrap().holds);
    assert!(bucket_mass_bound_check(3, 6, 10).unwrap().holds);
    for m in 3..=5 {
        for k in m as u32..=2 * m as u32 + 4 {
            assert!(bucket_mass_bound_check(m, k, 10).unwrap().holds, "m={m} k={k}");
        }
    }
    // one word per sign at m = 1, k = 1 already exceeds the asymptotic constant
    let small = bucket_mass_bound_check(1, 1, 10).unwrap();
    assert!(!small.within_bound);
    assert!(small.ratio > 1.0);
}

#[test]
fn preimage_report() {
    let r1 = preimage_scaling_report(1, 12).unwrap();
    assert!((r1.expected - 4.0 / 3.0).abs() < 1e-12);
    assert_eq!(r1.unreached, "0");
    let r3 = preimage_scaling_report(3, 4).unwrap();
    // k_cap = 4 keeps 2 * 4^m = 2^(2m+1) words, so the mean is the heuristic by construction; the median is not
    assert!(r3.median_reached >= r3.expected / 4.0 && r3.median_reached <= r3.expected * 4.0);
    assert!((r3.expected - 64.0 / 27.0).abs() < 1e-12);
    assert!(r3.mean_reached / r3.expected <= 4.0 && r3.expected / r3.mean_reached <= 4.0, "{r3:?}");
    assert_eq!(r3.reached + r3.unreached.parse::<usize>().unwrap(), 54);
}

#[test]
fn enumeration_budget() {
    assert!(enumerate_ensemble(12, 40).is_err());
}
