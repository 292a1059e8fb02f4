use collatz_core::structure::build_prefixes;
use collatz_core::walk::{admissible_k, backward_fold, backward_step, c_coefficient, theta, theta_decompose, walk_path};
use collatz_core::{build, delta_from_k, Sign, SymbolSequence};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn arb_seq(max_m: usize, max_k: u32) -> impl Strategy<Value = SymbolSequence> {
    (prop::collection::vec(1..=max_k, 1..=max_m), any::<bool>())
        .prop_map(|(ks, plus)| SymbolSequence::new(ks, if plus { Sign::Plus } else { Sign::Minus }).unwrap())
}

fn sign(plus: bool) -> Sign {
    if plus {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn decomposition_is_exact(seq in arb_seq(30, 12)) {
        let d = theta_decompose(&seq);
        let scale = BigRational::from_integer(BigInt::from(3u8).pow(seq.depth() as u32));
        prop_assert_eq!(&d.rho, &(&d.kappa + &d.theta / scale));
        prop_assert!(d.rho >= BigRational::zero() && d.rho <= BigRational::one());
        prop_assert!(d.kappa >= BigRational::zero() && d.kappa < BigRational::one());
    }

    #[test]
    fn backward_fold_returns_to_origin(seq in arb_seq(25, 10)) {
        let pair = build(&seq);
        let rs = backward_fold(&seq, &pair.lambda.r, pair.lambda.delta).unwrap();
        prop_assert!(rs.last().unwrap().is_zero());
        let forward: Vec<BigUint> = build_prefixes(&seq).iter().rev().map(|p| p.lambda.r.clone()).collect();
        prop_assert_eq!(&rs[..seq.depth()], &forward[..]);
    }

    #[test]
    fn walk_states_are_admissible(seq in arb_seq(20, 10)) {
        let path = walk_path(&seq);
        for (j, &k) in seq.ks().iter().enumerate() {
            let (r, delta) = &path.states[j + 1];
            prop_assert!(admissible_k(r, *delta, path.states[j].1, k));
        }
    }

    #[test]
    fn admissibility_is_divisibility(r in 0u64..100_000, k in 1u32..40, dp in any::<bool>()) {
        let delta = delta_from_k(k);
        let delta_prev = sign(dp);
        let c = c_coefficient(k, delta, delta_prev).unwrap();
        let divisible = ((BigInt::from(r) << k) - c) % 3 == BigInt::zero();
        prop_assert_eq!(admissible_k(&BigUint::from(r), delta, delta_prev, k), divisible);
        prop_assert!(!admissible_k(&BigUint::from(r), delta * Sign::Minus, delta_prev, k));
    }

    #[test]
    fn backward_step_inverts_one_step(prefix in arb_seq(8, 8), k in 1u32..12) {
        let seq = prefix.pushed(k).unwrap();
        let pairs = build_prefixes(&seq);
        let (before, after) = (&pairs[pairs.len() - 2], &pairs[pairs.len() - 1]);
        let prev = backward_step(&after.lambda.r, after.lambda.delta, k, before.lambda.delta, seq.depth()).unwrap();
        prop_assert_eq!(prev, before.lambda.r.clone());
    }

    #[test]
    fn theta_stays_bounded(seq in arb_seq(30, 12)) {
        // |theta| <= 3^m, so rho and kappa both lie in [0, 1]
        let th = theta(&seq);
        let bound = BigRational::from_integer(BigInt::from(3u8).pow(seq.depth() as u32));
        prop_assert!(th.abs() <= bound);
    }
}

#[test]
fn inadmissible_step_is_rejected() {
    // ([1], +1) ends at (2, -1); from delta_prev = +1 the residues 0 and 1 are not reachable
    let ok = admissible_k(&BigUint::from(2u8), Sign::Minus, Sign::Plus, 1);
    assert!(ok);
    let bad: Vec<u8> = (0..3u8).filter(|&r| !admissible_k(&BigUint::from(r), Sign::Minus, Sign::Plus, 1)).collect();
    assert_eq!(bad, vec![0, 1]);
    assert!(backward_step(&BigUint::from(1u8), Sign::Minus, 1, Sign::Plus, 1).is_err());
}
