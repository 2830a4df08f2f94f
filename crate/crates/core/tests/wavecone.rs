use proptest::prelude::*;

use subharm_core::scalar::{Rational, Scalar};
use subharm_core::wavecone::*;

fn v(xs: &[i64]) -> Vec<Rational> {
    xs.iter().map(|&x| Rational::integer(x)).collect()
}

#[test]
fn characterization_examples() {
    assert!(member(&v(&[0, 0])));
    assert!(member(&v(&[1, 2, 0])));
    assert!(member(&v(&[0, -3, -1])));
    assert!(!member(&v(&[1, -1])));
}

#[test]
fn exact_candidates_have_zero_residual() {
    let b = member_bruteforce(&v(&[4, 1]), 8);
    assert!(b.member && b.residual == 0.0 && b.floor.is_none());
    // ξ = (2, 1) normalized: ξ² = (4/5, 1/5)
    assert!((b.witness[0] - 0.8).abs() < 1e-15 && (b.witness[1] - 0.2).abs() < 1e-15);
    let e1 = member_bruteforce(&v(&[1, 0, 0]), 8);
    assert!(e1.member && e1.residual == 0.0);
    assert_eq!(e1.witness, vec![1.0, 0.0, 0.0]);
    assert!(member_bruteforce(&v(&[0, 0, 0]), 8).member);
}

#[test]
fn two_dimensional_residual_matches_closed_form() {
    // on w = (s, 1 − s): |s·(−b) − (1 − s)·a| = s b + (1 − s) a, minimized at an end
    for (a, b) in [(1, 1), (3, 1), (2, 5), (7, 4)] {
        let r = member_bruteforce(&v(&[a, -b]), 16);
        let min = a.min(b) as f64;
        assert!(!r.member);
        assert!((r.residual - min).abs() < 1e-12, "{a},{b}: {}", r.residual);
        let f = r.floor.unwrap();
        assert!(f > 0.0 && f <= min);
    }
}

#[test]
fn opposite_small_entries_are_never_members() {
    for k in 1..12 {
        let e = Rational::ratio(1, 10i64.pow(k / 2) * (k as i64));
        let x = vec![e.clone(), -e];
        assert!(!member(&x));
        let b = member_bruteforce(&x, 8);
        assert!(!b.member && b.floor.unwrap() > 0.0);
    }
}

#[test]
fn random_suites_agree_completely() {
    for n in [2, 3] {
        let r = agreement_suite(n, 1000, 20 + n as u64, 8);
        assert!(r.all_agree(), "n={n}: {:?}", r.disagreements().first());
        assert!(r.members > 300 && r.members < 900);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 1001);
    }
}

#[test]
fn suite_is_reproducible() {
    let a = agreement_suite(3, 50, 9, 8).to_csv();
    let b = agreement_suite(3, 50, 9, 8).to_csv();
    assert_eq!(a, b);
}

#[test]
fn lattice_invariants_hold() {
    for n in [2, 3, 4] {
        let r = lattice_invariants(n);
        assert_eq!(r.checked, 5usize.pow(n as u32));
        assert!(r.failures.is_empty(), "{:?}", r.failures);
    }
}

#[test]
#[should_panic(expected = "resolution")]
fn coarse_grids_are_refused() {
    member_bruteforce(&v(&[1, 2]), 4);
}

proptest! {
    #[test]
    fn membership_is_scale_invariant(xs in prop::collection::vec(-9i64..=9, 2..5), t in -20i64..=20, d in 1i64..7) {
        let x = v(&xs);
        let s = Rational::ratio(t, d);
        let tx: Vec<Rational> = x.iter().map(|e| e.clone() * s.clone()).collect();
        if member(&x) {
            prop_assert!(member(&tx));
        }
        prop_assert_eq!(member(&x), member_bruteforce(&x, 8).member);
    }
}
