use subharm_core::constructions::*;
use subharm_core::integrand::{DiagL1, NegPartPow};
use subharm_core::interval::Interval;
use subharm_core::scalar::{Rational, Scalar};
use subharm_core::sym2::SymMat2;

/// Atoms `(weight, x11, x22)` of the three-atom laminate, straight from the
/// defining formulas in plain floating point.
fn oracle_atoms(t: f64, k: f64) -> [(f64, f64, f64); 3] {
    let alpha = (t - 1.0) / (t + 1.0);
    let beta = (t + 1.0) / (2.0 * t);
    [
        (alpha, k * (t - 3.0) / (t - 1.0), k),
        (beta * (1.0 - alpha), 2.0 * k, 2.0 * k),
        ((1.0 - beta) * (1.0 - alpha), 2.0 * k, -2.0 * k / (t - 1.0)),
    ]
}

fn oracle_moment(t: f64, k: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
    oracle_atoms(t, k)
        .iter()
        .map(|&(w, a, b)| w * f(a, b))
        .sum()
}

fn neg(x: f64) -> f64 {
    (-x).max(0.0)
}

#[test]
fn weight_of_doubled_identity_at_p_three_halves() {
    let nu = lemma_n_laminate(Interval::two_pow(1.5), Interval::ONE).unwrap();
    let w = nu.weight_of(&SymMat2::scalar(Interval::point(2.0)));
    assert!((w.mid() - 0.353553).abs() < 1e-6);
    assert!(w.contains(2f64.powf(-1.5)));
}

#[test]
fn barycenter_at_k_two() {
    let nu = lemma_n_laminate(Interval::two_pow(1.5), Interval::point(2.0)).unwrap();
    let b = nu.barycenter();
    assert!(b.a11.contains(2.0) && b.a22.contains(2.0) && b.a12.contains(0.0));
}

#[test]
fn lemma_items_hold_on_a_p_grid() {
    for p in [1.05, 1.2, 1.3, 1.45, 1.55, 1.58] {
        for k in [1.0, 2.0, 8.0] {
            let r = verify_lemma_n(Interval::two_pow(p), Interval::point(k), 1.5).unwrap();
            assert!(r.ok(), "p={p} k={k}: {:?}", r.items);
            let t = 2f64.powf(p);
            let c = oracle_moment(t, 1.0, |a, b| a.abs() + b.abs());
            assert!((r.big_c.mid() - c).abs() < 1e-12 * c);
            let c2 = oracle_moment(t, 1.0, |_, b| neg(b).powf(1.5));
            assert!((r.c2.mid() - c2).abs() < 1e-12);
        }
    }
}

#[test]
fn scale_invariance_is_exact_for_rational_surrogate() {
    let t = Rational::ratio(5, 2);
    let unit = lemma_n_laminate(t.clone(), Rational::one()).unwrap();
    let c = unit.moment_exact(&DiagL1).unwrap();
    for k in [1, 2, 4] {
        let nu = lemma_n_laminate(t.clone(), Rational::integer(k)).unwrap();
        let ck = nu.moment_exact(&DiagL1).unwrap();
        assert_eq!(ck / c.clone(), Rational::integer(k));
    }
    let expected = oracle_moment(2.5, 1.0, |a, b| a.abs() + b.abs());
    assert!((c.to_f64() - expected).abs() < 1e-14);
}

#[test]
fn first_negative_constant_vanishes_near_log2_3() {
    let p = 3f64.log2() - 1e-6;
    let r = verify_lemma_n(Interval::two_pow(p), Interval::ONE, 1.5).unwrap();
    let t = 2f64.powf(p);
    let oracle = (t - 1.0) / (t + 1.0) * neg((t - 3.0) / (t - 1.0)).powf(1.5);
    assert!(oracle < 1e-8);
    assert!(r.c1.hi() < 1e-8);
    assert!((r.c1.mid() - oracle).abs() < 1e-12);
    assert!(r.ok());
}

#[test]
fn doubled_identity_weight_is_inverse_two_p() {
    for t in [
        Rational::ratio(5, 2),
        Rational::ratio(21, 8),
        Rational::integer(3),
        Rational::integer(7),
    ] {
        let nu = lemma_n_laminate(t.clone(), Rational::integer(3)).unwrap();
        let w = nu.weight_of(&SymMat2::scalar(Rational::integer(6)));
        assert_eq!(w, Rational::one() / t);
    }
}

#[test]
fn fundlem_start_and_first_step() {
    let t = Rational::ratio(5, 2);
    let nu0 = fundlem_sequence(t.clone(), 0).unwrap();
    assert_eq!(nu0.len(), 1);
    assert_eq!(nu0.atoms[0].matrix, SymMat2::identity());
    let nu1 = fundlem_sequence(t.clone(), 1).unwrap();
    let direct = lemma_n_laminate(t, Rational::one()).unwrap();
    assert_eq!(nu1.atoms, direct.atoms);
}

#[test]
fn fundlem_barycenter_mass_and_history() {
    let t = Rational::ratio(21, 8);
    for m in 0..=10u32 {
        let nu = fundlem_sequence(t.clone(), m).unwrap();
        assert_eq!(nu.barycenter(), SymMat2::identity());
        assert_eq!(nu.total_mass(), Rational::one());
        assert_eq!(nu.history.splits.len(), 2 * m as usize);
        for j in 1..=m {
            let k = Rational::integer(1 << (j - 1));
            let at_stage = nu
                .history
                .splits
                .iter()
                .filter(|r| r.stage == j && r.parent == SymMat2::scalar(k.clone()));
            assert_eq!(at_stage.count(), 1);
        }
        assert!(nu.validate().ok);
        for tr in &nu.trail {
            assert!(tr.b.is_diagonal() && tr.c.is_diagonal());
            assert!(tr.b.trace().is_certainly_positive() && tr.c.trace().is_certainly_positive());
        }
    }
}

#[test]
fn a_sequence_exact_against_closed_form() {
    let t = Rational::ratio(5, 2);
    let table = moment_recursions(t.clone(), 1.5, 12).unwrap();
    assert!(table.agree());
    assert_eq!(table.rows[0].a_direct, Rational::integer(2));
    assert_eq!(table.rows[0].b_direct, [Interval::ZERO; 2]);
    // oracle: |a_m − a_{m−1}| = |C − 2| (2/t)^{m−1}
    let c = oracle_moment(2.5, 1.0, |a, b| a.abs() + b.abs());
    for m in 1..=12usize {
        let inc = table.a_increment(m).to_f64().abs();
        let expect = (c - 2.0).abs() * (2.0f64 / 2.5).powi(m as i32 - 1);
        assert!((inc - expect).abs() <= 1e-12 * expect);
        assert_eq!(table.rows[m].a_direct, table.rows[m].a_closed);
    }
    let total: f64 = (1..=12).map(|m| table.a_increment(m).to_f64().abs()).sum();
    assert!(total < (c - 2.0).abs() / (1.0 - 0.8));
}

#[test]
fn b_increments_constant_when_q_equals_p() {
    let p = 1.5;
    let table = moment_recursions(Interval::two_pow(p), p, 12).unwrap();
    assert!(table.agree());
    let t = 2f64.powf(p);
    let c = [
        oracle_moment(t, 1.0, |a, _| neg(a).powf(p)),
        oracle_moment(t, 1.0, |_, b| neg(b).powf(p)),
    ];
    for (i, &ci) in c.iter().enumerate() {
        assert!(ci > 0.0);
        for m in 1..=12usize {
            let inc = table.b_increment(m, i);
            assert!((inc.mid() - ci).abs() < 1e-10, "m={m} i={i}: {inc} vs {ci}");
        }
        assert!(table.rows[12].b_direct[i].lo() > 11.0 * ci);
    }
}

#[test]
fn b_increments_geometric_for_larger_q() {
    let (p, q) = (1.3, 1.7);
    let table = moment_recursions(Interval::two_pow(p), q, 10).unwrap();
    for i in 0..2 {
        for m in 2..=10usize {
            let ratio = table.b_increment(m, i).mid() / table.b_increment(m - 1, i).mid();
            assert!((ratio - 2f64.powf(q - p)).abs() < 1e-9);
        }
    }
}

#[test]
fn moment_table_csv_shape() {
    let table = moment_recursions(Rational::integer(3), 1.0, 3).unwrap();
    let csv = table.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "m,a_lo,a_hi,b1_lo,b1_hi,b2_lo,b2_hi");
    assert!(lines[1].starts_with("0,2.00000000000000000e0,2.00000000000000000e0"));
}

#[test]
fn staircase_schedule_properties() {
    let s = staircase_schedule(12);
    let kappa = 2.0 / std::f64::consts::LN_2;
    for l in &s.layers {
        let j = l.j as f64;
        assert!(l.p.contains(1.0 + kappa / j));
        assert!(l.eps <= 0.25f64.powi(l.j as i32));
        // 2^{Σ(1−p_m)} < (j+1)^{−2}
        assert!(s.decay(l.j).hi() < (j + 1.0).powi(-2));
    }
    for w in s.layers.windows(2) {
        assert!(w[1].p.hi() < w[0].p.lo());
    }
    for (j, k) in [(1u32, 1.0), (2, 2.0), (3, 4.0)] {
        let b = s.layer_laminate(j).unwrap().barycenter();
        assert!(b.a11.contains(k) && b.a22.contains(k));
    }
}

#[test]
fn negative_part_moment_matches_integrand_directly() {
    let nu = lemma_n_laminate(Rational::ratio(5, 2), Rational::one()).unwrap();
    let b1 = nu.moment_exact(&NegPartPow::new(0, 1.0)).unwrap();
    // α·|A11| = (3/7)·(1/3)
    assert_eq!(b1, Rational::ratio(1, 7));
}

#[test]
fn golden_constants_over_p_range() {
    // repository goldens, computed once by `constants_scan` and frozen
    let s = constants_scan(1.1, 1.55, 1.5, 91).unwrap();
    assert!((s.big_c_sup - 3.138513983800586).abs() < 1e-9);
    assert!((s.small_c_inf - 0.003529254118901109).abs() < 1e-9);
    assert!(s.small_c_inf > 0.0);
}
