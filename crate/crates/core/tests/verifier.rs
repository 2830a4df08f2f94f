use subharm_core::constructions::{lemma_n_laminate, staircase_schedule, verify_lemma_n};
use subharm_core::integrand::{DiagL1, Frobenius, IntegrandRegistry};
use subharm_core::interval::Interval;
use subharm_core::scalar::Rational;
use subharm_core::sym2::SymMat2;
use subharm_core::synth::template::Rect;
use subharm_core::synth::{realize_laminate, realize_simple, SynthConfig};
use subharm_core::verifier::*;

fn unit() -> Rect {
    Rect::new([0.0, 0.0], [1.0, 1.0])
}

fn half_square() -> subharm_core::synth::PiecewisePotential {
    let id = SymMat2::scalar(Rational::integer(1));
    realize_simple(
        id.clone(),
        id.clone(),
        id,
        Rational::integer(1),
        unit(),
        &SynthConfig::new(0.1),
    )
    .unwrap()
}

#[test]
fn quadratic_functionals_match_hand_values() {
    // u = ½|x|²: D²u = Id on the unit square
    let u = half_square();
    let f = hessian_l1(&u, &Frobenius);
    assert!(f.contains(2f64.sqrt()) && f.width() < 1e-12);
    let d = hessian_l1(&u, &DiagL1);
    assert!(d.contains(2.0) && d.width() < 1e-12);
    assert_eq!(min_trace(&u), 2.0);
    assert_eq!(neg_part_lq(&u, 1, 1.5).unwrap().hi(), 0.0);
    assert_eq!(
        boundary_check(&u, &SymMat2::scalar(Interval::ONE), u.offset),
        0.0
    );
}

#[test]
fn bad_axes_and_exponents_are_rejected() {
    let u = half_square();
    assert!(matches!(neg_part_lq(&u, 0, 1.5), Err(VerifyError::Axis(0))));
    assert!(matches!(neg_part_lq(&u, 3, 1.5), Err(VerifyError::Axis(3))));
    assert!(matches!(
        neg_part_lq(&u, 1, 2.0),
        Err(VerifyError::Exponent(_))
    ));
    assert!(matches!(
        neg_part_lq(&u, 1, 0.5),
        Err(VerifyError::Exponent(_))
    ));
}

#[test]
fn realization_report_passes_and_serializes() {
    let nu = lemma_n_laminate(Interval::two_pow(1.5), Interval::ONE).unwrap();
    let (u, tree) = realize_laminate(&nu, unit(), &SynthConfig::new(0.1)).unwrap();
    let phis = IntegrandRegistry::builtin().all_with(1.5);
    let r = realization_report(&u, &tree, &nu, 0.1, &phis).unwrap();
    assert!(r.passed());
    let csv = r.to_csv();
    assert!(csv.starts_with("functional,region,j,q,lo,hi,verdict\n"));
    assert_eq!(csv.lines().count(), r.rows.len() + 1);
    assert!(csv.contains("area_atom0"));
}

#[test]
fn deviation_is_zero_inside_and_positive_outside() {
    let a = Interval::new(1.0, 2.0);
    assert_eq!(deviation(Interval::point(1.5), Interval::point(1.5)), 0.0);
    assert_eq!(deviation(a, Interval::point(1.0)), 1.0);
    assert!((fit_slope(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]) - 2.0).abs() < 1e-15);
    assert!(fit_slope(&[(0.0, 1.0)]).is_nan());
}

#[test]
fn divergence_table_grows_like_the_prediction() {
    let cfg = SynthConfig::relative(0.05);
    let t = lp_divergence_table(4, &[1.01, 1.5], 2, unit(), &cfg).unwrap();
    assert_eq!(t.rows.len(), 8);
    let schedule = staircase_schedule(4);
    let omega1 = {
        let st =
            subharm_core::synth::staircase_build(&staircase_schedule(1), unit(), &cfg).unwrap();
        st.tree.measure(1)
    };

    let hi = t.values(1.5);
    for w in hi.windows(2) {
        assert!(
            w[1].value.lo() > w[0].value.hi(),
            "q=1.5 values must increase"
        );
    }
    for r in hi.iter().skip(1) {
        // |Ω₁| c₂(p_J) 2^{Σ_{m<J}(q − p_m)}
        let layer = schedule.layer(r.depth);
        let c2 = verify_lemma_n(layer.two_p, Interval::ONE, 1.5).unwrap().c2;
        let predicted = (omega1 * c2 * r.exponent.exp2()).mid();
        let ratio = r.increment.mid() / predicted;
        assert!((0.5..=2.0).contains(&ratio), "J={} ratio {ratio}", r.depth);
    }

    // for q near 1 the increments shrink relative to q = 1.5
    let lo = t.values(1.01);
    for j in 2..lo.len() {
        let g_lo = lo[j].increment.mid() / lo[j - 1].increment.mid();
        let g_hi = hi[j].increment.mid() / hi[j - 1].increment.mid();
        assert!(g_lo < g_hi, "J={}: {g_lo} vs {g_hi}", j + 1);
    }
    let csv = t.to_csv();
    assert!(csv.starts_with("J,q,i,"));
    assert!(csv.contains("q,slope"));
}
