use proptest::prelude::*;
use subharm_core::laminate::Laminate;
use subharm_core::scalar::{Rational, Scalar};
use subharm_core::sym2::SymMat2;

/// One random axis split of a random atom: `x = s·b + (1−s)·c` with
/// `b − c` along `e1` or `e2`.
#[derive(Clone, Debug)]
struct Step {
    atom: usize,
    axis: bool,
    s: (i64, i64),
    gap: i64,
    lambda: (i64, i64),
}

fn step() -> impl Strategy<Value = Step> {
    (
        0usize..64,
        any::<bool>(),
        (1i64..9, 1i64..9),
        1i64..6,
        (1i64..5, 0i64..4),
    )
        .prop_map(|(atom, axis, (a, b), gap, (l, m))| Step {
            atom,
            axis,
            s: (a, a + b),
            gap,
            lambda: (l, l + m),
        })
}

fn apply(nu: &Laminate<Rational>, st: &Step) -> Laminate<Rational> {
    let i = st.atom % nu.len();
    let x = nu.atoms[i].matrix.clone();
    let s = Rational::ratio(st.s.0, st.s.1);
    let g = Rational::integer(st.gap);
    // b = x + (1−s)·g·e, c = x − s·g·e
    let e = if st.axis {
        SymMat2::diag(Rational::one(), Rational::zero())
    } else {
        SymMat2::diag(Rational::zero(), Rational::one())
    };
    let b = x.clone() + e.scale(&((Rational::one() - s.clone()) * g.clone()));
    let c = x - e.scale(&(s.clone() * g));
    nu.split(i, b, c, s, Rational::ratio(st.lambda.0, st.lambda.1))
        .unwrap()
}

proptest! {
    #[test]
    fn mass_and_barycenter_are_conserved(
        root in (-5i64..6, -3i64..4, -5i64..6),
        steps in proptest::collection::vec(step(), 0..20),
    ) {
        let x0 = SymMat2::from_ints(root.0, root.1, root.2);
        let mut nu = Laminate::dirac(x0.clone());
        for st in &steps {
            nu = apply(&nu, st);
            prop_assert_eq!(nu.total_mass(), Rational::one());
            prop_assert_eq!(nu.barycenter(), x0.clone());
        }
        let report = nu.validate();
        prop_assert!(report.ok, "{:?}", report.failures);
        let leaves = nu.plan().leaves();
        let mass = leaves.iter().fold(Rational::zero(), |a, (w, _)| a + w.clone());
        prop_assert_eq!(mass, Rational::one());
    }

    #[test]
    fn trail_only_grows(steps in proptest::collection::vec(step(), 1..20)) {
        let mut nu = Laminate::dirac(SymMat2::<Rational>::identity());
        let mut prev = 0;
        for st in &steps {
            nu = apply(&nu, st);
            prop_assert!(nu.trail.len() >= prev);
            prev = nu.trail.len();
            for t in &nu.trail {
                prop_assert!(matches!(t.b.rank_one_connected(&t.c), Ok(Some(_))));
            }
        }
    }

    #[test]
    fn json_round_trip_preserves_laminate(steps in proptest::collection::vec(step(), 0..8)) {
        let mut nu = Laminate::dirac(SymMat2::<Rational>::from_ints(1, 0, 2));
        for st in &steps {
            nu = apply(&nu, st);
        }
        let back: Laminate<Rational> = serde_json::from_str(&serde_json::to_string(&nu).unwrap()).unwrap();
        prop_assert_eq!(back, nu);
    }
}
