use proptest::prelude::*;

use subharm_core::constructions::staircase_schedule;
use subharm_core::obstacle::*;
use subharm_core::synth::template::Rect;
use subharm_core::synth::{staircase_build, SynthConfig};

fn tight() -> SolveOptions {
    SolveOptions {
        tol: 1e-13,
        ..SolveOptions::default()
    }
}

/// Discrete harmonic extension by conjugate gradients on the interior unknowns.
fn harmonic_extension(grid: &Grid, g: &[f64]) -> Vec<f64> {
    let n = grid.n;
    let interior = |k: usize| grid.kind[k] == NodeKind::Interior;
    let apply = |x: &[f64]| -> Vec<f64> {
        (0..grid.len())
            .map(|k| {
                if interior(k) {
                    4.0 * x[k]
                        - [k - 1, k + 1, k - n, k + n]
                            .iter()
                            .filter(|&&m| interior(m))
                            .map(|&m| x[m])
                            .sum::<f64>()
                } else {
                    0.0
                }
            })
            .collect()
    };
    let b: Vec<f64> = (0..grid.len())
        .map(|k| {
            if interior(k) {
                [k - 1, k + 1, k - n, k + n]
                    .iter()
                    .filter(|&&m| !interior(m))
                    .map(|&m| g[m])
                    .sum()
            } else {
                0.0
            }
        })
        .collect();
    let mut x = vec![0.0; grid.len()];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    for _ in 0..10 * grid.len() {
        if rr < 1e-30 {
            break;
        }
        let ap = apply(&p);
        let alpha = rr / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for k in 0..grid.len() {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr2: f64 = r.iter().map(|v| v * v).sum();
        for k in 0..grid.len() {
            p[k] = r[k] + rr2 / rr * p[k];
        }
        rr = rr2;
    }
    (0..grid.len())
        .map(|k| if interior(k) { x[k] } else { g[k] })
        .collect()
}

#[test]
fn unconstrained_limit_is_the_harmonic_extension() {
    for order in sweep_orders() {
        let grid = Grid::square(33, -1.0, 1.0).unwrap();
        let g = |x: [f64; 2]| x[0].exp() * x[1].sin() + 0.3 * x[0] * x[1];
        let inst = ObstacleInstance::from_fns(grid, g, |_| -1e3).unwrap();
        let sol = solve(
            &inst,
            &SolveOptions {
                order: order.to_string(),
                ..tight()
            },
        )
        .unwrap();
        assert!(sol.converged);
        let want = harmonic_extension(&inst.grid, &inst.g);
        let err = sol
            .u
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{order}: {err}");
        assert_eq!(sol.contact_count(&inst, 1e-9), 0);
    }
}

#[test]
fn harmonic_quadratic_is_reproduced_exactly() {
    let grid = Grid::disk(41).unwrap();
    let g = |x: [f64; 2]| x[0] * x[0] - x[1] * x[1] + 2.0;
    let inst = ObstacleInstance::from_fns(grid, g, |_| -5.0).unwrap();
    let sol = solve(&inst, &tight()).unwrap();
    for k in 0..inst.grid.len() {
        if inst.grid.kind[k] == NodeKind::Interior {
            assert!((sol.u[k] - g(inst.grid.point(k))).abs() < 1e-8);
        }
    }
}

#[test]
fn contact_radius_matches_closed_form_equation() {
    // −4r² ln r = 1 − 2r², bisected directly
    let f = |r: f64| -4.0 * r * r * r.ln() - 1.0 + 2.0 * r * r;
    let (mut a, mut b) = (0.1, 0.9);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if f(m) < 0.0 {
            a = m
        } else {
            b = m
        }
    }
    assert!((radial_contact_radius(20_000) - a).abs() < 1e-10);
}

#[test]
fn radial_problem_converges_at_second_order() {
    let s = radial_study(&[65, 129, 257], &SolveOptions::default()).unwrap();
    assert!(s.order >= 1.8, "{:?}", s);
    assert!(s.rows.windows(2).all(|w| w[1].2 < w[0].2));
}

#[test]
fn radial_contact_set_is_a_disk_of_the_right_radius() {
    let r0 = radial_contact_radius(20_000);
    let inst = radial_instance(129, r0).unwrap();
    let sol = solve(&inst, &SolveOptions::default()).unwrap();
    assert!(sol.converged && sol.energy_monotone);
    assert!(sol.contact_count(&inst, 1e-9) > 0);
    let h = inst.grid.h;
    for k in 0..inst.grid.len() {
        if inst.grid.kind[k] != NodeKind::Interior {
            continue;
        }
        let r = inst.grid.point(k)[0].hypot(inst.grid.point(k)[1]);
        let touching = sol.u[k] - inst.phi[k] <= 1e-9;
        if r < r0 - 3.0 * h {
            assert!(touching, "r={r}");
        }
        if r > r0 + 3.0 * h {
            assert!(!touching, "r={r}");
        }
    }
}

#[test]
fn superharmonic_staircase_obstacle_is_its_own_solution() {
    let st = staircase_build(
        &staircase_schedule(3),
        Rect::new([0.0, 0.0], [1.0, 1.0]),
        &SynthConfig::new(0.05),
    )
    .unwrap();
    let mut constants = Vec::new();
    for n in [65, 129, 257] {
        let r = prop_lip_check(&st.u, n, &SolveOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.deviation <= 4.0 * r.h, "{r:?}");
        assert!(r.contact_fraction > 0.99);
        constants.push(r.constant);
    }
    assert!(constants.iter().all(|c| c.is_finite()));
}

#[test]
fn subharmonic_obstacle_separates() {
    let opts = SolveOptions::default();
    let grid = Grid::square(65, -1.0, 1.0).unwrap();
    let phi = |x: [f64; 2]| 0.5 * (x[0] * x[0] + x[1] * x[1]);
    let inst = ObstacleInstance::from_fns(grid, phi, phi).unwrap();
    let sol = solve(&inst, &opts).unwrap();
    let gap = sol
        .u
        .iter()
        .zip(&inst.phi)
        .map(|(a, b)| a - b)
        .fold(0.0, f64::max);
    assert!(gap >= 10.0 * opts.tol, "{gap}");
    assert_eq!(sol.contact_count(&inst, 1e-9), 0);
}

#[test]
fn concave_quadratic_obstacle_is_fixed() {
    let grid = Grid::square(65, -1.0, 1.0).unwrap();
    let phi = |x: [f64; 2]| -0.5 * (x[0] * x[0] + x[1] * x[1]);
    let inst = ObstacleInstance::from_fns(grid, phi, phi).unwrap();
    let sol = solve(&inst, &SolveOptions::default()).unwrap();
    assert_eq!(sol.u, inst.phi);
    assert_eq!(sol.iterations, 0);
}

#[test]
fn sweep_orders_agree() {
    let r0 = radial_contact_radius(20_000);
    let inst = radial_instance(65, r0).unwrap();
    let a = solve(&inst, &tight()).unwrap();
    let b = solve(
        &inst,
        &SolveOptions {
            order: "lexicographic".into(),
            ..tight()
        },
    )
    .unwrap();
    let d =
        a.u.iter()
            .zip(&b.u)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
    assert!(d < 1e-9, "{d}");
}

#[test]
fn invalid_inputs_are_rejected() {
    let grid = Grid::square(17, 0.0, 1.0).unwrap();
    assert!(matches!(
        Grid::square(4, 0.0, 1.0),
        Err(ObstacleError::GridTooSmall(4))
    ));
    assert!(matches!(
        ObstacleInstance::from_fns(grid.clone(), |_| 0.0, |_| 1.0),
        Err(ObstacleError::Incompatible { .. })
    ));
    let inst = ObstacleInstance::from_fns(grid, |_| 1.0, |_| 0.0).unwrap();
    for omega in [0.0, 2.0, f64::NAN] {
        assert!(matches!(
            solve(
                &inst,
                &SolveOptions {
                    omega,
                    ..Default::default()
                }
            ),
            Err(ObstacleError::Omega(_))
        ));
    }
    assert!(matches!(
        solve(
            &inst,
            &SolveOptions {
                tol: 0.0,
                ..Default::default()
            }
        ),
        Err(ObstacleError::Tolerance(_))
    ));
    assert!(matches!(
        sweep_order("spiral"),
        Err(ObstacleError::UnknownOrder(_))
    ));
}

#[test]
fn hessian_plus_of_a_parabola() {
    // u = x² has D²_h u = diag(2, 0) exactly on every node
    let grid = Grid::square(33, 0.0, 1.0).unwrap();
    let u = grid.sample(|x| x[0] * x[0]);
    let norms = hessian_plus_norms(&grid, &u, &[1.0, 1.5], 1.0);
    let area = (31.0 * grid.h).powi(2);
    assert!((norms["1"] - 2.0 * area).abs() < 1e-9);
    assert!((norms["1.5"] - 2f64.powf(1.5) * area).abs() < 1e-9);
    let neg = grid.sample(|x| -x[0] * x[0]);
    assert_eq!(hessian_plus_norms(&grid, &neg, &[1.0], 1.0)["1"], 0.0);
}

#[test]
fn hessian_plus_table_has_a_row_per_grid() {
    let st = staircase_build(
        &staircase_schedule(1),
        Rect::new([0.0, 0.0], [1.0, 1.0]),
        &SynthConfig::new(0.1),
    )
    .unwrap();
    let rows =
        hessian_plus_diagnostics(&st.u, &[17, 33], &[1.0, 1.5], &SolveOptions::default()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows
        .iter()
        .all(|r| r.norms.len() == 2 && r.norms.values().all(|v| v.is_finite() && *v >= 0.0)));
}

fn bump_instance(n: usize, height: f64, lift: f64) -> ObstacleInstance {
    let grid = Grid::square(n, -1.0, 1.0).unwrap();
    ObstacleInstance::from_fns(
        grid,
        move |_| lift,
        move |x| height * (1.0 - 2.0 * (x[0] * x[0] + x[1] * x[1])) - 0.5,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solution_is_monotone_in_the_data(h1 in 0.1f64..1.0, dh in 0.0f64..0.5, dl in 0.0f64..0.5) {
        let opts = SolveOptions { tol: 1e-12, ..Default::default() };
        let a = solve(&bump_instance(17, h1, 0.5), &opts).unwrap();
        let b = solve(&bump_instance(17, h1 + dh, 0.5 + dl), &opts).unwrap();
        for (x, y) in a.u.iter().zip(&b.u) {
            prop_assert!(*x <= *y + 1e-9);
        }
    }

    #[test]
    fn solution_is_a_feasible_supersolution(h1 in 0.1f64..1.5) {
        let inst = bump_instance(21, h1, 1.0);
        let sol = solve(&inst, &SolveOptions::default()).unwrap();
        prop_assert!(sol.converged && sol.energy_monotone);
        for k in 0..inst.grid.len() {
            prop_assert!(sol.u[k] >= inst.phi[k]);
            if inst.grid.kind[k] == NodeKind::Interior {
                prop_assert!(inst.grid.laplacian_h2(&sol.u, k) <= 1e-9);
            }
        }
        let r = residuals(&inst, &sol.u);
        prop_assert!(r.max() <= 1e-10);
    }
}
