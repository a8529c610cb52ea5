use std::f64::consts::PI;

use rfl_core::error::{CrossingKind, Error};
use rfl_core::fields::FieldId;
use rfl_core::flow::*;
use rfl_core::torus::{torus_distance, TorusPoint};

fn p(x: f64, y: f64) -> TorusPoint<2> {
    TorusPoint::new([x, y]).unwrap()
}

fn cfg() -> FlowSolverConfig {
    FlowSolverConfig::default()
}

/// Independent oracle for `ẋ = sin 2πx`: `x(t) = arctan(tan(πx₀) e^{2πt})/π`
/// on the branch of `x₀`, and `log J = ∫ 2π cos 2πx(s) ds` by composite Simpson.
fn sine_shear_oracle(x0: f64, t: f64) -> (f64, f64) {
    let x_at = |s: f64| {
        let v = ((PI * x0).tan() * (2.0 * PI * s).exp()).atan() / PI;
        if x0 > 0.5 {
            v + 1.0
        } else {
            v
        }
    };
    let n = 20_000;
    let h = t / n as f64;
    let g = |s: f64| 2.0 * PI * (2.0 * PI * x_at(s)).cos();
    let mut acc = g(0.0) + g(t);
    for i in 1..n {
        acc += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    (x_at(t).rem_euclid(1.0), acc * h / 3.0)
}

#[test]
fn config_validation() {
    assert!(cfg().validate().is_ok());
    assert!(cfg().with_step(0.0).validate().is_err());
    let mut c = cfg();
    c.event_tol = 1e-2;
    assert!(c.validate().is_err());
    let f = FieldId::C.field();
    assert!(integrate_flow(f, &cfg(), &InitialPoints::Grid(2), &[0.5]).is_err());
}

#[test]
fn shear_example() {
    let (x, lj) = flow_point(FieldId::C.field(), &cfg(), &p(0.25, 0.0), 0.7).unwrap();
    assert!(torus_distance(&x, &p(0.25, 0.7)) < 1e-12);
    assert_eq!(lj, 0.0);
    let exact = cfg().with_method(Method::ExplicitExact);
    let (x, _) = flow_point(FieldId::C.field(), &exact, &p(0.75, 0.1), 0.7).unwrap();
    assert!(torus_distance(&x, &p(0.75, 0.4)) < 1e-12);
}

#[test]
fn rotation_is_reversible() {
    let f = FieldId::A.field();
    for x in [p(0.1, 0.2), p(0.7, 0.35), p(0.5, 0.9)] {
        let (y, _) = flow_point(f, &cfg(), &x, 0.8).unwrap();
        let (z, lj) = flow_point(f, &cfg(), &y, -0.8).unwrap();
        assert!(torus_distance(&x, &z) < 1e-8);
        assert!(lj.abs() < 1e-12);
    }
}

#[test]
fn sine_shear_matches_oracle() {
    let f = FieldId::B.field();
    for (x0, t) in [(0.25, 0.3), (0.25, 1.0), (0.1, 0.5), (0.8, 0.7)] {
        let (ox, ol) = sine_shear_oracle(x0, t);
        for method in [Method::Rk4Event, Method::ExplicitExact] {
            let (x, lj) = flow_point(f, &cfg().with_method(method), &p(x0, 0.3), t).unwrap();
            assert!(torus_distance(&x, &p(ox, 0.3)) < 1e-9, "{method} x0={x0} t={t}");
            assert!((lj - ol).abs() < 1e-6, "{method} x0={x0} t={t}: {lj} vs {ol}");
        }
    }
}

#[test]
fn explicit_exact_unsupported_for_rotation() {
    let r = flow_point(
        FieldId::A.field(),
        &cfg().with_method(Method::ExplicitExact),
        &p(0.1, 0.1),
        0.1,
    );
    assert!(matches!(r, Err(Error::UnsupportedMethod { .. })));
}

#[test]
fn ensemble_invariants() {
    for id in [FieldId::A, FieldId::B, FieldId::C, FieldId::D] {
        let e = integrate_flow(id.field(), &cfg(), &InitialPoints::Grid(8), &[-0.3, 0.0, 0.4]).unwrap();
        let z = e.time_index(0.0).unwrap();
        assert_eq!(e.positions[z], e.initial);
        assert!(e.log_jacobian[z].iter().all(|&l| l == 0.0));
        assert!(e
            .positions
            .iter()
            .flatten()
            .all(|q| q.coords().iter().all(|c| (0.0..1.0).contains(c))));
    }
}

#[test]
fn starts_on_a_jump_are_perturbed() {
    let pts = vec![p(0.5, 0.3), p(0.2, 0.2)];
    let e = integrate_flow(FieldId::C.field(), &cfg(), &InitialPoints::Points(pts), &[0.0, 0.2]).unwrap();
    assert_eq!(e.perturbed_starts, vec![0]);
    let x = e.position(0.2, 0).unwrap();
    // pushed to the upper band, which moves down
    assert!(torus_distance(&x, &p(0.5 + 1e-9, 0.1)) < 1e-12);
}

#[test]
fn density_examples() {
    let c = integrate_flow(FieldId::C.field(), &cfg(), &InitialPoints::Grid(16), &[0.0, 0.3, 0.9]).unwrap();
    for t in [0.3, 0.9] {
        assert!(density_from_flow(&c, t).unwrap().values.iter().all(|&v| v == 1.0));
    }
    let a = integrate_flow(FieldId::A.field(), &cfg(), &InitialPoints::Grid(16), &[0.0, 1.0]).unwrap();
    let mu = density_from_flow(&a, 1.0).unwrap();
    assert!(mu.values.iter().all(|v| (v - 1.0).abs() < 1e-6));
    assert!(matches!(density_from_flow(&a, 0.5), Err(Error::MissingTime(_))));
}

#[test]
fn backward_density_samples() {
    let b = integrate_flow(FieldId::B.field(), &cfg(), &InitialPoints::Grid(16), &[-0.5, 0.0, 0.5]).unwrap();
    let fwd = density_from_flow(&b, 0.5).unwrap();
    // μ(t, X(−t,x)) = 1/J(−t,x) must agree with J(t, ·) at X(−t,x)
    for (y, mu) in density_along_backward(&b, 0.5).unwrap() {
        let (_, lj) = flow_point(FieldId::B.field(), &cfg(), &y, 0.5).unwrap();
        assert!((mu - lj.exp()).abs() < 1e-8 * mu.max(1.0));
    }
    assert!(fwd.min() > (-PI).exp() * 0.99 && fwd.max() < PI.exp() * 1.01);
    let c = integrate_flow(FieldId::C.field(), &cfg(), &InitialPoints::Grid(4), &[0.0, 0.5]).unwrap();
    assert!(matches!(density_along_backward(&c, 0.5), Err(Error::MissingTime(_))));
}

#[test]
fn sine_shear_density_matches_histogram() {
    let (m, bins, t) = (512, 64, 0.5);
    let exact = cfg().with_method(Method::ExplicitExact);
    let e = integrate_flow(FieldId::B.field(), &exact, &InitialPoints::Grid(m), &[-t, 0.0, t]).unwrap();
    // μ(t,·) is the density of X(−t,·)_#λ, so the oracle bins X(−t, x_i)
    let h = pushforward_histogram(&e, -t, bins).unwrap();
    let mu = bin_average(&density_from_flow(&e, t).unwrap(), bins).unwrap();
    let gap = mu.sup_distance(&h).unwrap();
    assert!(gap <= 0.05 * mu.max(), "gap {gap}, max {}", mu.max());
}

#[test]
fn histogram_examples() {
    let m = 256;
    let c = integrate_flow(FieldId::C.field(), &cfg(), &InitialPoints::Grid(m), &[0.0, 0.3]).unwrap();
    let h = pushforward_histogram(&c, 0.3, 32).unwrap();
    assert!(h.values.iter().all(|v| (v - 1.0).abs() <= 4.0 / m as f64));

    let e = integrate_flow(FieldId::E.field(), &cfg(), &InitialPoints::Grid(m), &[0.0, 0.4, 0.6]).unwrap();
    let h4 = pushforward_histogram(&e, 0.4, 64).unwrap();
    assert!(h4.max() > 1.0 + 2.0 * 0.4 * 64.0 * 0.5);
    let h6 = pushforward_histogram(&e, 0.6, 64).unwrap();
    // columns next to x₁ = 0 are emptied
    for j in 0..64 {
        assert_eq!(h6.values[j], 0.0);
        assert_eq!(h6.values[63 * 64 + j], 0.0);
    }
}

#[test]
fn compression_absorbs_and_backward_fails() {
    let f = FieldId::E.field();
    let e = integrate_flow(
        f,
        &cfg(),
        &InitialPoints::Points(vec![p(0.3, 0.5), p(0.9, 0.1)]),
        &[0.0, 0.25],
    )
    .unwrap();
    assert!(e.absorbed[1][0]);
    assert!(torus_distance(&e.positions[1][0], &p(0.5, 0.5)) < 1e-12);
    assert!(!e.absorbed[1][1]);
    assert!(torus_distance(&e.positions[1][1], &p(0.65, 0.1)) < 1e-12);
    // backward from the depleted region runs into the line x₁ = 0 from both sides
    match flow_point(f, &cfg(), &p(0.1, 0.3), -0.2) {
        Err(Error::NonTransversalCrossing { kind, .. }) => assert_eq!(kind, CrossingKind::AttractingBackward),
        other => panic!("{other:?}"),
    }
    for method in [Method::Rk4Event, Method::ExplicitExact] {
        let r = flow_point(f, &cfg().with_method(method), &p(0.05, 0.3), -0.3);
        assert!(matches!(r, Err(Error::NonTransversalCrossing { .. })), "{method}");
    }
}

#[test]
fn group_property_examples() {
    let a = FieldId::A.field();
    let e = integrate_flow(a, &cfg(), &InitialPoints::Grid(8), &[0.0, 0.2, 0.3, 0.5]).unwrap();
    assert!(check_group_property(a, &cfg(), &e, 0.2, 0.3).unwrap() <= 1e-8);
    assert_eq!(check_group_property(a, &cfg(), &e, 0.0, 0.3).unwrap(), 0.0);
    let c = FieldId::C.field();
    let e = integrate_flow(c, &cfg(), &InitialPoints::Grid(8), &[0.0, 0.25, 0.5]).unwrap();
    assert!(check_group_property(c, &cfg(), &e, 0.25, 0.25).unwrap() <= 1e-10);
}

#[test]
fn group_defect_has_fourth_order() {
    let a = FieldId::A.field();
    let (s, t) = (0.2137, 0.3311);
    let mut pts = Vec::new();
    for h in [0.04, 0.02, 0.01] {
        let c = cfg().with_step(h);
        let e = integrate_flow(a, &c, &InitialPoints::Grid(6), &[0.0, s, s + t]).unwrap();
        pts.push((h, check_group_property(a, &c, &e, s, t).unwrap()));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let fit = rfl_core::experiments::fit_rate(&xs, &ys).unwrap();
    assert!(fit.slope >= 3.8, "{pts:?} slope {}", fit.slope);
}

#[test]
fn ode_residual_examples() {
    let c = FieldId::C.field();
    let times: Vec<f64> = (0..=500).map(|i| i as f64 * 1e-3).collect();
    let e = integrate_flow(c, &cfg(), &InitialPoints::Points(vec![p(0.25, 0.0)]), &times).unwrap();
    assert!(check_ode_residual(c, &e, 0, 0.5).unwrap() <= 1e-12);
    assert_eq!(check_ode_residual(c, &e, 0, 0.0).unwrap(), 0.0);

    let a = FieldId::A.field();
    let times: Vec<f64> = (0..=1000).map(|i| i as f64 * 1e-3).collect();
    let e = integrate_flow(a, &cfg(), &InitialPoints::Grid(3), &times).unwrap();
    for i in 0..9 {
        assert!(check_ode_residual(a, &e, i, 1.0).unwrap() <= 1e-5);
    }
    // the residual is the trapezoid error: halving the sampling step quarters it
    let coarse: Vec<f64> = (0..=500).map(|i| i as f64 * 2e-3).collect();
    let e2 = integrate_flow(a, &cfg(), &InitialPoints::Grid(3), &coarse).unwrap();
    let (r1, r2) = (
        check_ode_residual(a, &e, 0, 1.0).unwrap(),
        check_ode_residual(a, &e2, 0, 1.0).unwrap(),
    );
    assert!((r2 / r1 - 4.0).abs() < 0.2, "{r1} {r2}");
}

#[test]
fn backward_forward_consistency() {
    for id in [FieldId::A, FieldId::B, FieldId::C, FieldId::D] {
        let f = id.field();
        let e = integrate_flow(f, &cfg(), &InitialPoints::Grid(10), &[0.0, 0.6]).unwrap();
        assert!(backward_forward_defect(f, &cfg(), &e, 0.6).unwrap() < 1e-8, "{id}");
    }
}

#[test]
fn total_mass_is_preserved() {
    for id in [FieldId::A, FieldId::C, FieldId::D] {
        let e = integrate_flow(
            id.field(),
            &cfg(),
            &InitialPoints::Grid(32),
            &[-1.0, -0.5, 0.0, 0.5, 1.0],
        )
        .unwrap();
        for &t in &e.times {
            assert!(
                (density_from_flow(&e, t).unwrap().integral() - 1.0).abs() < 1e-6,
                "{id} t={t}"
            );
        }
    }
    // field B: J depends on x₁ only; resolve its peak of width ~e^{−2π|t|}/π
    let b = FieldId::B.field();
    let n = 8192;
    let pts: Vec<_> = (0..n).map(|i| p((i as f64 + 0.5) / n as f64, 0.5)).collect();
    let e = integrate_flow(b, &cfg(), &InitialPoints::Points(pts), &[-1.0, -0.5, 0.0, 0.5, 1.0]).unwrap();
    for (ti, &t) in e.times.iter().enumerate() {
        let mass: f64 = e.log_jacobian[ti].iter().map(|l| l.exp()).sum::<f64>() / n as f64;
        assert!((mass - 1.0).abs() < 1e-6, "B t={t}: {mass}");
    }
}

#[test]
fn ensembles_are_thread_count_independent() {
    let f = FieldId::D.field();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| integrate_flow(f, &cfg(), &InitialPoints::Grid(20), &[0.0, 0.37]).unwrap())
    };
    let (a, b) = (run(1), run(3));
    let mut wa = Vec::new();
    let mut wb = Vec::new();
    a.write_csv(&mut wa).unwrap();
    b.write_csv(&mut wb).unwrap();
    assert_eq!(wa, wb);
    let text = String::from_utf8(wa).unwrap();
    assert!(text.starts_with("t,x0_1,x0_2,x_1,x_2,logJ\n"));
}

#[test]
fn branch_loops_disagree_on_absorbed_points() {
    let (l, r) = branch_loop_ensembles(FieldId::E.field(), &cfg(), 40, 0.3).unwrap();
    let (il, ir) = (l.time_index(-0.3).unwrap(), r.time_index(-0.3).unwrap());
    let q: f64 = l.positions[il]
        .iter()
        .zip(&r.positions[ir])
        .map(|(a, b)| torus_distance(a, b))
        .sum::<f64>()
        / l.len() as f64;
    // absorbed band of width 0.6, branches end at x₁ = 0.2 and 0.8
    assert!((q - 0.24).abs() < 0.03, "{q}");
}
