//! The ten acceptance criteria, run in order with their runtime budgets.
//! Each prints one `PASS`/`FAIL` line; the test fails if any criterion does.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{Matrix2, Rotation2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfl_core::experiments::fit_rate;
use rfl_core::fields::FieldId;
use rfl_core::flow::*;
use rfl_core::functionals::*;
use rfl_core::kernels::{AnisotropicKernel, DirectionField, ProfileKind};
use rfl_core::torus::{torus_distance, TorusPoint};
use rfl_core::Result;

type Outcome = Result<(bool, String)>;

fn criterion(id: usize, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = f();
    let took = start.elapsed();
    let (ok, detail) = match outcome {
        Ok((ok, detail)) => (ok && took <= budget, detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "acceptance {id:>2} {} {name}: {detail} [{:.1}s of {}s]",
        if ok { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        budget.as_secs()
    );
    ok
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

const KINDS: [ProfileKind; 2] = [ProfileKind::SmoothExp, ProfileKind::PolyBump];

fn tilted() -> DirectionField<2> {
    DirectionField::tilted(Vector2::new(1.0, 0.3), Vector2::new(0.0, 1.0), 0.4, [1, 1]).unwrap()
}

fn aligned(field: FieldId, gamma: f64) -> AnisotropicKernel<2> {
    let eta = DirectionField::Constant(field.field().jumps()[0].eta);
    AnisotropicKernel::new(ProfileKind::PolyBump, eta, gamma).unwrap()
}

fn random_point(rng: &mut ChaCha8Rng) -> TorusPoint<2> {
    TorusPoint::new([rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).unwrap()
}

fn normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = *random_point(&mut rng).coords();
        for gamma in [0.0, 1.0, 10.0, 100.0] {
            for kind in KINDS {
                let k = AnisotropicKernel::new(kind, tilted(), gamma)?;
                let kx = k.at(&x);
                worst = worst.max((k.integrate_z(&x, 256, |z| kx.rho(z))? - 1.0).abs());
            }
        }
    }
    Ok((worst <= 1e-6, format!("max |∫ρ − 1| = {worst:.2e}")))
}

fn first_variable_term() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let x = *random_point(&mut rng).coords();
        for gamma in [0.0, 1.0, 10.0] {
            for kind in KINDS {
                let k = AnisotropicKernel::new(kind, tilted(), gamma)?;
                let kx = k.at(&x);
                for i in 0..2 {
                    worst = worst.max(k.integrate_z(&x, 256, |z| kx.d1_rho(z)[i])?.abs());
                }
            }
        }
    }
    // I1 on the rotation field with a position-dependent direction
    let field = FieldId::A.field();
    let k = AnisotropicKernel::new(ProfileKind::SmoothExp, tilted(), 1.0)?;
    let x = FlowSpec::Solver(FieldId::A, FlowSolverConfig::default());
    let y = FlowSpec::Shifted(Box::new(x.clone()), [0.3, 0.0]);
    let eps = [0.1, 0.05, 0.025];
    let mut mags = Vec::new();
    for &e in &eps {
        let cfg = FunctionalConfig::default()
            .with_epsilon(e)
            .with_grids(16, 24)
            .with_time(0.1);
        let lat = Lattice::from_config(&cfg)?;
        let xv = x.view(&lat, Nodes::X, &[cfg.t])?;
        let yv = y.view(&lat, Nodes::All, &[cfg.t])?;
        mags.push(i1(field, xv.as_ref(), yv.as_ref(), &k, &cfg)?.abs());
    }
    let refinement: Vec<f64> = eps.iter().map(|e| 1.0 / e).collect();
    let fit = fit_rate(&refinement, &mags)?;
    let ok = worst <= 1e-6 && fit.slope < 0.0;
    Ok((
        ok,
        format!(
            "max |∫∂₁ρ| = {worst:.2e}; |I1| = {} at ε = {eps:?}, slope vs 1/ε = {:.3} ± {:.3}",
            sci(&mags),
            fit.slope,
            fit.stderr
        ),
    ))
}

fn divergence_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for id in [FieldId::A, FieldId::B, FieldId::C] {
        let field = id.field();
        let mut done = 0;
        while done < 50 {
            let x = random_point(&mut rng);
            if field.jumps().iter().any(|j| j.offset(x.coords()).abs() < 1e-6) {
                continue;
            }
            for gamma in [0.0, 10.0] {
                let k = AnisotropicKernel::new(ProfileKind::SmoothExp, tilted(), gamma)?;
                worst = worst.max(r_a_check(field, &k, &x, 256)?.abs());
            }
            done += 1;
        }
    }
    Ok((worst <= 1e-6, format!("max residual = {worst:.2e}")))
}

fn singular_decay() -> Outcome {
    let gammas = [0.0, 1.0, 3.0, 9.0, 27.0, 81.0];
    let mut ok = true;
    let mut detail = Vec::new();
    for id in [FieldId::C, FieldId::D] {
        let values: Vec<f64> = gammas
            .iter()
            .map(|&g| singular_integral(id.field(), &aligned(id, g), 8, 256))
            .collect::<Result<_>>()?;
        let x: Vec<f64> = gammas.iter().map(|g| 1.0 + g).collect();
        let fit = fit_rate(&x, &values)?;
        ok &= (fit.slope + 1.0).abs() <= 0.05;
        detail.push(format!("{id}: slope {:.4} ± {:.1e}", fit.slope, fit.stderr));
    }
    Ok((ok, detail.join("; ")))
}

fn scalar_bounds() -> Outcome {
    let mut violations = 0;
    let mut margin = f64::INFINITY;
    for (seed, id) in [(5, FieldId::C), (6, FieldId::D)] {
        let s = scalar_product_bounds(id.field(), 5000, seed)?;
        violations += s.violations;
        margin = margin.min(s.worst_margin);
    }
    Ok((
        violations == 0,
        format!("10000 samples, {violations} violations, worst relative margin {margin:.2e}"),
    ))
}

fn decomposition() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for id in [FieldId::A, FieldId::B, FieldId::C] {
        let x = match id {
            FieldId::A => FlowSpec::Solver(id, FlowSolverConfig::default()),
            _ => FlowSpec::Exact(id),
        };
        let y = FlowSpec::Shifted(Box::new(x.clone()), [0.3, 0.0]);
        for eps in [0.1, 0.05] {
            for gamma in [0.0, 10.0] {
                let eta = match id {
                    FieldId::A => tilted(),
                    FieldId::B => DirectionField::constant(Vector2::new(1.0, 0.0))?,
                    _ => DirectionField::Constant(id.field().jumps()[0].eta),
                };
                let k = AnisotropicKernel::new(ProfileKind::PolyBump, eta, gamma)?;
                let cfg = FunctionalConfig::default()
                    .with_epsilon(eps)
                    .with_grids(64, 64)
                    .with_time(0.1);
                let c = decomposition_check(id.field(), &x, &y, &k, &cfg)?;
                ok &= c.holds();
                detail.push(format!(
                    "{id} ε={eps} γ={gamma}: {:.1e} ≤ {:.1e}",
                    c.residual(),
                    c.error_bound()
                ));
            }
        }
    }
    Ok((ok, detail.join("; ")))
}

fn uniqueness_pipeline() -> Outcome {
    let field = FieldId::C.field();
    let k = aligned(FieldId::C, 1.0);
    let rk = FlowSpec::Solver(FieldId::C, FlowSolverConfig::default());
    let ex = FlowSpec::Exact(FieldId::C);
    let cfg = FunctionalConfig::default()
        .with_epsilon(0.1)
        .with_grids(16, 32)
        .with_time(0.3);
    let r = uniqueness_report(field, &rk, &ex, &k, &cfg, 1.0, 10, 1e-5)?;
    let gronwall = r.gronwall.as_ref().is_some_and(|g| g.holds);
    let mut residuals = Vec::new();
    for (eps, nx, nz) in [(0.1, 16, 32), (0.05, 32, 48), (0.025, 64, 64)] {
        let cfg = FunctionalConfig::default()
            .with_epsilon(eps)
            .with_grids(nx, nz)
            .with_time(0.3);
        residuals.push(discrepancy_report(field, &rk, &ex, &k, &cfg)?.eqfin_residual);
    }
    let monotone = residuals.windows(2).all(|w| w[1] < w[0]);
    let ok = r.final_q <= 1e-5 && r.verdict == Verdict::Unique && gronwall && monotone;
    Ok((
        ok,
        format!(
            "final Q = {:.2e}, verdict {}, Gronwall {}, eqfin residuals {}",
            r.final_q,
            r.verdict,
            if gronwall { "holds" } else { "fails" },
            sci(&residuals)
        ),
    ))
}

fn hypothesis_violation() -> Outcome {
    let field = FieldId::E.field();
    let cos = field.jumps().iter().map(|j| j.xi.dot(&j.eta).abs()).fold(0.0, f64::max);
    let cfg = FlowSolverConfig::default();
    let m = 128;
    let e = integrate_flow(field, &cfg, &InitialPoints::Grid(m), &[0.0, 0.6])?;
    let h = pushforward_histogram(&e, 0.6, 32)?;
    // band [1/C, C] with the largest C compatible with ‖div^a b‖∞ = 0 on [0, 0.6]
    let c = 2.0;
    let exits = h.min() < 1.0 / c && h.max() > c;
    let (minus, plus) = branch_loop_ensembles(field, &cfg, 64, 0.3)?;
    let n = minus.len();
    let q = (0..n)
        .map(|i| torus_distance(&minus.positions[0][i], &plus.positions[0][i]))
        .sum::<f64>()
        / n as f64;
    let k = aligned(FieldId::E, 1.0);
    let spec = FlowSpec::Exact(FieldId::E);
    let fcfg = FunctionalConfig::default()
        .with_epsilon(0.1)
        .with_grids(8, 8)
        .with_time(0.1);
    let verdict = uniqueness_report(field, &spec, &spec, &k, &fcfg, 0.3, 3, 1e-6)?.verdict;
    let ok = cos > 0.5 && exits && q >= 0.1 && verdict == Verdict::HypothesesViolated;
    Ok((
        ok,
        format!(
            "|⟨ξ,η⟩| = {cos}, histogram range [{:.3}, {:.3}] vs [1/{c}, {c}], branch discrepancy {q:.4}, verdict {verdict}",
            h.min(),
            h.max()
        ),
    ))
}

fn trace_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut margin = f64::INFINITY;
    for i in 0..1000 {
        let m = Matrix2::from_fn(|_, _| rng.gen_range(-3.0..3.0));
        let gamma = 10f64.powf(rng.gen_range(-2.0..2.5));
        let eta = DirectionField::constant(Rotation2::new(rng.gen_range(0.0..PI)) * Vector2::x())?;
        let k = AnisotropicKernel::new(KINDS[i % 2], eta, gamma)?;
        margin = margin.min(trace_integral(&m, &k) - m.trace().abs());
    }
    let eta: Vector2<f64> = Vector2::new(0.6, 0.8);
    let shear = Vector2::new(-0.8, 0.6) * eta.transpose();
    let angles: Vec<f64> = (0..90)
        .map(|i| i as f64 * PI / 90.0)
        .chain([eta[1].atan2(eta[0])])
        .collect();
    let best = trace_family_infimum(&shear, ProfileKind::PolyBump, &[0.0, 1.0, 10.0, 100.0], &angles)?;
    let ok = margin >= -1e-8 && best.value <= 0.05 && best.gamma == 100.0;
    Ok((
        ok,
        format!(
            "min margin {margin:.2e}; shear infimum {:.4} at γ = {}",
            best.value, best.gamma
        ),
    ))
}

fn flow_conformance() -> Outcome {
    let cfg = FlowSolverConfig::default();
    let a = FieldId::A.field();
    let e = integrate_flow(a, &cfg, &InitialPoints::Grid(16), &[0.0, 0.2, 0.5])?;
    let group = check_group_property(a, &cfg, &e, 0.2, 0.3)?;
    let times: Vec<f64> = (0..=1000).map(|i| i as f64 * 1e-3).collect();
    let dense = integrate_flow(a, &cfg, &InitialPoints::Grid(4), &times)?;
    let ode = (0..dense.len())
        .map(|i| check_ode_residual(a, &dense, i, 1.0))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    // Jacobian route against the bands at 1e-6, and the histogram at
    // 4096 points per bin against the bands widened by δ
    let (m, bins, t, delta) = (512, 8, 1.0, 0.1);
    let mut ok = group <= 1e-8 && ode <= 1e-5;
    let mut detail = vec![format!("group {group:.1e}, ode {ode:.1e}")];
    for id in [FieldId::A, FieldId::B, FieldId::C, FieldId::D] {
        let (lo, hi) = if id == FieldId::B {
            ((-2.0 * PI * t).exp(), (2.0 * PI * t).exp())
        } else {
            (1.0, 1.0)
        };
        let method = if id == FieldId::A {
            Method::Rk4Event
        } else {
            Method::ExplicitExact
        };
        let ens = integrate_flow(
            id.field(),
            &cfg.clone().with_method(method),
            &InitialPoints::Grid(m),
            &[0.0, t],
        )?;
        let mu = density_from_flow(&ens, t)?;
        let h = pushforward_histogram(&ens, t, bins)?;
        let in_band = mu.min() >= lo - 1e-6 && mu.max() <= hi + 1e-6 && h.min() >= lo - delta && h.max() <= hi + delta;
        ok &= in_band;
        detail.push(format!(
            "{id}: μ ∈ [{:.4}, {:.4}], histogram ∈ [{:.3}, {:.3}]",
            mu.min(),
            mu.max(),
            h.min(),
            h.max()
        ));
        if id == FieldId::A {
            let dev = [32, 16, 8]
                .iter()
                .map(|&b| pushforward_histogram(&ens, t, b).map(|h| (h.max() - 1.0).max(1.0 - h.min())))
                .collect::<Result<Vec<_>>>()?;
            ok &= dev.windows(2).all(|w| w[1] < w[0]);
            detail.push(format!("A histogram deviation at 32/16/8 bins {}", sci(&dev)));
        }
    }
    Ok((ok, format!("{} (histogram slack δ = {delta})", detail.join("; "))))
}

#[test]
fn acceptance_criteria() {
    let secs = Duration::from_secs;
    let results = [
        criterion(1, "kernel normalization", secs(10), normalization),
        criterion(2, "first-variable term vanishes", secs(60), first_variable_term),
        criterion(3, "divergence identity", secs(60), divergence_identity),
        criterion(4, "singular bound decay", secs(120), singular_decay),
        criterion(5, "scalar-product bounds", secs(30), scalar_bounds),
        criterion(6, "decomposition cross-check", secs(300), decomposition),
        criterion(7, "uniqueness pipeline", secs(600), uniqueness_pipeline),
        criterion(8, "hypothesis violation detected", secs(120), hypothesis_violation),
        criterion(9, "trace identity", secs(120), trace_identity),
        criterion(10, "flow conformance", secs(180), flow_conformance),
    ];
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
