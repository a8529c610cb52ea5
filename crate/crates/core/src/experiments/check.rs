//! Every module's invariants at a chosen resolution, with a pass/fail line
//! per invariant.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use nalgebra::{Matrix2, Rotation2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fit::fit_rate;
use crate::error::{Error, Result};
use crate::fields::{distributional_divergence_check, FieldId, FourierTest};
use crate::flow::{
    backward_forward_defect, branch_loop_ensembles, check_group_property, check_ode_residual, density_from_flow,
    integrate_flow, pushforward_histogram, FlowSolverConfig, InitialPoints, Method,
};
use crate::functionals::{
    decomposition_check, discrepancy_report, r_a_check, scalar_product_bounds, singular_integral, trace_family_infimum,
    trace_integral, uniqueness_report, FlowSpec, FunctionalConfig, Verdict,
};
use crate::kernels::{AnisotropicKernel, BumpProfile, DirectionField, ProfileKind};
use crate::quadrature::QuadratureGrid;
use crate::torus::{min_image, torus_distance, wrap, TorusPoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckLevel {
    Fast,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckOptions {
    pub level: CheckLevel,
    pub seed: u64,
    /// Factor applied to the kernel normalization constant; anything but 1
    /// breaks the kernel and must make the suite fail.
    pub normalization_scale: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            level: CheckLevel::Fast,
            seed: 0,
            normalization_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for InvariantResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<36} {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckSummary {
    pub results: Vec<InvariantResult>,
}

impl CheckSummary {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failing(&self) -> Vec<&'static str> {
        self.results.iter().filter(|r| !r.passed).map(|r| r.name).collect()
    }
}

struct Ctx {
    full: bool,
    seed: u64,
    scale: f64,
}

type Outcome = Result<(bool, String)>;

impl Ctx {
    fn pick<T>(&self, fast: T, full: T) -> T {
        if self.full {
            full
        } else {
            fast
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }

    fn kernel(&self, kind: ProfileKind, eta: DirectionField<2>, gamma: f64) -> Result<AnisotropicKernel<2>> {
        let c = BumpProfile::new(kind, 2).normalization() * self.scale;
        AnisotropicKernel::with_profile(BumpProfile::with_normalization(kind, 2, c), eta, gamma)
    }
}

const KINDS: [ProfileKind; 2] = [ProfileKind::SmoothExp, ProfileKind::PolyBump];

fn tilted() -> DirectionField<2> {
    DirectionField::tilted(Vector2::new(1.0, 0.3), Vector2::new(0.0, 1.0), 0.4, [1, 1]).expect("valid tilt")
}

fn aligned(id: FieldId) -> DirectionField<2> {
    DirectionField::Constant(id.field().jumps()[0].eta)
}

fn random_point(rng: &mut ChaCha8Rng) -> TorusPoint<2> {
    TorusPoint::new([rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).expect("finite")
}

fn torus_geometry(c: &Ctx) -> Outcome {
    let mut rng = c.rng(1);
    let mut ok = true;
    for _ in 0..c.pick(200, 2000) {
        let v = Vector2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let p = wrap(v)?;
        ok &= wrap(*p.coords())? == p;
        let q = random_point(&mut rng);
        ok &= (min_image(&p, &q).vector() + min_image(&q, &p).vector()).norm() < 1e-15;
    }
    let tie = min_image(&TorusPoint::new([0.6, 0.0])?, &TorusPoint::new([0.1, 0.0])?);
    ok &= tie.vector()[0] == -0.5;
    let n = 64;
    let s = QuadratureGrid::<2>::torus(n).integrate(|x| (2.0 * PI * x[0]).sin())?;
    let one = QuadratureGrid::<2>::torus(n).integrate(|_| 1.0)?;
    ok &= s.abs() < 1e-12 && (one - 1.0).abs() < 1e-14;
    Ok((
        ok,
        format!("∫sin = {s:.1e}, ∫1 − 1 = {:.1e}, tie → {}", one - 1.0, tie.vector()[0]),
    ))
}

fn jump_orthogonality(_: &Ctx) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for id in FieldId::ALL {
        let f = id.field();
        let cos = f.jumps().iter().map(|j| j.xi.dot(&j.eta).abs()).fold(0.0, f64::max);
        let singular = f.has_singular_divergence(crate::fields::JUMP_TOL);
        // a violation is expected exactly for the compressive field
        ok &= singular == (id == FieldId::E) && (cos > 0.5) == singular;
        detail.push(format!("{id}:{cos:.0}"));
    }
    Ok((ok, format!("max |⟨ξ,η⟩| per field {}", detail.join(" "))))
}

fn weak_divergence(c: &Ctx) -> Outcome {
    let tests = [
        FourierTest::constant(1.0),
        FourierTest::cos([1, 0]),
        FourierTest::cos([0, 1]),
        FourierTest::cos([1, 1]),
        FourierTest {
            modes: vec![([2, 1], 0.5, 1.0)],
        },
    ];
    let n = c.pick(128, 256);
    let mut worst: f64 = 0.0;
    for id in FieldId::ALL {
        for t in &tests {
            worst = worst.max(distributional_divergence_check(id.field(), t, n).abs());
        }
    }
    Ok((worst <= 1e-6, format!("max residual {worst:.1e} at n = {n}")))
}

fn normalization(c: &Ctx) -> Outcome {
    let mut rng = c.rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..c.pick(5, 20) {
        let x = *random_point(&mut rng).coords();
        for gamma in [0.0, 1.0, 10.0, 100.0] {
            for kind in KINDS {
                let k = c.kernel(kind, tilted(), gamma)?;
                let kx = k.at(&x);
                worst = worst.max((k.integrate_z(&x, 256, |z| kx.rho(z))? - 1.0).abs());
            }
        }
    }
    Ok((worst <= 1e-6, format!("max |∫ρ − 1| = {worst:.1e}")))
}

fn first_variable_mean(c: &Ctx) -> Outcome {
    let mut rng = c.rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..c.pick(4, 10) {
        let x = *random_point(&mut rng).coords();
        for gamma in [0.0, 10.0] {
            for kind in KINDS {
                let k = c.kernel(kind, tilted(), gamma)?;
                let kx = k.at(&x);
                for i in 0..2 {
                    worst = worst.max(k.integrate_z(&x, 256, |z| kx.d1_rho(z)[i])?.abs());
                }
            }
        }
    }
    Ok((worst <= 1e-6, format!("max |∫∂₁ρ| = {worst:.1e}")))
}

fn kernel_derivatives(c: &Ctx) -> Outcome {
    let mut rng = c.rng(4);
    let mut worst = [0.0f64; 2];
    // the smooth_exp profile steepens towards the support edge, where a 1e-5
    // central difference is itself off by more than 1e-6
    for (slot, h, s_max) in [(0, 1e-5, 0.8), (1, 1e-6, 0.95)] {
        for i in 0..c.pick(50, 500) {
            let x = *random_point(&mut rng).coords();
            let gamma = 10f64.powf(rng.gen_range(-1.0..1.0));
            let r = rng.gen_range(0.05f64..s_max).sqrt();
            let phi: f64 = rng.gen_range(0.0..2.0 * PI);
            let k = c.kernel(KINDS[i % 2], tilted(), gamma)?;
            let z = k.u_inverse(&x) * Vector2::new(r * phi.cos(), r * phi.sin());
            let g = k.d2_rho(&x, &z);
            let fd = Vector2::from_fn(|j, _| {
                let e = Vector2::from_fn(|m, _| if m == j { h } else { 0.0 });
                (k.rho(&x, &(z + e)) - k.rho(&x, &(z - e))) / (2.0 * h)
            });
            worst[slot] = worst[slot].max((g - fd).norm() / g.norm().max(1e-3));
        }
    }
    Ok((
        worst.iter().all(|&w| w <= 1e-6),
        format!(
            "max relative error of ∂₂ρ {:.1e} (step 1e-5), {:.1e} (step 1e-6)",
            worst[0], worst[1]
        ),
    ))
}

fn group_property(c: &Ctx) -> Outcome {
    let cfg = FlowSolverConfig::default();
    let a = FieldId::A.field();
    let e = integrate_flow(a, &cfg, &InitialPoints::Grid(c.pick(6, 16)), &[0.0, 0.2, 0.5])?;
    let da = check_group_property(a, &cfg, &e, 0.2, 0.3)?;
    let f = FieldId::C.field();
    let e = integrate_flow(f, &cfg, &InitialPoints::Grid(8), &[0.0, 0.25, 0.5])?;
    let dc = check_group_property(f, &cfg, &e, 0.25, 0.25)?;
    Ok((da <= 1e-8 && dc <= 1e-10, format!("A {da:.1e}, C {dc:.1e}")))
}

fn ode_residual(c: &Ctx) -> Outcome {
    let a = FieldId::A.field();
    let times: Vec<f64> = (0..=1000).map(|i| i as f64 * 1e-3).collect();
    let e = integrate_flow(
        a,
        &FlowSolverConfig::default(),
        &InitialPoints::Grid(c.pick(2, 4)),
        &times,
    )?;
    let worst = (0..e.len())
        .map(|i| check_ode_residual(a, &e, i, 1.0))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((worst <= 1e-5, format!("max residual {worst:.1e}")))
}

fn mass_and_reversibility(c: &Ctx) -> Outcome {
    let exact = FlowSolverConfig::default().with_method(Method::ExplicitExact);
    let mut mass: f64 = 0.0;
    let mut back: f64 = 0.0;
    for id in [FieldId::A, FieldId::B, FieldId::C, FieldId::D] {
        let f = id.field();
        // the stretching of B at time t needs cells finer than e^{-2πt}
        let (m, times) = match id {
            FieldId::A => (c.pick(32, 64), vec![0.0, 0.5, 1.0]),
            FieldId::B => c.pick((256, vec![0.0, 0.5]), (4096, vec![0.0, 1.0])),
            _ => (64, vec![0.0, 0.5, 1.0]),
        };
        let cfg = if id == FieldId::A {
            FlowSolverConfig::default()
        } else {
            exact.clone()
        };
        let e = integrate_flow(f, &cfg, &InitialPoints::Grid(m), &times)?;
        for &t in &times[1..] {
            mass = mass.max((density_from_flow(&e, t)?.integral() - 1.0).abs());
        }
        let small = integrate_flow(f, &FlowSolverConfig::default(), &InitialPoints::Grid(8), &[0.0, 0.6])?;
        back = back.max(backward_forward_defect(f, &FlowSolverConfig::default(), &small, 0.6)?);
    }
    Ok((
        mass <= 1e-6 && back <= 1e-8,
        format!("max |∫μ − 1| {mass:.1e}, backward-forward {back:.1e}"),
    ))
}

fn near_incompressibility(c: &Ctx) -> Outcome {
    let cfg = FlowSolverConfig::default();
    let (m, bins, t, delta) = c.pick((256, 8, 0.5, 0.1), (512, 8, 1.0, 0.1));
    let mut ok = true;
    let mut detail = Vec::new();
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
        let e = integrate_flow(
            id.field(),
            &cfg.clone().with_method(method),
            &InitialPoints::Grid(m),
            &[0.0, t],
        )?;
        let mu = density_from_flow(&e, t)?;
        let h = pushforward_histogram(&e, t, bins)?;
        ok &= mu.min() >= lo - 1e-6 && mu.max() <= hi + 1e-6 && h.min() >= lo - delta && h.max() <= hi + delta;
        detail.push(format!("{id} hist [{:.2},{:.2}]", h.min(), h.max()));
    }
    Ok((ok, detail.join(", ")))
}

fn compression_detected(_: &Ctx) -> Outcome {
    let f = FieldId::E.field();
    let cfg = FlowSolverConfig::default();
    let e = integrate_flow(f, &cfg, &InitialPoints::Grid(64), &[0.0, 0.6])?;
    let h = pushforward_histogram(&e, 0.6, 32)?;
    let backward_fails = matches!(
        integrate_flow(f, &cfg, &InitialPoints::Grid(8), &[-0.6, 0.0]),
        Err(Error::NonTransversalCrossing { .. })
    );
    let (minus, plus) = branch_loop_ensembles(f, &cfg, 32, 0.3)?;
    let q = (0..minus.len())
        .map(|i| torus_distance(&minus.positions[0][i], &plus.positions[0][i]))
        .sum::<f64>()
        / minus.len() as f64;
    let ok = h.min() == 0.0 && h.max() > 2.0 && backward_fails && q >= 0.1;
    Ok((
        ok,
        format!(
            "histogram [{}, {}], backward fails: {backward_fails}, branch gap {q:.3}",
            h.min(),
            h.max()
        ),
    ))
}

fn decomposition(c: &Ctx) -> Outcome {
    let (n, eps_list) = c.pick((16, vec![0.1]), (64, vec![0.1, 0.05]));
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for id in [FieldId::A, FieldId::B, FieldId::C] {
        let x = if id == FieldId::A {
            FlowSpec::Solver(id, FlowSolverConfig::default())
        } else {
            FlowSpec::Exact(id)
        };
        let y = FlowSpec::Shifted(Box::new(x.clone()), [0.3, 0.0]);
        for &eps in &eps_list {
            for gamma in [0.0, 10.0] {
                let eta = match id {
                    FieldId::A => tilted(),
                    FieldId::B => DirectionField::constant(Vector2::x())?,
                    _ => aligned(id),
                };
                let k = c.kernel(ProfileKind::PolyBump, eta, gamma)?;
                let cfg = FunctionalConfig::default()
                    .with_epsilon(eps)
                    .with_grids(n, n)
                    .with_time(0.1);
                let d = decomposition_check(id.field(), &x, &y, &k, &cfg)?;
                ok &= d.holds();
                worst = worst.max(d.residual() / d.error_bound());
            }
        }
    }
    Ok((ok, format!("max residual / error bound {worst:.2}")))
}

fn divergence_identity(c: &Ctx) -> Outcome {
    let mut rng = c.rng(5);
    let mut worst: f64 = 0.0;
    for id in [FieldId::A, FieldId::B, FieldId::C] {
        let f = id.field();
        let mut done = 0;
        while done < c.pick(10, 50) {
            let x = random_point(&mut rng);
            if f.jumps().iter().any(|j| j.offset(x.coords()).abs() < 1e-6) {
                continue;
            }
            for gamma in [0.0, 10.0] {
                let k = c.kernel(ProfileKind::SmoothExp, tilted(), gamma)?;
                worst = worst.max(r_a_check(f, &k, &x, 256)?.abs());
            }
            done += 1;
        }
    }
    Ok((worst <= 1e-6, format!("max residual {worst:.1e}")))
}

fn singular_decay(c: &Ctx) -> Outcome {
    let gammas = [0.0, 1.0, 3.0, 9.0, 27.0, 81.0];
    let mut ok = true;
    let mut detail = Vec::new();
    for id in [FieldId::C, FieldId::D] {
        let v = gammas
            .iter()
            .map(|&g| {
                singular_integral(
                    id.field(),
                    &c.kernel(ProfileKind::PolyBump, aligned(id), g)?,
                    8,
                    c.pick(128, 256),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let x: Vec<f64> = gammas.iter().map(|g| 1.0 + g).collect();
        let fit = fit_rate(&x, &v)?;
        ok &= (fit.slope + 1.0).abs() <= 0.05;
        detail.push(format!("{id} slope {:.4}", fit.slope));
    }
    Ok((ok, detail.join(", ")))
}

fn scalar_bounds(c: &Ctx) -> Outcome {
    let n = c.pick(1000, 5000);
    let mut v = 0;
    for (i, id) in [FieldId::C, FieldId::D].into_iter().enumerate() {
        v += scalar_product_bounds(id.field(), n, c.seed.wrapping_add(i as u64))?.violations;
    }
    Ok((v == 0, format!("{v} violations in {} samples", 2 * n)))
}

fn trace_bound(c: &Ctx) -> Outcome {
    let mut rng = c.rng(6);
    let mut margin = f64::INFINITY;
    for i in 0..c.pick(200, 1000) {
        let m = Matrix2::from_fn(|_, _| rng.gen_range(-3.0..3.0));
        let gamma = 10f64.powf(rng.gen_range(-2.0..2.5));
        let eta = DirectionField::constant(Rotation2::new(rng.gen_range(0.0..PI)) * Vector2::x())?;
        let k = c.kernel(KINDS[i % 2], eta, gamma)?;
        margin = margin.min(trace_integral(&m, &k) - m.trace().abs());
    }
    let eta: Vector2<f64> = Vector2::new(0.6, 0.8);
    let shear = Vector2::new(-0.8, 0.6) * eta.transpose();
    let angles: Vec<f64> = (0..90)
        .map(|i| i as f64 * PI / 90.0)
        .chain([eta[1].atan2(eta[0])])
        .collect();
    let best = trace_family_infimum(&shear, ProfileKind::PolyBump, &[0.0, 1.0, 10.0, 100.0], &angles)?;
    let ok = margin >= -1e-8 && best.value <= 0.05;
    Ok((ok, format!("min margin {margin:.1e}, shear infimum {:.4}", best.value)))
}

fn uniqueness(c: &Ctx) -> Outcome {
    let f = FieldId::C.field();
    let k = c.kernel(ProfileKind::PolyBump, aligned(FieldId::C), 1.0)?;
    let rk = FlowSpec::Solver(FieldId::C, FlowSolverConfig::default());
    let ex = FlowSpec::Exact(FieldId::C);
    let cfg = FunctionalConfig::default()
        .with_epsilon(0.1)
        .with_grids(16, 32)
        .with_time(0.3);
    let r = uniqueness_report(f, &rk, &ex, &k, &cfg, 1.0, c.pick(4, 10), 1e-5)?;
    let levels: &[(f64, usize, usize)] = c.pick(
        &[(0.1, 8, 16), (0.05, 16, 24), (0.025, 32, 32)],
        &[(0.1, 16, 32), (0.05, 32, 48), (0.025, 64, 64)],
    );
    let mut res = Vec::new();
    for &(eps, nx, nz) in levels {
        let cfg = FunctionalConfig::default()
            .with_epsilon(eps)
            .with_grids(nx, nz)
            .with_time(0.3);
        res.push(discrepancy_report(f, &rk, &ex, &k, &cfg)?.eqfin_residual);
    }
    let e = FieldId::E;
    let ke = c.kernel(ProfileKind::PolyBump, aligned(e), 1.0)?;
    let small = FunctionalConfig::default()
        .with_epsilon(0.1)
        .with_grids(8, 8)
        .with_time(0.1);
    let ve = uniqueness_report(
        e.field(),
        &FlowSpec::Exact(e),
        &FlowSpec::Exact(e),
        &ke,
        &small,
        0.3,
        3,
        1e-6,
    )?
    .verdict;
    let ok = r.verdict == Verdict::Unique
        && r.final_q <= 1e-5
        && r.gronwall.as_ref().is_some_and(|g| g.holds)
        && res.windows(2).all(|w| w[1] < w[0])
        && ve == Verdict::HypothesesViolated;
    Ok((
        ok,
        format!(
            "C: {} (Q = {:.1e}), eqfin {:.2e} → {:.2e} → {:.2e}; E: {ve}",
            r.verdict, r.final_q, res[0], res[1], res[2]
        ),
    ))
}

fn rate_fit(_: &Ctx) -> Outcome {
    let x = [1.0, 2.0, 4.0, 8.0];
    let y: Vec<f64> = x.iter().map(|v| v * v).collect();
    let f = fit_rate(&x, &y)?;
    let rejects = fit_rate(&x, &[1.0, 0.0, 1.0, 1.0]).is_err();
    Ok((
        (f.slope - 2.0).abs() < 1e-12 && f.stderr < 1e-12 && rejects,
        format!("slope {:.3} ± {:.0e}", f.slope, f.stderr),
    ))
}

type Invariant = (&'static str, fn(&Ctx) -> Outcome);

const INVARIANTS: [Invariant; 19] = [
    ("torus.geometry_and_quadrature", torus_geometry),
    ("fields.jump_orthogonality", jump_orthogonality),
    ("fields.weak_divergence", weak_divergence),
    ("kernels.normalization", normalization),
    ("kernels.first_variable_mean_zero", first_variable_mean),
    ("kernels.derivatives", kernel_derivatives),
    ("flow.group_property", group_property),
    ("flow.ode_residual", ode_residual),
    ("flow.mass_and_reversibility", mass_and_reversibility),
    ("flow.near_incompressibility", near_incompressibility),
    ("flow.compression_detected", compression_detected),
    ("functionals.decomposition", decomposition),
    ("functionals.divergence_identity", divergence_identity),
    ("functionals.singular_decay", singular_decay),
    ("functionals.scalar_bounds", scalar_bounds),
    ("functionals.trace_bound", trace_bound),
    ("functionals.uniqueness", uniqueness),
    ("experiments.rate_fit", rate_fit),
    ("experiments.reproducible_sums", reproducible_sums),
];

fn reproducible_sums(_: &Ctx) -> Outcome {
    let f = |i: usize| ((i as f64) * 0.37).sin() * 1e3;
    let a = crate::quadrature::ordered_sum(100_000, f)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let b = pool.install(|| crate::quadrature::ordered_sum(100_000, f))?;
    Ok((a.to_bits() == b.to_bits(), format!("{a:.17e}")))
}

/// Runs every invariant and reports each one; `on_result` sees results as
/// they complete.
pub fn check(options: &CheckOptions, mut on_result: impl FnMut(&InvariantResult)) -> CheckSummary {
    let ctx = Ctx {
        full: options.level == CheckLevel::Full,
        seed: options.seed,
        scale: options.normalization_scale,
    };
    let mut results = Vec::with_capacity(INVARIANTS.len());
    for (name, f) in INVARIANTS {
        let start = Instant::now();
        let (passed, detail) = match f(&ctx) {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        let r = InvariantResult {
            name,
            passed,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_result(&r);
        results.push(r);
    }
    CheckSummary { results }
}
