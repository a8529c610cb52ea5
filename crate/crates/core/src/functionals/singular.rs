use std::cell::RefCell;

use nalgebra::{Rotation2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::PiecewiseField;
use crate::kernels::{AnisotropicKernel, BumpProfile, DirectionField};
use crate::quadrature::composite_gauss;

fn surface<G>(field: &PiecewiseField, n_surface: usize, g: G) -> Result<f64>
where
    G: Fn(&crate::fields::JumpComponent, &Vector2<f64>) -> Result<f64>,
{
    let first_err = RefCell::new(None);
    let v = field.surface_quadrature(
        |j, x| match g(j, x.coords()) {
            Ok(v) => v,
            Err(e) => {
                first_err.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        n_surface,
    );
    match first_err.into_inner() {
        Some(e) => Err(e),
        None if v.is_finite() => Ok(v),
        None => Err(Error::Quadrature { index: 0 }),
    }
}

/// `Ī_s = Σ ∫_Σ σ ∫ |⟨∂₂ρ(x,z), ξ_b⟩⟨η_b, z⟩| dz dH¹(x)`, the kernel
/// integral against the rank-one singular part of `Db`.
pub fn singular_integral(
    field: &PiecewiseField,
    kernel: &AnisotropicKernel<2>,
    n_surface: usize,
    n_z: usize,
) -> Result<f64> {
    if field.jumps().is_empty() {
        return Ok(0.0);
    }
    surface(field, n_surface, |j, x| {
        let kx = kernel.at(x);
        kernel.integrate_z(x, n_z, |z| (kx.d2_rho(z).dot(&j.xi) * j.eta.dot(z)).abs())
    })
}

/// `2·C_t²·Ī_s`, the majorant of the singular contribution to `I2`.
pub fn singular_bound(
    field: &PiecewiseField,
    kernel: &AnisotropicKernel<2>,
    c_t: f64,
    n_surface: usize,
    n_z: usize,
) -> Result<f64> {
    Ok(2.0 * c_t * c_t * singular_integral(field, kernel, n_surface, n_z)?)
}

/// `K = ∫ 2|F₀′(|w|²)| |w|² dw` over `R²`.
pub fn explicit_bound_constant(profile: &BumpProfile) -> f64 {
    let radial = composite_gauss(|r| profile.derivative(r * r).abs() * r.powi(3), 0.0, 1.0, 64, 20);
    2.0 * 2.0 * std::f64::consts::PI * radial
}

/// `|η − η_b|` up to the sign of the rank-one pair `ξ_b ⊗ η_b`.
fn misalignment(eta: &Vector2<f64>, eta_b: &Vector2<f64>) -> f64 {
    (eta - eta_b).norm().min((eta + eta_b).norm())
}

/// `K ∫ (2e + 1/(1+γ) + γe²) d|D^s b|` with `e = |η − η_b|`, which dominates
/// [`singular_integral`] pointwise on the jump set.
pub fn explicit_bound(field: &PiecewiseField, kernel: &AnisotropicKernel<2>, n_surface: usize) -> Result<f64> {
    let k = explicit_bound_constant(&kernel.profile);
    let g = kernel.gamma;
    Ok(k * surface(field, n_surface, |j, x| {
        let e = misalignment(&kernel.eta.eval(x), &j.eta);
        Ok(2.0 * e + 1.0 / (1.0 + g) + g * e * e)
    })?)
}

/// `C(F₀)·(1/(1+γ) + (1+2γ) ∫ |η − η_b| d|D^s b|)` with
/// `C(F₀) = K·max(|D^s b|(𝕋²), 2)`, an upper bound for [`explicit_bound`].
pub fn coarse_envelope(field: &PiecewiseField, kernel: &AnisotropicKernel<2>, n_surface: usize) -> Result<f64> {
    let k = explicit_bound_constant(&kernel.profile);
    let g = kernel.gamma;
    let err = surface(field, n_surface, |j, x| Ok(misalignment(&kernel.eta.eval(x), &j.eta)))?;
    Ok(k * field.singular_mass().max(2.0) * (1.0 / (1.0 + g) + (1.0 + 2.0 * g) * err))
}

/// Constant direction equal to the first jump normal rotated by `delta`.
pub fn misaligned_direction(field: &PiecewiseField, delta: f64) -> Result<DirectionField<2>> {
    let j = field
        .jumps()
        .first()
        .ok_or_else(|| Error::InvalidInput(format!("field {} has no jump set", field.id)))?;
    DirectionField::constant(Rotation2::new(delta) * j.eta)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarBoundSummary {
    pub samples: usize,
    pub violations: usize,
    /// Smallest `rhs − lhs` over both inequalities, relative to `|z|`.
    pub worst_margin: f64,
}

/// Samples jump nodes, `z` in the unit ball, `γ` and a misalignment angle
/// `δ` (with `η = R_δ η_b`) and checks
/// `|⟨z, Uξ_b⟩| ≤ (1 + γ|η−η_b|)|z|` and `|⟨η_b, U⁻¹z⟩| ≤ (|η_b−η| + 1/(1+γ))|z|`.
///
/// A sample counts as a violation only beyond a rounding allowance of
/// `1e-12·(1+γ)|z|`.
pub fn scalar_product_bounds(field: &PiecewiseField, samples: usize, seed: u64) -> Result<ScalarBoundSummary> {
    let jumps = field.jumps();
    if jumps.is_empty() {
        return Err(Error::InvalidInput(format!("field {} has no jump set", field.id)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let j = &jumps[rng.gen_range(0..jumps.len())];
        let x = j.point_at(rng.gen_range(0.0..j.length()));
        let gamma = 10f64.powf(rng.gen_range(-2.0..3.0));
        let delta = rng.gen_range(-0.5..0.5);
        let z = loop {
            let z = Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if z.norm_squared() < 1.0 {
                break z;
            }
        };
        let (xi, eta_b, _) = field.jump_data(&x)?;
        let kernel = AnisotropicKernel::<2>::new(
            crate::kernels::ProfileKind::PolyBump,
            DirectionField::constant(Rotation2::new(delta) * eta_b)?,
            gamma,
        )?;
        let u = kernel.u_matrix(x.coords());
        let u_inv = kernel.u_inverse(x.coords());
        let e = (kernel.eta.eval(x.coords()) - eta_b).norm();
        let zn = z.norm();
        let slack = 1e-12 * (1.0 + gamma) * zn;
        let m1 = (1.0 + gamma * e) * zn - z.dot(&(u * xi)).abs();
        let m2 = (e + 1.0 / (1.0 + gamma)) * zn - eta_b.dot(&(u_inv * z)).abs();
        if m1 < -slack || m2 < -slack {
            violations += 1;
        }
        worst = worst.min(m1.min(m2) / zn);
    }
    Ok(ScalarBoundSummary {
        samples,
        violations,
        worst_margin: worst,
    })
}

/// Values of `1/(1+γ) + (1+2γ)·δ` on a grid, where `δ` stands for the
/// misalignment mass `∫|η − η_b| d|D^s b|` (zero for fields without jumps).
#[derive(Clone, Debug, PartialEq)]
pub struct TradeoffTable {
    pub gammas: Vec<f64>,
    pub deltas: Vec<f64>,
    /// `envelope[i][k]` at `(gammas[i], deltas[k])`.
    pub envelope: Vec<Vec<f64>>,
    /// For each `γ`, the value at the smallest `δ` (γ chosen first).
    pub diagonal: Vec<(f64, f64, f64)>,
    pub infimum: f64,
}

fn envelope(gamma: f64, delta: f64) -> f64 {
    1.0 / (1.0 + gamma) + (1.0 + 2.0 * gamma) * delta
}

pub fn gamma_eta_tradeoff(field: &PiecewiseField, gammas: &[f64], deltas: &[f64]) -> Result<TradeoffTable> {
    if gammas.is_empty() || deltas.is_empty() {
        return Err(Error::InvalidInput(
            "tradeoff grid needs at least one gamma and one delta".into(),
        ));
    }
    if gammas.iter().chain(deltas).any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidInput("gammas and deltas must be finite and >= 0".into()));
    }
    let has_jumps = !field.jumps().is_empty();
    let eff = |d: f64| if has_jumps { d } else { 0.0 };
    let table: Vec<Vec<f64>> = gammas
        .iter()
        .map(|&g| deltas.iter().map(|&d| envelope(g, eff(d))).collect())
        .collect();
    let dmin = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let diagonal: Vec<_> = gammas.iter().map(|&g| (g, dmin, envelope(g, eff(dmin)))).collect();
    let infimum = table.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    Ok(TradeoffTable {
        gammas: gammas.to_vec(),
        deltas: deltas.to_vec(),
        envelope: table,
        diagonal,
        infimum,
    })
}

/// Envelope along `γ_k = k`, `δ_k = k⁻²` for `k = 1..=k_max`; equals
/// `3/k + 1/(k²(k+1))`.
pub fn gamma_eta_diagonal(k_max: usize) -> Vec<(usize, f64)> {
    (1..=k_max)
        .map(|k| {
            let kf = k as f64;
            (k, envelope(kf, 1.0 / (kf * kf)))
        })
        .collect()
}
