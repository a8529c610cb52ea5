//! `∫ |⟨Mz, ∇ρ(z)⟩| dz` for the anisotropic kernels at a fixed point.
//!
//! With `w = Uz`, `∇ρ(z) = 2F₀′(|w|²)(1+γ) U w` and `dz = dw/(1+γ)`, so the
//! integral is `∫ 2|F₀′(|w|²)| |wᵀ(U M U⁻¹)w| dw`, which splits in polar
//! coordinates into `∫₀¹ 2|F₀′(r²)| r³ dr · ∫₀^{2π} |eᵀ(U M U⁻¹)e| dφ`.
//! Integrating `⟨Mz, ∇ρ⟩` without the absolute value gives `−tr M`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Rotation2, Vector2};

use crate::error::Result;
use crate::kernels::{AnisotropicKernel, BumpProfile, DirectionField, ProfileKind};
use crate::quadrature::{composite_gauss, gauss_legendre};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceResult {
    /// `∫ |⟨Mz, ∇ρ⟩| dz`.
    pub value: f64,
    /// `|tr M|`.
    pub trace: f64,
    pub gamma: f64,
    /// Angle of the kernel direction `η`.
    pub angle: f64,
}

impl TraceResult {
    /// `value − |tr M|`, nonnegative up to quadrature error.
    pub fn gap(&self) -> f64 {
        self.value - self.trace
    }
}

fn radial_factor(profile: &BumpProfile) -> f64 {
    composite_gauss(|r| 2.0 * profile.derivative(r * r).abs() * r.powi(3), 0.0, 1.0, 64, 20)
}

/// `∫₀^{2π} |eᵀAe| dφ`, split at the sign changes of `eᵀAe`.
fn angular_factor(a: &Matrix2<f64>) -> f64 {
    // eᵀAe = p + q·cos(2φ − φ₀)
    let p = 0.5 * (a[(0, 0)] + a[(1, 1)]);
    let c = 0.5 * (a[(0, 0)] - a[(1, 1)]);
    let s = 0.5 * (a[(0, 1)] + a[(1, 0)]);
    let q = c.hypot(s);
    let form = |phi: f64| p + q * (2.0 * phi - s.atan2(c)).cos();
    let mut cuts = vec![0.0, 2.0 * PI];
    if q > p.abs() {
        let phi0 = s.atan2(c);
        let alpha = (-p / q).acos();
        for base in [phi0 + alpha, phi0 - alpha] {
            for k in -4..=4 {
                let phi = 0.5 * base + k as f64 * PI;
                if phi > 0.0 && phi < 2.0 * PI {
                    cuts.push(phi);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2)
        .map(|w| {
            gauss_legendre(16, w[0], w[1])
                .into_iter()
                .map(|(x, wt)| wt * form(x).abs())
                .sum::<f64>()
        })
        .sum()
}

/// `∫ |⟨Mz, ∇ρ(z)⟩| dz` for a kernel with constant direction.
pub fn trace_integral(m: &Matrix2<f64>, kernel: &AnisotropicKernel<2>) -> f64 {
    let x = Vector2::zeros();
    let a = kernel.u_matrix(&x) * m * kernel.u_inverse(&x);
    radial_factor(&kernel.profile) * angular_factor(&a)
}

/// The same integral by the midpoint rule on the support box, without the
/// polar reduction.
pub fn trace_integral_brute_force(m: &Matrix2<f64>, kernel: &AnisotropicKernel<2>, n: usize) -> Result<f64> {
    let x = Vector2::zeros();
    let kx = kernel.at(&x);
    kernel.integrate_z(&x, n, |z| (m * z).dot(&kx.d2_rho(z)).abs())
}

/// Smallest [`trace_integral`] over kernels with the given `γ` values and
/// direction angles.
pub fn trace_family_infimum(
    m: &Matrix2<f64>,
    kind: ProfileKind,
    gammas: &[f64],
    angles: &[f64],
) -> Result<TraceResult> {
    let profile = BumpProfile::new(kind, 2);
    let mut best: Option<TraceResult> = None;
    for &gamma in gammas {
        for &angle in angles {
            let eta = DirectionField::constant(Rotation2::new(angle) * Vector2::x())?;
            let kernel = AnisotropicKernel::with_profile(profile, eta, gamma)?;
            let r = TraceResult {
                value: trace_integral(m, &kernel),
                trace: m.trace().abs(),
                gamma,
                angle,
            };
            if best.is_none_or(|b| r.value < b.value) {
                best = Some(r);
            }
        }
    }
    best.ok_or_else(|| crate::error::Error::InvalidInput("empty kernel family".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_gives_two() {
        for kind in [ProfileKind::SmoothExp, ProfileKind::PolyBump] {
            let k = AnisotropicKernel::<2>::radial(kind);
            assert!((trace_integral(&Matrix2::identity(), &k) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_matrix_gives_zero() {
        let k = AnisotropicKernel::<2>::radial(ProfileKind::PolyBump);
        assert_eq!(trace_integral(&Matrix2::zeros(), &k), 0.0);
    }

    #[test]
    fn angular_factor_of_sign_changing_form() {
        // |cos 2φ| integrates to 4
        let a = Matrix2::new(1.0, 0.0, 0.0, -1.0);
        assert!((angular_factor(&a) - 4.0).abs() < 1e-13);
        // |1 + 2cos 2φ|: zeros at cos 2φ = −1/2
        let b = Matrix2::new(3.0, 0.0, 0.0, -1.0);
        let exact = 2.0 * PI / 3.0 + 4.0 * 3f64.sqrt();
        assert!((angular_factor(&b) - exact).abs() < 1e-12, "{}", angular_factor(&b));
    }
}
