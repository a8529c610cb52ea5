//! Anisotropic position-dependent mollifiers
//! `ρ(x,z) = c·f(|U(x)z|²)·det U(x)` with `U(x) = I + γ η(x)⊗η(x)`.
//!
//! With `w = ⟨η,z⟩` one has `|Uz|² = |z|² + (2γ+γ²)w²`, `det U = 1+γ` and
//! `U⁻¹ = I − γ/(1+γ) η⊗η`, so every quantity below is evaluated without
//! forming matrices.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::SMatrix;

use crate::error::{Error, Result};
use crate::quadrature::{composite_gauss, QuadratureGrid};
use crate::torus::Vector;

pub type Matrix<const N: usize> = SMatrix<f64, N, N>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileKind {
    /// `f(s) = exp(−1/(1−s))` on `s < 1`.
    SmoothExp,
    /// `f(s) = (1−s)⁴` on `s < 1`.
    PolyBump,
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileKind::SmoothExp => "smooth_exp",
            ProfileKind::PolyBump => "poly_bump",
        })
    }
}

impl FromStr for ProfileKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "smooth_exp" => Ok(ProfileKind::SmoothExp),
            "poly_bump" => Ok(ProfileKind::PolyBump),
            other => Err(Error::InvalidInput(format!("unknown profile {other:?}"))),
        }
    }
}

/// Surface area of the unit sphere in `R^dim`.
pub fn sphere_area(dim: usize) -> f64 {
    let (mut area, start) = if dim.is_multiple_of(2) { (2.0 * PI, 2) } else { (2.0, 1) };
    let mut n = start;
    while n < dim {
        area *= 2.0 * PI / n as f64;
        n += 2;
    }
    area
}

/// Normalized radial bump `F₀(s) = c·f(s)`, supported in `s < 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpProfile {
    pub kind: ProfileKind,
    pub dim: usize,
    c: f64,
}

impl BumpProfile {
    /// Profile normalized so that `∫_{R^dim} F₀(|z|²) dz = 1`.
    pub fn new(kind: ProfileKind, dim: usize) -> Self {
        let raw = Self { kind, dim, c: 1.0 };
        // ∫ f(|z|²) dz = |S^{dim-1}| ∫₀¹ f(r²) r^{dim-1} dr
        let radial = composite_gauss(|r| raw.raw(r * r) * r.powi(dim as i32 - 1), 0.0, 1.0, 64, 20);
        Self {
            kind,
            dim,
            c: 1.0 / (sphere_area(dim) * radial),
        }
    }

    /// Profile with an explicit constant (used to exercise failing checks).
    pub fn with_normalization(kind: ProfileKind, dim: usize, c: f64) -> Self {
        Self { kind, dim, c }
    }

    pub fn normalization(&self) -> f64 {
        self.c
    }

    fn raw(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        match self.kind {
            ProfileKind::SmoothExp => (-1.0 / (1.0 - s)).exp(),
            ProfileKind::PolyBump => (1.0 - s).powi(4),
        }
    }

    fn raw_derivative(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        match self.kind {
            ProfileKind::SmoothExp => {
                let q = 1.0 - s;
                -(-1.0 / q).exp() / (q * q)
            }
            ProfileKind::PolyBump => -4.0 * (1.0 - s).powi(3),
        }
    }

    /// `F₀(s)`.
    pub fn value(&self, s: f64) -> f64 {
        self.c * self.raw(s)
    }

    /// `F₀′(s)`.
    pub fn derivative(&self, s: f64) -> f64 {
        self.c * self.raw_derivative(s)
    }
}

/// Unit direction field `η(x)` with an analytic Jacobian.
#[derive(Clone, Debug, PartialEq)]
pub enum DirectionField<const N: usize> {
    Constant(Vector<N>),
    /// `η = v/|v|` with `v(x) = base + amplitude·sin(2π⟨q,x⟩)·tilt`.
    Tilted {
        base: Vector<N>,
        tilt: Vector<N>,
        amplitude: f64,
        wave: Vector<N>,
    },
}

impl<const N: usize> DirectionField<N> {
    pub fn constant(v: Vector<N>) -> Result<Self> {
        let n = v.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidInput("direction must be a nonzero finite vector".into()));
        }
        Ok(DirectionField::Constant(v / n))
    }

    /// Tilted field; `tilt` is made orthogonal to `base` and both are
    /// normalized, so `|v| ≥ 1` everywhere.
    pub fn tilted(base: Vector<N>, tilt: Vector<N>, amplitude: f64, wave: [i32; N]) -> Result<Self> {
        let base = base
            .try_normalize(0.0)
            .ok_or_else(|| Error::InvalidInput("zero base direction".into()))?;
        let tilt = tilt - base * base.dot(&tilt);
        let tilt = tilt
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidInput("tilt must not be parallel to base".into()))?;
        Ok(DirectionField::Tilted {
            base,
            tilt,
            amplitude,
            wave: Vector::from_fn(|i, _| wave[i] as f64),
        })
    }

    fn raw(&self, x: &Vector<N>) -> (Vector<N>, Matrix<N>) {
        match self {
            DirectionField::Constant(v) => (*v, Matrix::zeros()),
            DirectionField::Tilted {
                base,
                tilt,
                amplitude,
                wave,
            } => {
                let ph = 2.0 * PI * wave.dot(x);
                let v = base + tilt * (amplitude * ph.sin());
                let dv = tilt * wave.transpose() * (amplitude * 2.0 * PI * ph.cos());
                (v, dv)
            }
        }
    }

    pub fn eval(&self, x: &Vector<N>) -> Vector<N> {
        let (v, _) = self.raw(x);
        v / v.norm()
    }

    /// `Dη = (I − ηηᵀ) Dv / |v|`.
    pub fn jacobian(&self, x: &Vector<N>) -> Matrix<N> {
        match self {
            DirectionField::Constant(_) => Matrix::zeros(),
            DirectionField::Tilted { .. } => {
                let (v, dv) = self.raw(x);
                let n = v.norm();
                let eta = v / n;
                (Matrix::identity() - eta * eta.transpose()) * dv / n
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, DirectionField::Constant(_))
    }
}

/// Orthogonal matrix whose first column is the unit vector `e`.
pub fn frame_with_first_column<const N: usize>(e: &Vector<N>) -> Matrix<N> {
    let mut v = *e;
    v[0] -= 1.0;
    let vv = v.norm_squared();
    if vv < 1e-30 {
        return Matrix::identity();
    }
    Matrix::identity() - v * v.transpose() * (2.0 / vv)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnisotropicKernel<const N: usize> {
    pub profile: BumpProfile,
    pub eta: DirectionField<N>,
    pub gamma: f64,
}

impl<const N: usize> AnisotropicKernel<N> {
    pub fn new(kind: ProfileKind, eta: DirectionField<N>, gamma: f64) -> Result<Self> {
        Self::with_profile(BumpProfile::new(kind, N), eta, gamma)
    }

    pub fn with_profile(profile: BumpProfile, eta: DirectionField<N>, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "gamma must be finite and >= 0, got {gamma}"
            )));
        }
        if profile.dim != N {
            return Err(Error::InvalidInput("profile dimension mismatch".into()));
        }
        Ok(Self { profile, eta, gamma })
    }

    /// Isotropic kernel (`γ = 0`).
    pub fn radial(kind: ProfileKind) -> Self {
        let mut e = Vector::<N>::zeros();
        e[0] = 1.0;
        Self::new(kind, DirectionField::Constant(e), 0.0).expect("valid")
    }

    fn stretch(&self) -> f64 {
        self.gamma * (2.0 + self.gamma)
    }

    pub fn u_matrix(&self, x: &Vector<N>) -> Matrix<N> {
        let e = self.eta.eval(x);
        Matrix::identity() + e * e.transpose() * self.gamma
    }

    pub fn u_inverse(&self, x: &Vector<N>) -> Matrix<N> {
        let e = self.eta.eval(x);
        Matrix::identity() - e * e.transpose() * (self.gamma / (1.0 + self.gamma))
    }

    pub fn det_u(&self) -> f64 {
        1.0 + self.gamma
    }

    /// `|U(x)z|²` together with `η(x)` and `⟨η(x),z⟩`.
    fn stretched(&self, x: &Vector<N>, z: &Vector<N>) -> (f64, Vector<N>, f64) {
        let e = self.eta.eval(x);
        let w = e.dot(z);
        (z.norm_squared() + self.stretch() * w * w, e, w)
    }

    pub fn rho(&self, x: &Vector<N>, z: &Vector<N>) -> f64 {
        let (s, _, _) = self.stretched(x, z);
        self.profile.value(s) * self.det_u()
    }

    /// Gradient of `ρ(x,·)` at `z`.
    pub fn d2_rho(&self, x: &Vector<N>, z: &Vector<N>) -> Vector<N> {
        let (s, e, w) = self.stretched(x, z);
        let fp = self.profile.derivative(s);
        if fp == 0.0 {
            return Vector::zeros();
        }
        (z + e * (self.stretch() * w)) * (2.0 * fp * self.det_u())
    }

    /// Gradient of `ρ(·,z)` at `x`.
    pub fn d1_rho(&self, x: &Vector<N>, z: &Vector<N>) -> Vector<N> {
        if self.eta.is_constant() || self.gamma == 0.0 {
            return Vector::zeros();
        }
        let (s, _, w) = self.stretched(x, z);
        let fp = self.profile.derivative(s);
        if fp == 0.0 {
            return Vector::zeros();
        }
        let dw = self.eta.jacobian(x).transpose() * z;
        dw * (fp * 2.0 * self.stretch() * w * self.det_u())
    }

    /// The kernel at a fixed `x`, with `η(x)` and `Dη(x)` evaluated once.
    pub fn at(&self, x: &Vector<N>) -> FrozenKernel<'_, N> {
        let moving = !self.eta.is_constant() && self.gamma != 0.0;
        FrozenKernel {
            kernel: self,
            eta: self.eta.eval(x),
            deta_t: if moving {
                Some(self.eta.jacobian(x).transpose())
            } else {
                None
            },
        }
    }

    /// Radii `(r, R)` with `B(0,r) ⊆ supp ρ(x,·) ⊆ B(0,R)`.
    pub fn support_bounds(&self) -> (f64, f64) {
        (1.0 / (1.0 + self.gamma), 1.0)
    }

    /// Orthonormal frame at `x` whose first axis is `η(x)`.
    pub fn frame(&self, x: &Vector<N>) -> Matrix<N> {
        frame_with_first_column(&self.eta.eval(x))
    }

    /// Midpoint grid with `n` points per axis on the smallest `η(x)`-aligned
    /// box containing the support ellipsoid.
    pub fn support_grid(&self, x: &Vector<N>, n: usize) -> QuadratureGrid<N> {
        let mut hw = Vector::<N>::repeat(1.0);
        hw[0] = self.support_bounds().0;
        QuadratureGrid::oriented_box(&self.frame(x), &hw, n)
    }

    /// `∫ g(z) dz` over the support of `ρ(x,·)`.
    pub fn integrate_z<F>(&self, x: &Vector<N>, n: usize, g: F) -> Result<f64>
    where
        F: Fn(&Vector<N>) -> f64 + Sync,
    {
        self.support_grid(x, n).integrate(g)
    }
}

/// `ρ(x,·)` for one `x`; see [`AnisotropicKernel::at`].
#[derive(Clone, Debug)]
pub struct FrozenKernel<'a, const N: usize> {
    kernel: &'a AnisotropicKernel<N>,
    eta: Vector<N>,
    deta_t: Option<Matrix<N>>,
}

impl<const N: usize> FrozenKernel<'_, N> {
    pub fn eta(&self) -> &Vector<N> {
        &self.eta
    }

    /// `|U(x)z|²`; the support of `ρ(x,·)` is where this is below 1.
    pub fn stretched_norm(&self, z: &Vector<N>) -> f64 {
        let w = self.eta.dot(z);
        z.norm_squared() + self.kernel.stretch() * w * w
    }

    pub fn rho(&self, z: &Vector<N>) -> f64 {
        self.kernel.profile.value(self.stretched_norm(z)) * self.kernel.det_u()
    }

    pub fn d2_rho(&self, z: &Vector<N>) -> Vector<N> {
        let w = self.eta.dot(z);
        let s = z.norm_squared() + self.kernel.stretch() * w * w;
        let fp = self.kernel.profile.derivative(s);
        if fp == 0.0 {
            return Vector::zeros();
        }
        (z + self.eta * (self.kernel.stretch() * w)) * (2.0 * fp * self.kernel.det_u())
    }

    pub fn d1_rho(&self, z: &Vector<N>) -> Vector<N> {
        let Some(deta_t) = &self.deta_t else {
            return Vector::zeros();
        };
        let w = self.eta.dot(z);
        let st = self.kernel.stretch();
        let fp = self.kernel.profile.derivative(z.norm_squared() + st * w * w);
        if fp == 0.0 {
            return Vector::zeros();
        }
        (deta_t * z) * (fp * 2.0 * st * w * self.kernel.det_u())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Vector2, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit2(a: f64) -> Vector2<f64> {
        Vector2::new(a.cos(), a.sin())
    }

    fn tilted2() -> DirectionField<2> {
        DirectionField::tilted(Vector2::new(2.0, 1.0), Vector2::new(-1.0, 2.0), 0.4, [1, 2]).unwrap()
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-15);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-15);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn poly_normalization_matches_beta_function() {
        // ∫(1−|z|²)⁴ dz = 24 π^{N/2} / Γ(N/2 + 5)
        let p2 = BumpProfile::new(ProfileKind::PolyBump, 2);
        assert!((p2.normalization() - 5.0 / PI).abs() < 1e-14);
        let p3 = BumpProfile::new(ProfileKind::PolyBump, 3);
        let gamma = 0.5 * PI.sqrt() * 1.5 * 2.5 * 3.5 * 4.5 * 5.5;
        let expect = gamma / (24.0 * PI.powf(1.5));
        assert!((p3.normalization() - expect).abs() < 1e-13 * expect);
    }

    #[test]
    fn support_box_integral_converges() {
        for kind in [ProfileKind::SmoothExp, ProfileKind::PolyBump] {
            let k = AnisotropicKernel::<2>::radial(kind);
            let x = Vector2::zeros();
            let coarse = k.integrate_z(&x, 128, |z| k.rho(&x, z)).unwrap();
            let fine = k.integrate_z(&x, 1024, |z| k.rho(&x, z)).unwrap();
            assert!((fine - 1.0).abs() < 1e-9, "{kind} fine {fine}");
            assert!((coarse - fine).abs() < 2e-3, "{kind} coarse {coarse}");
        }
    }

    #[test]
    fn u_matrix_examples() {
        let k =
            AnisotropicKernel::<2>::new(ProfileKind::PolyBump, DirectionField::Constant(Vector2::x()), 0.0).unwrap();
        assert_eq!(k.u_matrix(&Vector2::zeros()), Matrix::<2>::identity());
        assert_eq!(k.det_u(), 1.0);
        let k =
            AnisotropicKernel::<2>::new(ProfileKind::PolyBump, DirectionField::Constant(Vector2::x()), 3.0).unwrap();
        assert_eq!(k.u_matrix(&Vector2::zeros()), Matrix::<2>::new(4.0, 0.0, 0.0, 1.0));
        assert_eq!(k.det_u(), 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for gamma in [0.5, 10.0, 1000.0] {
            let e = Vector3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            let k = AnisotropicKernel::<3>::new(ProfileKind::SmoothExp, DirectionField::constant(e).unwrap(), gamma)
                .unwrap();
            let x = Vector3::zeros();
            let prod = k.u_matrix(&x) * k.u_inverse(&x);
            // entries of U reach 1+γ, so the roundoff floor scales with it
            let err = (prod - Matrix::<3>::identity()).abs().max();
            assert!(err < 1e-14 * (1.0 + gamma), "γ={gamma}: {err}");
            assert!((k.u_matrix(&x).determinant() - k.det_u()).abs() < 1e-9 * k.det_u());
        }
    }

    #[test]
    fn rho_support_and_peak() {
        let k = AnisotropicKernel::<2>::radial(ProfileKind::PolyBump);
        let x = Vector2::zeros();
        assert_eq!(k.rho(&x, &Vector2::zeros()), k.profile.value(0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k9 = AnisotropicKernel::<2>::new(ProfileKind::SmoothExp, tilted2(), 9.0).unwrap();
        for _ in 0..100 {
            let dir = unit2(rng.gen::<f64>() * 2.0 * PI);
            let x = Vector2::new(rng.gen(), rng.gen());
            assert_eq!(k9.rho(&x, &(dir * 1.001)), 0.0);
            assert_eq!(k.rho(&x, &(dir * 1.001)), 0.0);
            // inner ball strictly inside the support
            assert!(k9.rho(&x, &(dir * 0.999 * k9.support_bounds().0)) > 0.0);
            let e = k9.eta.eval(&x);
            assert_eq!(k9.rho(&x, &(e * 1.001 / 10.0)), 0.0);
        }
        assert_eq!(k.support_bounds(), (1.0, 1.0));
        assert_eq!(k9.support_bounds(), (0.1, 1.0));
    }

    #[test]
    fn normalization_is_direction_and_gamma_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in [ProfileKind::SmoothExp, ProfileKind::PolyBump] {
            for gamma in [0.0, 1.0, 10.0, 100.0] {
                let k = AnisotropicKernel::<2>::new(kind, tilted2(), gamma).unwrap();
                for _ in 0..5 {
                    let x = Vector2::new(rng.gen(), rng.gen());
                    let v = k.integrate_z(&x, 256, |z| k.rho(&x, z)).unwrap();
                    assert!((v - 1.0).abs() < 1e-6, "{kind} γ={gamma}: {v}");
                }
            }
        }
        let k3 = AnisotropicKernel::<3>::new(
            ProfileKind::SmoothExp,
            DirectionField::constant(Vector3::new(1.0, 2.0, 2.0)).unwrap(),
            10.0,
        )
        .unwrap();
        let x = Vector3::zeros();
        let v = k3.integrate_z(&x, 96, |z| k3.rho(&x, z)).unwrap();
        assert!((v - 1.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn d2_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-5;
        let mut checked = 0;
        while checked < 50 {
            let gamma = [0.0, 1.0, 10.0][checked % 3];
            let kind = if checked % 2 == 0 {
                ProfileKind::SmoothExp
            } else {
                ProfileKind::PolyBump
            };
            let k = AnisotropicKernel::<2>::new(kind, tilted2(), gamma).unwrap();
            let x = Vector2::new(rng.gen(), rng.gen());
            let z = Vector2::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0) * 0.8;
            let (s, _, _) = k.stretched(&x, &z);
            if !(0.05..0.9).contains(&s) {
                continue;
            }
            let g = k.d2_rho(&x, &z);
            let fd = Vector2::from_fn(|i, _| {
                let mut e = Vector2::zeros();
                e[i] = h;
                (k.rho(&x, &(z + e)) - k.rho(&x, &(z - e))) / (2.0 * h)
            });
            assert!((g - fd).norm() <= 1e-6 * g.norm().max(1e-3), "{g} vs {fd}");
            checked += 1;
        }
        let k = AnisotropicKernel::<2>::radial(ProfileKind::SmoothExp);
        assert_eq!(k.d2_rho(&Vector2::zeros(), &Vector2::zeros()), Vector2::zeros());
        let z = Vector2::new(0.3, -0.2);
        let g = k.d2_rho(&Vector2::zeros(), &z);
        assert!((g[0] * z[1] - g[1] * z[0]).abs() < 1e-14);
    }

    #[test]
    fn d1_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-5;
        let mut checked = 0;
        while checked < 50 {
            let k = AnisotropicKernel::<2>::new(ProfileKind::SmoothExp, tilted2(), 3.0).unwrap();
            let x = Vector2::new(rng.gen(), rng.gen());
            let z = Vector2::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0) * 0.6;
            let (s, _, _) = k.stretched(&x, &z);
            let g = k.d1_rho(&x, &z);
            if !(0.05..0.9).contains(&s) || g.norm() < 1e-2 {
                continue;
            }
            let fd = Vector2::from_fn(|i, _| {
                let mut e = Vector2::zeros();
                e[i] = h;
                (k.rho(&(x + e), &z) - k.rho(&(x - e), &z)) / (2.0 * h)
            });
            assert!((g - fd).norm() <= 1e-5 * g.norm(), "{g} vs {fd}");
            checked += 1;
        }
        let k =
            AnisotropicKernel::<2>::new(ProfileKind::PolyBump, DirectionField::Constant(Vector2::y()), 10.0).unwrap();
        assert_eq!(
            k.d1_rho(&Vector2::new(0.3, 0.1), &Vector2::new(0.1, 0.05)),
            Vector2::zeros()
        );
    }

    #[test]
    fn d1_integrates_to_zero() {
        let k = AnisotropicKernel::<2>::new(ProfileKind::SmoothExp, tilted2(), 10.0).unwrap();
        for x in [Vector2::new(0.1, 0.2), Vector2::new(0.77, 0.4)] {
            for i in 0..2 {
                let v = k.integrate_z(&x, 128, |z| k.d1_rho(&x, z)[i]).unwrap();
                assert!(v.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn jacobian_of_direction_matches_finite_differences() {
        let eta = tilted2();
        let x = Vector2::new(0.31, 0.72);
        let h = 1e-6;
        let j = eta.jacobian(&x);
        for c in 0..2 {
            let mut e = Vector2::zeros();
            e[c] = h;
            let fd = (eta.eval(&(x + e)) - eta.eval(&(x - e))) / (2.0 * h);
            assert!((j.column(c) - fd).norm() < 1e-7);
        }
        assert!((eta.eval(&x).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn change_of_variables_removes_determinant() {
        // ∫ g(Uz) det U dz = ∫ g(w) dw
        let prof = BumpProfile::new(ProfileKind::SmoothExp, 2);
        let g = |w: &Vector2<f64>| prof.derivative(w.norm_squared()).abs() * w.norm_squared();
        let iso = AnisotropicKernel::<2>::radial(ProfileKind::SmoothExp);
        let reference = iso.integrate_z(&Vector2::zeros(), 512, g).unwrap();
        for gamma in [1.0, 10.0, 100.0] {
            let k = AnisotropicKernel::<2>::new(ProfileKind::SmoothExp, DirectionField::Constant(unit2(0.4)), gamma)
                .unwrap();
            let x = Vector2::zeros();
            let u = k.u_matrix(&x);
            let v = k.integrate_z(&x, 512, |z| g(&(u * z)) * k.det_u()).unwrap();
            assert!((v - reference).abs() < 1e-8 * reference, "{v} vs {reference}");
        }
    }

    #[test]
    fn frozen_kernel_agrees_with_pointwise_evaluation() {
        let k = AnisotropicKernel::<2>::new(ProfileKind::PolyBump, tilted2(), 7.0).unwrap();
        let x = Vector2::new(0.13, 0.58);
        let f = k.at(&x);
        for z in [
            Vector2::new(0.02, 0.1),
            Vector2::new(-0.05, 0.3),
            Vector2::new(0.4, -0.6),
        ] {
            assert_eq!(f.rho(&z), k.rho(&x, &z));
            assert!((f.d2_rho(&z) - k.d2_rho(&x, &z)).norm() <= 1e-14 * (1.0 + k.d2_rho(&x, &z).norm()));
            assert!((f.d1_rho(&z) - k.d1_rho(&x, &z)).norm() <= 1e-14 * (1.0 + k.d1_rho(&x, &z).norm()));
        }
    }
}
