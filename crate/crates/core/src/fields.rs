//! The closed catalog of two-dimensional test fields.
//!
//! Each field is either smooth on the whole torus or piecewise constant on
//! two bands `{⟨k,x⟩ mod 1 ∈ (0,½)}` and `{⟨k,x⟩ mod 1 ∈ (½,1)}` for a
//! primitive integer normal `k`. A banded field jumps across the two lines
//! `⟨k,x⟩ ≡ 0` and `⟨k,x⟩ ≡ ½`; both one-sided traces are stored exactly.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, CompensatedSum};
use crate::torus::{wrap_half, wrap_unit, TorusPoint};

/// Points whose level-set value lies within this distance of a jump level
/// are treated as lying on the jump.
pub const JUMP_TOL: f64 = 1e-12;

const TWO_PI: f64 = 2.0 * PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldId {
    A,
    B,
    C,
    D,
    E,
}

impl FieldId {
    pub const ALL: [FieldId; 5] = [FieldId::A, FieldId::B, FieldId::C, FieldId::D, FieldId::E];

    pub fn field(self) -> &'static PiecewiseField {
        &catalog()[self as usize]
    }
}

impl fmt::Display for FieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FieldId::A => "A",
            FieldId::B => "B",
            FieldId::C => "C",
            FieldId::D => "D",
            FieldId::E => "E",
        };
        f.write_str(s)
    }
}

impl FromStr for FieldId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(FieldId::A),
            "B" | "b" => Ok(FieldId::B),
            "C" | "c" => Ok(FieldId::C),
            "D" | "d" => Ok(FieldId::D),
            "E" | "e" => Ok(FieldId::E),
            other => Err(Error::InvalidInput(format!("unknown field id {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    Smooth,
    SobolevW11,
    Bv,
    Pathological,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Smooth => "smooth",
            Classification::SobolevW11 => "sobolev_W11",
            Classification::Bv => "bv",
            Classification::Pathological => "pathological",
        })
    }
}

/// One closed line `{⟨k,x⟩ ≡ level (mod 1)}` of the jump set.
#[derive(Clone, Debug)]
pub struct JumpComponent {
    pub k: [i32; 2],
    pub level: f64,
    /// Unit normal `k/|k|`.
    pub eta: Vector2<f64>,
    /// Unit jump direction `(b⁺ − b⁻)/σ`.
    pub xi: Vector2<f64>,
    /// Density of `|D^s b|` with respect to arc length.
    pub sigma: f64,
    /// Trace from the side `-eta` points into.
    pub trace_minus: Vector2<f64>,
    /// Trace from the side `eta` points into.
    pub trace_plus: Vector2<f64>,
}

impl JumpComponent {
    fn new(k: [i32; 2], level: f64, minus: Vector2<f64>, plus: Vector2<f64>) -> Self {
        let kv = Vector2::new(k[0] as f64, k[1] as f64);
        let eta = kv / kv.norm();
        let jump = plus - minus;
        let sigma = jump.norm();
        JumpComponent {
            k,
            level,
            eta,
            xi: jump / sigma,
            sigma,
            trace_minus: minus,
            trace_plus: plus,
        }
    }

    /// Arc length of the closed line on 𝕋².
    pub fn length(&self) -> f64 {
        ((self.k[0] * self.k[0] + self.k[1] * self.k[1]) as f64).sqrt()
    }

    /// Unit tangent, η rotated by +90°.
    pub fn tangent(&self) -> Vector2<f64> {
        Vector2::new(-self.eta[1], self.eta[0])
    }

    /// Signed level-set offset of `x`, in `[-½, ½)`.
    pub fn offset(&self, x: &Vector2<f64>) -> f64 {
        wrap_half(self.k[0] as f64 * x[0] + self.k[1] as f64 * x[1] - self.level)
    }

    pub fn contains(&self, x: &TorusPoint<2>) -> bool {
        self.offset(x.coords()).abs() <= JUMP_TOL
    }

    /// Point at arc-length parameter `u ∈ [0, length)`.
    pub fn point_at(&self, u: f64) -> TorusPoint<2> {
        let kv = Vector2::new(self.k[0] as f64, self.k[1] as f64);
        let base = kv * (self.level / kv.norm_squared());
        TorusPoint::origin().translate(&(base + self.tangent() * u))
    }

    /// `n` equally spaced nodes with equal arc-length weights.
    pub fn nodes(&self, n: usize) -> impl Iterator<Item = (TorusPoint<2>, f64)> + '_ {
        let len = self.length();
        let w = len / n as f64;
        (0..n).map(move |i| (self.point_at((i as f64 + 0.5) * w), w))
    }

    /// `∫_Σ g σ dH¹` by the uniform rule with `n` nodes.
    pub fn surface_quadrature<G: Fn(&TorusPoint<2>) -> f64>(&self, g: G, n: usize) -> f64 {
        let mut acc = CompensatedSum::default();
        for (x, w) in self.nodes(n) {
            acc.add(g(&x) * self.sigma * w);
        }
        acc.value()
    }
}

#[derive(Clone, Copy, Debug)]
enum SmoothFormula {
    /// `(−sin 2πx₂, sin 2πx₁)`
    Rotation,
    /// `(sin 2πx₁, 0)`
    SineShear,
}

impl SmoothFormula {
    fn value(self, x: &Vector2<f64>) -> Vector2<f64> {
        match self {
            SmoothFormula::Rotation => Vector2::new(-(TWO_PI * x[1]).sin(), (TWO_PI * x[0]).sin()),
            SmoothFormula::SineShear => Vector2::new((TWO_PI * x[0]).sin(), 0.0),
        }
    }

    fn jacobian(self, x: &Vector2<f64>) -> Matrix2<f64> {
        match self {
            SmoothFormula::Rotation => Matrix2::new(
                0.0,
                -TWO_PI * (TWO_PI * x[1]).cos(),
                TWO_PI * (TWO_PI * x[0]).cos(),
                0.0,
            ),
            SmoothFormula::SineShear => Matrix2::new(TWO_PI * (TWO_PI * x[0]).cos(), 0.0, 0.0, 0.0),
        }
    }
}

/// Piecewise-constant field on the two bands of a primitive normal `k`.
#[derive(Clone, Debug)]
pub struct Bands {
    pub k: [i32; 2],
    /// Value for `⟨k,x⟩ mod 1 ∈ (0, ½)`.
    pub lower: Vector2<f64>,
    /// Value for `⟨k,x⟩ mod 1 ∈ (½, 1)`.
    pub upper: Vector2<f64>,
}

impl Bands {
    /// Level-set coordinate `⟨k,x⟩ mod 1`.
    pub fn level(&self, x: &Vector2<f64>) -> f64 {
        wrap_unit(self.k[0] as f64 * x[0] + self.k[1] as f64 * x[1])
    }

    /// 0 for the lower band, 1 for the upper band (exact levels go to the
    /// band above them).
    pub fn side(&self, x: &Vector2<f64>) -> usize {
        usize::from(self.level(x) >= 0.5)
    }

    pub fn value(&self, side: usize) -> Vector2<f64> {
        if side == 0 {
            self.lower
        } else {
            self.upper
        }
    }

    pub fn normal(&self) -> Vector2<f64> {
        let kv = Vector2::new(self.k[0] as f64, self.k[1] as f64);
        kv / kv.norm()
    }

    /// Unimodular integer matrix with first row `k`; `x ↦ A x` is a
    /// measure-preserving automorphism of 𝕋² taking the bands to slabs in
    /// the first coordinate.
    pub fn adapted_basis(&self) -> Matrix2<f64> {
        let [a, b] = self.k;
        // Bezout coefficients: a·q − b·p = 1
        let small = [0i32, 1, -1, 2, -2, 3, -3, 4, -4];
        let (p, q) = small
            .iter()
            .flat_map(|&p| small.iter().map(move |&q| (p, q)))
            .find(|&(p, q)| a * q - b * p == 1)
            .expect("normal must be primitive with small entries");
        Matrix2::new(a as f64, b as f64, p as f64, q as f64)
    }
}

#[derive(Clone, Debug)]
enum Shape {
    Smooth(SmoothFormula),
    Banded(Bands),
}

#[derive(Clone, Debug)]
pub struct PiecewiseField {
    pub id: FieldId,
    pub classification: Classification,
    pub description: &'static str,
    shape: Shape,
    jumps: Vec<JumpComponent>,
}

fn banded(id: FieldId, class: Classification, description: &'static str, bands: Bands) -> PiecewiseField {
    // η points from the upper band into the lower one across level 0,
    // and from the lower band into the upper one across level ½.
    let jumps = vec![
        JumpComponent::new(bands.k, 0.0, bands.upper, bands.lower),
        JumpComponent::new(bands.k, 0.5, bands.lower, bands.upper),
    ];
    PiecewiseField {
        id,
        classification: class,
        description,
        shape: Shape::Banded(bands),
        jumps,
    }
}

fn build_catalog() -> Vec<PiecewiseField> {
    let tangent_d = Vector2::new(-1.0, 2.0) / 5f64.sqrt();
    vec![
        PiecewiseField {
            id: FieldId::A,
            classification: Classification::Smooth,
            description: "(-sin 2pi x2, sin 2pi x1), divergence-free",
            shape: Shape::Smooth(SmoothFormula::Rotation),
            jumps: Vec::new(),
        },
        PiecewiseField {
            id: FieldId::B,
            classification: Classification::Smooth,
            description: "(sin 2pi x1, 0), div = 2pi cos 2pi x1",
            shape: Shape::Smooth(SmoothFormula::SineShear),
            jumps: Vec::new(),
        },
        banded(
            FieldId::C,
            Classification::Bv,
            "shear (0,1) on x1 in (0,1/2), (0,-1) on (1/2,1)",
            Bands {
                k: [1, 0],
                lower: Vector2::new(0.0, 1.0),
                upper: Vector2::new(0.0, -1.0),
            },
        ),
        banded(
            FieldId::D,
            Classification::Bv,
            "shear +-(-1,2)/sqrt5 on the bands of 2x1+x2 mod 1",
            Bands {
                k: [2, 1],
                lower: tangent_d,
                upper: -tangent_d,
            },
        ),
        banded(
            FieldId::E,
            Classification::Pathological,
            "compression (1,0) on x1 in (0,1/2), (-1,0) on (1/2,1)",
            Bands {
                k: [1, 0],
                lower: Vector2::new(1.0, 0.0),
                upper: Vector2::new(-1.0, 0.0),
            },
        ),
    ]
}

pub fn catalog() -> &'static [PiecewiseField] {
    static CATALOG: OnceLock<Vec<PiecewiseField>> = OnceLock::new();
    CATALOG.get_or_init(build_catalog)
}

impl PiecewiseField {
    pub fn jumps(&self) -> &[JumpComponent] {
        &self.jumps
    }

    pub fn bands(&self) -> Option<&Bands> {
        match &self.shape {
            Shape::Banded(b) => Some(b),
            Shape::Smooth(_) => None,
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self.shape, Shape::Smooth(_))
    }

    /// `sup |div^a b|`.
    pub fn div_sup(&self) -> f64 {
        match self.shape {
            Shape::Smooth(SmoothFormula::SineShear) => TWO_PI,
            _ => 0.0,
        }
    }

    /// True if some jump carries a singular divergence `⟨ξ,η⟩σ ≠ 0`.
    pub fn has_singular_divergence(&self, tol: f64) -> bool {
        self.jumps.iter().any(|j| j.xi.dot(&j.eta).abs() > tol)
    }

    fn jump_at(&self, x: &TorusPoint<2>) -> Option<(usize, &JumpComponent)> {
        self.jumps.iter().enumerate().find(|(_, j)| j.contains(x))
    }

    fn check_off_jump(&self, x: &TorusPoint<2>) -> Result<()> {
        match self.jump_at(x) {
            Some((component, j)) => Err(Error::OnJump {
                field: self.id,
                component,
                point: x.to_array(),
                minus: j.trace_minus.into(),
                plus: j.trace_plus.into(),
            }),
            None => Ok(()),
        }
    }

    /// Value of the piece containing `x`, without the on-jump check.
    pub fn eval_lenient(&self, x: &Vector2<f64>) -> Vector2<f64> {
        match &self.shape {
            Shape::Smooth(f) => f.value(x),
            Shape::Banded(b) => b.value(b.side(x)),
        }
    }

    /// Jacobian of the piece containing `x`, without the on-jump check.
    pub fn grad_lenient(&self, x: &Vector2<f64>) -> Matrix2<f64> {
        match &self.shape {
            Shape::Smooth(f) => f.jacobian(x),
            Shape::Banded(_) => Matrix2::zeros(),
        }
    }

    pub fn div_lenient(&self, x: &Vector2<f64>) -> f64 {
        self.grad_lenient(x).trace()
    }

    pub fn eval_b(&self, x: &TorusPoint<2>) -> Result<Vector2<f64>> {
        self.check_off_jump(x)?;
        Ok(self.eval_lenient(x.coords()))
    }

    pub fn grad_a(&self, x: &TorusPoint<2>) -> Result<Matrix2<f64>> {
        self.check_off_jump(x)?;
        Ok(self.grad_lenient(x.coords()))
    }

    pub fn div_a(&self, x: &TorusPoint<2>) -> Result<f64> {
        Ok(self.grad_a(x)?.trace())
    }

    /// `(ξ_b, η_b, σ)` at a point of the jump set.
    pub fn jump_data(&self, x: &TorusPoint<2>) -> Result<(Vector2<f64>, Vector2<f64>, f64)> {
        match self.jump_at(x) {
            Some((_, j)) => Ok((j.xi, j.eta, j.sigma)),
            None => Err(Error::NoJump {
                field: self.id,
                point: x.to_array(),
            }),
        }
    }

    /// `Σ_k ∫_{Σ_k} g σ dH¹` with `n` nodes per component.
    pub fn surface_quadrature<G: Fn(&JumpComponent, &TorusPoint<2>) -> f64>(&self, g: G, n: usize) -> f64 {
        let mut acc = CompensatedSum::default();
        for j in &self.jumps {
            acc.add(j.surface_quadrature(|x| g(j, x), n));
        }
        acc.value()
    }

    /// `|D^s b|(𝕋²)`.
    pub fn singular_mass(&self) -> f64 {
        self.jumps.iter().map(|j| j.sigma * j.length()).sum()
    }

    /// Volume integral of `g` over 𝕋² resolved to the band structure:
    /// Gauss–Legendre across each band and the uniform rule along it.
    pub fn volume_integral<G: Fn(&Vector2<f64>) -> f64>(&self, g: G, n: usize) -> f64 {
        match &self.shape {
            Shape::Smooth(_) => {
                let mut acc = CompensatedSum::default();
                let w = 1.0 / (n * n) as f64;
                for i in 0..n {
                    for j in 0..n {
                        let x = Vector2::new((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
                        acc.add(w * g(&x));
                    }
                }
                acc.value()
            }
            Shape::Banded(b) => {
                let inv = b.adapted_basis().try_inverse().expect("unimodular");
                let panels = (n / 16).max(1);
                let mut nodes = Vec::new();
                for (lo, hi) in [(0.0, 0.5), (0.5, 1.0)] {
                    let h = (hi - lo) / panels as f64;
                    for p in 0..panels {
                        nodes.extend(gauss_legendre(8, lo + p as f64 * h, lo + (p + 1) as f64 * h));
                    }
                }
                let mut acc = CompensatedSum::default();
                for &(s, ws) in &nodes {
                    for j in 0..n {
                        let u = (j as f64 + 0.5) / n as f64;
                        let x = inv * Vector2::new(s, u);
                        acc.add(ws * g(&x) / n as f64);
                    }
                }
                acc.value()
            }
        }
    }
}

/// Smooth periodic test function for the weak-divergence check.
pub trait TestFunction: Sync {
    fn value(&self, x: &Vector2<f64>) -> f64;
    fn gradient(&self, x: &Vector2<f64>) -> Vector2<f64>;
}

/// Finite Fourier series `Σ a_m cos 2π⟨m,x⟩ + b_m sin 2π⟨m,x⟩`.
#[derive(Clone, Debug, Default)]
pub struct FourierTest {
    pub modes: Vec<([i32; 2], f64, f64)>,
}

impl FourierTest {
    pub fn constant(c: f64) -> Self {
        FourierTest {
            modes: vec![([0, 0], c, 0.0)],
        }
    }

    pub fn cos(m: [i32; 2]) -> Self {
        FourierTest {
            modes: vec![(m, 1.0, 0.0)],
        }
    }
}

impl TestFunction for FourierTest {
    fn value(&self, x: &Vector2<f64>) -> f64 {
        self.modes
            .iter()
            .map(|&(m, a, b)| {
                let ph = TWO_PI * (m[0] as f64 * x[0] + m[1] as f64 * x[1]);
                a * ph.cos() + b * ph.sin()
            })
            .sum()
    }

    fn gradient(&self, x: &Vector2<f64>) -> Vector2<f64> {
        self.modes
            .iter()
            .map(|&(m, a, b)| {
                let mv = Vector2::new(m[0] as f64, m[1] as f64);
                let ph = TWO_PI * mv.dot(x);
                mv * (TWO_PI * (-a * ph.sin() + b * ph.cos()))
            })
            .sum()
    }
}

/// `−∫b·∇φ − ∫φ div^a b − ∫_Σ φ⟨ξ_b,η_b⟩σ dH¹`, which vanishes when the
/// stored decomposition is the distributional divergence.
pub fn distributional_divergence_check(field: &PiecewiseField, phi: &dyn TestFunction, n: usize) -> f64 {
    let weak = field.volume_integral(|x| -field.eval_lenient(x).dot(&phi.gradient(x)), n);
    let absolutely = field.volume_integral(|x| phi.value(x) * field.div_lenient(x), n);
    let singular = field.surface_quadrature(|j, x| phi.value(x.coords()) * j.xi.dot(&j.eta), n);
    weak - absolutely - singular
}
