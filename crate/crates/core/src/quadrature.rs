//! Deterministic quadrature on uniform tensor grids.
//!
//! All reductions go through [`try_ordered_sum`]: the index range is cut into
//! fixed-size chunks (independent of the thread count), each chunk is summed
//! sequentially with Neumaier compensation and the chunk partials are combined
//! in index order. Results are therefore bit-identical for any rayon pool size.

use gauss_quad::GaussLegendre;
use nalgebra::SMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::torus::Vector;

const CHUNK: usize = 1024;

/// Neumaier compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Sum `f(0) + … + f(len-1)` in a schedule-independent order.
///
/// The first non-finite term (in index order) aborts the sum with
/// [`Error::Quadrature`] naming its index.
pub fn try_ordered_sum<F>(len: usize, f: F) -> Result<f64>
where
    F: Fn(usize) -> Result<f64> + Sync,
{
    Ok(try_ordered_sums(len, |i| Ok([f(i)?]))?[0])
}

/// `K` sums accumulated in one pass, each in the order of [`try_ordered_sum`].
pub fn try_ordered_sums<const K: usize, F>(len: usize, f: F) -> Result<[f64; K]>
where
    F: Fn(usize) -> Result<[f64; K]> + Sync,
{
    let chunks = len.div_ceil(CHUNK);
    let partials: Vec<Result<[f64; K]>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = [CompensatedSum::default(); K];
            for i in c * CHUNK..((c + 1) * CHUNK).min(len) {
                let v = f(i)?;
                for (a, x) in acc.iter_mut().zip(v) {
                    if !x.is_finite() {
                        return Err(Error::Quadrature { index: i });
                    }
                    a.add(x);
                }
            }
            Ok(acc.map(|a| a.value()))
        })
        .collect();
    let mut total = [CompensatedSum::default(); K];
    for p in partials {
        for (a, x) in total.iter_mut().zip(p?) {
            a.add(x);
        }
    }
    Ok(total.map(|a| a.value()))
}

pub fn ordered_sum<F>(len: usize, f: F) -> Result<f64>
where
    F: Fn(usize) -> f64 + Sync,
{
    try_ordered_sum(len, |i| Ok(f(i)))
}

/// A uniform midpoint grid on a (possibly rotated) box or on the unit torus.
///
/// Node `i` sits at `origin + axes · ((i_k + 1/2) / n)_k`; each node carries
/// the weight `|det axes| / n^N`, so the weights sum to the box measure.
#[derive(Clone, Debug)]
pub struct QuadratureGrid<const N: usize> {
    n: usize,
    origin: Vector<N>,
    axes: SMatrix<f64, N, N>,
    weight: f64,
}

impl<const N: usize> QuadratureGrid<N> {
    fn from_axes(n: usize, origin: Vector<N>, axes: SMatrix<f64, N, N>) -> Self {
        assert!(n > 0, "grid needs at least one point per dimension");
        // columns are mutually orthogonal in every constructor
        let volume: f64 = axes.column_iter().map(|c| c.norm()).product();
        let weight = volume / (n as f64).powi(N as i32);
        QuadratureGrid {
            n,
            origin,
            axes,
            weight,
        }
    }

    /// Cell-centred grid on 𝕋^N (total weight 1).
    pub fn torus(n: usize) -> Self {
        Self::from_axes(n, Vector::zeros(), SMatrix::identity())
    }

    /// Grid on the cube `[-half_width, half_width]^N`.
    pub fn cube(half_width: f64, n: usize) -> Self {
        Self::from_axes(n, Vector::repeat(-half_width), SMatrix::identity() * (2.0 * half_width))
    }

    /// Grid on the box `{ Σ_k u_k e_k : |u_k| ≤ half_widths[k] }`, where the
    /// `e_k` are the (orthonormal) columns of `frame`.
    pub fn oriented_box(frame: &SMatrix<f64, N, N>, half_widths: &Vector<N>, n: usize) -> Self {
        let axes = SMatrix::from_fn(|i, j| 2.0 * half_widths[j] * frame[(i, j)]);
        let origin = -(frame * half_widths);
        Self::from_axes(n, origin, axes)
    }

    pub fn points_per_dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n.pow(N as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn measure(&self) -> f64 {
        self.weight * self.len() as f64
    }

    /// Coordinates of node `index` (last axis varies fastest).
    pub fn node(&self, index: usize) -> Vector<N> {
        let mut rest = index;
        let mut unit = Vector::<N>::zeros();
        for k in (0..N).rev() {
            unit[k] = ((rest % self.n) as f64 + 0.5) / self.n as f64;
            rest /= self.n;
        }
        self.origin + self.axes * unit
    }

    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&Vector<N>) -> f64 + Sync,
    {
        let s = ordered_sum(self.len(), |i| f(&self.node(i)))?;
        Ok(s * self.weight)
    }

    pub fn try_integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&Vector<N>) -> Result<f64> + Sync,
    {
        let s = try_ordered_sum(self.len(), |i| f(&self.node(i)))?;
        Ok(s * self.weight)
    }
}

/// Gauss–Legendre nodes and weights mapped to `[a, b]`.
pub fn gauss_legendre(degree: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(degree.max(2)).expect("degree >= 2");
    let half = 0.5 * (b - a);
    rule.iter().map(|(x, w)| (a + half * (x + 1.0), half * w)).collect()
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]`.
pub fn composite_gauss<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, degree: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let rule = gauss_legendre(degree, 0.0, h);
    let mut acc = CompensatedSum::default();
    for p in 0..panels {
        let left = a + p as f64 * h;
        for &(x, w) in &rule {
            acc.add(w * f(left + x));
        }
    }
    acc.value()
}
