//! Points and displacements on the flat torus 𝕋^N = R^N / Z^N.
//!
//! Every coordinate of a [`TorusPoint`] lives in `[0, 1)`. Differences of
//! points are taken in the minimal periodic image, with each component in
//! `[-1/2, 1/2)`: an exact tie at ±1/2 always resolves to −1/2.

use nalgebra::SVector;

use crate::error::{Error, Result};

pub type Vector<const N: usize> = SVector<f64, N>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusPoint<const N: usize>(Vector<N>);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Displacement<const N: usize>(Vector<N>);

#[inline]
pub(crate) fn wrap_unit(v: f64) -> f64 {
    let r = v - v.floor();
    // tiny negative inputs round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[inline]
pub(crate) fn wrap_half(v: f64) -> f64 {
    v - (v + 0.5).floor()
}

/// Reduce a raw coordinate vector modulo 1 into a torus point.
pub fn wrap<const N: usize>(raw: Vector<N>) -> Result<TorusPoint<N>> {
    if raw.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite coordinates {:?}",
            raw.as_slice()
        )));
    }
    Ok(TorusPoint(raw.map(wrap_unit)))
}

/// Minimal-image displacement `d` with `wrap(b + d) = a`.
pub fn min_image<const N: usize>(a: &TorusPoint<N>, b: &TorusPoint<N>) -> Displacement<N> {
    Displacement((a.0 - b.0).map(wrap_half))
}

/// Length of the shortest periodic path between two points.
#[inline]
pub fn torus_distance<const N: usize>(a: &TorusPoint<N>, b: &TorusPoint<N>) -> f64 {
    min_image(a, b).norm()
}

impl<const N: usize> TorusPoint<N> {
    pub fn new(coords: [f64; N]) -> Result<Self> {
        wrap(Vector::from(coords))
    }

    pub fn origin() -> Self {
        TorusPoint(Vector::zeros())
    }

    pub fn coords(&self) -> &Vector<N> {
        &self.0
    }

    pub fn to_array(&self) -> [f64; N] {
        self.0.into()
    }

    /// Move by an arbitrary finite vector and re-wrap.
    pub fn translate(&self, by: &Vector<N>) -> Self {
        debug_assert!(by.iter().all(|c| c.is_finite()));
        TorusPoint((self.0 + by).map(wrap_unit))
    }
}

impl<const N: usize> Displacement<N> {
    pub fn vector(&self) -> &Vector<N> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

impl<const N: usize> std::ops::Neg for Displacement<N> {
    type Output = Self;
    fn neg(self) -> Self {
        Displacement(-self.0)
    }
}
