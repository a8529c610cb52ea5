//! Numerical laboratory for almost-everywhere flows of BV vector fields on the
//! flat torus: a catalog of piecewise fields with explicit jump data, an
//! event-aware flow integrator, anisotropic position-dependent mollifiers and
//! the discrepancy functionals built from them.

pub mod error;
pub mod experiments;
pub mod fields;
pub mod flow;
pub mod functionals;
pub mod kernels;
pub mod quadrature;
pub mod torus;

pub use error::{Error, Result};
pub use fields::{FieldId, PiecewiseField};
pub use torus::{Displacement, TorusPoint, Vector};
