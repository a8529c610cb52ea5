use std::collections::HashMap;

use nalgebra::Vector2;

use super::lattice::{Lattice, Nodes};
use crate::error::{Error, Result};
use crate::fields::{FieldId, PiecewiseField};
use crate::flow::{flow_point, integrate_flow, FlowEnsemble, FlowSolverConfig, InitialPoints, Method};
use crate::torus::TorusPoint;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowSample {
    pub position: TorusPoint<2>,
    pub log_jacobian: f64,
}

/// `x ↦ (X(t,x), log J(t,x))`.
pub trait FlowView: Sync {
    fn sample(&self, t: f64, x: &TorusPoint<2>) -> Result<FlowSample>;
}

/// A flow read from an ensemble; only its initial points and stored times
/// can be sampled.
#[derive(Clone, Debug)]
pub struct SampledFlow {
    ensemble: FlowEnsemble,
    index: HashMap<[u64; 2], usize>,
}

fn key(x: &TorusPoint<2>) -> [u64; 2] {
    let c = x.coords();
    [c[0].to_bits(), c[1].to_bits()]
}

impl SampledFlow {
    pub fn new(ensemble: FlowEnsemble) -> Self {
        let index = ensemble.initial.iter().enumerate().map(|(i, x)| (key(x), i)).collect();
        SampledFlow { ensemble, index }
    }

    pub fn ensemble(&self) -> &FlowEnsemble {
        &self.ensemble
    }
}

impl FlowView for SampledFlow {
    fn sample(&self, t: f64, x: &TorusPoint<2>) -> Result<FlowSample> {
        let ti = self.ensemble.time_index(t)?;
        let i = *self.index.get(&key(x)).ok_or_else(|| {
            Error::InvalidInput(format!(
                "point {:?} is not an initial point of the ensemble",
                x.to_array()
            ))
        })?;
        Ok(FlowSample {
            position: self.ensemble.positions[ti][i],
            log_jacobian: self.ensemble.log_jacobian[ti][i],
        })
    }
}

/// Flow evaluated on demand by the closed-form solver.
#[derive(Clone, Debug)]
pub struct ExactFlow {
    field: &'static PiecewiseField,
    config: FlowSolverConfig,
}

impl ExactFlow {
    pub fn new(field: &'static PiecewiseField) -> Result<Self> {
        if field.id == FieldId::A {
            return Err(Error::UnsupportedMethod {
                field: field.id,
                method: "explicit_exact",
            });
        }
        Ok(ExactFlow {
            field,
            config: FlowSolverConfig::default().with_method(Method::ExplicitExact),
        })
    }
}

impl FlowView for ExactFlow {
    fn sample(&self, t: f64, x: &TorusPoint<2>) -> Result<FlowSample> {
        let (position, log_jacobian) = flow_point(self.field, &self.config, x, t)?;
        Ok(FlowSample { position, log_jacobian })
    }
}

/// `x ↦ X_t(x) + offset`; the Jacobian is unchanged.
pub struct Translated<V> {
    pub inner: V,
    pub offset: Vector2<f64>,
}

impl<V: FlowView> FlowView for Translated<V> {
    fn sample(&self, t: f64, x: &TorusPoint<2>) -> Result<FlowSample> {
        let s = self.inner.sample(t, x)?;
        Ok(FlowSample {
            position: s.position.translate(&self.offset),
            log_jacobian: s.log_jacobian,
        })
    }
}

impl<V: FlowView + ?Sized> FlowView for Box<V> {
    fn sample(&self, t: f64, x: &TorusPoint<2>) -> Result<FlowSample> {
        (**self).sample(t, x)
    }
}

/// How to produce a flow on the nodes of a lattice.
#[derive(Clone, Debug, PartialEq)]
pub enum FlowSpec {
    /// Closed-form flow, evaluated lazily.
    Exact(FieldId),
    /// Flow integrated on the lattice nodes with the given solver.
    Solver(FieldId, FlowSolverConfig),
    /// Another flow followed by a fixed translation.
    Shifted(Box<FlowSpec>, [f64; 2]),
}

impl FlowSpec {
    pub fn field(&self) -> FieldId {
        match self {
            FlowSpec::Exact(f) | FlowSpec::Solver(f, _) => *f,
            FlowSpec::Shifted(inner, _) => inner.field(),
        }
    }

    /// A view valid on `nodes` of `lattice` at every time in `times`.
    pub fn view(&self, lattice: &Lattice, nodes: Nodes, times: &[f64]) -> Result<Box<dyn FlowView>> {
        Ok(match self {
            FlowSpec::Exact(f) => Box::new(ExactFlow::new(f.field())?),
            FlowSpec::Solver(f, cfg) => {
                let mut all = times.to_vec();
                all.push(0.0);
                let ens = integrate_flow(f.field(), cfg, &InitialPoints::Points(lattice.points(nodes)), &all)?;
                Box::new(SampledFlow::new(ens))
            }
            FlowSpec::Shifted(inner, a) => Box::new(Translated {
                inner: inner.view(lattice, nodes, times)?,
                offset: Vector2::new(a[0], a[1]),
            }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_and_exact_views_agree_for_the_shear() {
        let lat = Lattice::new(0.2, 4, 4).unwrap();
        let times = [0.0, 0.3];
        let solver = FlowSpec::Solver(FieldId::C, FlowSolverConfig::default())
            .view(&lat, Nodes::All, &times)
            .unwrap();
        let exact = FlowSpec::Exact(FieldId::C).view(&lat, Nodes::All, &times).unwrap();
        for x in lat.points(Nodes::All).iter().step_by(3) {
            let a = solver.sample(0.3, x).unwrap();
            let b = exact.sample(0.3, x).unwrap();
            assert!(crate::torus::torus_distance(&a.position, &b.position) < 1e-12);
        }
        let off = lat.node(lat.len() - 1).translate(&Vector2::new(1e-3, 0.0));
        assert!(solver.sample(0.3, &off).is_err());
        assert!(matches!(solver.sample(0.2, &lat.node(0)), Err(Error::MissingTime(_))));
    }

    #[test]
    fn translation_keeps_the_jacobian() {
        let v = Translated {
            inner: ExactFlow::new(FieldId::B.field()).unwrap(),
            offset: Vector2::new(0.3, 0.0),
        };
        let x = TorusPoint::new([0.1, 0.2]).unwrap();
        let a = v.sample(0.4, &x).unwrap();
        let b = v.inner.sample(0.4, &x).unwrap();
        assert_eq!(a.log_jacobian, b.log_jacobian);
        assert!((crate::torus::torus_distance(&a.position, &b.position) - 0.3).abs() < 1e-14);
    }

    #[test]
    fn rotation_has_no_exact_flow() {
        assert!(ExactFlow::new(FieldId::A.field()).is_err());
    }
}
