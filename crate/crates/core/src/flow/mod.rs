//! Flows `X(t,·)` of catalog fields on ensembles of initial points.
//!
//! Each trajectory carries `log J(t,x)`, the logarithm of the Jacobian of
//! `x ↦ X(t,x)`. Inside a piece it evolves by `d/dt log J = div^a b(X)`; at a
//! transversal crossing of a jump line with normal speeds `a_P → a_Q` it
//! jumps by `ln(a_Q/a_P)`.

mod checks;
mod density;
mod solver;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{FieldId, PiecewiseField};
use crate::torus::TorusPoint;

pub use checks::{backward_forward_defect, branch_loop_ensembles, check_group_property, check_ode_residual};
pub use density::{bin_average, density_along_backward, density_from_flow, pushforward_histogram, DensityField};
pub use solver::flow_point;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Rk4Event,
    ExplicitExact,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Rk4Event => "rk4_event",
            Method::ExplicitExact => "explicit_exact",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rk4_event" => Ok(Method::Rk4Event),
            "explicit_exact" => Ok(Method::ExplicitExact),
            other => Err(Error::InvalidInput(format!("unknown solver method {other:?}"))),
        }
    }
}

/// Side of a jump line a trajectory starting on it is pushed to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Plus => "plus",
            Side::Minus => "minus",
        })
    }
}

impl FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "plus" => Ok(Side::Plus),
            "minus" => Ok(Side::Minus),
            other => Err(Error::InvalidInput(format!("unknown side {other:?}"))),
        }
    }
}

/// Offset applied along `η_b` to initial points lying on a jump line.
pub const START_PERTURBATION: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowSolverConfig {
    pub step: f64,
    pub method: Method,
    pub event_tol: f64,
    pub max_crossings: usize,
    pub start_side: Side,
}

impl Default for FlowSolverConfig {
    fn default() -> Self {
        FlowSolverConfig {
            step: 1e-3,
            method: Method::Rk4Event,
            event_tol: 1e-12,
            max_crossings: 10_000,
            start_side: Side::Plus,
        }
    }
}

impl FlowSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidInput(format!(
                "solver step must be > 0, got {}",
                self.step
            )));
        }
        if !(self.event_tol > 0.0 && self.event_tol <= self.step) {
            return Err(Error::InvalidInput(format!(
                "event_tol must lie in (0, step], got {}",
                self.event_tol
            )));
        }
        Ok(())
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn with_side(mut self, side: Side) -> Self {
        self.start_side = side;
        self
    }
}

#[derive(Clone, Debug)]
pub enum InitialPoints {
    /// Cell centres `((i+½)/m, (j+½)/m)`, index `i·m + j`.
    Grid(usize),
    Points(Vec<TorusPoint<2>>),
}

impl InitialPoints {
    pub fn points(&self) -> Vec<TorusPoint<2>> {
        match self {
            InitialPoints::Grid(m) => {
                let m = *m;
                (0..m * m).map(|i| grid_point(m, i)).collect()
            }
            InitialPoints::Points(p) => p.clone(),
        }
    }
}

pub fn grid_point(m: usize, index: usize) -> TorusPoint<2> {
    let (i, j) = (index / m, index % m);
    TorusPoint::new([(i as f64 + 0.5) / m as f64, (j as f64 + 0.5) / m as f64]).expect("finite")
}

#[derive(Clone, Debug)]
pub struct FlowEnsemble {
    pub field: FieldId,
    pub config: FlowSolverConfig,
    /// `Some(m)` when the initial points are the `m × m` cell-centred grid.
    pub grid_side: Option<usize>,
    pub initial: Vec<TorusPoint<2>>,
    pub times: Vec<f64>,
    /// `positions[time][point]`.
    pub positions: Vec<Vec<TorusPoint<2>>>,
    pub log_jacobian: Vec<Vec<f64>>,
    /// Trajectories that have been absorbed by an attracting jump line.
    pub absorbed: Vec<Vec<bool>>,
    /// Indices of initial points moved off a jump line before integrating.
    pub perturbed_starts: Vec<usize>,
}

const TIME_MATCH: f64 = 1e-12;

impl FlowEnsemble {
    pub fn len(&self) -> usize {
        self.initial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.initial.is_empty()
    }

    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= TIME_MATCH)
            .ok_or(Error::MissingTime(t))
    }

    pub fn position(&self, t: f64, point: usize) -> Result<TorusPoint<2>> {
        Ok(self.positions[self.time_index(t)?][point])
    }

    pub fn field(&self) -> &'static PiecewiseField {
        self.field.field()
    }

    /// Index of the grid point equal to `x`, if the ensemble is a grid.
    pub fn grid_index(&self, x: &TorusPoint<2>) -> Option<usize> {
        let m = self.grid_side?;
        let c = x.coords();
        let i = ((c[0] * m as f64) as usize).min(m - 1);
        let j = ((c[1] * m as f64) as usize).min(m - 1);
        let idx = i * m + j;
        (crate::torus::torus_distance(&self.initial[idx], x) < 1e-9 / m as f64).then_some(idx)
    }

    /// CSV snapshot with columns `t, x0_1, x0_2, x_1, x_2, logJ`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x0_1", "x0_2", "x_1", "x_2", "logJ"])?;
        for (ti, &t) in self.times.iter().enumerate() {
            for (i, x0) in self.initial.iter().enumerate() {
                let x = self.positions[ti][i].to_array();
                let x0 = x0.to_array();
                w.write_record([
                    format!("{t:.16e}"),
                    format!("{:.16e}", x0[0]),
                    format!("{:.16e}", x0[1]),
                    format!("{:.16e}", x[0]),
                    format!("{:.16e}", x[1]),
                    format!("{:.16e}", self.log_jacobian[ti][i]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrate the flow of `field` from `initial` to every time in `times`
/// (which must contain 0; negative times integrate backward).
pub fn integrate_flow(
    field: &PiecewiseField,
    config: &FlowSolverConfig,
    initial: &InitialPoints,
    times: &[f64],
) -> Result<FlowEnsemble> {
    config.validate()?;
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("output times must be finite".into()));
    }
    if !times.contains(&0.0) {
        return Err(Error::InvalidInput("output times must include 0".into()));
    }
    let mut times = times.to_vec();
    times.sort_by(f64::total_cmp);
    times.dedup();

    let starts = initial.points();
    let grid_side = match initial {
        InitialPoints::Grid(m) => Some(*m),
        InitialPoints::Points(_) => None,
    };

    let results: Vec<Result<solver::TrajectoryOutput>> = starts
        .par_iter()
        .map(|x0| solver::trajectory(field, config, x0, &times))
        .collect();

    let nt = times.len();
    let mut positions = vec![Vec::with_capacity(starts.len()); nt];
    let mut log_jacobian = vec![Vec::with_capacity(starts.len()); nt];
    let mut absorbed = vec![Vec::with_capacity(starts.len()); nt];
    let mut perturbed_starts = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let out = r?;
        if out.perturbed {
            perturbed_starts.push(i);
        }
        for (ti, s) in out.samples.into_iter().enumerate() {
            positions[ti].push(s.position);
            log_jacobian[ti].push(s.log_jacobian);
            absorbed[ti].push(s.absorbed);
        }
    }
    if !perturbed_starts.is_empty() {
        log::info!(
            "field {}: {} initial points on a jump line moved by {:e} to the {} side",
            field.id,
            perturbed_starts.len(),
            START_PERTURBATION,
            config.start_side
        );
    }
    Ok(FlowEnsemble {
        field: field.id,
        config: config.clone(),
        grid_side,
        initial: starts,
        times,
        positions,
        log_jacobian,
        absorbed,
        perturbed_starts,
    })
}
