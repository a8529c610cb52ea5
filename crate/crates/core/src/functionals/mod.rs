//! The kernel-weighted discrepancy between two flows and the pieces of its
//! time derivative.
//!
//! For flows `X`, `Y` with densities `μ1 = J_X`, `μ2 = J_Y` and `y = x + εz`,
//!
//! ```text
//! D(t)  = ∫∫ |X_t(x) − Y_t(y)| ρ(x,z) μ1(t,x) μ2(t,y) dx dz
//! I1(t) = −∫∫ |X_t(x) − Y_t(y)| ∂₁ρ(x,z)·b(x) μ1 μ2 dx dz
//! I2(t) = −∫∫ |X_t(x) − Y_t(y)| ∂₂ρ(x,z)·(b(y) − b(x))/ε μ1 μ2 dx dz
//! ```
//!
//! and `dD/dt = I1 + I2`. All `(x, z)` integrals run on a [`Lattice`] whose
//! shifted nodes `x + εz` are again lattice nodes, so both flows are only ever
//! sampled on one fixed point set.

mod decomposition;
mod lattice;
mod report;
mod singular;
mod trace;
mod view;

use crate::error::{Error, Result};

pub use decomposition::{
    decomposition_check, discrepancy_d, i1, i2, i2_a, i2_a_limit, i_eps_fd, r_a_check, DecompositionCheck, Terms,
};
pub use lattice::{Lattice, Nodes, Offset, Snapshot};
pub use report::{
    discrepancy_integral, discrepancy_report, uniqueness_report, DiscrepancyReport, GronwallCheck, UniquenessReport,
    Verdict,
};
pub use singular::{
    coarse_envelope, explicit_bound, explicit_bound_constant, gamma_eta_diagonal, gamma_eta_tradeoff,
    misaligned_direction, scalar_product_bounds, singular_bound, singular_integral, ScalarBoundSummary, TradeoffTable,
};
pub use trace::{trace_family_infimum, trace_integral, trace_integral_brute_force, TraceResult};
pub use view::{ExactFlow, FlowSample, FlowSpec, FlowView, SampledFlow, Translated};

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalConfig {
    pub epsilon: f64,
    /// Points per axis of the outer `x` rule.
    pub x_grid: usize,
    /// Minimum number of `z` nodes across the unit ball, per axis.
    pub z_grid: usize,
    /// Gauss–Legendre nodes for the segment average in `I2_a`.
    pub theta_nodes: usize,
    pub t: f64,
    pub dt_fd: f64,
}

impl Default for FunctionalConfig {
    fn default() -> Self {
        FunctionalConfig {
            epsilon: 0.05,
            x_grid: 64,
            z_grid: 64,
            theta_nodes: 8,
            t: 0.25,
            dt_fd: 1e-3,
        }
    }
}

impl FunctionalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        // the scaled support radius ε·1 must stay below half the period
        if self.epsilon >= 0.5 {
            return Err(Error::Config(format!(
                "epsilon = {} does not fit the kernel support in the torus (need < 0.5)",
                self.epsilon
            )));
        }
        if self.x_grid == 0 || self.z_grid < 2 || self.theta_nodes == 0 {
            return Err(Error::Config("x_grid, theta_nodes must be >= 1 and z_grid >= 2".into()));
        }
        if !(self.dt_fd.is_finite() && self.dt_fd > 0.0) {
            return Err(Error::Config(format!("dt_fd must be > 0, got {}", self.dt_fd)));
        }
        if !self.t.is_finite() {
            return Err(Error::Config("t must be finite".into()));
        }
        Ok(())
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_grids(mut self, x_grid: usize, z_grid: usize) -> Self {
        self.x_grid = x_grid;
        self.z_grid = z_grid;
        self
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    /// Times at which `D` is needed for the central differences with steps
    /// `dt_fd` and `2·dt_fd`.
    pub fn fd_times(&self) -> [f64; 5] {
        let (t, h) = (self.t, self.dt_fd);
        [t - 2.0 * h, t - h, t, t + h, t + 2.0 * h]
    }
}
