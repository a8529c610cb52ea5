use std::fmt;
use std::io::Write;

use super::decomposition::{d_from, limit_from, snapshots, terms_from};
use super::lattice::{Lattice, Nodes};
use super::singular::singular_integral;
use super::view::{FlowSpec, FlowView};
use super::FunctionalConfig;
use crate::error::Result;
use crate::fields::{PiecewiseField, JUMP_TOL};
use crate::kernels::AnisotropicKernel;
use crate::quadrature::try_ordered_sums;
use crate::torus::torus_distance;

/// Surface nodes per jump component and `z` nodes per axis for `Ī_s`.
const SURFACE_NODES: usize = 16;
const SINGULAR_Z_NODES: usize = 192;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscrepancyReport {
    pub field: crate::fields::FieldId,
    pub epsilon: f64,
    pub gamma: f64,
    pub t: f64,
    pub x_grid: usize,
    pub z_grid: usize,
    pub lattice_side: usize,
    pub d: f64,
    pub i_eps_fd: f64,
    pub i1: f64,
    pub i2: f64,
    pub i2_a_limit: f64,
    pub singular_bound: f64,
    /// `|I_eps_fd − ∫|X−Y| div^a b μ1μ2|`.
    pub eqfin_residual: f64,
}

impl DiscrepancyReport {
    pub const CSV_HEADER: [&'static str; 14] = [
        "field",
        "epsilon",
        "gamma",
        "t",
        "x_grid",
        "z_grid",
        "lattice_side",
        "D",
        "I_eps_fd",
        "I1",
        "I2",
        "I2_a_limit",
        "singular_bound",
        "eqfin_residual",
    ];

    pub fn record(&self) -> Vec<String> {
        let f = |v: f64| format!("{v:.16e}");
        vec![
            self.field.to_string(),
            f(self.epsilon),
            f(self.gamma),
            f(self.t),
            self.x_grid.to_string(),
            self.z_grid.to_string(),
            self.lattice_side.to_string(),
            f(self.d),
            f(self.i_eps_fd),
            f(self.i1),
            f(self.i2),
            f(self.i2_a_limit),
            f(self.singular_bound),
            f(self.eqfin_residual),
        ]
    }

    pub fn write_csv<W: Write>(reports: &[DiscrepancyReport], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for r in reports {
            w.write_record(r.record())?;
        }
        w.flush()?;
        Ok(())
    }
}

/// All report quantities at `cfg.t`.
pub fn discrepancy_report(
    field: &PiecewiseField,
    x: &FlowSpec,
    y: &FlowSpec,
    kernel: &AnisotropicKernel<2>,
    cfg: &FunctionalConfig,
) -> Result<DiscrepancyReport> {
    let lat = Lattice::from_config(cfg)?;
    let (t, h) = (cfg.t, cfg.dt_fd);
    let times = [t - h, t, t + h];
    let xv = x.view(&lat, Nodes::X, &times)?;
    let yv = y.view(&lat, Nodes::All, &times)?;
    let mut c_t: f64 = 0.0;
    let mut d_at = |s: f64| -> Result<f64> {
        let (xs, ys) = snapshots(&lat, xv.as_ref(), yv.as_ref(), s)?;
        c_t = c_t.max(xs.max_mu()).max(ys.max_mu());
        d_from(kernel, &lat, &xs, &ys)
    };
    let i_eps_fd = (d_at(t + h)? - d_at(t - h)?) / (2.0 * h);
    let (xs, ys) = snapshots(&lat, xv.as_ref(), yv.as_ref(), t)?;
    c_t = c_t.max(xs.max_mu()).max(ys.max_mu());
    let terms = terms_from(field, kernel, &lat, &xs, &ys)?;
    let i2_a_limit = limit_from(field, &lat, &xs, &ys)?;
    let singular_bound = 2.0 * c_t * c_t * singular_integral(field, kernel, SURFACE_NODES, SINGULAR_Z_NODES)?;
    Ok(DiscrepancyReport {
        field: field.id,
        epsilon: cfg.epsilon,
        gamma: kernel.gamma,
        t,
        x_grid: cfg.x_grid,
        z_grid: cfg.z_grid,
        lattice_side: lat.side,
        d: terms.d,
        i_eps_fd,
        i1: terms.i1,
        i2: terms.i2,
        i2_a_limit,
        singular_bound,
        eqfin_residual: (i_eps_fd - i2_a_limit).abs(),
    })
}

/// `Q(t) = ∫ |X_t(x) − Y_t(x)| μ1(t,x) μ2(t,x) dx` on the `x` nodes of `lattice`.
pub fn discrepancy_integral(lattice: &Lattice, x: &dyn FlowView, y: &dyn FlowView, t: f64) -> Result<f64> {
    let xs = lattice.snapshot(x, t, Nodes::X)?;
    let ys = lattice.snapshot(y, t, Nodes::X)?;
    let w = lattice.x_weight();
    let [q] = try_ordered_sums(lattice.x_len(), |k| {
        Ok([torus_distance(&xs.position[k], &ys.position[k]) * xs.mu[k] * ys.mu[k] * w])
    })?;
    Ok(q)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Zero initial discrepancy stays below tolerance.
    Unique,
    /// Zero initial discrepancy grows beyond tolerance.
    NotUnique,
    /// The flows start from different data; uniqueness says nothing.
    DistinctInitialData,
    /// The field has a singular divergence; no verdict is given.
    HypothesesViolated,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Unique => "UNIQUE",
            Verdict::NotUnique => "NOT-UNIQUE",
            Verdict::DistinctInitialData => "DISTINCT-INITIAL-DATA",
            Verdict::HypothesesViolated => "HYPOTHESES-VIOLATED",
        })
    }
}

/// `Q(t) ≤ e^{‖div b‖∞ t}(Q(0) + ∫₀ᵗ r)` with `r = |dQ/dt − ∫|X−Y| div^a b μ1μ2|`.
#[derive(Clone, Debug, PartialEq)]
pub struct GronwallCheck {
    pub residual: Vec<f64>,
    pub bound: Vec<f64>,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniquenessReport {
    pub times: Vec<f64>,
    pub q: Vec<f64>,
    pub final_q: f64,
    pub discrepancy: Option<DiscrepancyReport>,
    pub gronwall: Option<GronwallCheck>,
    pub verdict: Verdict,
}

/// Discrepancy between two flows of `field` on `[0, horizon]` sampled at
/// `steps + 1` equally spaced times, with the Gronwall check and a verdict.
/// The kernel report is taken at `cfg.t`.
#[allow(clippy::too_many_arguments)]
pub fn uniqueness_report(
    field: &PiecewiseField,
    x: &FlowSpec,
    y: &FlowSpec,
    kernel: &AnisotropicKernel<2>,
    cfg: &FunctionalConfig,
    horizon: f64,
    steps: usize,
    tol: f64,
) -> Result<UniquenessReport> {
    let lat = Lattice::from_config(cfg)?;
    let steps = steps.max(1);
    let times: Vec<f64> = (0..=steps).map(|k| horizon * k as f64 / steps as f64).collect();
    let violated = field.has_singular_divergence(JUMP_TOL);
    let h = cfg.dt_fd;
    let mut needed = times.clone();
    if !violated {
        needed.extend(times.iter().flat_map(|&t| [t - h, t + h]));
    }
    let xv = x.view(&lat, Nodes::X, &needed)?;
    let yv = y.view(&lat, Nodes::X, &needed)?;
    let q: Vec<f64> = times
        .iter()
        .map(|&t| discrepancy_integral(&lat, xv.as_ref(), yv.as_ref(), t))
        .collect::<Result<_>>()?;
    let final_q = *q.last().expect("nonempty");

    if violated {
        return Ok(UniquenessReport {
            times,
            q,
            final_q,
            discrepancy: None,
            gronwall: None,
            verdict: Verdict::HypothesesViolated,
        });
    }

    let mut residual = Vec::with_capacity(times.len());
    for &t in &times {
        let dq = (discrepancy_integral(&lat, xv.as_ref(), yv.as_ref(), t + h)?
            - discrepancy_integral(&lat, xv.as_ref(), yv.as_ref(), t - h)?)
            / (2.0 * h);
        let xs = lat.snapshot(xv.as_ref(), t, Nodes::X)?;
        let ys = lat.snapshot(yv.as_ref(), t, Nodes::X)?;
        residual.push((dq - limit_from(field, &lat, &xs, &ys)?).abs());
    }
    let growth = field.div_sup();
    let mut accumulated = 0.0;
    let mut bound = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        if k > 0 {
            accumulated += 0.5 * (times[k] - times[k - 1]) * (residual[k] + residual[k - 1]);
        }
        bound.push((growth * times[k]).exp() * (q[0] + accumulated));
    }
    let holds = q.iter().zip(&bound).all(|(q, b)| *q <= b + tol);

    let discrepancy = discrepancy_report(field, x, y, kernel, cfg)?;
    let verdict = if q[0] > tol {
        Verdict::DistinctInitialData
    } else if q.iter().all(|&v| v <= tol) {
        Verdict::Unique
    } else {
        Verdict::NotUnique
    };
    Ok(UniquenessReport {
        times,
        q,
        final_q,
        discrepancy: Some(discrepancy),
        gronwall: Some(GronwallCheck { residual, bound, holds }),
        verdict,
    })
}
