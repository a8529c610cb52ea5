use nalgebra::Vector2;
use rayon::prelude::*;

use super::lattice::{Lattice, Nodes, Snapshot};
use super::view::{FlowSpec, FlowView};
use super::FunctionalConfig;
use crate::error::Result;
use crate::fields::PiecewiseField;
use crate::kernels::AnisotropicKernel;
use crate::quadrature::{gauss_legendre, try_ordered_sums, CompensatedSum};
use crate::torus::{torus_distance, TorusPoint};

/// `D`, `I1` and `I2` at one time on one lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Terms {
    pub d: f64,
    pub i1: f64,
    pub i2: f64,
}

impl Terms {
    pub fn sum(&self) -> f64 {
        self.i1 + self.i2
    }
}

pub(crate) fn snapshots(lat: &Lattice, x: &dyn FlowView, y: &dyn FlowView, t: f64) -> Result<(Snapshot, Snapshot)> {
    Ok((lat.snapshot(x, t, Nodes::X)?, lat.snapshot(y, t, Nodes::All)?))
}

fn field_on_lattice(field: &PiecewiseField, lat: &Lattice) -> Vec<Vector2<f64>> {
    (0..lat.len())
        .into_par_iter()
        .map(|i| field.eval_lenient(lat.node(i).coords()))
        .collect()
}

/// `D(t)` from snapshots of `X` (any nodes) and `Y` (all nodes).
pub(crate) fn d_from(kernel: &AnisotropicKernel<2>, lat: &Lattice, xs: &Snapshot, ys: &Snapshot) -> Result<f64> {
    ys.require_all()?;
    let w = lat.x_weight() * lat.z_weight();
    let [d] = try_ordered_sums(lat.x_len(), |k| {
        let xi = lat.x_index(k);
        let kx = kernel.at(lat.node(xi).coords());
        let s = xs.x_slot(lat, k);
        let (px, m1) = (&xs.position[s], xs.mu[s]);
        let mut acc = CompensatedSum::default();
        for off in lat.offsets() {
            let r = kx.rho(&off.z);
            if r == 0.0 {
                continue;
            }
            let yi = lat.shifted(xi, off);
            acc.add(torus_distance(px, &ys.position[yi]) * m1 * ys.mu[yi] * r);
        }
        Ok([acc.value() * w])
    })?;
    Ok(d)
}

/// `D`, `I1`, `I2` in one pass.
pub(crate) fn terms_from(
    field: &PiecewiseField,
    kernel: &AnisotropicKernel<2>,
    lat: &Lattice,
    xs: &Snapshot,
    ys: &Snapshot,
) -> Result<Terms> {
    ys.require_all()?;
    let b = field_on_lattice(field, lat);
    let w = lat.x_weight() * lat.z_weight();
    let inv_eps = 1.0 / lat.epsilon;
    let [d, i1, i2] = try_ordered_sums(lat.x_len(), |k| {
        let xi = lat.x_index(k);
        let kx = kernel.at(lat.node(xi).coords());
        let s = xs.x_slot(lat, k);
        let (px, m1) = (&xs.position[s], xs.mu[s]);
        let bx = b[xi];
        let mut acc = [CompensatedSum::default(); 3];
        for off in lat.offsets() {
            if kx.stretched_norm(&off.z) >= 1.0 {
                continue;
            }
            let yi = lat.shifted(xi, off);
            let g = torus_distance(px, &ys.position[yi]) * m1 * ys.mu[yi];
            acc[0].add(g * kx.rho(&off.z));
            acc[1].add(-g * kx.d1_rho(&off.z).dot(&bx));
            acc[2].add(-g * kx.d2_rho(&off.z).dot(&((b[yi] - bx) * inv_eps)));
        }
        Ok(acc.map(|a| a.value() * w))
    })?;
    Ok(Terms { d, i1, i2 })
}

fn at_time(
    field: &PiecewiseField,
    x: &dyn FlowView,
    y: &dyn FlowView,
    kernel: &AnisotropicKernel<2>,
    cfg: &FunctionalConfig,
) -> Result<Terms> {
    let lat = Lattice::from_config(cfg)?;
    let (xs, ys) = snapshots(&lat, x, y, cfg.t)?;
    terms_from(field, kernel, &lat, &xs, &ys)
}

/// `D(t)` at `cfg.t`.
pub fn discrepancy_d(
    x: &dyn FlowView,
    y: &dyn FlowView,
    kernel: &AnisotropicKernel<2>,
    cfg: &FunctionalConfig,
) -> Result<f64> {
    let lat = Lattice::from_config(cfg)?;
    let (xs, ys) = snapshots(&lat, x, y, cfg.t)?;
    d_from(kernel, &lat, &xs, &ys)
}

/// Central difference `(D(t+h) − D(t−h))/(2h)` with `h = cfg.dt_fd`.
pub fn i_eps_fd(
    x: &dyn FlowView,
    y: &dyn FlowView,
    kernel: &AnisotropicKernel<2>,
    cfg: &FunctionalConfig,
) -> Result<f64> {
    let lat = Lattice::from_config(cfg)?;
    let h = cfg.dt_fd;
    let d = |t: f64| {
        let (xs, ys) = snapshots(&lat, x, y, t)?;
        d_from(kernel, &lat, &xs, &ys)
    };
    Ok((d(cfg.t + h)? - d(cfg.t - h)?) / (2.0 * h))
}

pub fn i1(
    field: &PiecewiseField,
    x: &dyn FlowView,
    y: &dyn FlowView,
    kernel: &AnisotropicKernel<2>,
    cfg: &FunctionalConfig,
) -> Result<f64> {
    Ok(at_time(field, x, y, kernel, cfg)?.i1)
}

/// `I2` with the difference quotient evaluated as is, including the pairs
/// that straddle a jump line.
pub fn i2(
    field: &PiecewiseField,
    x: &dyn FlowView,
    y: &dyn FlowView,
    kernel: &AnisotropicKernel<2>,
    cfg: &FunctionalConfig,
) -> Result<f64> {
    Ok(at_time(field, x, y, kernel, cfg)?.i2)
}

/// `I2_a = −∫∫∫₀¹ |X_t(x) − Y_t(y)| ∂₂ρ(x,z)·∂^a b(x+θεz)·z μ1 μ2 dθ dx dz`,
/// the part of `I2` carried by the absolutely continuous derivative.
pub fn i2_a(
    field: &PiecewiseField,
    x: &dyn FlowView,
    y: &dyn FlowView,
    kernel: &AnisotropicKernel<2>,
    cfg: &FunctionalConfig,
) -> Result<f64> {
    let lat = Lattice::from_config(cfg)?;
    let (xs, ys) = snapshots(&lat, x, y, cfg.t)?;
    let theta = gauss_legendre(cfg.theta_nodes, 0.0, 1.0);
    let w = lat.x_weight() * lat.z_weight();
    let [v] = try_ordered_sums(lat.x_len(), |k| {
        let xi = lat.x_index(k);
        let xc = *lat.node(xi).coords();
        let kx = kernel.at(&xc);
        let s = xs.x_slot(&lat, k);
        let (px, m1) = (&xs.position[s], xs.mu[s]);
        let mut acc = CompensatedSum::default();
        for off in lat.offsets() {
            let g2 = kx.d2_rho(&off.z);
            if g2 == Vector2::zeros() {
                continue;
            }
            let mut dbz = Vector2::zeros();
            for &(th, wt) in &theta {
                dbz += field.grad_lenient(&(xc + off.z * (th * lat.epsilon))) * off.z * wt;
            }
            let yi = lat.shifted(xi, off);
            acc.add(-torus_distance(px, &ys.position[yi]) * m1 * ys.mu[yi] * g2.dot(&dbz));
        }
        Ok([acc.value() * w])
    })?;
    Ok(v)
}

/// `∫ |X_t(x) − Y_t(x)| div^a b(x) μ1 μ2 dx` on the `x` nodes, the `ε → 0`
/// limit of `I2_a`.
pub fn i2_a_limit(field: &PiecewiseField, x: &dyn FlowView, y: &dyn FlowView, cfg: &FunctionalConfig) -> Result<f64> {
    let lat = Lattice::from_config(cfg)?;
    let xs = lat.snapshot(x, cfg.t, Nodes::X)?;
    let ys = lat.snapshot(y, cfg.t, Nodes::X)?;
    limit_from(field, &lat, &xs, &ys)
}

pub(crate) fn limit_from(field: &PiecewiseField, lat: &Lattice, xs: &Snapshot, ys: &Snapshot) -> Result<f64> {
    let w = lat.x_weight();
    let [v] = try_ordered_sums(lat.x_len(), |k| {
        let (a, b) = (xs.x_slot(lat, k), ys.x_slot(lat, k));
        let div = field.div_lenient(lat.node(lat.x_index(k)).coords());
        Ok([torus_distance(&xs.position[a], &ys.position[b]) * div * xs.mu[a] * ys.mu[b] * w])
    })?;
    Ok(v)
}

/// `∫ ∂₂ρ(x,z)·∂^a b(x)·z dz + div^a b(x)`, which vanishes by integration by
/// parts because `∫ρ(x,z)dz = 1`. Fails on the jump set.
pub fn r_a_check(field: &PiecewiseField, kernel: &AnisotropicKernel<2>, x: &TorusPoint<2>, n_z: usize) -> Result<f64> {
    let a = field.grad_a(x)?;
    let kx = kernel.at(x.coords());
    let r = kernel.integrate_z(x.coords(), n_z, |z| kx.d2_rho(z).dot(&(a * z)))?;
    Ok(r + a.trace())
}

/// Two-sided check of `dD/dt = I1 + I2` on one configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecompositionCheck {
    /// Central difference of `D` with step `dt_fd`.
    pub fd: f64,
    /// The same with step `2·dt_fd`.
    pub fd_wide: f64,
    /// Central difference on the lattice with halved grids.
    pub fd_coarse: f64,
    pub terms: Terms,
    pub terms_coarse: Terms,
}

impl DecompositionCheck {
    pub fn residual(&self) -> f64 {
        (self.fd - self.terms.sum()).abs()
    }

    /// Quadrature and difference error estimate: the changes of both sides
    /// under halving the grids plus the change of the difference quotient
    /// under doubling its step.
    pub fn error_bound(&self) -> f64 {
        (self.fd - self.fd_coarse).abs()
            + (self.fd - self.fd_wide).abs()
            + (self.terms.sum() - self.terms_coarse.sum()).abs()
    }

    pub fn holds(&self) -> bool {
        self.residual() <= self.error_bound()
    }
}

pub fn decomposition_check(
    field: &PiecewiseField,
    x: &FlowSpec,
    y: &FlowSpec,
    kernel: &AnisotropicKernel<2>,
    cfg: &FunctionalConfig,
) -> Result<DecompositionCheck> {
    let fine = Lattice::from_config(cfg)?;
    let coarse_cfg = cfg.clone().with_grids((cfg.x_grid / 2).max(1), (cfg.z_grid / 2).max(2));
    let coarse = Lattice::from_config(&coarse_cfg)?;
    let times = cfg.fd_times();
    let (t, h) = (cfg.t, cfg.dt_fd);

    let run = |lat: &Lattice, wide: bool| -> Result<(f64, f64, Terms)> {
        let needed: Vec<f64> = if wide { times.to_vec() } else { vec![t - h, t, t + h] };
        let xv = x.view(lat, Nodes::X, &needed)?;
        let yv = y.view(lat, Nodes::All, &needed)?;
        let d = |s: f64| -> Result<f64> {
            let (xs, ys) = snapshots(lat, xv.as_ref(), yv.as_ref(), s)?;
            d_from(kernel, lat, &xs, &ys)
        };
        let fd = (d(t + h)? - d(t - h)?) / (2.0 * h);
        let fd_wide = if wide {
            (d(t + 2.0 * h)? - d(t - 2.0 * h)?) / (4.0 * h)
        } else {
            f64::NAN
        };
        let (xs, ys) = snapshots(lat, xv.as_ref(), yv.as_ref(), t)?;
        Ok((fd, fd_wide, terms_from(field, kernel, lat, &xs, &ys)?))
    };
    let (fd, fd_wide, terms) = run(&fine, true)?;
    let (fd_coarse, _, terms_coarse) = run(&coarse, false)?;
    Ok(DecompositionCheck {
        fd,
        fd_wide,
        fd_coarse,
        terms,
        terms_coarse,
    })
}
