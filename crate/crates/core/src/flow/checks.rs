use nalgebra::Vector2;

use super::{integrate_flow, FlowEnsemble, FlowSolverConfig, InitialPoints, Side};
use crate::error::{Error, Result};
use crate::fields::PiecewiseField;
use crate::quadrature::CompensatedSum;
use crate::torus::torus_distance;

/// `max_i |X(t, X(s,x_i)) − X(s+t, x_i)|` on the torus.
pub fn check_group_property(
    field: &PiecewiseField,
    config: &FlowSolverConfig,
    ens: &FlowEnsemble,
    s: f64,
    t: f64,
) -> Result<f64> {
    let mid = ens.positions[ens.time_index(s)?].clone();
    let end = &ens.positions[ens.time_index(s + t)?];
    let again = integrate_flow(field, config, &InitialPoints::Points(mid), &[0.0, t])?;
    let composed = &again.positions[again.time_index(t)?];
    Ok(composed
        .iter()
        .zip(end)
        .map(|(a, b)| torus_distance(a, b))
        .fold(0.0, f64::max))
}

/// Distance between `X(t,x)` and `x + ∫₀ᵗ b(X(s,x)) ds`, the integral taken
/// by the trapezoid rule over the stored times in `[0, t]` (or `[t, 0]`).
pub fn check_ode_residual(field: &PiecewiseField, ens: &FlowEnsemble, point: usize, t: f64) -> Result<f64> {
    let end = ens.time_index(t)?;
    let zero = ens.time_index(0.0)?;
    let (lo, hi) = if end >= zero { (zero, end) } else { (end, zero) };
    let mut acc = [CompensatedSum::default(), CompensatedSum::default()];
    for w in lo..hi {
        let dt = ens.times[w + 1] - ens.times[w];
        let b0 = field.eval_lenient(ens.positions[w][point].coords());
        let b1 = field.eval_lenient(ens.positions[w + 1][point].coords());
        for c in 0..2 {
            acc[c].add(0.5 * dt * (b0[c] + b1[c]));
        }
    }
    let sign = if end >= zero { 1.0 } else { -1.0 };
    let integral = Vector2::new(acc[0].value(), acc[1].value()) * sign;
    let predicted = ens.initial[point].translate(&integral);
    Ok(torus_distance(&predicted, &ens.positions[end][point]))
}

/// `max_i |X(−t, X(t,x_i)) − x_i|`.
pub fn backward_forward_defect(
    field: &PiecewiseField,
    config: &FlowSolverConfig,
    ens: &FlowEnsemble,
    t: f64,
) -> Result<f64> {
    let mid = ens.positions[ens.time_index(t)?].clone();
    let back = integrate_flow(field, config, &InitialPoints::Points(mid), &[-t, 0.0])?;
    let returned = &back.positions[back.time_index(-t)?];
    Ok(returned
        .iter()
        .zip(&ens.initial)
        .map(|(a, b)| torus_distance(a, b))
        .fold(0.0, f64::max))
}

/// Two maps `x ↦ X(−t, X(t,x))` which differ only in the side chosen when a
/// backward trajectory has to leave a line it was absorbed into. Forward
/// absorption makes the backward problem ill-posed, so both are valid.
pub fn branch_loop_ensembles(
    field: &PiecewiseField,
    config: &FlowSolverConfig,
    m: usize,
    t: f64,
) -> Result<(FlowEnsemble, FlowEnsemble)> {
    if t <= 0.0 {
        return Err(Error::InvalidInput("branch construction needs t > 0".into()));
    }
    let fwd = integrate_flow(field, config, &InitialPoints::Grid(m), &[0.0, t])?;
    let mid = fwd.positions[fwd.time_index(t)?].clone();
    let branch = |side: Side| {
        let cfg = config.clone().with_side(side);
        let mut e = integrate_flow(field, &cfg, &InitialPoints::Points(mid.clone()), &[-t, 0.0])?;
        // report the loop map against the original grid
        e.initial = fwd.initial.clone();
        e.grid_side = Some(m);
        Ok::<_, Error>(e)
    };
    Ok((branch(Side::Minus)?, branch(Side::Plus)?))
}
