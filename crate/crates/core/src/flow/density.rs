use super::FlowEnsemble;
use crate::error::{Error, Result};
use crate::torus::TorusPoint;

/// Values of a density on a uniform `side × side` cell grid of 𝕋²
/// (index `i·side + j` for the cell `[i/side,(i+1)/side) × [j/side,(j+1)/side)`).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    pub time: f64,
    pub side: usize,
    pub values: Vec<f64>,
}

impl DensityField {
    /// `∫ μ dλ` by the cell-average rule.
    pub fn integral(&self) -> f64 {
        crate::quadrature::ordered_sum(self.values.len(), |i| self.values[i]).unwrap_or(f64::NAN)
            / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max |a − b|` over cells.
    pub fn sup_distance(&self, other: &DensityField) -> Result<f64> {
        if self.side != other.side {
            return Err(Error::InvalidInput("density grids differ".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

fn require_grid(ens: &FlowEnsemble) -> Result<usize> {
    ens.grid_side
        .ok_or_else(|| Error::InvalidInput("density needs an ensemble started on a uniform grid".into()))
}

/// `μ(t,x_i)`, the density of `X(−t,·)_#λ` at the grid points, which equals
/// the forward Jacobian `J(t,x_i)`.
pub fn density_from_flow(ens: &FlowEnsemble, t: f64) -> Result<DensityField> {
    let side = require_grid(ens)?;
    let ti = ens.time_index(t)?;
    Ok(DensityField {
        time: t,
        side,
        values: ens.log_jacobian[ti].iter().map(|l| l.exp()).collect(),
    })
}

/// Samples `(X(−t,x_i), μ(t, X(−t,x_i)))` with `μ(t, X(−t,x)) = 1/J(−t,x)`.
pub fn density_along_backward(ens: &FlowEnsemble, t: f64) -> Result<Vec<(TorusPoint<2>, f64)>> {
    let ti = ens.time_index(-t)?;
    Ok(ens.positions[ti]
        .iter()
        .zip(&ens.log_jacobian[ti])
        .map(|(p, l)| (*p, (-l).exp()))
        .collect())
}

/// Bin-count estimate of the density of `X(t,·)_#λ` on a `bins × bins` grid.
/// Empty bins report 0.
pub fn pushforward_histogram(ens: &FlowEnsemble, t: f64, bins: usize) -> Result<DensityField> {
    require_grid(ens)?;
    if bins == 0 {
        return Err(Error::InvalidInput("bins must be positive".into()));
    }
    let ti = ens.time_index(t)?;
    let mut counts = vec![0usize; bins * bins];
    for p in &ens.positions[ti] {
        let c = p.coords();
        let i = ((c[0] * bins as f64) as usize).min(bins - 1);
        let j = ((c[1] * bins as f64) as usize).min(bins - 1);
        counts[i * bins + j] += 1;
    }
    let scale = (bins * bins) as f64 / ens.len() as f64;
    Ok(DensityField {
        time: t,
        side: bins,
        values: counts.into_iter().map(|c| c as f64 * scale).collect(),
    })
}

/// Average of a grid density over the cells of a coarser `bins × bins` grid.
pub fn bin_average(density: &DensityField, bins: usize) -> Result<DensityField> {
    let m = density.side;
    if bins == 0 || !m.is_multiple_of(bins) {
        return Err(Error::InvalidInput(format!("{bins} bins do not divide a {m}-grid")));
    }
    let r = m / bins;
    let mut values = vec![0.0; bins * bins];
    for i in 0..m {
        for j in 0..m {
            values[(i / r) * bins + j / r] += density.values[i * m + j];
        }
    }
    let inv = 1.0 / (r * r) as f64;
    values.iter_mut().for_each(|v| *v *= inv);
    Ok(DensityField {
        time: density.time,
        side: bins,
        values,
    })
}
