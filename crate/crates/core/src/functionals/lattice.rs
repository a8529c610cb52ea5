use nalgebra::Vector2;
use rayon::prelude::*;

use super::view::FlowView;
use super::FunctionalConfig;
use crate::error::{Error, Result};
use crate::flow::grid_point;
use crate::torus::TorusPoint;

/// A `z` node `(a, b)·Δz` of the lattice rule, stored with its shift in
/// lattice cells.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Offset {
    pub di: isize,
    pub dj: isize,
    pub z: Vector2<f64>,
}

/// Which lattice nodes a [`Snapshot`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Nodes {
    /// The `x_side²` outer nodes.
    X,
    /// Every node of the `side × side` lattice.
    All,
}

/// Cell-centred `side × side` lattice of 𝕋² carrying both rules of the
/// `(x, z)` integrals.
///
/// `x` nodes are every `stride`-th lattice node (weight `1/x_side²`); `z`
/// nodes are the multiples of `Δz = 1/(ε·side)` inside the unit ball (weight
/// `Δz²`), so that `x + εz` is always a lattice node. `side` is even, which
/// keeps every node off the jump lines of the catalog.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub side: usize,
    pub stride: usize,
    pub x_side: usize,
    pub epsilon: f64,
    pub dz: f64,
    offsets: Vec<Offset>,
}

impl Lattice {
    pub fn new(epsilon: f64, x_side: usize, z_side: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) || x_side == 0 || z_side < 2 {
            return Err(Error::Config(format!(
                "lattice needs 0 < epsilon < 0.5, x_side >= 1, z_side >= 2 (got {epsilon}, {x_side}, {z_side})"
            )));
        }
        let mut stride = (z_side as f64 / (2.0 * epsilon * x_side as f64)).ceil().max(1.0) as usize;
        if (x_side * stride) % 2 == 1 {
            stride += 1;
        }
        let side = x_side * stride;
        let dz = 1.0 / (epsilon * side as f64);
        let reach = (1.0 / dz).ceil() as isize;
        let mut offsets = Vec::new();
        for di in -reach..=reach {
            for dj in -reach..=reach {
                let z = Vector2::new(di as f64 * dz, dj as f64 * dz);
                if z.norm_squared() < 1.0 {
                    offsets.push(Offset { di, dj, z });
                }
            }
        }
        Ok(Lattice {
            side,
            stride,
            x_side,
            epsilon,
            dz,
            offsets,
        })
    }

    pub fn from_config(cfg: &FunctionalConfig) -> Result<Self> {
        cfg.validate()?;
        Self::new(cfg.epsilon, cfg.x_grid, cfg.z_grid)
    }

    pub fn len(&self) -> usize {
        self.side * self.side
    }

    pub fn is_empty(&self) -> bool {
        self.side == 0
    }

    pub fn x_len(&self) -> usize {
        self.x_side * self.x_side
    }

    pub fn x_weight(&self) -> f64 {
        1.0 / self.x_len() as f64
    }

    pub fn z_weight(&self) -> f64 {
        self.dz * self.dz
    }

    pub fn offsets(&self) -> &[Offset] {
        &self.offsets
    }

    pub fn node(&self, index: usize) -> TorusPoint<2> {
        grid_point(self.side, index)
    }

    /// Lattice index of the `k`-th `x` node.
    pub fn x_index(&self, k: usize) -> usize {
        let (i, j) = (k / self.x_side, k % self.x_side);
        i * self.stride * self.side + j * self.stride
    }

    /// Lattice index of `node(index) + ε·offset.z`.
    pub fn shifted(&self, index: usize, offset: &Offset) -> usize {
        let m = self.side as isize;
        let i = (index / self.side) as isize;
        let j = (index % self.side) as isize;
        let i2 = (i + offset.di).rem_euclid(m) as usize;
        let j2 = (j + offset.dj).rem_euclid(m) as usize;
        i2 * self.side + j2
    }

    pub fn points(&self, nodes: Nodes) -> Vec<TorusPoint<2>> {
        match nodes {
            Nodes::X => (0..self.x_len()).map(|k| self.node(self.x_index(k))).collect(),
            Nodes::All => (0..self.len()).map(|i| self.node(i)).collect(),
        }
    }

    /// `X_t` and `μ(t,·) = exp(log J(t,·))` at the chosen nodes.
    pub fn snapshot(&self, view: &dyn FlowView, t: f64, nodes: Nodes) -> Result<Snapshot> {
        let points = self.points(nodes);
        let samples: Vec<_> = points.par_iter().map(|x| view.sample(t, x)).collect::<Result<_>>()?;
        Ok(Snapshot {
            time: t,
            nodes,
            position: samples.iter().map(|s| s.position).collect(),
            mu: samples.iter().map(|s| s.log_jacobian.exp()).collect(),
        })
    }
}

/// A flow and its density sampled on lattice nodes at one time.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub time: f64,
    pub nodes: Nodes,
    pub position: Vec<TorusPoint<2>>,
    pub mu: Vec<f64>,
}

impl Snapshot {
    /// Storage slot of the `k`-th `x` node.
    pub fn x_slot(&self, lattice: &Lattice, k: usize) -> usize {
        match self.nodes {
            Nodes::X => k,
            Nodes::All => lattice.x_index(k),
        }
    }

    pub fn max_mu(&self) -> f64 {
        self.mu.iter().copied().fold(0.0, f64::max)
    }

    pub fn require_all(&self) -> Result<()> {
        match self.nodes {
            Nodes::All => Ok(()),
            Nodes::X => Err(Error::InvalidInput(
                "the shifted flow must be sampled on every lattice node".into(),
            )),
        }
    }
}
