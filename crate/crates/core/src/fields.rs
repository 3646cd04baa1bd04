//! Charge deposition and the per-node Poisson solve.
//!
//! Sign convention: `phi'' = 1 - rho` with `E = -phi'`, so `E' = rho - 1`.
//! The potential lives on the `N_cells + 1` cell edges (the staggered grid);
//! densities and the electric field live at cell centers.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpc::GpcBasis;
use crate::particles::ChaosEnsemble;

/// Boundary treatment of the spatial domain. Periodic particles pair with a
/// periodic Poisson problem; reflecting particles with `phi = 0` at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    Reflecting,
}

/// Boundary condition seen by the Poisson solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoissonBc {
    Periodic,
    DirichletZero,
}

impl Boundary {
    pub fn poisson_bc(self) -> PoissonBc {
        match self {
            Boundary::Periodic => PoissonBc::Periodic,
            Boundary::Reflecting => PoissonBc::DirichletZero,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    pub dx: f64,
    pub boundary: Boundary,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize, boundary: Boundary) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::Config(format!("invalid domain [{x_min}, {x_max}]")));
        }
        if n_cells == 0 {
            return Err(Error::Config("grid needs at least one cell".into()));
        }
        Ok(Self {
            x_min,
            x_max,
            n_cells,
            dx: (x_max - x_min) / n_cells as f64,
            boundary,
        })
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn poisson_bc(&self) -> PoissonBc {
        self.boundary.poisson_bc()
    }

    /// Cell edges, the `N_cells + 1` staggered points.
    pub fn stagger(&self) -> Vec<f64> {
        (0..=self.n_cells)
            .map(|j| self.x_min + j as f64 * self.dx)
            .collect()
    }

    pub fn center(&self, cell: usize) -> f64 {
        self.x_min + (cell as f64 + 0.5) * self.dx
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Index of the cell holding an in-domain position; `x_max` belongs to the last cell.
    #[inline]
    pub fn cell_of(&self, x: f64) -> usize {
        let c = ((x - self.x_min) / self.dx) as usize;
        c.min(self.n_cells - 1)
    }

    /// Maps a node-evaluated position into the domain with the node-wise
    /// boundary map (wrap or fold). Returns `None` for non-finite input.
    ///
    /// A re-projected chaos expansion only reproduces its node values when
    /// `K = M + 1`, so node positions can sit marginally outside the domain
    /// after a boundary projection; lookups canonicalize them here.
    #[inline]
    pub fn canonical(&self, x: f64) -> Option<f64> {
        if !x.is_finite() {
            return None;
        }
        if self.contains(x) {
            return Some(x);
        }
        let l = self.length();
        let y = match self.boundary {
            Boundary::Periodic => self.x_min + (x - self.x_min).rem_euclid(l),
            Boundary::Reflecting => {
                let r = (x - self.x_min).rem_euclid(2.0 * l);
                if r <= l {
                    self.x_min + r
                } else {
                    self.x_min + 2.0 * l - r
                }
            }
        };
        Some(y.clamp(self.x_min, self.x_max))
    }

    /// Cell lookup for a node-evaluated position, canonicalizing it first.
    #[inline]
    pub fn locate(&self, x: f64) -> Result<usize> {
        match self.canonical(x) {
            Some(y) => Ok(self.cell_of(y)),
            None => Err(Error::Numerical(format!("non-finite particle position {x}"))),
        }
    }
}

/// Nearest-cell deposition of equal-weight particles: `rho = weight * count / dx`.
pub fn deposit_density(positions: &[f64], weight: f64, grid: &SpatialGrid) -> Result<Vec<f64>> {
    let mut counts = vec![0u64; grid.n_cells];
    for &x in positions {
        if !grid.contains(x) {
            return Err(Error::Logic(format!(
                "position {x} outside [{}, {}] at deposition; boundary conditions must run first",
                grid.x_min, grid.x_max
            )));
        }
        counts[grid.cell_of(x)] += 1;
    }
    Ok(density_from_counts(&counts, weight, grid))
}

pub fn density_from_counts(counts: &[u64], weight: f64, grid: &SpatialGrid) -> Vec<f64> {
    counts.iter().map(|&c| weight * c as f64 / grid.dx).collect()
}

/// Solves `phi'' = 1 - rho` on the staggered grid and returns the edge
/// potential together with the cell-centered field `E = -phi'`.
///
/// Periodic problems subtract the mean source first and fix the gauge with
/// `phi[0] = 0`; Dirichlet problems pin `phi = 0` at both ends.
pub fn solve_poisson(rho: &[f64], grid: &SpatialGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = grid.n_cells;
    if rho.len() != n {
        return Err(Error::Usage(format!(
            "density has {} cells, grid has {n}",
            rho.len()
        )));
    }
    if let Some(bad) = rho.iter().find(|r| !r.is_finite()) {
        return Err(Error::Numerical(format!("non-finite density {bad}")));
    }

    let source = poisson_source(rho, grid);
    let mut phi = vec![0.0; n + 1];
    if n >= 2 {
        // interior edges 1..n-1, both end values fixed at zero
        let m = n - 1;
        let dx2 = grid.dx * grid.dx;
        let mut rhs: Vec<f64> = (1..n).map(|j| dx2 * source[j]).collect();
        let sub = vec![1.0; m];
        let diag = vec![-2.0; m];
        let sup = vec![1.0; m];
        solve_tridiagonal(&sub, &diag, &sup, &mut rhs)?;
        phi[1..n].copy_from_slice(&rhs);
    }
    let e_field = (0..n).map(|l| -(phi[l + 1] - phi[l]) / grid.dx).collect();
    Ok((phi, e_field))
}

/// Right-hand side `1 - rho` averaged onto the cell edges (length `n + 1`;
/// the two end entries are unused by the solve). Periodic sources are
/// neutralized to zero mean.
pub fn poisson_source(rho: &[f64], grid: &SpatialGrid) -> Vec<f64> {
    let n = rho.len();
    let mut cell: Vec<f64> = rho.iter().map(|r| 1.0 - r).collect();
    if grid.poisson_bc() == PoissonBc::Periodic {
        let mean = cell.iter().sum::<f64>() / n as f64;
        cell.iter_mut().for_each(|s| *s -= mean);
    }
    let mut edge = vec![0.0; n + 1];
    for j in 1..n {
        edge[j] = 0.5 * (cell[j - 1] + cell[j]);
    }
    if grid.poisson_bc() == PoissonBc::Periodic {
        edge[0] = 0.5 * (cell[n - 1] + cell[0]);
        edge[n] = edge[0];
    }
    edge
}

/// Thomas algorithm; `rhs` is overwritten with the solution.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = rhs.len();
    if n == 0 {
        return Ok(());
    }
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::Numerical("zero pivot in tridiagonal solve".into()));
    }
    rhs[0] /= beta;
    for i in 1..n {
        c[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * c[i];
        if beta == 0.0 {
            return Err(Error::Numerical("zero pivot in tridiagonal solve".into()));
        }
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i + 1] * rhs[i + 1];
    }
    Ok(())
}

/// Per-node densities, potentials and fields, stored row-major by node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFieldSet {
    pub node_count: usize,
    pub n_cells: usize,
    pub rho: Vec<f64>,
    pub phi: Vec<f64>,
    pub e_field: Vec<f64>,
}

impl NodeFieldSet {
    pub fn rho_row(&self, k: usize) -> &[f64] {
        &self.rho[k * self.n_cells..(k + 1) * self.n_cells]
    }

    pub fn phi_row(&self, k: usize) -> &[f64] {
        &self.phi[k * (self.n_cells + 1)..(k + 1) * (self.n_cells + 1)]
    }

    pub fn e_row(&self, k: usize) -> &[f64] {
        &self.e_field[k * self.n_cells..(k + 1) * self.n_cells]
    }

    /// Builds the set from per-node densities, solving every row independently.
    pub fn from_densities(rows: Vec<Vec<f64>>, grid: &SpatialGrid) -> Result<Self> {
        let node_count = rows.len();
        let n = grid.n_cells;
        let solved: Vec<(Vec<f64>, Vec<f64>)> = rows
            .par_iter()
            .map(|rho| solve_poisson(rho, grid))
            .collect::<Result<_>>()?;
        let mut out = Self {
            node_count,
            n_cells: n,
            rho: Vec::with_capacity(node_count * n),
            phi: Vec::with_capacity(node_count * (n + 1)),
            e_field: Vec::with_capacity(node_count * n),
        };
        for (rho, (phi, e)) in rows.into_iter().zip(solved) {
            out.rho.extend(rho);
            out.phi.extend(phi);
            out.e_field.extend(e);
        }
        Ok(out)
    }

    /// Field dump: one row per (node, cell) with columns
    /// `node,cell,x_center,rho,E`.
    pub fn write_csv<W: Write>(&self, grid: &SpatialGrid, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node", "cell", "x_center", "rho", "E"])?;
        for k in 0..self.node_count {
            for l in 0..self.n_cells {
                w.write_record([
                    k.to_string(),
                    l.to_string(),
                    grid.center(l).to_string(),
                    self.rho_row(k)[l].to_string(),
                    self.e_row(k)[l].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-node cell counts from a particle-major cell table (`cells[i * K + k]`).
pub fn node_counts(cells: &[u32], node_count: usize, grid: &SpatialGrid) -> Vec<Vec<u64>> {
    (0..node_count)
        .into_par_iter()
        .map(|k| {
            let mut counts = vec![0u64; grid.n_cells];
            for c in cells.iter().skip(k).step_by(node_count) {
                counts[*c as usize] += 1;
            }
            counts
        })
        .collect()
}

/// Deposits and solves at every quadrature node of the ensemble.
pub fn fields_at_all_nodes(
    ens: &ChaosEnsemble,
    basis: &GpcBasis,
    grid: &SpatialGrid,
) -> Result<NodeFieldSet> {
    let cells = ens.node_cells(basis, grid)?;
    let counts = node_counts(&cells.cells, basis.node_count(), grid);
    let rows = counts
        .iter()
        .map(|c| density_from_counts(c, ens.particle_weight, grid))
        .collect();
    NodeFieldSet::from_densities(rows, grid)
}
