//! Projected drift–kick–drift transport, boundary projections and the
//! splitting driver that couples transport with the BGK step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{bgk_step_with, BgkDiagnostics, BgkSampling, MaxwellianPool, PoolMode};
use crate::error::{Error, Result};
use crate::fields::{density_from_counts, node_counts, Boundary, NodeFieldSet, SpatialGrid};
use crate::gpc::GpcBasis;
use crate::particles::{node_values, ChaosEnsemble, NodeCells};
use crate::rng::StreamFactory;

/// `x_h += v_h * dt / 2` for every coefficient.
pub fn half_drift(ens: &mut ChaosEnsemble, dt: f64) {
    let half = 0.5 * dt;
    ens.x_coeffs
        .par_iter_mut()
        .zip(ens.v_coeffs.par_iter())
        .for_each(|(x, v)| *x += v * half);
}

/// Deposits and solves at every node from a precomputed cell table.
pub fn fields_from_cells(ens: &ChaosEnsemble, grid: &SpatialGrid, cells: &NodeCells) -> Result<NodeFieldSet> {
    let counts = node_counts(&cells.cells, cells.node_count, grid);
    let rows = counts
        .iter()
        .map(|c| density_from_counts(c, ens.particle_weight, grid))
        .collect();
    NodeFieldSet::from_densities(rows, grid)
}

/// `v_h += dt * sum_k w_k E_k(cell(i, k)) psi_h(z_k)`.
pub fn kick(
    ens: &mut ChaosEnsemble,
    fields: &NodeFieldSet,
    basis: &GpcBasis,
    cells: &NodeCells,
    dt: f64,
) -> Result<()> {
    let kn = basis.node_count();
    if fields.node_count != kn || cells.node_count != kn {
        return Err(Error::Usage(format!(
            "kick needs {kn} node rows, got {} field rows and {} cell columns",
            fields.node_count, cells.node_count
        )));
    }
    let terms = ens.terms;
    ens.v_coeffs
        .par_chunks_mut(terms)
        .enumerate()
        .for_each(|(i, vc)| {
            let mut e = vec![0.0; kn];
            for (k, slot) in e.iter_mut().enumerate() {
                *slot = fields.e_row(k)[cells.cells[i * kn + k] as usize];
            }
            let mut proj = vec![0.0; terms];
            basis.project_into(&e, &mut proj);
            for (v, p) in vc.iter_mut().zip(&proj) {
                *v += dt * p;
            }
        });
    Ok(())
}

/// How reflecting walls map an outside node position back in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReflectRule {
    /// Mirror about the wall and flip the velocity.
    #[default]
    Fold,
    /// `x_wall -+ |x - x_wall| sgn(v)` with the velocity flipped; falls back
    /// to the fold when the result is still outside.
    SignRule,
}

/// How periodic walls map an outside particle back in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeriodicRule {
    /// Shift the whole particle by whole periods so that its mean position is
    /// inside; node positions stay continuous in `z` and are wrapped at lookup.
    #[default]
    Shift,
    /// Wrap every outside node value separately and re-project.
    NodeWrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BoundaryRules {
    pub periodic: PeriodicRule,
    pub reflect: ReflectRule,
}

impl BoundaryRules {
    /// Node-wise wrap and fold: the rules under which every operation is
    /// the node-wise deterministic one.
    pub const NODE_WISE: BoundaryRules = BoundaryRules {
        periodic: PeriodicRule::NodeWrap,
        reflect: ReflectRule::Fold,
    };
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryDiagnostics {
    /// Particles with at least one node outside the domain.
    pub particles_projected: u64,
    /// Node positions more than one domain length outside.
    pub far_excursions: u64,
    /// Node positions found outside the domain at field lookup.
    pub lookups_outside: u64,
}

impl BoundaryDiagnostics {
    pub fn merge(&mut self, o: &BoundaryDiagnostics) {
        self.particles_projected += o.particles_projected;
        self.far_excursions += o.far_excursions;
        self.lookups_outside += o.lookups_outside;
    }
}

fn is_far(x: f64, grid: &SpatialGrid) -> bool {
    let l = grid.length();
    x < grid.x_min - l || x > grid.x_max + l
}

/// Wraps outside node positions by whole periods and re-projects.
pub fn apply_periodic_bc(
    ens: &mut ChaosEnsemble,
    basis: &GpcBasis,
    grid: &SpatialGrid,
) -> Result<BoundaryDiagnostics> {
    let terms = ens.terms;
    let l = grid.length();
    ens.x_coeffs
        .par_chunks_mut(terms)
        .map(|xc| -> Result<BoundaryDiagnostics> {
            let mut buf = [0.0f64; 64];
            let xs = node_values(basis, xc, &mut buf);
            if xs.iter().all(|&x| grid.contains(x)) {
                return Ok(BoundaryDiagnostics::default());
            }
            let mut d = BoundaryDiagnostics {
                particles_projected: 1,
                ..Default::default()
            };
            let mut wrapped = xs.to_vec();
            for x in wrapped.iter_mut() {
                if !x.is_finite() {
                    return Err(Error::Numerical(format!("non-finite particle position {x}")));
                }
                if grid.contains(*x) {
                    continue;
                }
                if is_far(*x, grid) {
                    d.far_excursions += 1;
                }
                *x = grid.x_min + (*x - grid.x_min).rem_euclid(l);
            }
            basis.project_into(&wrapped, xc);
            Ok(d)
        })
        .try_reduce(BoundaryDiagnostics::default, |mut a, b| {
            a.merge(&b);
            Ok(a)
        })
}

/// Moves each particle with an outside node by whole periods so that its
/// mean position lies in the domain.
pub fn apply_periodic_shift(
    ens: &mut ChaosEnsemble,
    basis: &GpcBasis,
    grid: &SpatialGrid,
) -> Result<BoundaryDiagnostics> {
    let terms = ens.terms;
    let l = grid.length();
    ens.x_coeffs
        .par_chunks_mut(terms)
        .map(|xc| -> Result<BoundaryDiagnostics> {
            let mut buf = [0.0f64; 64];
            let xs = node_values(basis, xc, &mut buf);
            if xs.iter().all(|&x| grid.contains(x)) {
                return Ok(BoundaryDiagnostics::default());
            }
            if let Some(x) = xs.iter().find(|x| !x.is_finite()) {
                return Err(Error::Numerical(format!("non-finite particle position {x}")));
            }
            let far = xs.iter().filter(|&&x| is_far(x, grid)).count() as u64;
            let periods = ((xc[0] - grid.x_min) / l).floor();
            if periods == 0.0 {
                return Ok(BoundaryDiagnostics {
                    far_excursions: far,
                    ..Default::default()
                });
            }
            xc[0] -= periods * l;
            Ok(BoundaryDiagnostics {
                particles_projected: 1,
                far_excursions: far,
                ..Default::default()
            })
        })
        .try_reduce(BoundaryDiagnostics::default, |mut a, b| {
            a.merge(&b);
            Ok(a)
        })
}

/// Reflects one node value; returns the new position and whether the
/// velocity flips.
fn reflect_node(x: f64, v: f64, grid: &SpatialGrid, rule: ReflectRule) -> (f64, bool) {
    let (lo, hi) = (grid.x_min, grid.x_max);
    if rule == ReflectRule::SignRule && x >= lo - grid.length() && x <= hi + grid.length() {
        let s = if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        };
        let y = if x < lo {
            lo - (x - lo).abs() * s
        } else {
            hi - (x - hi).abs() * s
        };
        if grid.contains(y) {
            return (y, true);
        }
    }
    // fold with period 2L; an odd number of wall hits flips the velocity
    let l = grid.length();
    let r = (x - lo).rem_euclid(2.0 * l);
    if r <= l {
        let flips = ((x - lo) / l).floor() as i64;
        ((lo + r).clamp(lo, hi), flips.rem_euclid(2) == 1)
    } else {
        let flips = ((x - lo) / l).floor() as i64;
        ((lo + 2.0 * l - r).clamp(lo, hi), flips.rem_euclid(2) == 1)
    }
}

/// Folds outside node positions back into the domain, flips the matching
/// node velocities and re-projects both.
pub fn apply_reflecting_bc(
    ens: &mut ChaosEnsemble,
    basis: &GpcBasis,
    grid: &SpatialGrid,
    rule: ReflectRule,
) -> Result<BoundaryDiagnostics> {
    let terms = ens.terms;
    let kn = basis.node_count();
    ens.x_coeffs
        .par_chunks_mut(terms)
        .zip(ens.v_coeffs.par_chunks_mut(terms))
        .map(|(xc, vc)| -> Result<BoundaryDiagnostics> {
            let mut buf = [0.0f64; 64];
            let xs = node_values(basis, xc, &mut buf);
            if xs.iter().all(|&x| grid.contains(x)) {
                return Ok(BoundaryDiagnostics::default());
            }
            let mut d = BoundaryDiagnostics {
                particles_projected: 1,
                ..Default::default()
            };
            let mut xs = xs.to_vec();
            let mut vs = vec![0.0; kn];
            basis.eval_nodes_into(vc, &mut vs);
            for (x, v) in xs.iter_mut().zip(vs.iter_mut()) {
                if !x.is_finite() {
                    return Err(Error::Numerical(format!("non-finite particle position {x}")));
                }
                if grid.contains(*x) {
                    continue;
                }
                if is_far(*x, grid) {
                    d.far_excursions += 1;
                }
                let (y, flip) = reflect_node(*x, *v, grid, rule);
                *x = y;
                if flip {
                    *v = -*v;
                }
            }
            basis.project_into(&xs, xc);
            basis.project_into(&vs, vc);
            Ok(d)
        })
        .try_reduce(BoundaryDiagnostics::default, |mut a, b| {
            a.merge(&b);
            Ok(a)
        })
}

pub fn apply_bc(
    ens: &mut ChaosEnsemble,
    basis: &GpcBasis,
    grid: &SpatialGrid,
    rules: BoundaryRules,
) -> Result<BoundaryDiagnostics> {
    match (grid.boundary, rules.periodic) {
        (Boundary::Periodic, PeriodicRule::Shift) => apply_periodic_shift(ens, basis, grid),
        (Boundary::Periodic, PeriodicRule::NodeWrap) => apply_periodic_bc(ens, basis, grid),
        (Boundary::Reflecting, _) => apply_reflecting_bc(ens, basis, grid, rules.reflect),
    }
}

/// Half drift, boundary, fields, kick, half drift, boundary.
pub fn transport_step(
    ens: &mut ChaosEnsemble,
    basis: &GpcBasis,
    grid: &SpatialGrid,
    dt: f64,
    rules: BoundaryRules,
) -> Result<BoundaryDiagnostics> {
    transport_inner(ens, basis, grid, dt, rules, true)
}

fn transport_inner(
    ens: &mut ChaosEnsemble,
    basis: &GpcBasis,
    grid: &SpatialGrid,
    dt: f64,
    rules: BoundaryRules,
    with_field: bool,
) -> Result<BoundaryDiagnostics> {
    half_drift(ens, dt);
    let mut d = apply_bc(ens, basis, grid, rules)?;
    if with_field {
        let cells = ens.node_cells(basis, grid)?;
        d.lookups_outside += cells.outside;
        let fields = fields_from_cells(ens, grid, &cells)?;
        kick(ens, &fields, basis, &cells, dt)?;
    }
    half_drift(ens, dt);
    d.merge(&apply_bc(ens, basis, grid, rules)?);
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Splitting {
    /// Half collision, transport, half collision.
    #[default]
    Strang,
    /// Full collision followed by transport.
    FirstOrder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub dt: f64,
    pub nu: f64,
    pub splitting: Splitting,
    pub boundary: BoundaryRules,
    pub pool_mode: PoolMode,
    pub sampling: BgkSampling,
    /// Skips the field solve and kick, leaving free streaming.
    pub field_off: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub collision: BgkDiagnostics,
    pub boundary: BoundaryDiagnostics,
}

impl StepDiagnostics {
    pub fn merge(&mut self, o: &StepDiagnostics) {
        self.collision.merge(&o.collision);
        self.boundary.merge(&o.boundary);
    }
}

/// Advances an ensemble through whole time steps. Collision calls are
/// numbered consecutively (two per Strang step), which keys their streams.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub params: StepParams,
    streams: StreamFactory,
    initial_pool: Option<MaxwellianPool>,
    steps_taken: u64,
}

impl Propagator {
    pub fn new(params: StepParams, seed: u64) -> Result<Self> {
        if !(params.dt > 0.0 && params.dt.is_finite()) {
            return Err(Error::Config(format!("time step {} must be positive", params.dt)));
        }
        if !(params.nu >= 0.0 && params.nu.is_finite()) {
            return Err(Error::Config(format!(
                "collision frequency {} must be non-negative",
                params.nu
            )));
        }
        Ok(Self {
            params,
            streams: StreamFactory::new(seed),
            initial_pool: None,
            steps_taken: 0,
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    fn collide(
        &mut self,
        ens: &mut ChaosEnsemble,
        basis: &GpcBasis,
        grid: &SpatialGrid,
        dt: f64,
        call: u64,
    ) -> Result<BgkDiagnostics> {
        if self.params.nu == 0.0 {
            return Ok(BgkDiagnostics {
                calls: 1,
                kept: ens.count as u64,
                ..Default::default()
            });
        }
        let fresh;
        let pool = match self.params.pool_mode {
            PoolMode::PerStep => {
                fresh = MaxwellianPool::draw(&self.streams, call, ens.count)?;
                &fresh
            }
            PoolMode::Initial => {
                if self.initial_pool.is_none() {
                    self.initial_pool = Some(MaxwellianPool::draw(&self.streams, 0, ens.count)?);
                }
                self.initial_pool.as_ref().unwrap()
            }
        };
        bgk_step_with(
            ens,
            basis,
            grid,
            dt,
            self.params.nu,
            pool,
            &self.streams,
            call,
            self.params.sampling,
        )
    }

    pub fn step(
        &mut self,
        ens: &mut ChaosEnsemble,
        basis: &GpcBasis,
        grid: &SpatialGrid,
    ) -> Result<StepDiagnostics> {
        let n = self.steps_taken;
        let dt = self.params.dt;
        let rule = self.params.boundary;
        let mut d = StepDiagnostics::default();
        match self.params.splitting {
            Splitting::Strang => {
                let c = self
                    .collide(ens, basis, grid, 0.5 * dt, 2 * n)
                    .map_err(|e| e.at_step(n, "collision"))?;
                d.collision.merge(&c);
                d.boundary = transport_inner(ens, basis, grid, dt, rule, !self.params.field_off)
                    .map_err(|e| e.at_step(n, "transport"))?;
                let c = self
                    .collide(ens, basis, grid, 0.5 * dt, 2 * n + 1)
                    .map_err(|e| e.at_step(n, "collision"))?;
                d.collision.merge(&c);
            }
            Splitting::FirstOrder => {
                let c = self
                    .collide(ens, basis, grid, dt, n)
                    .map_err(|e| e.at_step(n, "collision"))?;
                d.collision.merge(&c);
                d.boundary = transport_inner(ens, basis, grid, dt, rule, !self.params.field_off)
                    .map_err(|e| e.at_step(n, "transport"))?;
            }
        }
        self.steps_taken += 1;
        Ok(d)
    }
}
