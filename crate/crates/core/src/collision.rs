//! Projected BGK collision step.
//!
//! Each particle draws one acceptance uniform and one pool velocity per call,
//! both shared across the random input. Replaced particles receive the
//! projection of `U(z) + sqrt(T(z)) * v_pool` where `(U, T)` are the moments
//! of the cell the particle occupies at each quadrature node.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::SpatialGrid;
use crate::gpc::GpcBasis;
use crate::particles::{ChaosEnsemble, NodeCells};
use crate::rng::{Purpose, StreamFactory};

/// Cell moments at every quadrature node, row-major by node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeCellMoments {
    pub node_count: usize,
    pub n_cells: usize,
    pub rho: Vec<f64>,
    pub mean: Vec<f64>,
    pub temperature: Vec<f64>,
    pub counts: Vec<u64>,
}

impl NodeCellMoments {
    #[inline]
    fn idx(&self, k: usize, l: usize) -> usize {
        k * self.n_cells + l
    }

    pub fn rho_at(&self, k: usize, l: usize) -> f64 {
        self.rho[self.idx(k, l)]
    }

    pub fn mean_at(&self, k: usize, l: usize) -> f64 {
        self.mean[self.idx(k, l)]
    }

    pub fn temperature_at(&self, k: usize, l: usize) -> f64 {
        self.temperature[self.idx(k, l)]
    }

    pub fn count_at(&self, k: usize, l: usize) -> u64 {
        self.counts[self.idx(k, l)]
    }
}

/// Velocities of every particle at node `k`, reading only the velocity coefficients.
fn node_velocities(ens: &ChaosEnsemble, basis: &GpcBasis, k: usize) -> Vec<f64> {
    let row = basis.node_row(k);
    ens.v_coeffs
        .chunks(ens.terms)
        .map(|c| c.iter().zip(row).map(|(a, b)| a * b).fold(0.0, |s, x| s + x))
        .collect()
}

/// Moments from a precomputed cell table. Each node is reduced serially in
/// particle order, so results do not depend on the thread schedule.
pub fn moments_from_cells(
    ens: &ChaosEnsemble,
    basis: &GpcBasis,
    grid: &SpatialGrid,
    cells: &NodeCells,
) -> NodeCellMoments {
    let kn = basis.node_count();
    let n = grid.n_cells;
    let rows: Vec<(Vec<u64>, Vec<f64>, Vec<f64>)> = (0..kn)
        .into_par_iter()
        .map(|k| {
            let v = node_velocities(ens, basis, k);
            let cell = |i: usize| cells.cells[i * kn + k] as usize;
            let mut count = vec![0u64; n];
            let mut sum = vec![0.0; n];
            for (i, &vi) in v.iter().enumerate() {
                count[cell(i)] += 1;
                sum[cell(i)] += vi;
            }
            let mean: Vec<f64> = sum
                .iter()
                .zip(&count)
                .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
                .collect();
            let mut sq = vec![0.0; n];
            for (i, &vi) in v.iter().enumerate() {
                let d = vi - mean[cell(i)];
                sq[cell(i)] += d * d;
            }
            let temp = sq
                .iter()
                .zip(&count)
                .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
                .collect();
            (count, mean, temp)
        })
        .collect();

    let mut out = NodeCellMoments {
        node_count: kn,
        n_cells: n,
        rho: Vec::with_capacity(kn * n),
        mean: Vec::with_capacity(kn * n),
        temperature: Vec::with_capacity(kn * n),
        counts: Vec::with_capacity(kn * n),
    };
    for (count, mean, temp) in rows {
        out.rho
            .extend(count.iter().map(|&c| ens.particle_weight * c as f64 / grid.dx));
        out.counts.extend(count);
        out.mean.extend(mean);
        out.temperature.extend(temp);
    }
    out
}

pub fn compute_node_moments(
    ens: &ChaosEnsemble,
    basis: &GpcBasis,
    grid: &SpatialGrid,
) -> Result<NodeCellMoments> {
    let cells = ens.node_cells(basis, grid)?;
    Ok(moments_from_cells(ens, basis, grid, &cells))
}

/// Standard-normal pool rescaled to sample mean exactly 0 and sample energy
/// `sum v^2 / (2N)` exactly 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxwellianPool {
    pub values: Vec<f64>,
}

/// Draws that fail to rescale are retried on fresh streams this many times.
const POOL_ATTEMPTS: u64 = 4;

impl MaxwellianPool {
    /// Rescales raw draws: `v <- (v - V) / tau` with `tau^2 = 2E - V^2`,
    /// where `V` is the sample mean and `E = sum v^2 / (2N)`.
    pub fn from_raw(mut raw: Vec<f64>) -> Result<Self> {
        let n = raw.len();
        if n < 2 {
            return Err(Error::Sampling(format!(
                "a Maxwellian pool needs at least 2 draws, got {n}"
            )));
        }
        let nf = n as f64;
        let mean = raw.iter().sum::<f64>() / nf;
        let energy = raw.iter().map(|v| v * v).sum::<f64>() / (2.0 * nf);
        let tau2 = 2.0 * energy - mean * mean;
        if !(tau2.is_finite() && tau2 > 0.0) {
            return Err(Error::Sampling(format!(
                "pool draws have no spread (tau^2 = {tau2})"
            )));
        }
        let tau = tau2.sqrt();
        raw.iter_mut().for_each(|v| *v = (*v - mean) / tau);
        Ok(Self { values: raw })
    }

    /// Draws one normal per particle from the `Pool` streams of call `key`.
    pub fn draw(streams: &StreamFactory, key: u64, count: usize) -> Result<Self> {
        let mut last = None;
        for attempt in 0..POOL_ATTEMPTS {
            let stream = key + (attempt << 40);
            let raw: Vec<f64> = (0..count)
                .into_par_iter()
                .map(|i| streams.particle(Purpose::Pool, stream, i).sample(StandardNormal))
                .collect();
            match Self::from_raw(raw) {
                Ok(p) => return Ok(p),
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap_or_else(|| Error::Sampling("pool draw failed".into())))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// When the Maxwellian pool is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolMode {
    /// Fresh draws for every collision call.
    #[default]
    PerStep,
    /// One pool drawn at `t = 0` and reused for the whole run.
    Initial,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BgkDiagnostics {
    pub calls: u64,
    pub replaced: u64,
    pub kept: u64,
    pub clamped_temperatures: u64,
}

impl BgkDiagnostics {
    pub fn merge(&mut self, other: &BgkDiagnostics) {
        self.calls += other.calls;
        self.replaced += other.replaced;
        self.kept += other.kept;
        self.clamped_temperatures += other.clamped_temperatures;
    }

    pub fn replacement_fraction(&self) -> f64 {
        let total = self.replaced + self.kept;
        if total == 0 {
            0.0
        } else {
            self.replaced as f64 / total as f64
        }
    }
}

/// One projected BGK relaxation over `dt`. `call` keys the acceptance
/// streams; the pool must have one value per particle.
#[allow(clippy::too_many_arguments)]
pub fn bgk_step(
    ens: &mut ChaosEnsemble,
    basis: &GpcBasis,
    grid: &SpatialGrid,
    dt: f64,
    nu: f64,
    pool: &MaxwellianPool,
    streams: &StreamFactory,
    call: u64,
) -> Result<BgkDiagnostics> {
    bgk_step_with(ens, basis, grid, dt, nu, pool, streams, call, BgkSampling::Plain)
}

/// How replacement velocities are built from the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BgkSampling {
    /// `U + sqrt(T) * pool` with the local moments of the cell.
    Plain,
    /// Within every node and cell, the replaced particles' new velocities are
    /// an affine map of their pool values that reproduces the sum and sum of
    /// squares of their old velocities, so local momentum and energy are
    /// conserved exactly. Groups of fewer than two particles use `Plain`.
    #[default]
    Conservative,
}

/// Per node and cell affine maps `a + b * pool` for the replaced particles.
fn conservative_maps(
    ens: &ChaosEnsemble,
    basis: &GpcBasis,
    cells: &NodeCells,
    moments: &NodeCellMoments,
    replaced: &[bool],
    pool: &MaxwellianPool,
) -> Vec<(f64, f64)> {
    let kn = basis.node_count();
    let n = moments.n_cells;
    let rows: Vec<Vec<(f64, f64)>> = (0..kn)
        .into_par_iter()
        .map(|k| {
            let v = node_velocities(ens, basis, k);
            let cell = |i: usize| cells.cells[i * kn + k] as usize;
            let mut count = vec![0u64; n];
            let mut sv = vec![0.0; n];
            let mut sp = vec![0.0; n];
            for i in (0..ens.count).filter(|&i| replaced[i]) {
                count[cell(i)] += 1;
                sv[cell(i)] += v[i];
                sp[cell(i)] += pool.values[i];
            }
            let mv: Vec<f64> = sv
                .iter()
                .zip(&count)
                .map(|(&s, &c)| s / c.max(1) as f64)
                .collect();
            let mp: Vec<f64> = sp
                .iter()
                .zip(&count)
                .map(|(&s, &c)| s / c.max(1) as f64)
                .collect();
            let mut qv = vec![0.0; n];
            let mut qp = vec![0.0; n];
            for i in (0..ens.count).filter(|&i| replaced[i]) {
                let l = cell(i);
                qv[l] += (v[i] - mv[l]).powi(2);
                qp[l] += (pool.values[i] - mp[l]).powi(2);
            }
            (0..n)
                .map(|l| {
                    if count[l] >= 2 && qp[l] > 0.0 {
                        let b = (qv[l] / qp[l]).sqrt();
                        (mv[l] - b * mp[l], b)
                    } else {
                        let t = moments.temperature_at(k, l);
                        (moments.mean_at(k, l), t.sqrt())
                    }
                })
                .collect()
        })
        .collect();
    rows.concat()
}

/// [`bgk_step`] with a choice of replacement sampling.
#[allow(clippy::too_many_arguments)]
pub fn bgk_step_with(
    ens: &mut ChaosEnsemble,
    basis: &GpcBasis,
    grid: &SpatialGrid,
    dt: f64,
    nu: f64,
    pool: &MaxwellianPool,
    streams: &StreamFactory,
    call: u64,
    sampling: BgkSampling,
) -> Result<BgkDiagnostics> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Usage(format!("collision time step {dt} must be positive")));
    }
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(Error::Usage(format!(
            "collision frequency {nu} must be non-negative"
        )));
    }
    if nu == 0.0 {
        return Ok(BgkDiagnostics {
            calls: 1,
            kept: ens.count as u64,
            ..Default::default()
        });
    }
    if pool.len() != ens.count {
        return Err(Error::Usage(format!(
            "pool has {} values for {} particles",
            pool.len(),
            ens.count
        )));
    }
    let cells = ens.node_cells(basis, grid)?;
    let mut moments = moments_from_cells(ens, basis, grid, &cells);
    let mut clamped = 0;
    for t in moments.temperature.iter_mut() {
        if *t < 0.0 || !t.is_finite() {
            *t = 0.0;
            clamped += 1;
        }
    }
    let keep_prob = (-nu * dt).exp();
    let kn = basis.node_count();
    let terms = ens.terms;
    let n_cells = grid.n_cells;

    let replace: Vec<bool> = (0..ens.count)
        .into_par_iter()
        .map(|i| {
            let xi: f64 = streams.particle(Purpose::Accept, call, i).random();
            xi >= keep_prob
        })
        .collect();
    let maps: Vec<(f64, f64)> = match sampling {
        BgkSampling::Plain => moments
            .mean
            .iter()
            .zip(&moments.temperature)
            .map(|(&u, &t)| (u, t.sqrt()))
            .collect(),
        BgkSampling::Conservative => conservative_maps(ens, basis, &cells, &moments, &replace, pool),
    };

    let replaced: u64 = ens
        .v_coeffs
        .par_chunks_mut(terms)
        .enumerate()
        .filter(|(i, _)| replace[*i])
        .map(|(i, vc)| {
            let vp = pool.values[i];
            let mut node_v = [0.0f64; 64];
            let mut heap;
            let vals: &mut [f64] = if kn <= node_v.len() {
                &mut node_v[..kn]
            } else {
                heap = vec![0.0; kn];
                &mut heap
            };
            for (k, slot) in vals.iter_mut().enumerate() {
                let l = cells.cells[i * kn + k] as usize;
                let (a, b) = maps[k * n_cells + l];
                *slot = a + b * vp;
            }
            basis.project_into(vals, vc);
            1
        })
        .sum();

    Ok(BgkDiagnostics {
        calls: 1,
        replaced,
        kept: ens.count as u64 - replaced,
        clamped_temperatures: clamped,
    })
}
