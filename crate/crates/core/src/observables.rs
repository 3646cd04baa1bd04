//! Quantities of interest: field energy, phase-space reconstruction, moment
//! profiles and exponential rate fits.
//!
//! Statistics over the random input are always taken on node-evaluated
//! quantities with the quadrature weights, since every observable here is
//! nonlinear in the particle coefficients.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::NodeCellMoments;
use crate::error::{Error, Result};
use crate::fields::{deposit_density, solve_poisson, Boundary, NodeFieldSet, SpatialGrid};
use crate::gpc::GpcBasis;
use crate::particles::ChaosEnsemble;

/// `sqrt(sum_l E_l^2 dx)` for a single field row.
pub fn field_norm(e: &[f64], dx: f64) -> f64 {
    (e.iter().map(|v| v * v).sum::<f64>() * dx).sqrt()
}

/// Electric energy at every node.
pub fn electric_energy(fields: &NodeFieldSet, grid: &SpatialGrid) -> Vec<f64> {
    (0..fields.node_count)
        .map(|k| field_norm(fields.e_row(k), grid.dx))
        .collect()
}

/// Electric energy of the ensemble realized at an arbitrary `z`.
pub fn energy_at(ens: &ChaosEnsemble, basis: &GpcBasis, grid: &SpatialGrid, z: f64) -> Result<f64> {
    let (x, _) = ens.evaluate_at(basis, z)?;
    let x: Vec<f64> = x
        .into_iter()
        .map(|x| {
            grid.canonical(x)
                .ok_or_else(|| Error::Numerical(format!("non-finite particle position {x}")))
        })
        .collect::<Result<_>>()?;
    let rho = deposit_density(&x, ens.particle_weight, grid)?;
    let (_, e) = solve_poisson(&rho, grid)?;
    Ok(field_norm(&e, grid.dx))
}

/// Weighted mean and variance; the variance is a sum of squared deviations.
pub fn weighted_mean_variance(values: &[f64], weights: &[f64]) -> (f64, f64) {
    let mean: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    let var = values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * (v - mean) * (v - mean))
        .sum();
    (mean, var)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTimeSeries {
    pub times: Vec<f64>,
    pub per_node: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl EnergyTimeSeries {
    pub fn push(&mut self, t: f64, node_values: Vec<f64>, weights: &[f64]) {
        let (m, v) = weighted_mean_variance(&node_values, weights);
        self.times.push(t);
        self.mean.push(m);
        self.variance.push(v);
        self.per_node.push(node_values);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with columns `t, mean_E, var_E, E_node0, ...`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let kn = self.per_node.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string(), "mean_E".into(), "var_E".into()];
        header.extend((0..kn).map(|k| format!("E_node{k}")));
        w.write_record(&header)?;
        for j in 0..self.len() {
            let mut rec = vec![
                self.times[j].to_string(),
                self.mean[j].to_string(),
                self.variance[j].to_string(),
            ];
            rec.extend(self.per_node[j].iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a series written by [`EnergyTimeSeries::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.len() < 3 || &headers[0] != "t" || &headers[1] != "mean_E" {
            return Err(Error::Config(
                "energy series needs columns t, mean_E, var_E".into(),
            ));
        }
        let mut s = Self::default();
        for rec in r.records() {
            let rec = rec?;
            let parse = |j: usize| -> Result<f64> {
                rec.get(j)
                    .ok_or_else(|| Error::Config(format!("missing column {j}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad number in column {j}: {e}")))
            };
            s.times.push(parse(0)?);
            s.mean.push(parse(1)?);
            s.variance.push(parse(2)?);
            s.per_node.push((3..rec.len()).map(parse).collect::<Result<_>>()?);
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    #[default]
    Damping,
    /// Like damping, but a non-oscillating series (fewer than three peaks)
    /// is fitted through every sample in the window.
    Growth,
    /// Least squares through every sample in the window, ignoring peaks.
    Trend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub intercept: f64,
    pub points: Vec<(f64, f64)>,
    pub used_peaks: bool,
}

fn least_squares(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("fit points share a single time".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mt))
}

/// Minimum peak prominence as a fraction of the log range in the window.
const PROMINENCE_FRACTION: f64 = 0.1;

/// Height of `ys[j]` above the higher of the lowest points separating it from
/// strictly higher samples (or the window ends) on either side.
fn prominence(ys: &[f64], j: usize) -> f64 {
    let y = ys[j];
    let base = |range: &mut dyn Iterator<Item = usize>| {
        let mut m = y;
        for i in range {
            if ys[i] > y {
                break;
            }
            m = m.min(ys[i]);
        }
        m
    };
    let left = base(&mut (0..j).rev());
    let right = base(&mut (j + 1..ys.len()));
    y - left.max(right)
}

/// Fits `log y ~ rate * t + c` through the prominent local maxima of `log y` inside
/// `window`, refining each peak with a parabola through its neighbours.
pub fn fit_rate(times: &[f64], values: &[f64], window: (f64, f64), mode: FitMode) -> Result<RateFit> {
    if times.len() != values.len() {
        return Err(Error::Usage("times and values differ in length".into()));
    }
    let idx: Vec<usize> = (0..times.len())
        .filter(|&j| times[j] >= window.0 && times[j] <= window.1)
        .collect();
    if let Some(&j) = idx.iter().find(|&&j| !(values[j] > 0.0 && values[j].is_finite())) {
        return Err(Error::Fit(format!(
            "series must be positive in the window, found {} at t = {}",
            values[j], times[j]
        )));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let all_samples = || -> Result<RateFit> {
        let points: Vec<(f64, f64)> = idx.iter().map(|&j| (times[j], logs[j])).collect();
        if points.len() < 3 {
            return Err(Error::Fit(format!(
                "only {} samples in [{}, {}]",
                points.len(),
                window.0,
                window.1
            )));
        }
        let (rate, intercept) = least_squares(&points)?;
        Ok(RateFit {
            rate,
            intercept,
            points,
            used_peaks: false,
        })
    };
    if mode == FitMode::Trend {
        return all_samples();
    }
    let wlogs: Vec<f64> = idx.iter().map(|&j| logs[j]).collect();
    let (lo, hi) = wlogs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| {
            (a.min(y), b.max(y))
        });
    let min_prominence = PROMINENCE_FRACTION * (hi - lo);
    let mut peaks = Vec::new();
    for (p, w) in idx.windows(3).enumerate() {
        let (a, b, c) = (w[0], w[1], w[2]);
        let (ya, yb, yc) = (logs[a], logs[b], logs[c]);
        if yb >= ya && yb >= yc && prominence(&wlogs, p + 1) >= min_prominence {
            let denom = ya - 2.0 * yb + yc;
            let h = 0.5 * (times[c] - times[a]);
            let (t, y) = if denom < 0.0 {
                let off = 0.5 * (ya - yc) / denom;
                (times[b] + off * h, yb - 0.25 * (ya - yc) * off)
            } else {
                (times[b], yb)
            };
            peaks.push((t, y));
        }
    }
    if peaks.len() >= 3 {
        let (rate, intercept) = least_squares(&peaks)?;
        return Ok(RateFit {
            rate,
            intercept,
            points: peaks,
            used_peaks: true,
        });
    }
    match mode {
        FitMode::Damping => Err(Error::Fit(format!(
            "found {} peaks in [{}, {}], need at least 3",
            peaks.len(),
            window.0,
            window.1
        ))),
        FitMode::Growth | FitMode::Trend => all_samples(),
    }
}

pub fn fit_exponential_rate(series: &EnergyTimeSeries, window: (f64, f64), mode: FitMode) -> Result<RateFit> {
    fit_rate(&series.times, &series.mean, window, mode)
}

/// Per-cell statistics of a node-wise quantity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl CellStats {
    /// `rows[k][l]` over nodes `k` for every cell `l`.
    pub fn from_rows(rows: &[&[f64]], weights: &[f64]) -> Self {
        let n = rows.first().map_or(0, |r| r.len());
        let mut s = CellStats {
            mean: vec![0.0; n],
            variance: vec![0.0; n],
            min: vec![f64::INFINITY; n],
            max: vec![f64::NEG_INFINITY; n],
        };
        let mut col = vec![0.0; rows.len()];
        for l in 0..n {
            for (k, r) in rows.iter().enumerate() {
                col[k] = r[l];
                s.min[l] = s.min[l].min(r[l]);
                s.max[l] = s.max[l].max(r[l]);
            }
            let (m, v) = weighted_mean_variance(&col, weights);
            s.mean[l] = m;
            s.variance[l] = v;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentProfiles {
    pub x_centers: Vec<f64>,
    pub rho: CellStats,
    pub mean_velocity: CellStats,
    pub temperature: CellStats,
}

pub fn moment_profiles(moments: &NodeCellMoments, basis: &GpcBasis, grid: &SpatialGrid) -> MomentProfiles {
    let n = moments.n_cells;
    let rows = |data: &[f64]| -> CellStats {
        let rows: Vec<&[f64]> = data.chunks(n).collect();
        CellStats::from_rows(&rows, basis.weights())
    };
    MomentProfiles {
        x_centers: (0..n).map(|l| grid.center(l)).collect(),
        rho: rows(&moments.rho),
        mean_velocity: rows(&moments.mean),
        temperature: rows(&moments.temperature),
    }
}

impl MomentProfiles {
    /// CSV with `x` followed by mean/var/min/max of `rho`, `U` and `T`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["x".to_string()];
        for q in ["rho", "U", "T"] {
            for s in ["mean", "var", "min", "max"] {
                header.push(format!("{q}_{s}"));
            }
        }
        w.write_record(&header)?;
        for l in 0..self.x_centers.len() {
            let mut rec = vec![self.x_centers[l].to_string()];
            for q in [&self.rho, &self.mean_velocity, &self.temperature] {
                rec.push(q.mean[l].to_string());
                rec.push(q.variance[l].to_string());
                rec.push(q.min[l].to_string());
                rec.push(q.max[l].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Velocity grid of the phase-space reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    pub v_min: f64,
    pub v_max: f64,
    pub n_cells: usize,
}

impl VelocityGrid {
    pub fn new(v_min: f64, v_max: f64, n_cells: usize) -> Result<Self> {
        if !(v_max > v_min) || n_cells == 0 {
            return Err(Error::Config(format!(
                "velocity grid [{v_min}, {v_max}] with {n_cells} cells is empty"
            )));
        }
        Ok(Self {
            v_min,
            v_max,
            n_cells,
        })
    }

    pub fn dv(&self) -> f64 {
        (self.v_max - self.v_min) / self.n_cells as f64
    }

    pub fn center(&self, j: usize) -> f64 {
        self.v_min + (j as f64 + 0.5) * self.dv()
    }
}

/// Node-wise phase-space density on an `N_l x N_v` grid (row-major in x).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityFrame {
    pub values: Vec<f64>,
    /// Mass of particles whose velocity fell outside the grid.
    pub clipped_mass: f64,
}

/// Bin index below `s` and the fractional offset past it.
#[inline]
fn hat(s: f64) -> (i64, f64) {
    let j = s.floor();
    (j as i64, s - j)
}

/// Linear-kernel reconstruction of `f(x, v, z_k)`. Periodic grids wrap in x;
/// otherwise weight past the outer centers stays in the edge bin. Particles
/// with velocity outside the grid are dropped and counted.
pub fn reconstruct_density(
    ens: &ChaosEnsemble,
    basis: &GpcBasis,
    k: usize,
    grid: &SpatialGrid,
    vgrid: &VelocityGrid,
) -> Result<DensityFrame> {
    let (xs, vs) = ens.evaluate_at_node(basis, k)?;
    Ok(reconstruct_from_samples(
        &xs,
        &vs,
        ens.particle_weight,
        grid,
        vgrid,
    ))
}

pub fn reconstruct_from_samples(
    xs: &[f64],
    vs: &[f64],
    weight: f64,
    grid: &SpatialGrid,
    vgrid: &VelocityGrid,
) -> DensityFrame {
    let nx = grid.n_cells as i64;
    let nv = vgrid.n_cells as i64;
    let dv = vgrid.dv();
    let mut values = vec![0.0; (nx * nv) as usize];
    let mut clipped = 0u64;
    let periodic = grid.boundary == Boundary::Periodic;
    let fix_x = |j: i64| -> usize {
        if periodic {
            j.rem_euclid(nx) as usize
        } else {
            j.clamp(0, nx - 1) as usize
        }
    };
    for (&x, &v) in xs.iter().zip(vs) {
        if !(v >= vgrid.v_min && v <= vgrid.v_max) {
            clipped += 1;
            continue;
        }
        let x = grid.canonical(x).unwrap_or(grid.x_min);
        let (jx, fx) = hat((x - grid.x_min) / grid.dx - 0.5);
        let (jv, fv) = hat((v - vgrid.v_min) / dv - 0.5);
        let cols = [(jv.clamp(0, nv - 1), 1.0 - fv), ((jv + 1).clamp(0, nv - 1), fv)];
        for (ix, wx) in [(fix_x(jx), 1.0 - fx), (fix_x(jx + 1), fx)] {
            for &(iv, wv) in &cols {
                values[ix * nv as usize + iv as usize] += wx * wv;
            }
        }
    }
    let scale = weight / (grid.dx * dv);
    values.iter_mut().for_each(|f| *f *= scale);
    DensityFrame {
        values,
        clipped_mass: clipped as f64 * weight,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceDensity {
    pub x_edges: Vec<f64>,
    pub v_edges: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub clipped_mass_mean: f64,
    pub frames: Option<Vec<DensityFrame>>,
}

/// Mean and variance over the random input of the reconstructed density.
pub fn phase_space_density(
    ens: &ChaosEnsemble,
    basis: &GpcBasis,
    grid: &SpatialGrid,
    vgrid: &VelocityGrid,
    keep_frames: bool,
) -> Result<PhaseSpaceDensity> {
    let frames: Vec<DensityFrame> = (0..basis.node_count())
        .into_par_iter()
        .map(|k| reconstruct_density(ens, basis, k, grid, vgrid))
        .collect::<Result<_>>()?;
    let rows: Vec<&[f64]> = frames.iter().map(|f| f.values.as_slice()).collect();
    let stats = CellStats::from_rows(&rows, basis.weights());
    let clipped: Vec<f64> = frames.iter().map(|f| f.clipped_mass).collect();
    Ok(PhaseSpaceDensity {
        x_edges: grid.stagger(),
        v_edges: (0..=vgrid.n_cells)
            .map(|j| vgrid.v_min + j as f64 * vgrid.dv())
            .collect(),
        mean: stats.mean,
        variance: stats.variance,
        clipped_mass_mean: weighted_mean_variance(&clipped, basis.weights()).0,
        frames: keep_frames.then_some(frames),
    })
}

impl PhaseSpaceDensity {
    pub fn n_v(&self) -> usize {
        self.v_edges.len() - 1
    }

    /// Long-format CSV `x,v,value` of one statistic (cell centers).
    pub fn write_csv<W: Write>(&self, values: &[f64], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "v", "value"])?;
        let nv = self.n_v();
        for ix in 0..self.x_edges.len() - 1 {
            let x = 0.5 * (self.x_edges[ix] + self.x_edges[ix + 1]);
            for iv in 0..nv {
                let v = 0.5 * (self.v_edges[iv] + self.v_edges[iv + 1]);
                w.write_record([x.to_string(), v.to_string(), values[ix * nv + iv].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
