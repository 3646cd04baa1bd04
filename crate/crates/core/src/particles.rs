//! Chaos-expanded particle ensembles and initial-condition samplers.
//!
//! Every particle draws its underlying random numbers once. The node-wise
//! samples `x_i(z_k)`, `v_i(z_k)` are obtained by pushing those shared draws
//! through the z-dependent inverse CDF and Maxwellian at each quadrature
//! node, then projected onto the basis. Reusing the draws across nodes keeps
//! the map `z -> x_i(z)` smooth, which is what gives the higher chaos
//! coefficients meaning.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::fields::SpatialGrid;
use crate::gpc::GpcBasis;
use crate::rng::{Purpose, StreamFactory};

/// Affine law `offset + slope * z` of the random input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Affine {
    pub offset: f64,
    #[serde(default)]
    pub slope: f64,
}

impl Affine {
    pub const fn new(offset: f64, slope: f64) -> Self {
        Self { offset, slope }
    }

    pub const fn constant(c: f64) -> Self {
        Self::new(c, 0.0)
    }

    #[inline]
    pub fn at(&self, z: f64) -> f64 {
        self.offset + self.slope * z
    }

    /// Smallest value over the support (attained at an endpoint).
    pub fn min_over(&self, (a, b): (f64, f64)) -> f64 {
        self.at(a).min(self.at(b))
    }

    pub fn is_deterministic(&self) -> bool {
        self.slope == 0.0
    }
}

/// Initial phase-space density `f_0(x, v, z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `(1 + alpha(z) cos(k x))` times a Maxwellian of temperature `T(z)`.
    PerturbedMaxwellian {
        wave_number: f64,
        amplitude: Affine,
        temperature: Affine,
    },
    /// Perturbed density with two counter-streaming Maxwellian beams at `+-drift`.
    TwoStream {
        wave_number: f64,
        amplitude: Affine,
        temperature: Affine,
        drift: f64,
    },
    /// Density `exp(-(x - center)^2) / sqrt(pi)` with a Maxwellian of temperature `T(z)`.
    GaussianBump { center: f64, temperature: Affine },
    /// Riemann data: left and right states separated by an interface at `s(z)`.
    SodRiemann {
        rho_left: f64,
        rho_right: f64,
        temperature_left: Affine,
        temperature_right: Affine,
        interface: Affine,
    },
}

impl InitialCondition {
    pub fn validate(&self, support: (f64, f64), grid: &SpatialGrid) -> Result<()> {
        let positive_t = |t: &Affine, what: &str| {
            if t.min_over(support) <= 0.0 {
                Err(Error::Config(format!(
                    "{what} temperature must stay positive over the support"
                )))
            } else {
                Ok(())
            }
        };
        match self {
            InitialCondition::PerturbedMaxwellian {
                wave_number,
                amplitude,
                temperature,
            }
            | InitialCondition::TwoStream {
                wave_number,
                amplitude,
                temperature,
                ..
            } => {
                if !(wave_number.is_finite() && *wave_number > 0.0) {
                    return Err(Error::Config(format!(
                        "wave number {wave_number} must be positive"
                    )));
                }
                if amplitude.min_over(support) <= -1.0 {
                    return Err(Error::Config(
                        "perturbation amplitude must stay above -1 (positive density)".into(),
                    ));
                }
                if amplitude.at(support.0).abs().max(amplitude.at(support.1).abs()) > 1.0 {
                    return Err(Error::Config(
                        "perturbation amplitude above 1 makes the density negative".into(),
                    ));
                }
                positive_t(temperature, "initial")
            }
            InitialCondition::GaussianBump { temperature, .. } => positive_t(temperature, "initial"),
            InitialCondition::SodRiemann {
                rho_left,
                rho_right,
                temperature_left,
                temperature_right,
                interface,
            } => {
                if !(*rho_left > 0.0 && *rho_right > 0.0) {
                    return Err(Error::Config("Riemann densities must be positive".into()));
                }
                positive_t(temperature_left, "left")?;
                positive_t(temperature_right, "right")?;
                let lo = interface.min_over(support);
                let hi = interface.at(support.0).max(interface.at(support.1));
                if lo < grid.x_min || hi > grid.x_max {
                    return Err(Error::Config("interface leaves the domain".into()));
                }
                Ok(())
            }
        }
    }

    /// Unnormalized density `rho_0(x, z)`.
    pub fn density(&self, x: f64, z: f64) -> f64 {
        match self {
            InitialCondition::PerturbedMaxwellian {
                wave_number,
                amplitude,
                ..
            }
            | InitialCondition::TwoStream {
                wave_number,
                amplitude,
                ..
            } => 1.0 + amplitude.at(z) * (wave_number * x).cos(),
            InitialCondition::GaussianBump { center, .. } => {
                (-(x - center) * (x - center)).exp() / std::f64::consts::PI.sqrt()
            }
            InitialCondition::SodRiemann {
                rho_left,
                rho_right,
                interface,
                ..
            } => {
                if x < interface.at(z) {
                    *rho_left
                } else {
                    *rho_right
                }
            }
        }
    }

    /// `int_{x_min}^{x} rho_0(y, z) dy`.
    pub fn cumulative_mass(&self, x: f64, z: f64, x_min: f64) -> f64 {
        match self {
            InitialCondition::PerturbedMaxwellian {
                wave_number,
                amplitude,
                ..
            }
            | InitialCondition::TwoStream {
                wave_number,
                amplitude,
                ..
            } => {
                let k = *wave_number;
                (x - x_min) + amplitude.at(z) / k * ((k * x).sin() - (k * x_min).sin())
            }
            InitialCondition::GaussianBump { center, .. } => 0.5 * (erf(x - center) - erf(x_min - center)),
            InitialCondition::SodRiemann {
                rho_left,
                rho_right,
                interface,
                ..
            } => {
                let s = interface.at(z).max(x_min);
                if x <= s {
                    rho_left * (x - x_min)
                } else {
                    rho_left * (s - x_min) + rho_right * (x - s)
                }
            }
        }
    }

    pub fn mass(&self, z: f64, grid: &SpatialGrid) -> f64 {
        self.cumulative_mass(grid.x_max, z, grid.x_min)
    }

    pub fn temperature(&self, x: f64, z: f64) -> f64 {
        match self {
            InitialCondition::PerturbedMaxwellian { temperature, .. }
            | InitialCondition::TwoStream { temperature, .. }
            | InitialCondition::GaussianBump { temperature, .. } => temperature.at(z),
            InitialCondition::SodRiemann {
                temperature_left,
                temperature_right,
                interface,
                ..
            } => {
                if x < interface.at(z) {
                    temperature_left.at(z)
                } else {
                    temperature_right.at(z)
                }
            }
        }
    }

    /// Beam drift speed; zero for single-Maxwellian data.
    pub fn drift(&self) -> f64 {
        match self {
            InitialCondition::TwoStream { drift, .. } => *drift,
            _ => 0.0,
        }
    }

    /// Solves `F(x; z) = u` for the normalized CDF by bisection to `1e-12` in `x`.
    pub fn inverse_cdf(&self, u: f64, z: f64, grid: &SpatialGrid) -> Result<f64> {
        let total = self.mass(z, grid);
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Config(format!(
                "initial density has non-positive mass {total} at z = {z}"
            )));
        }
        let target = u * total;
        let (mut lo, mut hi) = (grid.x_min, grid.x_max);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cumulative_mass(mid, z, grid.x_min) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// How the shared per-particle draws are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loading {
    /// Independent draws from the particle's `Init` stream.
    Random,
    /// Deterministic low-discrepancy draws: stratified uniforms for the
    /// position and radical-inverse quantiles for the velocity.
    Quiet,
}

/// Shared draws of one particle, reused at every quadrature node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleDraw {
    pub uniform: f64,
    pub normal: f64,
    /// `+1` or `-1`; selects the beam for two-stream data.
    pub beam: f64,
}

fn radical_inverse(mut n: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while n > 0 {
        r += f * (n % base) as f64;
        n /= base;
        f *= inv;
    }
    r
}

pub fn particle_draw(
    loading: Loading,
    streams: &StreamFactory,
    i: usize,
    count: usize,
    paired_beams: bool,
) -> ParticleDraw {
    match loading {
        Loading::Random => {
            let mut rng = streams.particle(Purpose::Init, 0, i);
            let uniform: f64 = rng.random();
            let normal: f64 = rng.sample(StandardNormal);
            let beam = if rng.random::<bool>() { 1.0 } else { -1.0 };
            ParticleDraw {
                uniform,
                normal,
                beam,
            }
        }
        Loading::Quiet => {
            let std_normal = Normal::standard();
            let uniform = (i as f64 + 0.5) / count as f64;
            if paired_beams {
                // neighbours in x carry mirrored velocities on opposite beams
                let q = radical_inverse(i as u64 / 2 + 1, 3);
                let n = std_normal.inverse_cdf(q);
                let beam = if i.is_multiple_of(2) { 1.0 } else { -1.0 };
                ParticleDraw {
                    uniform,
                    normal: beam * n,
                    beam,
                }
            } else {
                let q = radical_inverse(i as u64 + 1, 2);
                ParticleDraw {
                    uniform,
                    normal: std_normal.inverse_cdf(q),
                    beam: 1.0,
                }
            }
        }
    }
}

/// `N` particles, each with `M+1` position and `M+1` velocity coefficients,
/// stored particle-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosEnsemble {
    pub count: usize,
    pub terms: usize,
    pub x_coeffs: Vec<f64>,
    pub v_coeffs: Vec<f64>,
    pub particle_weight: f64,
    pub seed: u64,
}

/// Cell of every particle at every node, `cells[i * K + k]`.
#[derive(Debug, Clone)]
pub struct NodeCells {
    pub node_count: usize,
    pub cells: Vec<u32>,
    /// Node positions that had to be canonicalized into the domain.
    pub outside: u64,
}

impl NodeCells {
    #[inline]
    pub fn particle(&self, i: usize) -> &[u32] {
        &self.cells[i * self.node_count..(i + 1) * self.node_count]
    }
}

impl ChaosEnsemble {
    pub fn zeros(count: usize, terms: usize, particle_weight: f64, seed: u64) -> Self {
        Self {
            count,
            terms,
            x_coeffs: vec![0.0; count * terms],
            v_coeffs: vec![0.0; count * terms],
            particle_weight,
            seed,
        }
    }

    /// Ensemble with no z-dependence: only the mean coefficients are set.
    pub fn deterministic(x: &[f64], v: &[f64], terms: usize, particle_weight: f64, seed: u64) -> Self {
        let mut ens = Self::zeros(x.len(), terms, particle_weight, seed);
        for i in 0..x.len() {
            ens.x_coeffs[i * terms] = x[i];
            ens.v_coeffs[i * terms] = v[i];
        }
        ens
    }

    #[inline]
    pub fn x(&self, i: usize) -> &[f64] {
        &self.x_coeffs[i * self.terms..(i + 1) * self.terms]
    }

    #[inline]
    pub fn v(&self, i: usize) -> &[f64] {
        &self.v_coeffs[i * self.terms..(i + 1) * self.terms]
    }

    pub fn total_mass(&self) -> f64 {
        self.particle_weight * self.count as f64
    }

    fn check_basis(&self, basis: &GpcBasis) -> Result<()> {
        if basis.terms() != self.terms {
            return Err(Error::Usage(format!(
                "ensemble has {} coefficients per particle, basis has {}",
                self.terms,
                basis.terms()
            )));
        }
        Ok(())
    }

    /// Node-wise realization of every particle at quadrature node `k`.
    pub fn evaluate_at_node(&self, basis: &GpcBasis, k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_basis(basis)?;
        if k >= basis.node_count() {
            return Err(Error::Usage(format!(
                "node index {k} out of range for a {}-node rule",
                basis.node_count()
            )));
        }
        Ok(self.evaluate_with_row(basis.node_row(k)))
    }

    /// Realization of every particle at an arbitrary `z` in the support.
    pub fn evaluate_at(&self, basis: &GpcBasis, z: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_basis(basis)?;
        let mut row = vec![0.0; self.terms];
        basis.eval_all(z, &mut row);
        Ok(self.evaluate_with_row(&row))
    }

    fn evaluate_with_row(&self, row: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let t = self.terms;
        let eval = |c: &[f64]| -> Vec<f64> {
            c.par_chunks(t)
                .map(|p| p.iter().zip(row).map(|(a, b)| a * b).fold(0.0, |s, x| s + x))
                .collect()
        };
        (eval(&self.x_coeffs), eval(&self.v_coeffs))
    }

    /// Cell lookup for every particle at every node.
    pub fn node_cells(&self, basis: &GpcBasis, grid: &SpatialGrid) -> Result<NodeCells> {
        self.check_basis(basis)?;
        let kn = basis.node_count();
        let t = self.terms;
        let mut cells = vec![0u32; self.count * kn];
        let outside: u64 = cells
            .par_chunks_mut(kn)
            .zip(self.x_coeffs.par_chunks(t))
            .map(|(out, xc)| -> Result<u64> {
                let mut outside = 0;
                let mut xs = [0.0f64; 64];
                let xs = node_values(basis, xc, &mut xs);
                for (o, &x) in out.iter_mut().zip(xs.iter()) {
                    if !grid.contains(x) {
                        outside += 1;
                    }
                    *o = grid.locate(x)? as u32;
                }
                Ok(outside)
            })
            .try_reduce(|| 0, |a, b| Ok(a + b))?;
        Ok(NodeCells {
            node_count: kn,
            cells,
            outside,
        })
    }

    /// Ensemble snapshot: a header line `N,M,K,seed` followed by one row per
    /// particle holding its index, position coefficients and velocity coefficients.
    pub fn write_snapshot_csv<W: Write>(&self, basis: &GpcBasis, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record([
            self.count.to_string(),
            (self.terms - 1).to_string(),
            basis.node_count().to_string(),
            self.seed.to_string(),
        ])?;
        for i in 0..self.count {
            let mut rec = Vec::with_capacity(1 + 2 * self.terms);
            rec.push(i.to_string());
            rec.extend(self.x(i).iter().map(|c| c.to_string()));
            rec.extend(self.v(i).iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates one particle's coefficients at every node, using `buf` when the
/// rule is small enough to avoid an allocation.
#[inline]
pub(crate) fn node_values<'a>(basis: &GpcBasis, coeffs: &[f64], buf: &'a mut [f64; 64]) -> NodeBuf<'a> {
    let kn = basis.node_count();
    if kn <= buf.len() {
        basis.eval_nodes_into(coeffs, &mut buf[..kn]);
        NodeBuf::Stack(&buf[..kn])
    } else {
        let mut v = vec![0.0; kn];
        basis.eval_nodes_into(coeffs, &mut v);
        NodeBuf::Heap(v)
    }
}

pub(crate) enum NodeBuf<'a> {
    Stack(&'a [f64]),
    Heap(Vec<f64>),
}

impl std::ops::Deref for NodeBuf<'_> {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        match self {
            NodeBuf::Stack(s) => s,
            NodeBuf::Heap(v) => v,
        }
    }
}

/// Builds the initial chaos ensemble from `f_0` with shared draws per particle.
pub fn sample_initial(
    ic: &InitialCondition,
    basis: &GpcBasis,
    grid: &SpatialGrid,
    count: usize,
    seed: u64,
    loading: Loading,
) -> Result<ChaosEnsemble> {
    if count == 0 {
        return Err(Error::Config("particle count must be at least 1".into()));
    }
    ic.validate(basis.support(), grid)?;

    let nodes = basis.nodes();
    let masses: Vec<f64> = nodes.iter().map(|&z| ic.mass(z, grid)).collect();
    if masses.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return Err(Error::Config("initial density has non-positive mass".into()));
    }
    let mass = if masses.iter().all(|m| *m == masses[0]) {
        masses[0]
    } else {
        basis.expectation(&masses)
    };

    let streams = StreamFactory::new(seed);
    let paired = matches!(ic, InitialCondition::TwoStream { .. });
    let drift = ic.drift();
    let terms = basis.terms();
    let kn = basis.node_count();
    let mut ens = ChaosEnsemble::zeros(count, terms, mass / count as f64, seed);

    ens.x_coeffs
        .par_chunks_mut(terms)
        .zip(ens.v_coeffs.par_chunks_mut(terms))
        .enumerate()
        .try_for_each(|(i, (xc, vc))| -> Result<()> {
            let draw = particle_draw(loading, &streams, i, count, paired);
            let mut xs = vec![0.0; kn];
            let mut vs = vec![0.0; kn];
            for (k, &z) in nodes.iter().enumerate() {
                let x = ic.inverse_cdf(draw.uniform, z, grid)?;
                xs[k] = x;
                vs[k] = draw.beam * drift + ic.temperature(x, z).sqrt() * draw.normal;
            }
            basis.project_into(&xs, xc);
            basis.project_into(&vs, vc);
            Ok(())
        })?;
    Ok(ens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Boundary;
    use std::f64::consts::PI;

    fn landau_grid() -> SpatialGrid {
        SpatialGrid::new(0.0, 4.0 * PI, 100, Boundary::Periodic).unwrap()
    }

    #[test]
    fn unperturbed_data_is_deterministic() {
        let basis = GpcBasis::new(3, (0.0, 1.0), 8).unwrap();
        let ic = InitialCondition::PerturbedMaxwellian {
            wave_number: 0.5,
            amplitude: Affine::constant(0.0),
            temperature: Affine::constant(1.0),
        };
        let g = landau_grid();
        for loading in [Loading::Random, Loading::Quiet] {
            let ens = sample_initial(&ic, &basis, &g, 500, 3, loading).unwrap();
            for i in 0..ens.count {
                assert!(ens.x(i)[1..].iter().all(|c| c.abs() < 1e-12));
                assert!(ens.v(i)[1..].iter().all(|c| c.abs() < 1e-12));
                assert!(g.contains(ens.x(i)[0]));
            }
            assert!((ens.total_mass() - g.length()).abs() < 1e-12 * g.length());
        }
    }

    #[test]
    fn median_of_perturbed_density() {
        let g = landau_grid();
        let ic = InitialCondition::PerturbedMaxwellian {
            wave_number: 0.5,
            amplitude: Affine::constant(0.5),
            temperature: Affine::constant(1.0),
        };
        // independent oracle: Simpson-integrated CDF, then bisection
        let simpson_cdf = |x: f64| {
            let n = 2000;
            let h = x / n as f64;
            let f = |y: f64| 1.0 + 0.5 * (0.5 * y).cos();
            let mut s = f(0.0) + f(x);
            for j in 1..n {
                s += if j % 2 == 1 { 4.0 } else { 2.0 } * f(j as f64 * h);
            }
            s * h / 3.0
        };
        let total = simpson_cdf(4.0 * PI);
        let (mut lo, mut hi) = (0.0, 4.0 * PI);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if simpson_cdf(mid) < 0.5 * total {
                lo = mid
            } else {
                hi = mid
            }
        }
        let oracle = 0.5 * (lo + hi);
        let got = ic.inverse_cdf(0.5, 0.3, &g).unwrap();
        assert!((got - oracle).abs() < 1e-10);
        assert!((got - 2.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn sod_velocities_follow_node_temperature() {
        let g = SpatialGrid::new(0.0, 1.0, 100, Boundary::Reflecting).unwrap();
        let ic = InitialCondition::SodRiemann {
            rho_left: 1.0,
            rho_right: 0.125,
            temperature_left: Affine::new(1.0, 0.25),
            temperature_right: Affine::new(0.8, 0.25),
            interface: Affine::constant(0.5),
        };
        let basis = GpcBasis::new(5, (0.0, 1.0), 6).unwrap();
        let ens = sample_initial(&ic, &basis, &g, 64, 11, Loading::Random).unwrap();
        let streams = StreamFactory::new(11);
        for i in 0..ens.count {
            let d = particle_draw(Loading::Random, &streams, i, 64, false);
            for k in 0..basis.node_count() {
                let z = basis.nodes()[k];
                let x = basis.eval_expansion(ens.x(i), z);
                let t0 = if x < 0.5 { 1.0 } else { 0.8 };
                let v = basis.eval_expansion(ens.v(i), z);
                assert!((v - (t0 + 0.25 * z).sqrt() * d.normal).abs() < 1e-12);
            }
        }
        // mass ledger: 0.5 * 1 + 0.5 * 0.125
        assert!((ens.total_mass() - 0.5625).abs() < 1e-15);
    }

    #[test]
    fn positions_order_with_amplitude() {
        // for u < 1/2 on the first half period the inverse CDF decreases as alpha grows
        let g = landau_grid();
        let ic = InitialCondition::PerturbedMaxwellian {
            wave_number: 0.5,
            amplitude: Affine::new(0.05, 0.1),
            temperature: Affine::constant(1.0),
        };
        let basis = GpcBasis::new(3, (0.0, 1.0), 8).unwrap();
        let xs: Vec<f64> = basis
            .nodes()
            .iter()
            .map(|&z| ic.inverse_cdf(0.3, z, &g).unwrap())
            .collect();
        assert!(xs.windows(2).all(|w| w[1] < w[0]));
        let xs: Vec<f64> = basis
            .nodes()
            .iter()
            .map(|&z| ic.inverse_cdf(0.7, z, &g).unwrap())
            .collect();
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn node_evaluation_round_trips() {
        let basis = GpcBasis::new(2, (0.0, 1.0), 6).unwrap();
        let g = landau_grid();
        let ic = InitialCondition::PerturbedMaxwellian {
            wave_number: 0.5,
            amplitude: Affine::new(0.1, 0.2),
            temperature: Affine::new(0.8, 0.4),
        };
        let ens = sample_initial(&ic, &basis, &g, 200, 5, Loading::Random).unwrap();
        let per_node: Vec<(Vec<f64>, Vec<f64>)> = (0..basis.node_count())
            .map(|k| ens.evaluate_at_node(&basis, k).unwrap())
            .collect();
        for i in 0..ens.count {
            let xs: Vec<f64> = per_node.iter().map(|(x, _)| x[i]).collect();
            let vs: Vec<f64> = per_node.iter().map(|(_, v)| v[i]).collect();
            let xb = basis.project(&xs).unwrap();
            let vb = basis.project(&vs).unwrap();
            for h in 0..3 {
                assert!((xb.coeffs[h] - ens.x(i)[h]).abs() < 1e-12);
                assert!((vb.coeffs[h] - ens.v(i)[h]).abs() < 1e-12);
            }
        }
        assert!(ens.evaluate_at_node(&basis, 6).is_err());
    }

    #[test]
    fn single_particle_linear_mode() {
        let basis = GpcBasis::new(1, (0.0, 1.0), 2).unwrap();
        let mut ens = ChaosEnsemble::zeros(1, 2, 1.0, 0);
        ens.x_coeffs[1] = 1.0;
        let (x, _) = ens.evaluate_at_node(&basis, 0).unwrap();
        assert!((x[0] - basis.node_row(0)[1]).abs() < 1e-15);
        let det = ChaosEnsemble::deterministic(&[1.0, 2.0], &[0.5, -0.5], 2, 1.0, 0);
        let a = det.evaluate_at_node(&basis, 0).unwrap();
        let b = det.evaluate_at_node(&basis, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_conditions_are_rejected() {
        let g = landau_grid();
        let basis = GpcBasis::new(1, (0.0, 1.0), 4).unwrap();
        let bad = InitialCondition::PerturbedMaxwellian {
            wave_number: 0.5,
            amplitude: Affine::new(-0.5, -1.0),
            temperature: Affine::constant(1.0),
        };
        assert!(matches!(
            sample_initial(&bad, &basis, &g, 10, 0, Loading::Quiet),
            Err(Error::Config(_))
        ));
        let cold = InitialCondition::GaussianBump {
            center: 6.0,
            temperature: Affine::new(0.5, -1.0),
        };
        assert!(sample_initial(&cold, &basis, &g, 10, 0, Loading::Quiet).is_err());
    }

    #[test]
    fn snapshot_header_and_rows() {
        let basis = GpcBasis::new(1, (0.0, 1.0), 2).unwrap();
        let ens = ChaosEnsemble::deterministic(&[0.25, 0.5], &[1.0, -1.0], 2, 0.5, 9);
        let mut buf = Vec::new();
        ens.write_snapshot_csv(&basis, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "2,1,2,9");
        assert_eq!(lines[1], "0,0.25,0,1,0");
        assert_eq!(lines.len(), 3);
    }
}
