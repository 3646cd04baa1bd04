//! Standalone deterministic particle-in-cell reference, written from scratch
//! against the shared random streams only.

#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use stochpic::rng::{Purpose, StreamFactory};
use stochpic::{Boundary, ScenarioConfig, Simulation};

pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub dx: f64,
    pub periodic: bool,
}

impl Grid {
    fn len(&self) -> f64 {
        self.x_max - self.x_min
    }

    fn inside(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    fn cell(&self, x: f64) -> usize {
        (((x - self.x_min) / self.dx) as usize).min(self.n - 1)
    }
}

pub struct Pic {
    pub grid: Grid,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub weight: f64,
    pub dt: f64,
    pub nu: f64,
    pub conservative: bool,
    pub streams: StreamFactory,
}

impl Pic {
    fn boundary(&mut self) {
        let g = &self.grid;
        let l = g.len();
        for (x, v) in self.x.iter_mut().zip(self.v.iter_mut()) {
            if g.inside(*x) {
                continue;
            }
            if g.periodic {
                *x -= ((*x - g.x_min) / l).floor() * l;
            } else {
                let r = (*x - g.x_min).rem_euclid(2.0 * l);
                let flips = ((*x - g.x_min) / l).floor() as i64;
                *x = if r <= l {
                    g.x_min + r
                } else {
                    g.x_min + 2.0 * l - r
                }
                .clamp(g.x_min, g.x_max);
                if flips.rem_euclid(2) == 1 {
                    *v = -*v;
                }
            }
        }
    }

    pub fn field(&self) -> Vec<f64> {
        let g = &self.grid;
        let n = g.n;
        let mut counts = vec![0u64; n];
        for &x in &self.x {
            counts[g.cell(x)] += 1;
        }
        let mut s: Vec<f64> = counts
            .iter()
            .map(|&c| 1.0 - self.weight * c as f64 / g.dx)
            .collect();
        if g.periodic {
            let mean = s.iter().sum::<f64>() / n as f64;
            s.iter_mut().for_each(|v| *v -= mean);
        }
        // phi'' = s at interior edges with phi = 0 at both ends
        let m = n - 1;
        let mut rhs: Vec<f64> = (1..n).map(|j| g.dx * g.dx * (0.5 * (s[j - 1] + s[j]))).collect();
        let mut c = vec![0.0; m];
        let mut beta = -2.0;
        rhs[0] /= beta;
        for i in 1..m {
            c[i] = 1.0 / beta;
            beta = -2.0 - c[i];
            rhs[i] = (rhs[i] - rhs[i - 1]) / beta;
        }
        for i in (0..m - 1).rev() {
            rhs[i] -= c[i + 1] * rhs[i + 1];
        }
        let mut phi = vec![0.0; n + 1];
        phi[1..n].copy_from_slice(&rhs);
        (0..n).map(|l| -(phi[l + 1] - phi[l]) / g.dx).collect()
    }

    fn transport(&mut self) {
        let half = 0.5 * self.dt;
        self.x.iter_mut().zip(&self.v).for_each(|(x, v)| *x += v * half);
        self.boundary();
        let e = self.field();
        for (x, v) in self.x.iter().zip(self.v.iter_mut()) {
            *v += self.dt * e[self.grid.cell(*x)];
        }
        self.x.iter_mut().zip(&self.v).for_each(|(x, v)| *x += v * half);
        self.boundary();
    }

    fn pool(&self, call: u64) -> Vec<f64> {
        let mut raw: Vec<f64> = (0..self.x.len())
            .map(|i| {
                self.streams
                    .particle(Purpose::Pool, call, i)
                    .sample(StandardNormal)
            })
            .collect();
        let nf = raw.len() as f64;
        let mean = raw.iter().sum::<f64>() / nf;
        let energy = raw.iter().map(|v| v * v).sum::<f64>() / (2.0 * nf);
        let tau = (2.0 * energy - mean * mean).sqrt();
        raw.iter_mut().for_each(|v| *v = (*v - mean) / tau);
        raw
    }

    fn group_stats(
        &self,
        values: &[f64],
        select: impl Fn(usize) -> bool,
        cells: &[usize],
    ) -> (Vec<u64>, Vec<f64>, Vec<f64>) {
        let n = self.grid.n;
        let mut count = vec![0u64; n];
        let mut sum = vec![0.0; n];
        for i in (0..values.len()).filter(|&i| select(i)) {
            count[cells[i]] += 1;
            sum[cells[i]] += values[i];
        }
        let mean: Vec<f64> = sum
            .iter()
            .zip(&count)
            .map(|(&s, &c)| s / c.max(1) as f64)
            .collect();
        let mut sq = vec![0.0; n];
        for i in (0..values.len()).filter(|&i| select(i)) {
            sq[cells[i]] += (values[i] - mean[cells[i]]).powi(2);
        }
        (count, mean, sq)
    }

    fn collide(&mut self, call: u64) {
        if self.nu == 0.0 {
            return;
        }
        let dt = 0.5 * self.dt;
        let pool = self.pool(call);
        let cells: Vec<usize> = self.x.iter().map(|&x| self.grid.cell(x)).collect();
        let (count, mean, sq) = self.group_stats(&self.v, |_| true, &cells);
        let temp: Vec<f64> = sq
            .iter()
            .zip(&count)
            .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect();
        let keep = (-self.nu * dt).exp();
        let replace: Vec<bool> = (0..self.x.len())
            .map(|i| self.streams.particle(Purpose::Accept, call, i).random::<f64>() >= keep)
            .collect();
        let mut maps: Vec<(f64, f64)> = mean.iter().zip(&temp).map(|(&u, &t)| (u, t.sqrt())).collect();
        if self.conservative {
            let (rc, mv, qv) = self.group_stats(&self.v, |i| replace[i], &cells);
            let (_, mp, qp) = self.group_stats(&pool, |i| replace[i], &cells);
            for l in 0..self.grid.n {
                if rc[l] >= 2 && qp[l] > 0.0 {
                    let b = (qv[l] / qp[l]).sqrt();
                    maps[l] = (mv[l] - b * mp[l], b);
                }
            }
        }
        for i in (0..self.v.len()).filter(|&i| replace[i]) {
            let (a, b) = maps[cells[i]];
            self.v[i] = a + b * pool[i];
        }
    }

    pub fn step(&mut self, n: u64) {
        self.collide(2 * n);
        self.transport();
        self.collide(2 * n + 1);
    }
}

pub fn simulation(preset: &str, extra: &[&str]) -> Simulation {
    let mut o: Vec<String> = ["order=0", "nodes=1", "particles=4000"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    o.extend(extra.iter().map(|s| s.to_string()));
    let cfg =
        ScenarioConfig::preset_with_overrides(stochpic::Preset::from_name(preset).unwrap(), &o).unwrap();
    let sim = Simulation::new(cfg).unwrap();
    assert_eq!(sim.basis.weights(), &[1.0]);
    assert_eq!(sim.ensemble.terms, 1);
    sim
}

pub fn oracle(sim: &Simulation) -> Pic {
    let g = &sim.grid;
    Pic {
        grid: Grid {
            x_min: g.x_min,
            x_max: g.x_max,
            n: g.n_cells,
            dx: g.dx,
            periodic: g.boundary == Boundary::Periodic,
        },
        x: sim.ensemble.x_coeffs.clone(),
        v: sim.ensemble.v_coeffs.clone(),
        weight: sim.ensemble.particle_weight,
        dt: sim.config.dt,
        nu: sim.config.nu,
        conservative: sim.config.bgk_sampling == stochpic::BgkSampling::Conservative,
        streams: StreamFactory::new(sim.config.seed),
    }
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// Steps the solver and the reference side by side; returns a description of
/// the first bitwise difference.
pub fn first_mismatch(preset: &str, extra: &[&str], steps: u64) -> Option<String> {
    let mut sim = simulation(preset, extra);
    let mut pic = oracle(&sim);
    for n in 0..steps {
        sim.step().unwrap();
        pic.step(n);
        if bits(&sim.ensemble.x_coeffs) != bits(&pic.x) {
            return Some(format!("{preset}: positions differ after step {n}"));
        }
        if bits(&sim.ensemble.v_coeffs) != bits(&pic.v) {
            return Some(format!("{preset}: velocities differ after step {n}"));
        }
    }
    let fields = sim.fields().unwrap();
    (bits(fields.e_row(0)) != bits(&pic.field())).then(|| format!("{preset}: final fields differ"))
}
