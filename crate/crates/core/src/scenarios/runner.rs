use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::collision::{compute_node_moments, NodeCellMoments};
use crate::error::{Error, Result};
use crate::fields::{fields_at_all_nodes, NodeFieldSet, SpatialGrid};
use crate::gpc::GpcBasis;
use crate::observables::{
    electric_energy, fit_exponential_rate, moment_profiles, phase_space_density, EnergyTimeSeries,
    MomentProfiles, RateFit, VelocityGrid,
};
use crate::particles::{sample_initial, ChaosEnsemble};
use crate::transport::{Propagator, StepDiagnostics};

use super::config::ScenarioConfig;

/// A configured ensemble together with its discretization and time stepper.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: ScenarioConfig,
    pub basis: GpcBasis,
    pub grid: SpatialGrid,
    pub vgrid: VelocityGrid,
    pub ensemble: ChaosEnsemble,
    propagator: Propagator,
    pub diagnostics: StepDiagnostics,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let basis = config.basis()?;
        let grid = config.grid()?;
        let vgrid = config.velocity_grid()?;
        let ensemble = sample_initial(
            &config.initial,
            &basis,
            &grid,
            config.particles,
            config.seed,
            config.loading,
        )?;
        let propagator = Propagator::new(config.step_params(), config.seed)?;
        Ok(Self {
            config,
            basis,
            grid,
            vgrid,
            ensemble,
            propagator,
            diagnostics: StepDiagnostics::default(),
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.propagator.steps_taken()
    }

    pub fn time(&self) -> f64 {
        self.steps_taken() as f64 * self.config.dt
    }

    pub fn step(&mut self) -> Result<StepDiagnostics> {
        let d = self
            .propagator
            .step(&mut self.ensemble, &self.basis, &self.grid)?;
        self.diagnostics.merge(&d);
        Ok(d)
    }

    pub fn advance(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    pub fn fields(&self) -> Result<NodeFieldSet> {
        fields_at_all_nodes(&self.ensemble, &self.basis, &self.grid)
    }

    pub fn moments(&self) -> Result<NodeCellMoments> {
        compute_node_moments(&self.ensemble, &self.basis, &self.grid)
    }

    pub fn profiles(&self) -> Result<MomentProfiles> {
        Ok(moment_profiles(&self.moments()?, &self.basis, &self.grid))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MassRecord {
    pub t: f64,
    pub ledger: f64,
    /// Largest relative gap between the ledger and the deposited mass over nodes.
    pub deposit_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub config_hash: String,
    pub seed: u64,
    pub node_count: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub steps: usize,
    pub diagnostics: StepDiagnostics,
    pub mass_ledger: Vec<MassRecord>,
    pub fit: Option<RateFit>,
    pub fit_error: Option<String>,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub energy: EnergyTimeSeries,
    /// Moment profiles at each dump time.
    pub profiles: Vec<(f64, MomentProfiles)>,
}

/// Relative mass tolerance checked after every step.
const MASS_TOLERANCE: f64 = 1e-12;

fn mass_record(t: f64, ens: &ChaosEnsemble, fields: &NodeFieldSet, grid: &SpatialGrid) -> MassRecord {
    let ledger = ens.total_mass();
    let deviation = (0..fields.node_count)
        .map(|k| {
            let m: f64 = fields.rho_row(k).iter().map(|r| r * grid.dx).sum();
            (m - ledger).abs() / ledger
        })
        .fold(0.0, f64::max);
    MassRecord {
        t,
        ledger,
        deposit_deviation: deviation,
    }
}

/// Number formatting of a dump time inside a file name.
pub fn time_tag(t: f64) -> String {
    let r = (t * 1e9).round() / 1e9;
    format!("{r}")
}

fn create(dir: &Path, name: &str, outputs: &mut Vec<String>) -> Result<BufWriter<File>> {
    outputs.push(name.to_string());
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Runs a scenario to `t_final`, writing artifacts into `out_dir` when given.
pub fn run(config: ScenarioConfig, out_dir: Option<&Path>) -> Result<RunOutcome> {
    let start = Instant::now();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut sim = Simulation::new(config)?;
    let cfg = sim.config.clone();
    let steps = cfg.steps();
    let dump_steps: Vec<(f64, usize)> = cfg
        .output
        .dump_times
        .iter()
        .map(|&t| (t, (t / cfg.dt).round() as usize))
        .collect();

    let mut energy = EnergyTimeSeries::default();
    let mut mass = Vec::new();
    let mut profiles = Vec::new();
    let mut outputs = Vec::new();

    for n in 0..=steps {
        if n > 0 {
            sim.step()?;
        }
        let t = n as f64 * cfg.dt;
        let fields = sim.fields().map_err(|e| e.at_step(n as u64, "fields"))?;
        let rec = mass_record(t, &sim.ensemble, &fields, &sim.grid);
        if rec.deposit_deviation > MASS_TOLERANCE {
            return Err(Error::Invariant(format!(
                "deposited mass deviates from the ledger by {:e} at t = {t}",
                rec.deposit_deviation
            ))
            .at_step(n as u64, "mass check"));
        }
        if n % cfg.output.energy_every == 0 || n == steps {
            energy.push(t, electric_energy(&fields, &sim.grid), sim.basis.weights());
            mass.push(rec);
        }
        for &(td, _) in dump_steps.iter().filter(|(_, s)| *s == n) {
            let p = sim.profiles()?;
            if let Some(dir) = out_dir {
                let tag = time_tag(td);
                p.write_csv(create(dir, &format!("moments_t{tag}.csv"), &mut outputs)?)?;
                if cfg.output.density {
                    let d = phase_space_density(&sim.ensemble, &sim.basis, &sim.grid, &sim.vgrid, false)?;
                    d.write_csv(
                        &d.mean,
                        create(dir, &format!("density_mean_t{tag}.csv"), &mut outputs)?,
                    )?;
                    d.write_csv(
                        &d.variance,
                        create(dir, &format!("density_variance_t{tag}.csv"), &mut outputs)?,
                    )?;
                }
                if cfg.output.field_dump {
                    fields.write_csv(
                        &sim.grid,
                        create(dir, &format!("fields_t{tag}.csv"), &mut outputs)?,
                    )?;
                }
                if cfg.output.snapshot {
                    sim.ensemble.write_snapshot_csv(
                        &sim.basis,
                        create(dir, &format!("ensemble_t{tag}.csv"), &mut outputs)?,
                    )?;
                }
            }
            profiles.push((td, p));
        }
    }

    let (fit, fit_error) = match &cfg.fit {
        Some(f) => match fit_exponential_rate(&energy, (f.window[0], f.window[1]), f.mode) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        },
        None => (None, None),
    };

    if let Some(dir) = out_dir {
        energy.write_csv(create(dir, "energy.csv", &mut outputs)?)?;
    }
    let report = RunReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        node_count: sim.basis.node_count(),
        nodes: sim.basis.nodes().to_vec(),
        weights: sim.basis.weights().to_vec(),
        steps,
        diagnostics: sim.diagnostics,
        mass_ledger: mass,
        fit,
        fit_error,
        outputs: outputs.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
        config: cfg,
    };
    if let Some(dir) = out_dir {
        write_json(&dir.join("run.json"), &report)?;
    }
    Ok(RunOutcome {
        report,
        energy,
        profiles,
    })
}

pub(crate) fn write_json<T: Serialize>(path: &PathBuf, value: &T) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(f, value)?;
    Ok(())
}
