use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::observables::energy_at;

use super::config::ScenarioConfig;
use super::runner::{write_json, Simulation};

#[derive(Debug, Clone, Serialize)]
pub struct ConvergencePoint {
    pub order: usize,
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub config_hash: String,
    pub seed: u64,
    pub reference_order: usize,
    pub time: f64,
    pub points: Vec<ConvergencePoint>,
}

fn advanced(cfg: &ScenarioConfig, order: usize, nodes: Option<usize>, time: f64) -> Result<Simulation> {
    let mut c = cfg.clone();
    c.order = order;
    c.nodes = nodes;
    c.t_final = time;
    let mut sim = Simulation::new(c)?;
    sim.advance((time / cfg.dt).round() as usize)?;
    Ok(sim)
}

/// Field-energy error of each order against the reference order, measured in
/// the quadrature norm of the reference nodes.
pub fn run_convergence(cfg: &ScenarioConfig, out_dir: Option<&Path>) -> Result<ConvergenceReport> {
    let conv = cfg
        .convergence
        .as_ref()
        .ok_or_else(|| Error::Config("configuration has no convergence block".into()))?;
    let reference = advanced(cfg, conv.reference_order, None, conv.time)?;
    let nodes = reference.basis.nodes().to_vec();
    let weights = reference.basis.weights().to_vec();
    let ref_energy = nodes
        .iter()
        .map(|&z| energy_at(&reference.ensemble, &reference.basis, &reference.grid, z))
        .collect::<Result<Vec<f64>>>()?;

    let mut points = Vec::with_capacity(conv.orders.len());
    for &order in &conv.orders {
        let quad = conv.common_nodes.then(|| reference.basis.node_count());
        let sim = advanced(cfg, order, quad, conv.time)?;
        if sim.ensemble.seed != reference.ensemble.seed {
            return Err(Error::Invariant(format!(
                "order {order} ran with seed {} but the reference used {}",
                sim.ensemble.seed, reference.ensemble.seed
            )));
        }
        let mut sq = 0.0;
        for ((&z, &w), &e_ref) in nodes.iter().zip(&weights).zip(&ref_energy) {
            let e = energy_at(&sim.ensemble, &sim.basis, &sim.grid, z)?;
            sq += w * (e - e_ref).powi(2);
        }
        points.push(ConvergencePoint {
            order,
            error: sq.sqrt(),
        });
    }

    let report = ConvergenceReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        reference_order: conv.reference_order,
        time: conv.time,
        points,
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(File::create(dir.join("convergence.csv"))?);
        writeln!(w, "M,error")?;
        for p in &report.points {
            writeln!(w, "{},{:e}", p.order, p.error)?;
        }
        w.flush()?;
        write_json(&dir.join("convergence.json"), &report)?;
    }
    Ok(report)
}
