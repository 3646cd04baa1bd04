//! Benchmark fixtures.

use stochpic::{Preset, ScenarioConfig, Simulation};

/// Linear Landau setup with `particles` particles at chaos order `order`.
pub fn landau(particles: usize, order: usize, nu: f64) -> Simulation {
    let overrides = [
        format!("particles={particles}"),
        format!("order={order}"),
        format!("nu={nu}"),
    ];
    let cfg = ScenarioConfig::preset_with_overrides(Preset::LandauLinear, &overrides)
        .expect("benchmark configuration");
    Simulation::new(cfg).expect("benchmark simulation")
}
