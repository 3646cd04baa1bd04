use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::fields::Boundary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    LandauLinear,
    LandauNonlinear,
    TwoStreamLinear,
    TwoStreamNonlinear,
    SodTemperature,
    SodInterface,
    ConvergenceStudy,
    Custom,
}

/// `desk` runs fit on a workstation; `paper` uses the published particle counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    #[default]
    Desk,
    Paper,
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::LandauLinear,
        Preset::LandauNonlinear,
        Preset::TwoStreamLinear,
        Preset::TwoStreamNonlinear,
        Preset::SodTemperature,
        Preset::SodInterface,
        Preset::ConvergenceStudy,
        Preset::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::LandauLinear => "landau-linear",
            Preset::LandauNonlinear => "landau-nonlinear",
            Preset::TwoStreamLinear => "two-stream-linear",
            Preset::TwoStreamNonlinear => "two-stream-nonlinear",
            Preset::SodTemperature => "sod-temperature",
            Preset::SodInterface => "sod-interface",
            Preset::ConvergenceStudy => "convergence-study",
            Preset::Custom => "custom",
        }
    }

    pub fn from_name(name: &str) -> Option<Preset> {
        Preset::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn required_boundary(self) -> Option<Boundary> {
        match self {
            Preset::SodTemperature | Preset::SodInterface => Some(Boundary::Reflecting),
            Preset::Custom => None,
            _ => Some(Boundary::Periodic),
        }
    }
}

fn periodic_maxwellian(k: f64, amplitude: (f64, f64)) -> Value {
    json!({
        "kind": "perturbed-maxwellian",
        "wave_number": k,
        "amplitude": { "offset": amplitude.0, "slope": amplitude.1 },
        "temperature": { "offset": 1.0, "slope": 0.0 },
    })
}

fn two_stream(k: f64, amplitude: (f64, f64), temperature: f64, drift: f64) -> Value {
    json!({
        "kind": "two-stream",
        "wave_number": k,
        "amplitude": { "offset": amplitude.0, "slope": amplitude.1 },
        "temperature": { "offset": temperature, "slope": 0.0 },
        "drift": drift,
    })
}

fn sod(t_slope: f64, interface: (f64, f64)) -> Value {
    json!({
        "kind": "sod-riemann",
        "rho_left": 1.0,
        "rho_right": 0.125,
        "temperature_left": { "offset": 1.0, "slope": t_slope },
        "temperature_right": { "offset": 0.8, "slope": t_slope },
        "interface": { "offset": interface.0, "slope": interface.1 },
    })
}

/// Scale-dependent settings: particle count, chaos order and quadrature size.
fn scale(profile: Profile, desk: (f64, usize, Option<usize>), paper: (f64, usize)) -> Value {
    match profile {
        Profile::Desk => json!({ "particles": desk.0, "order": desk.1, "nodes": desk.2 }),
        Profile::Paper => json!({ "particles": paper.0, "order": paper.1, "nodes": null }),
    }
}

/// Default document of a preset. `nu` selects between amplitude laws where
/// the collisional variants of a test use a different one.
pub fn preset_defaults(preset: Preset, profile: Profile, nu: Option<f64>) -> Value {
    let mut v = match preset {
        Preset::LandauLinear => json!({
            "cells": 100, "dt": 0.1, "nu": 0.0,
            "t_final": if profile == Profile::Desk { 30.0 } else { 50.0 },
            "domain": [0.0, 4.0 * PI], "v_range": [-6.0, 6.0], "boundary": "periodic",
            "initial": periodic_maxwellian(0.5, (0.05, 0.1)),
            "fit": { "window": [0.0, 30.0], "mode": "damping" },
        }),
        Preset::LandauNonlinear => {
            let collisional = nu.is_some_and(|n| n > 0.0);
            let amplitude = if collisional { (0.2, 0.4) } else { (0.4, 0.6) };
            json!({
                "cells": 100, "dt": 0.1, "nu": 0.0, "t_final": 50.0,
                "domain": [0.0, 4.0 * PI], "v_range": [-6.0, 6.0], "boundary": "periodic",
                "initial": periodic_maxwellian(0.5, amplitude),
                "fit": { "window": [0.0, 15.0], "mode": "damping" },
                "output": { "dump_times": [10.0, 30.0, 50.0] },
            })
        }
        Preset::TwoStreamLinear => json!({
            "cells": 100, "dt": 0.1, "nu": 0.0,
            "t_final": if profile == Profile::Desk { 30.0 } else { 50.0 },
            "domain": [0.0, 10.0 * PI], "v_range": [-6.0, 6.0], "boundary": "periodic",
            "initial": two_stream(0.2, (3e-3, 4e-3), 1.0, 2.4),
            "fit": { "window": [5.0, 25.0], "mode": "growth" },
            "output": { "dump_times": [0.0, 20.0, 50.0] },
        }),
        Preset::TwoStreamNonlinear => json!({
            "cells": 100, "dt": 0.1, "nu": 0.0, "t_final": 20.0,
            "domain": [0.0, 13.0 * PI], "v_range": [-6.0, 6.0], "boundary": "periodic",
            "initial": two_stream(2.0 / 13.0, (4e-2, 2e-2), 0.3, 0.99),
            "output": { "dump_times": [0.0, 15.0, 20.0] },
        }),
        Preset::SodTemperature | Preset::SodInterface => {
            let initial = if preset == Preset::SodTemperature {
                sod(0.25, (0.5, 0.0))
            } else {
                sod(0.0, (0.45, 0.1))
            };
            json!({
                "cells": 100, "dt": 0.01, "nu": 1e3, "t_final": 0.15,
                "domain": [0.0, 1.0], "v_range": [-10.0, 10.0], "boundary": "reflecting",
                "initial": initial,
            })
        }
        Preset::ConvergenceStudy => {
            let (orders, reference): (Vec<usize>, usize) = match profile {
                Profile::Desk => ((1..=8).collect(), 12),
                Profile::Paper => ((1..=10).collect(), 30),
            };
            json!({
                "cells": 100, "dt": 0.1, "nu": 0.0, "t_final": 1.0,
                "domain": [0.0, 4.0 * PI], "v_range": [-6.0, 6.0], "boundary": "periodic",
                "initial": {
                    "kind": "gaussian-bump",
                    "center": 6.0,
                    "temperature": { "offset": 0.8, "slope": 0.4 },
                },
                "order": reference,
                "convergence": { "orders": orders, "reference_order": reference, "time": 1.0 },
            })
        }
        Preset::Custom => json!({}),
    };
    let sizes = match preset {
        Preset::LandauLinear => scale(profile, (1e5, 3, Some(8)), (1e7, 5)),
        Preset::LandauNonlinear => scale(profile, (1e5, 3, None), (5e7, 5)),
        Preset::TwoStreamLinear => scale(profile, (2e5, 3, None), (5e7, 5)),
        Preset::TwoStreamNonlinear => scale(profile, (1e5, 3, None), (5e7, 5)),
        Preset::SodTemperature | Preset::SodInterface => scale(profile, (2e5, 5, None), (1e7, 5)),
        Preset::ConvergenceStudy => match profile {
            Profile::Desk => json!({ "particles": 1e5 }),
            Profile::Paper => json!({ "particles": 1e6 }),
        },
        Preset::Custom => json!({}),
    };
    super::config::merge(&mut v, &sizes);
    v
}
