use std::path::PathBuf;

use serde_json::Value;
use stochpic::{Preset, ScenarioConfig};

fn golden(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.json"));
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn diff(path: &str, a: &Value, b: &Value, out: &mut Vec<String>) {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            for k in x.keys().chain(y.keys().filter(|k| !x.contains_key(*k))) {
                diff(
                    &format!("{path}.{k}"),
                    x.get(k).unwrap_or(&Value::Null),
                    y.get(k).unwrap_or(&Value::Null),
                    out,
                );
            }
        }
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if (x - y).abs() > 1e-12 * x.abs().max(1.0) {
                out.push(format!("{path}: {x} != {y}"));
            }
        }
        _ if a != b => out.push(format!("{path}: {a} != {b}")),
        _ => {}
    }
}

#[test]
fn paper_profiles_match_golden_files() {
    for preset in Preset::ALL.into_iter().filter(|p| *p != Preset::Custom) {
        let cfg = ScenarioConfig::preset_with_overrides(preset, &["profile=paper".into()]).unwrap();
        let resolved = serde_json::to_value(&cfg).unwrap();
        let mut out = Vec::new();
        diff(preset.name(), &resolved, &golden(preset.name()), &mut out);
        assert!(out.is_empty(), "{}", out.join("\n"));
    }
}

#[test]
fn golden_files_resolve_as_custom_configs() {
    for preset in Preset::ALL.into_iter().filter(|p| *p != Preset::Custom) {
        let mut doc = golden(preset.name());
        doc["preset"] = "custom".into();
        let cfg = ScenarioConfig::from_value(doc).unwrap();
        assert_eq!(
            cfg.particles,
            golden(preset.name())["particles"].as_u64().unwrap() as usize
        );
    }
}

#[test]
fn published_parameters() {
    let g = golden("landau-linear");
    assert_eq!(g["particles"], 10_000_000);
    assert_eq!(g["order"], 5);
    assert_eq!(g["initial"]["amplitude"]["offset"], 0.05);
    assert_eq!(g["initial"]["amplitude"]["slope"], 0.1);
    assert_eq!(g["initial"]["wave_number"], 0.5);
    let g = golden("landau-nonlinear");
    assert_eq!(g["particles"], 50_000_000);
    assert_eq!(g["initial"]["amplitude"]["offset"], 0.4);
    assert_eq!(g["initial"]["amplitude"]["slope"], 0.6);
    let g = golden("two-stream-linear");
    assert_eq!(g["initial"]["amplitude"]["offset"], 3e-3);
    assert_eq!(g["initial"]["amplitude"]["slope"], 4e-3);
    assert_eq!(g["initial"]["drift"], 2.4);
    assert_eq!(g["initial"]["wave_number"], 0.2);
    let g = golden("two-stream-nonlinear");
    assert_eq!(g["initial"]["temperature"]["offset"], 0.3);
    assert_eq!(g["initial"]["drift"], 0.99);
    assert!((g["domain"][1].as_f64().unwrap() - 13.0 * std::f64::consts::PI).abs() < 1e-12);
    let g = golden("sod-temperature");
    assert_eq!(g["dt"], 0.01);
    assert_eq!(g["t_final"], 0.15);
    assert_eq!(g["initial"]["temperature_left"]["slope"], 0.25);
    assert_eq!(g["initial"]["rho_right"], 0.125);
    assert_eq!(g["v_range"][1], 10.0);
    let g = golden("sod-interface");
    assert_eq!(g["initial"]["interface"]["offset"], 0.45);
    assert_eq!(g["initial"]["interface"]["slope"], 0.1);
    let g = golden("convergence-study");
    assert_eq!(g["convergence"]["reference_order"], 30);
    assert_eq!(g["particles"], 1_000_000);
    assert_eq!(g["initial"]["temperature"]["offset"], 0.8);
    assert_eq!(g["initial"]["temperature"]["slope"], 0.4);
}
