use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::collision::{BgkSampling, PoolMode};
use crate::error::{Error, Result};
use crate::fields::{Boundary, SpatialGrid};
use crate::gpc::{default_node_count, GpcBasis};
use crate::observables::{FitMode, VelocityGrid};
use crate::particles::{InitialCondition, Loading};
use crate::transport::{BoundaryRules, PeriodicRule, ReflectRule, Splitting, StepParams};

use super::presets::{preset_defaults, Preset, Profile};

/// Accepts integers and integral floats such as `1e5`.
fn count<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<usize, D::Error> {
    let v = f64::deserialize(d)?;
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 * 16.0 {
        Ok(v as usize)
    } else {
        Err(serde::de::Error::custom(format!(
            "expected a non-negative integer, got {v}"
        )))
    }
}

fn opt_count<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<usize>, D::Error> {
    Option::<f64>::deserialize(d)?
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(serde::de::Error::custom(format!(
                    "expected a non-negative integer, got {v}"
                )))
            }
        })
        .transpose()
}

fn counts<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<usize>, D::Error> {
    Vec::<f64>::deserialize(d)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(serde::de::Error::custom(format!(
                    "expected a non-negative integer, got {v}"
                )))
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Record the field energy every this many steps.
    #[serde(deserialize_with = "count")]
    pub energy_every: usize,
    /// Times at which moment and density dumps are written.
    pub dump_times: Vec<f64>,
    pub density: bool,
    pub field_dump: bool,
    pub snapshot: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            energy_every: 1,
            dump_times: Vec::new(),
            density: true,
            field_dump: false,
            snapshot: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub window: [f64; 2],
    pub mode: FitMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(deserialize_with = "counts")]
    pub orders: Vec<usize>,
    #[serde(deserialize_with = "count")]
    pub reference_order: usize,
    pub time: f64,
    /// Runs every order on the reference quadrature instead of `2 (M + 1)` nodes.
    #[serde(default)]
    pub common_nodes: bool,
}

/// A fully resolved run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub preset: Preset,
    pub profile: Profile,
    #[serde(deserialize_with = "count")]
    pub particles: usize,
    #[serde(deserialize_with = "count")]
    pub order: usize,
    /// Quadrature nodes; `2 (order + 1)` when absent.
    #[serde(default, deserialize_with = "opt_count")]
    pub nodes: Option<usize>,
    #[serde(deserialize_with = "count")]
    pub cells: usize,
    pub dt: f64,
    pub t_final: f64,
    pub nu: f64,
    pub domain: [f64; 2],
    pub v_range: [f64; 2],
    #[serde(deserialize_with = "count")]
    pub v_cells: usize,
    pub boundary: Boundary,
    pub initial: InitialCondition,
    pub seed: u64,
    pub loading: Loading,
    pub splitting: Splitting,
    pub pool_mode: PoolMode,
    pub bgk_sampling: BgkSampling,
    pub periodic_rule: PeriodicRule,
    pub reflect_rule: ReflectRule,
    #[serde(default)]
    pub suppress_field: bool,
    pub output: OutputConfig,
    #[serde(default)]
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub convergence: Option<ConvergenceConfig>,
}

/// Keys a custom configuration must provide.
pub const REQUIRED_CUSTOM: &[&str] = &[
    "particles",
    "order",
    "cells",
    "dt",
    "t_final",
    "nu",
    "domain",
    "v_range",
    "boundary",
    "initial",
];

/// Settings shared by every preset and filled in for custom runs.
pub(crate) fn common_defaults() -> Value {
    serde_json::json!({
        "v_cells": 200,
        "seed": 1,
        "loading": "quiet",
        "splitting": "strang",
        "pool_mode": "per-step",
        "bgk_sampling": "conservative",
        "periodic_rule": "shift",
        "reflect_rule": "fold",
        "output": serde_json::to_value(OutputConfig::default()).unwrap(),
    })
}

/// Recursively overlays `top` onto `base`. An `initial` block of a different
/// kind replaces the base block instead of merging into it.
pub fn merge(base: &mut Value, top: &Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => {
                        let replaces = k == "initial"
                            && v.get("kind").is_some_and(|kind| Some(kind) != slot.get("kind"));
                        if replaces {
                            *slot = v.clone();
                        } else {
                            merge(slot, v);
                        }
                    }
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, t) => *b = t.clone(),
    }
}

/// Sets a dotted key such as `initial.amplitude.slope`. The value is read as
/// JSON when it parses, otherwise as a string.
pub fn set_override(target: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override `{assignment}` has an empty key")));
    }
    let value =
        serde_json::from_str::<Value>(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut cur = target;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !cur.is_object() {
            *cur = Value::Object(Map::new());
        }
        let obj = cur.as_object_mut().unwrap();
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

impl ScenarioConfig {
    /// Resolves a user document: preset defaults, then the user's keys on top.
    pub fn from_value(user: Value) -> Result<Self> {
        let obj = user
            .as_object()
            .ok_or_else(|| Error::Config("configuration must be a JSON object".into()))?;
        let preset: Preset = match obj.get("preset") {
            Some(v) => {
                serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("preset: {e}")))?
            }
            None => Preset::Custom,
        };
        let profile: Profile = match obj.get("profile") {
            Some(v) => {
                serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("profile: {e}")))?
            }
            None => Profile::Desk,
        };
        if preset == Preset::Custom {
            let missing: Vec<&str> = REQUIRED_CUSTOM
                .iter()
                .copied()
                .filter(|k| !obj.contains_key(*k))
                .collect();
            if !missing.is_empty() {
                return Err(Error::Config(format!(
                    "custom configuration is missing required fields: {}",
                    missing.join(", ")
                )));
            }
        }
        let user_nu = obj.get("nu").and_then(Value::as_f64);
        let mut resolved = common_defaults();
        merge(&mut resolved, &preset_defaults(preset, profile, user_nu));
        merge(&mut resolved, &user);
        resolved["preset"] = serde_json::to_value(preset)?;
        resolved["profile"] = serde_json::to_value(profile)?;
        if obj.contains_key("order") && !obj.contains_key("nodes") {
            resolved["nodes"] = Value::Null;
        }
        let user_dumps = obj.get("output").is_some_and(|o| o.get("dump_times").is_some());
        if !user_dumps {
            if let Some(t_final) = resolved.get("t_final").and_then(Value::as_f64) {
                let mut dumps: Vec<f64> = resolved["output"]["dump_times"]
                    .as_array()
                    .map(|a| {
                        a.iter()
                            .filter_map(Value::as_f64)
                            .filter(|t| *t < t_final)
                            .collect()
                    })
                    .unwrap_or_default();
                dumps.push(t_final);
                resolved["output"]["dump_times"] = serde_json::to_value(dumps)?;
            }
        }
        let cfg: ScenarioConfig =
            serde_json::from_value(resolved).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        Self::from_value(v)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Preset defaults with `key=value` overrides applied.
    pub fn preset_with_overrides(preset: Preset, overrides: &[String]) -> Result<Self> {
        let mut user = serde_json::json!({ "preset": preset });
        for o in overrides {
            set_override(&mut user, o)?;
        }
        Self::from_value(user)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.unwrap_or_else(|| default_node_count(self.order))
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_final >= self.dt) {
            return bad(format!(
                "t_final = {} must be at least dt = {}",
                self.t_final, self.dt
            ));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return bad(format!("nu = {} must be non-negative", self.nu));
        }
        if self.particles < 2 {
            return bad("particles must be at least 2".into());
        }
        if self.cells == 0 || self.v_cells == 0 {
            return bad("cells and v_cells must be at least 1".into());
        }
        if self.node_count() < self.order + 1 {
            return bad(format!(
                "nodes = {} must be at least order + 1 = {}",
                self.node_count(),
                self.order + 1
            ));
        }
        if self.output.energy_every == 0 {
            return bad("output.energy_every must be at least 1".into());
        }
        if let Some(t) = self
            .output
            .dump_times
            .iter()
            .find(|t| !(**t >= 0.0 && **t <= self.t_final + 0.5 * self.dt))
        {
            return bad(format!("dump time {t} outside [0, t_final]"));
        }
        if let Some(f) = &self.fit {
            if !(f.window[1] > f.window[0]) {
                return bad(format!("fit window [{}, {}] is empty", f.window[0], f.window[1]));
            }
        }
        if let Some(c) = &self.convergence {
            if c.orders.is_empty() {
                return bad("convergence.orders is empty".into());
            }
            if let Some(m) = c.orders.iter().find(|m| **m >= c.reference_order) {
                return bad(format!(
                    "convergence order {m} is not below the reference order {}",
                    c.reference_order
                ));
            }
            if !(c.time >= self.dt) {
                return bad(format!("convergence.time = {} must be at least dt", c.time));
            }
        }
        if let Some(required) = self.preset.required_boundary() {
            if self.boundary != required {
                return bad(format!(
                    "preset {} requires {:?} boundaries",
                    self.preset.name(),
                    required
                ));
            }
        }
        let grid = self.grid()?;
        self.velocity_grid()?;
        self.initial.validate((0.0, 1.0), &grid)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.domain[0], self.domain[1], self.cells, self.boundary)
    }

    pub fn velocity_grid(&self) -> Result<VelocityGrid> {
        VelocityGrid::new(self.v_range[0], self.v_range[1], self.v_cells)
    }

    pub fn basis(&self) -> Result<GpcBasis> {
        GpcBasis::new(self.order, (0.0, 1.0), self.node_count())
    }

    pub fn step_params(&self) -> StepParams {
        StepParams {
            dt: self.dt,
            nu: self.nu,
            splitting: self.splitting,
            boundary: BoundaryRules {
                periodic: self.periodic_rule,
                reflect: self.reflect_rule,
            },
            pool_mode: self.pool_mode,
            sampling: self.bgk_sampling,
            field_off: self.suppress_field,
        }
    }

    /// SHA-256 of the canonical JSON echo.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
