//! Flat key-value run configuration.
//!
//! The format is line-oriented: `[section]` headers, `key = value` pairs,
//! `#` comments. Every key has a default; `schema` is the one required key.
//! Unknown keys are errors in strict mode and warnings otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{RunOptions, StepControl, StopCriteria};
use crate::initial::{FShape, PhiFn, SeedParams};

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloatFormat {
    /// shortest round-trip decimal
    Decimal,
    /// raw IEEE-754 bits as 16 hex digits, for bitwise replay checks
    Hex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema: u32,
    // [seed]
    pub f_shape: String,
    pub length: f64,
    pub cap_fraction: f64,
    pub alpha: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub phi_fn: String,
    pub bump_width: f64,
    // [grid]
    pub nodes: usize,
    // [stepping]
    pub cfl: f64,
    pub curvature_guard: f64,
    pub mu_stop_fraction: f64,
    pub dt_floor: f64,
    pub t_max_factor: f64,
    pub remesh_ratio: f64,
    pub remesh_enabled: bool,
    pub record_stride: usize,
    pub snapshot_mu_ratio: f64,
    // [blowup]
    pub frames: usize,
    pub mu_last_fraction: f64,
    pub window: f64,
    // [soliton]
    pub r_min: f64,
    pub r_max: f64,
    pub soliton_nodes: usize,
    pub chi: f64,
    // [output]
    pub float_format: FloatFormat,
    pub checkpoint_stride: u64,
    pub tag: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema: CONFIG_SCHEMA,
            f_shape: "half_sine".into(),
            length: std::f64::consts::PI,
            cap_fraction: 0.25,
            alpha: 1.0,
            delta: 0.5,
            epsilon: 0.05,
            phi_fn: "constant".into(),
            bump_width: 0.5,
            nodes: 1024,
            cfl: 0.2,
            curvature_guard: 2.5e-3,
            mu_stop_fraction: 0.02,
            dt_floor: 1e-12,
            t_max_factor: 2.5,
            remesh_ratio: 10.0,
            remesh_enabled: true,
            record_stride: 25,
            snapshot_mu_ratio: 0.985,
            frames: 5,
            mu_last_fraction: 0.1,
            window: 5.0,
            r_min: -10.0,
            r_max: 10.0,
            soliton_nodes: 4096,
            chi: 0.0,
            float_format: FloatFormat::Decimal,
            checkpoint_stride: 0,
            tag: "default".into(),
        }
    }
}

impl RunConfig {
    pub fn seed_params(&self) -> Result<SeedParams> {
        let f_shape = match self.f_shape.as_str() {
            "half_sine" => FShape::HalfSine {
                length: self.length,
            },
            "plateau" => FShape::Plateau {
                length: self.length,
                cap_fraction: self.cap_fraction,
            },
            other => {
                return Err(Error::Config(format!(
                    "seed.f_shape = {other:?} (expected half_sine or plateau)"
                )))
            }
        };
        let phi_fn = match self.phi_fn.as_str() {
            "constant" => PhiFn::Constant,
            "bump" => PhiFn::Bump {
                width_fraction: self.bump_width,
            },
            other => {
                return Err(Error::Config(format!(
                    "seed.phi_fn = {other:?} (expected constant or bump)"
                )))
            }
        };
        Ok(SeedParams {
            f_shape,
            alpha: self.alpha,
            delta: self.delta,
            epsilon: self.epsilon,
            phi_fn,
        })
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            control: StepControl {
                cfl: self.cfl,
                curvature_guard: self.curvature_guard,
            },
            stop: StopCriteria {
                mu_stop_fraction: self.mu_stop_fraction,
                dt_floor: self.dt_floor,
                t_max_factor: self.t_max_factor,
            },
            record_stride: self.record_stride,
            snapshot_mu_ratio: self.snapshot_mu_ratio,
            remesh_ratio: self.remesh_ratio,
            remesh_enabled: self.remesh_enabled,
            delta: self.delta,
            require_closeness: true,
        }
    }

    fn check(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::Config(format!(
                "schema = {} not supported (this build reads schema {CONFIG_SCHEMA})",
                self.schema
            )));
        }
        let positives = [
            ("seed.length", self.length),
            ("seed.alpha", self.alpha),
            ("seed.delta", self.delta),
            ("stepping.cfl", self.cfl),
            ("stepping.mu_stop_fraction", self.mu_stop_fraction),
            ("stepping.dt_floor", self.dt_floor),
            ("stepping.t_max_factor", self.t_max_factor),
            ("stepping.snapshot_mu_ratio", self.snapshot_mu_ratio),
            ("blowup.mu_last_fraction", self.mu_last_fraction),
            ("blowup.window", self.window),
        ];
        for (name, v) in positives {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        if self.epsilon < 0.0 || self.epsilon >= 1.0 {
            return Err(Error::Config(format!(
                "seed.epsilon = {} must lie in [0, 1)",
                self.epsilon
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("stepping.record_stride must be >= 1".into()));
        }
        if self.remesh_ratio <= 1.0 {
            return Err(Error::Config(format!(
                "stepping.remesh_ratio = {} must exceed 1",
                self.remesh_ratio
            )));
        }
        if !(self.r_min < self.r_max) {
            return Err(Error::Config(format!(
                "soliton.r_min = {} must be below soliton.r_max = {}",
                self.r_min, self.r_max
            )));
        }
        Ok(())
    }
}

/// Parse a config document. Returns the config plus warnings (non-strict
/// unknown keys; constant phi with positive epsilon is reported later by
/// the validation path).
pub fn parse_config(text: &str, strict: bool) -> Result<(RunConfig, Vec<String>)> {
    let mut cfg = RunConfig::default();
    let mut warnings = Vec::new();
    let mut section = String::new();
    let mut saw_schema = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected `key = value`, got {raw:?}",
                lineno + 1
            )));
        };
        let key = key.trim();
        let value = value.trim();
        let full = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };

        macro_rules! num {
            ($t:ty) => {
                value.parse::<$t>().map_err(|_| {
                    Error::Config(format!(
                        "line {}: {full} = {value:?} is not a valid number",
                        lineno + 1
                    ))
                })?
            };
        }

        match full.as_str() {
            "schema" => {
                cfg.schema = num!(u32);
                saw_schema = true;
            }
            "seed.f_shape" => cfg.f_shape = value.to_string(),
            "seed.length" => cfg.length = num!(f64),
            "seed.cap_fraction" => cfg.cap_fraction = num!(f64),
            "seed.alpha" => cfg.alpha = num!(f64),
            "seed.delta" => cfg.delta = num!(f64),
            "seed.epsilon" => cfg.epsilon = num!(f64),
            "seed.phi_fn" => cfg.phi_fn = value.to_string(),
            "seed.bump_width" => cfg.bump_width = num!(f64),
            "grid.nodes" => cfg.nodes = num!(usize),
            "stepping.cfl" => cfg.cfl = num!(f64),
            "stepping.curvature_guard" => cfg.curvature_guard = num!(f64),
            "stepping.mu_stop_fraction" => cfg.mu_stop_fraction = num!(f64),
            "stepping.dt_floor" => cfg.dt_floor = num!(f64),
            "stepping.t_max_factor" => cfg.t_max_factor = num!(f64),
            "stepping.remesh_ratio" => cfg.remesh_ratio = num!(f64),
            "stepping.remesh_enabled" => {
                cfg.remesh_enabled = value.parse::<bool>().map_err(|_| {
                    Error::Config(format!("line {}: {full} = {value:?} is not a bool", lineno + 1))
                })?
            }
            "stepping.record_stride" => cfg.record_stride = num!(usize),
            "stepping.snapshot_mu_ratio" => cfg.snapshot_mu_ratio = num!(f64),
            "blowup.frames" => cfg.frames = num!(usize),
            "blowup.mu_last_fraction" => cfg.mu_last_fraction = num!(f64),
            "blowup.window" => cfg.window = num!(f64),
            "soliton.r_min" => cfg.r_min = num!(f64),
            "soliton.r_max" => cfg.r_max = num!(f64),
            "soliton.nodes" => cfg.soliton_nodes = num!(usize),
            "soliton.chi" => cfg.chi = num!(f64),
            "output.float_format" => {
                cfg.float_format = match value {
                    "decimal" => FloatFormat::Decimal,
                    "hex" => FloatFormat::Hex,
                    other => {
                        return Err(Error::Config(format!(
                            "line {}: output.float_format = {other:?} (expected decimal or hex)",
                            lineno + 1
                        )))
                    }
                }
            }
            "output.checkpoint_stride" => cfg.checkpoint_stride = num!(u64),
            "output.tag" => cfg.tag = value.to_string(),
            _ => {
                let msg = format!("line {}: unknown key {full:?}", lineno + 1);
                if strict {
                    return Err(Error::Config(msg));
                }
                warnings.push(msg);
            }
        }
    }

    if !saw_schema {
        return Err(Error::Config("missing required key: schema".into()));
    }
    cfg.check()?;
    cfg.seed_params()?;
    Ok((cfg, warnings))
}

/// Canonical serialization; parsing it back yields an identical RunConfig.
pub fn serialize_config(cfg: &RunConfig) -> String {
    let b = |v: bool| if v { "true" } else { "false" };
    format!(
        "schema = {}\n\n\
         [seed]\n\
         f_shape = {}\n\
         length = {}\n\
         cap_fraction = {}\n\
         alpha = {}\n\
         delta = {}\n\
         epsilon = {}\n\
         phi_fn = {}\n\
         bump_width = {}\n\n\
         [grid]\n\
         nodes = {}\n\n\
         [stepping]\n\
         cfl = {}\n\
         curvature_guard = {}\n\
         mu_stop_fraction = {}\n\
         dt_floor = {}\n\
         t_max_factor = {}\n\
         remesh_ratio = {}\n\
         remesh_enabled = {}\n\
         record_stride = {}\n\
         snapshot_mu_ratio = {}\n\n\
         [blowup]\n\
         frames = {}\n\
         mu_last_fraction = {}\n\
         window = {}\n\n\
         [soliton]\n\
         r_min = {}\n\
         r_max = {}\n\
         nodes = {}\n\
         chi = {}\n\n\
         [output]\n\
         float_format = {}\n\
         checkpoint_stride = {}\n\
         tag = {}\n",
        cfg.schema,
        cfg.f_shape,
        cfg.length,
        cfg.cap_fraction,
        cfg.alpha,
        cfg.delta,
        cfg.epsilon,
        cfg.phi_fn,
        cfg.bump_width,
        cfg.nodes,
        cfg.cfl,
        cfg.curvature_guard,
        cfg.mu_stop_fraction,
        cfg.dt_floor,
        cfg.t_max_factor,
        cfg.remesh_ratio,
        b(cfg.remesh_enabled),
        cfg.record_stride,
        cfg.snapshot_mu_ratio,
        cfg.frames,
        cfg.mu_last_fraction,
        cfg.window,
        cfg.r_min,
        cfg.r_max,
        cfg.soliton_nodes,
        cfg.chi,
        match cfg.float_format {
            FloatFormat::Decimal => "decimal",
            FloatFormat::Hex => "hex",
        },
        cfg.checkpoint_stride,
        cfg.tag,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let (cfg, warnings) = parse_config("schema = 1\n", true).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert!(warnings.is_empty());
    }

    #[test]
    fn missing_schema_is_an_error() {
        let err = parse_config("[grid]\nnodes = 64\n", true).unwrap_err();
        assert!(err.to_string().contains("schema"), "{err}");
    }

    #[test]
    fn unknown_key_strict_vs_lenient() {
        let text = "schema = 1\n[grid]\nnodez = 12\n";
        assert!(parse_config(text, true).is_err());
        let (_, warnings) = parse_config(text, false).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("grid.nodez"));
    }

    #[test]
    fn seed_constraint_violation_rejected_downstream() {
        let text = "schema = 1\n[seed]\nalpha = 1.2\ndelta = 1.0\n";
        let (cfg, _) = parse_config(text, true).unwrap();
        let params = cfg.seed_params().unwrap();
        let grid = crate::grid::SpatialGrid::new(129).unwrap();
        let err = params.validate(&grid).unwrap_err();
        assert!(err.to_string().contains("A^2/2"), "{err}");
    }

    #[test]
    fn round_trip_is_identity() {
        let mut cfg = RunConfig::default();
        cfg.epsilon = 0.037;
        cfg.nodes = 777;
        cfg.float_format = FloatFormat::Hex;
        cfg.tag = "replay-7".into();
        cfg.dt_floor = 3.25e-13;
        let text = serialize_config(&cfg);
        let (again, warnings) = parse_config(&text, true).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(cfg, again);
        assert_eq!(text, serialize_config(&again));
    }
}
