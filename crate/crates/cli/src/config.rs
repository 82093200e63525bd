//! Config files, state specifications and seed resolution.
//!
//! Precedence is flags, then the `--config` file, then `PARITY_SEED` (seed
//! only), then built-in defaults.

use std::path::Path;

use entgen_core::qstate::{DensityMatrix, StateJson};
use entgen_core::trajectory::{Scheme, SimConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SEED_ENV: &str = "PARITY_SEED";

pub const DEFAULT_K: f64 = 0.3;
pub const DEFAULT_STATE: &str = "mixed";
pub const DEFAULT_DURATION: f64 = 10.0;
pub const DEFAULT_RUNS: usize = 1000;
pub const DEFAULT_BIN_WIDTH: f64 = 0.2;
pub const DEFAULT_N_MAX: usize = 50;
pub const DEFAULT_SEED: u64 = 0;

/// Every key a config file may set. Each command reads the keys it needs and
/// ignores the rest; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<[[f64; 4]; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bin_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_angle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
}

impl ConfigFile {
    /// Read a config file. A run manifest is accepted too, in which case its
    /// resolved `config` object is used.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
        let value = match value.get("config") {
            Some(inner) if value.get("command").is_some() => inner.clone(),
            _ => value,
        };
        serde_json::from_value(value)
            .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))
    }
}

/// Master seed: flag, then config, then `PARITY_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

/// Parse `--state`: a preset name, four comma-separated Bell populations, or
/// a path to a state JSON file.
pub fn parse_state(spec: &str) -> Result<DensityMatrix, CliError> {
    if DensityMatrix::PRESETS.contains(&spec) {
        return DensityMatrix::preset(spec).map_err(|e| CliError::Usage(format!("--state: {e}")));
    }
    if spec.contains(',') {
        let p = parse_populations(spec)?;
        return DensityMatrix::diagonal(p).map_err(|e| CliError::Usage(format!("--state {spec}: {e}")));
    }
    let path = Path::new(spec);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("--state {spec}: {e}")))?;
        return DensityMatrix::from_json_str(&text).map_err(|e| CliError::Usage(format!("--state {spec}: {e}")));
    }
    Err(CliError::Usage(format!(
        "--state `{spec}` is neither a preset ({}), four comma-separated populations, nor an existing file",
        DensityMatrix::PRESETS.join(", ")
    )))
}

pub fn parse_populations(spec: &str) -> Result<[f64; 4], CliError> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(CliError::Usage(format!("--state expects four values, got {}", parts.len())));
    }
    let mut p = [0.0; 4];
    for (k, s) in parts.iter().enumerate() {
        p[k] = s
            .parse()
            .map_err(|_| CliError::Usage(format!("--state: `{s}` is not a number")))?;
    }
    Ok(p)
}

/// Simulation flags shared by `trajectory` and `ensemble`.
#[derive(Clone, Debug, Default)]
pub struct SimOverrides {
    pub k: Option<f64>,
    pub delta: Option<f64>,
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub seed: Option<u64>,
    pub scheme: Option<Scheme>,
    pub stride: Option<usize>,
    pub state: Option<String>,
}

/// Fully resolved simulation settings.
#[derive(Clone, Debug)]
pub struct ResolvedSim {
    pub cfg: SimConfig,
    pub state_spec: String,
    pub state: DensityMatrix,
}

impl ResolvedSim {
    pub fn resolve(flags: &SimOverrides, file: &ConfigFile) -> Result<Self, CliError> {
        let k = flags.k.or(file.k).unwrap_or(DEFAULT_K);
        let mut cfg = SimConfig::new(k);
        cfg.delta = flags.delta.or(file.delta).unwrap_or(cfg.delta);
        // The default step depends on K and Δ, so it is derived after both.
        cfg.dt = flags.dt.or(file.dt).unwrap_or_else(|| cfg.default_dt());
        cfg.duration = flags.duration.or(file.duration).unwrap_or(DEFAULT_DURATION);
        cfg.seed = resolve_seed(flags.seed, file.seed)?;
        cfg.scheme = flags.scheme.or(file.scheme).unwrap_or_default();
        cfg.stride = flags.stride.or(file.stride).unwrap_or(1);
        if let Some(g) = file.gamma {
            cfg.gamma = g;
        }
        cfg.validate().map_err(|e| CliError::Usage(config_message(&e)))?;
        let state_spec = flags
            .state
            .clone()
            .or_else(|| file.state.clone())
            .unwrap_or_else(|| DEFAULT_STATE.to_string());
        let state = parse_state(&state_spec)?;
        Ok(ResolvedSim { cfg, state_spec, state })
    }

    /// Config file equivalent of these settings.
    pub fn to_config(&self) -> ConfigFile {
        ConfigFile {
            k: Some(self.cfg.k_ratio),
            delta: Some(self.cfg.delta),
            dt: Some(self.cfg.dt),
            duration: Some(self.cfg.duration),
            seed: Some(self.cfg.seed),
            scheme: Some(self.cfg.scheme),
            stride: Some(self.cfg.stride),
            gamma: Some(self.cfg.gamma),
            state: Some(self.state_spec.clone()),
            ..ConfigFile::default()
        }
    }

    pub fn state_json(&self) -> StateJson {
        self.state.to_json(entgen_core::qstate::Basis::Bell)
    }
}

/// Name the offending flag in configuration errors.
fn config_message(e: &entgen_core::trajectory::ConfigError) -> String {
    use entgen_core::trajectory::ConfigError;
    match e {
        ConfigError::Invalid { field, .. } => {
            let flag = match *field {
                "k_ratio" => "--k",
                "delta" => "--delta",
                "dt" => "--dt",
                "duration" => "--duration",
                "stride" => "--stride",
                other => other,
            };
            format!("{flag}: {e}")
        }
        ConfigError::StepTooLarge { .. } => format!("--dt: {e}"),
        ConfigError::Gamma => format!("gamma (config file): {e}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let file = ConfigFile {
            k: Some(3.0),
            duration: Some(2.0),
            seed: Some(9),
            ..ConfigFile::default()
        };
        let flags = SimOverrides {
            duration: Some(1.0),
            ..SimOverrides::default()
        };
        let r = ResolvedSim::resolve(&flags, &file).unwrap();
        assert_eq!(r.cfg.k_ratio, 3.0);
        assert_eq!(r.cfg.duration, 1.0);
        assert_eq!(r.cfg.seed, 9);
        assert_eq!(r.cfg.dt, SimConfig::new(3.0).dt);
        assert_eq!(r.state_spec, DEFAULT_STATE);
    }

    #[test]
    fn state_specs() {
        assert_eq!(parse_state("bell-u4").unwrap(), DensityMatrix::bell_projector(3));
        let d = parse_state("0.1, 0.2, 0.3, 0.4").unwrap();
        assert_eq!(d.populations(), [0.1, 0.2, 0.3, 0.4]);
        assert!(matches!(parse_state("nope"), Err(CliError::Usage(_))));
        assert!(matches!(parse_state("0.5,0.5,0.5"), Err(CliError::Usage(_))));
    }

    #[test]
    fn invalid_values_name_the_flag() {
        let flags = SimOverrides {
            dt: Some(1.0),
            ..SimOverrides::default()
        };
        match ResolvedSim::resolve(&flags, &ConfigFile::default()) {
            Err(CliError::Usage(m)) => assert!(m.starts_with("--dt")),
            other => panic!("{other:?}"),
        }
        let flags = SimOverrides {
            k: Some(-1.0),
            ..SimOverrides::default()
        };
        match ResolvedSim::resolve(&flags, &ConfigFile::default()) {
            Err(CliError::Usage(m)) => assert!(m.starts_with("--k"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let r: Result<ConfigFile, _> = serde_json::from_str(r#"{"k": 1, "kk": 2}"#);
        assert!(r.is_err());
    }
}
