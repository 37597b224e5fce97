//! Experiment configuration.
//!
//! A config is a TOML document. Every section is optional and falls back to
//! the defaults below; dotted-key overrides (`model.omega=2`) are applied to
//! the parsed document before it is deserialized, so they follow exactly the
//! same typing and validation rules as the file.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nls_core::evolve::EvolveOptions;
use nls_core::field::{sidecar_path, SnapshotHeader};
use nls_core::ground_state::GroundStateOptions;
use nls_core::{Grid, ModelParams};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{config_err, LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Ground,
    Evolve,
    Instability,
    Verify,
    Sweep,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Ground => "ground",
            Command::Evolve => "evolve",
            Command::Instability => "instability",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub output: PathBuf,
    pub seed: u64,
    pub grid: GridConfig,
    pub model: ModelConfig,
    pub ground: GroundStateOptions,
    pub evolve: EvolveOptions,
    pub initial: InitialCondition,
    pub instability: InstabilityConfig,
    pub verify: VerifyConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            command: Command::Verify,
            output: PathBuf::from("out"),
            seed: 0,
            grid: GridConfig::default(),
            model: ModelConfig::default(),
            ground: GroundStateOptions::default(),
            evolve: EvolveOptions::default(),
            initial: InitialCondition::default(),
            instability: InstabilityConfig::default(),
            verify: VerifyConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// Periodic box; the last axis is the confined one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub points: Vec<usize>,
    pub half_lengths: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            points: vec![256, 256],
            half_lengths: vec![8.0, 8.0],
        }
    }
}

impl GridConfig {
    pub fn n_dims(&self) -> usize {
        self.points.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub p: f64,
    pub omega: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { p: 5.0, omega: 1.0 }
    }
}

/// Initial datum of the `evolve` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialCondition {
    /// `amplitude · exp(-Σ x_j² / (2 w_j²))`; empty `widths` means 1 on every axis.
    Gaussian {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default)]
        widths: Vec<f64>,
    },
    /// A `.fld` snapshot; it carries its own grid.
    Snapshot { path: PathBuf },
    /// `scale · φ_ω` for the configured model and grid.
    Ground {
        #[serde(default = "one")]
        scale: f64,
    },
}

fn default_amplitude() -> f64 {
    0.1
}

fn one() -> f64 {
    1.0
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Gaussian {
            amplitude: default_amplitude(),
            widths: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstabilityConfig {
    /// Amplitude factor applied to the ground state.
    pub lambda: f64,
}

impl Default for InstabilityConfig {
    fn default() -> Self {
        InstabilityConfig { lambda: 1.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Random fields for the functional identities.
    pub fields: usize,
    /// Random fields for the gap inequality.
    pub gap_fields: usize,
    /// Length and cadence of the smooth run used for the virial check.
    pub virial_t_end: f64,
    pub virial_sample_every: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            fields: 50,
            gap_fields: 100,
            virial_t_end: 0.2,
            virial_sample_every: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Omega,
    Lambda,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub command: Command,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            command: Command::Instability,
            parameter: SweepParameter::Lambda,
            values: vec![1.05, 1.1, 1.2, 1.5],
        }
    }
}

impl ExperimentConfig {
    /// Reads `path` (if any), applies `overrides` in order and validates.
    pub fn resolve(
        path: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<ExperimentConfig> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?;
                text.parse::<Table>()
                    .map_err(|e| config_err(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        for (key, raw) in overrides {
            apply_override(&mut table, key, raw)?;
        }
        let cfg = Self::from_table(table)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig> {
        let table = text.parse::<Table>().map_err(config_err)?;
        Self::from_table(table)
    }

    fn from_table(table: Table) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = Value::Table(table.clone()).try_into().map_err(config_err)?;
        // nested option structs accept unknown keys; catch typos by comparing
        // the input against the fully resolved document
        let resolved = cfg.to_table()?;
        if let Some(key) = first_unknown_key(&table, &resolved, "") {
            return Err(config_err(format!("unknown key `{key}`")));
        }
        Ok(cfg)
    }

    pub fn to_table(&self) -> Result<Table> {
        Table::try_from(self).map_err(config_err)
    }

    /// The resolved config as TOML, echoed into every output directory.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(config_err)
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.grid.n_dims(), self.model.p, self.model.omega).map_err(config_err)
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>> {
        Grid::new(
            self.grid.n_dims(),
            &self.grid.points,
            &self.grid.half_lengths,
        )
        .map_err(config_err)
    }

    pub fn validate(&self) -> Result<()> {
        self.build_grid()?;
        let params = self.params()?;
        self.ground
            .validate(self.grid.n_dims())
            .map_err(|e| config_err(format!("[ground] {e}")))?;
        self.evolve
            .validate()
            .map_err(|e| config_err(format!("[evolve] {e}")))?;
        match self.command {
            Command::Ground => {}
            Command::Evolve => self.validate_initial()?,
            Command::Instability => self.validate_instability(&params)?,
            Command::Verify => self.validate_verify()?,
            Command::Sweep => self.validate_sweep()?,
        }
        Ok(())
    }

    fn validate_initial(&self) -> Result<()> {
        let n = self.grid.n_dims();
        match &self.initial {
            InitialCondition::Gaussian { amplitude, widths } => {
                if !amplitude.is_finite() {
                    return Err(config_err("[initial] amplitude must be finite"));
                }
                if !(widths.is_empty() || widths.len() == n) {
                    return Err(config_err(format!(
                        "[initial] widths has {} entries, the grid has {n} axes",
                        widths.len()
                    )));
                }
                if widths.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                    return Err(config_err("[initial] widths must be positive"));
                }
            }
            InitialCondition::Snapshot { path } => {
                if !path.is_file() {
                    return Err(config_err(format!(
                        "[initial] snapshot {} does not exist",
                        path.display()
                    )));
                }
                let side = sidecar_path(path);
                let header: SnapshotHeader = fs::read(&side)
                    .map_err(|e| {
                        config_err(format!("[initial] cannot read {}: {e}", side.display()))
                    })
                    .and_then(|b| serde_json::from_slice(&b).map_err(config_err))?;
                if header.n_dims != n {
                    return Err(config_err(format!(
                        "[initial] snapshot is {}-dimensional, the grid has {n} axes",
                        header.n_dims
                    )));
                }
            }
            InitialCondition::Ground { scale } => {
                if !scale.is_finite() {
                    return Err(config_err("[initial] scale must be finite"));
                }
            }
        }
        Ok(())
    }

    fn validate_instability(&self, params: &ModelParams) -> Result<()> {
        if !params.instability_regime() {
            let n = params.n_dims() as f64;
            return Err(config_err(format!(
                "instability needs p ≥ 1 + 4/(N-1) = {}; got p={} with N={}",
                1.0 + 4.0 / (n - 1.0),
                params.p(),
                params.n_dims()
            )));
        }
        let lambda = self.instability.lambda;
        if !(lambda > 1.0 && lambda.is_finite()) {
            return Err(config_err(format!(
                "[instability] lambda={lambda} must exceed 1"
            )));
        }
        Ok(())
    }

    fn validate_verify(&self) -> Result<()> {
        let v = &self.verify;
        if v.fields == 0 {
            return Err(config_err("[verify] fields must be at least 1"));
        }
        if !(v.virial_sample_every > 0.0 && v.virial_t_end >= 4.0 * v.virial_sample_every) {
            return Err(config_err(
                "[verify] virial_t_end must cover at least five samples of virial_sample_every",
            ));
        }
        self.validate_initial()
    }

    fn validate_sweep(&self) -> Result<()> {
        let s = &self.sweep;
        if matches!(s.command, Command::Sweep | Command::Verify) {
            return Err(config_err(format!(
                "[sweep] cannot sweep the `{}` command",
                s.command
            )));
        }
        if s.parameter == SweepParameter::Lambda && s.command != Command::Instability {
            return Err(config_err(
                "[sweep] parameter `lambda` only applies to `instability`",
            ));
        }
        if s.values.is_empty() {
            return Err(config_err("[sweep] values is empty"));
        }
        for &v in &s.values {
            self.sweep_point(v)?.validate()?;
        }
        Ok(())
    }

    /// The config of one sweep point, writing into its own subdirectory.
    pub fn sweep_point(&self, value: f64) -> Result<ExperimentConfig> {
        let mut c = self.clone();
        c.command = self.sweep.command;
        let name = match self.sweep.parameter {
            SweepParameter::Omega => {
                c.model.omega = value;
                format!("omega_{value}")
            }
            SweepParameter::Lambda => {
                c.instability.lambda = value;
                format!("lambda_{value}")
            }
        };
        c.output = self.output.join(name);
        Ok(c)
    }
}

/// Sets `dotted.key` to `raw`, read as a TOML value when it parses as one
/// and as a bare string otherwise.
pub fn apply_override(table: &mut Table, key: &str, raw: &str) -> Result<()> {
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(config_err(format!("malformed override key `{key}`")));
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut node = table;
    for p in parents {
        let entry = node
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("override `{key}`: `{p}` is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

/// Parses `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String), LabError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{s}` is not of the form key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn first_unknown_key(input: &Table, resolved: &Table, prefix: &str) -> Option<String> {
    for (k, v) in input {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match (v, resolved.get(k)) {
            (_, None) => return Some(path),
            (Value::Table(a), Some(Value::Table(b))) => {
                if let Some(bad) = first_unknown_key(a, b, &path) {
                    return Some(bad);
                }
            }
            _ => {}
        }
    }
    None
}
