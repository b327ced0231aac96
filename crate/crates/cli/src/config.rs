//! Experiment configuration: one JSON object per run, validated per command.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use shiftcompact::decompose::PeelParams;
use shiftcompact::family::PairKernel;
use shiftcompact::grid::{gaussian_measure, Collection, DiscreteMeasure, GridSpec};
use shiftcompact::pekar::PekarParams;
use shiftcompact::rate::TestPotential;

pub const COMMANDS: [&str; 9] = [
    "metric",
    "peel",
    "rate",
    "pekar",
    "fk-check",
    "khasminskii",
    "tilt",
    "tube",
    "free-energy",
];

pub const STOCHASTIC: [&str; 5] = ["fk-check", "khasminskii", "tilt", "tube", "free-energy"];

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: String,
    #[serde(default = "empty_object")]
    pub params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

/// Validation failure, carrying the JSON path of the offending field.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<shiftcompact::Error> for ConfigError {
    fn from(e: shiftcompact::Error) -> Self {
        ConfigError(e.to_string())
    }
}

pub type CfgResult<T> = std::result::Result<T, ConfigError>;

/// Deserialize with the failing field path in the message.
pub fn parse_at<T: DeserializeOwned>(v: &Value, prefix: &str) -> CfgResult<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        let at = if path == "." {
            prefix.to_string()
        } else {
            format!("{prefix}.{path}")
        };
        ConfigError(format!("{at}: {}", e.into_inner()))
    })
}

impl FromStr for ExperimentConfig {
    type Err = ConfigError;

    fn from_str(s: &str) -> CfgResult<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| ConfigError(format!("config: {e}")))?;
        let cfg: ExperimentConfig = parse_at(&v, "config")?;
        cfg.check_shape()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    pub fn check_shape(&self) -> CfgResult<()> {
        if !COMMANDS.contains(&self.command.as_str()) {
            return Err(ConfigError(format!(
                "config.command: unknown command `{}`, expected one of {}",
                self.command,
                COMMANDS.join(", ")
            )));
        }
        if STOCHASTIC.contains(&self.command.as_str()) && self.seed.is_none() {
            return Err(ConfigError(format!("config.seed: required for `{}`", self.command)));
        }
        if !self.params.is_object() {
            return Err(ConfigError("config.params: expected an object".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    pub dim: usize,
    pub variance: f64,
    pub spacing: f64,
    pub half_cells: usize,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default)]
    pub mean: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

/// A measure given as a file path, a generated Gaussian, or inline weights.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureSource {
    Path(PathBuf),
    Gaussian { gaussian: GaussianSpec },
    Inline(DiscreteMeasure),
}

impl MeasureSource {
    pub fn load(&self, base: &Path) -> CfgResult<DiscreteMeasure> {
        match self {
            MeasureSource::Path(p) => {
                let s = read(base, p)?;
                Ok(DiscreteMeasure::from_json_str(&s)?)
            }
            MeasureSource::Gaussian { gaussian: g } => {
                let grid = GridSpec::centered(g.dim, g.half_cells, g.spacing)?;
                let mean = g.mean.clone().unwrap_or_else(|| vec![0.0; g.dim]);
                Ok(gaussian_measure(&grid, &mean, g.variance, g.mass)?.0)
            }
            MeasureSource::Inline(m) => Ok(m.clone()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CollectionSource {
    Path(PathBuf),
    Inline { components: Vec<MeasureSource> },
}

impl CollectionSource {
    pub fn load(&self, base: &Path) -> CfgResult<Collection> {
        match self {
            CollectionSource::Path(p) => Ok(Collection::from_json_str(&read(base, p)?)?),
            CollectionSource::Inline { components } => {
                let ms = components.iter().map(|c| c.load(base)).collect::<CfgResult<Vec<_>>>()?;
                Ok(Collection::new(ms)?)
            }
        }
    }
}

fn read(base: &Path, p: &Path) -> CfgResult<String> {
    let full = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    std::fs::read_to_string(&full).map_err(|e| ConfigError(format!("{}: {e}", full.display())))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricCmd {
    pub a: CollectionSource,
    pub b: CollectionSource,
    #[serde(default = "default_r_max")]
    pub r_max: u64,
}

fn default_r_max() -> u64 {
    64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeelCmd {
    pub measure: MeasureSource,
    #[serde(default)]
    pub peel: PeelParams,
    #[serde(default = "default_kernel")]
    pub kernel: PairKernel,
}

fn default_kernel() -> PairKernel {
    PairKernel::Coulomb { eps: 0.1 }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateCmd {
    pub measure: MeasureSource,
    #[serde(default)]
    pub dual: bool,
    /// Bump centers for the dual sweep; the origin when absent.
    #[serde(default)]
    pub centers: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PekarCmd {
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default)]
    pub solver: PekarParams,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FkCmd {
    pub potential: TestPotential,
    #[serde(default = "three")]
    pub dim: usize,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default = "default_fk_dt")]
    pub dt: f64,
}

fn three() -> usize {
    3
}

fn default_paths() -> usize {
    100_000
}

fn default_fk_dt() -> f64 {
    0.01
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KhasminskiiCmd {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default = "default_khas_dt")]
    pub dt: f64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
}

fn default_lambda() -> f64 {
    0.05
}

fn default_khas_dt() -> f64 {
    1e-3
}

/// Tilted-chain settings shared by `tilt` and `tube`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainCmd {
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default = "default_bridge")]
    pub bridge_weight: f64,
    #[serde(default = "default_pivot")]
    pub pivot_weight: f64,
    #[serde(default = "default_sweeps")]
    pub n_sweeps: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
}

impl Default for ChainCmd {
    fn default() -> Self {
        parse_at(&empty_object(), "chain").expect("all fields have defaults")
    }
}

fn default_eps() -> f64 {
    0.1
}
fn default_bridge() -> f64 {
    0.8
}
fn default_pivot() -> f64 {
    0.2
}
fn default_sweeps() -> usize {
    400
}
fn default_burn_in() -> usize {
    100
}
fn default_thin() -> usize {
    100
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiltCmd {
    pub t: f64,
    #[serde(default = "default_path_dt")]
    pub dt: f64,
    #[serde(default = "default_tilt_chains")]
    pub chains: usize,
    #[serde(default)]
    pub chain: ChainCmd,
}

fn default_path_dt() -> f64 {
    0.02
}

fn default_tilt_chains() -> usize {
    4
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeCmd {
    #[serde(default = "default_t_list")]
    pub t_list: Vec<f64>,
    #[serde(default = "default_path_dt")]
    pub dt: f64,
    #[serde(default = "default_tube_chains")]
    pub chains: usize,
    #[serde(default = "default_grid_h")]
    pub grid_h: f64,
    #[serde(default = "default_r_max")]
    pub r_max: u64,
    #[serde(default)]
    pub chain: ChainCmd,
    #[serde(default)]
    pub peel: PeelParams,
    #[serde(default)]
    pub pekar: PekarParams,
}

fn default_t_list() -> Vec<f64> {
    vec![2.0, 4.0, 8.0]
}

fn default_tube_chains() -> usize {
    32
}

fn default_grid_h() -> f64 {
    0.25
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeEnergyCmd {
    #[serde(default = "default_t_list")]
    pub t_list: Vec<f64>,
    #[serde(default = "default_path_dt")]
    pub dt: f64,
    #[serde(default = "default_fe_paths")]
    pub n_paths: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "one")]
    pub beta: f64,
    /// Also solve the Pekar problem at unit mass for the reference value.
    #[serde(default = "yes")]
    pub reference: bool,
}

fn default_fe_paths() -> usize {
    2000
}

fn yes() -> bool {
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_top_level_key_is_rejected() {
        let e = ExperimentConfig::from_str(r#"{"command":"pekar","params":{},"colour":1}"#).unwrap_err();
        assert!(e.0.contains("colour"), "{e}");
    }

    #[test]
    fn unknown_param_reports_path() {
        let v: Value = serde_json::json!({"mass": 1.0, "solver": {"points": 10, "tolerance": 1}});
        let e = parse_at::<PekarCmd>(&v, "params").unwrap_err();
        assert!(e.0.starts_with("params.solver"), "{e}");
    }

    #[test]
    fn seed_required_for_stochastic_commands() {
        assert!(ExperimentConfig::from_str(r#"{"command":"khasminskii"}"#).is_err());
        assert!(ExperimentConfig::from_str(r#"{"command":"khasminskii","seed":1}"#).is_ok());
        assert!(ExperimentConfig::from_str(r#"{"command":"pekar"}"#).is_ok());
    }

    #[test]
    fn gaussian_source_loads() {
        let v = serde_json::json!({"gaussian": {"dim": 1, "variance": 1.0, "spacing": 0.1, "half_cells": 80}});
        let s: MeasureSource = parse_at(&v, "m").unwrap();
        let m = s.load(Path::new(".")).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chain_defaults() {
        let c = ChainCmd::default();
        assert_eq!((c.eps, c.beta, c.bridge_weight), (0.1, 1.0, 0.8));
    }

    #[test]
    fn published_schema_matches_commands() {
        let schema: Value =
            serde_json::from_str(include_str!("../../../schema/experiment-config.schema.json")).unwrap();
        let listed: Vec<&str> = schema["properties"]["command"]["enum"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap())
            .collect();
        assert_eq!(listed, COMMANDS);
        for rule in schema["allOf"].as_array().unwrap() {
            let cmd = rule["if"]["properties"]["command"]["const"].as_str().unwrap();
            let needs_seed = rule["then"]["required"]
                .as_array()
                .is_some_and(|r| r.contains(&Value::from("seed")));
            assert_eq!(needs_seed, STOCHASTIC.contains(&cmd), "{cmd}");
        }
    }
}
