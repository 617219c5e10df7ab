//! Experiment configuration: one TOML document per run.

use std::path::{Path, PathBuf};

use kan_cim::cim::{CompareConfig, CrossbarConfig, EncoderConfig, EncoderScheme, TransferFn};
use kan_cim::haq::QuantMode;
use kan_cim::sam::SweepConfig;
use kan_cim::spline::{LossKind, TrainConfig};
use kan_cim::tune::TuneConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// CSV dataset (`f0.., t0.., [split]`).
    pub dataset: Option<PathBuf>,
    /// Technology parameter TOML; built-in defaults when absent.
    pub tech: Option<PathBuf>,
    /// Model checkpoint read by quantize, map-simulate and tune.
    pub checkpoint: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Layer widths, input first. Empty means `[n_features, n_targets]`.
    pub dims: Vec<usize>,
    pub order: usize,
    pub grid: usize,
    pub domain: [f64; 2],
    pub init_std: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { dims: vec![], order: 3, grid: 5, domain: [-1.0, 1.0], init_std: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub loss: LossKind,
    /// Fraction of rows held out when the dataset has no `split` column.
    pub val_fraction: f64,
    /// Final validation loss the run is expected to reach.
    pub target_loss: Option<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            loss: t.loss,
            val_fraction: 0.2,
            target_loss: None,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            loss: self.loss,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantizeSection {
    pub mode: QuantMode,
    pub n_bits: u32,
    /// Grid sizes for the resource sweep.
    pub grids: Vec<usize>,
    /// Spline order for the sweep when no checkpoint is given.
    pub order: usize,
}

impl Default for QuantizeSection {
    fn default() -> Self {
        Self { mode: QuantMode::AlignSymPowergap, n_bits: 8, grids: vec![8, 16, 32, 64], order: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSection {
    pub scheme: EncoderScheme,
    pub n: u32,
    pub transfer: TransferFn,
    pub v_max: f64,
    pub unit_pulse: f64,
    pub noise_sigma: f64,
}

impl Default for EncoderSection {
    fn default() -> Self {
        Self {
            scheme: EncoderScheme::Tmdv,
            n: 4,
            transfer: TransferFn::Linear { gain: 5e-6, vt: 0.3 },
            v_max: 0.7,
            unit_pulse: 1e-9,
            noise_sigma: 0.0,
        }
    }
}

impl EncoderSection {
    pub fn build(&self) -> Result<EncoderConfig, CliError> {
        Ok(EncoderConfig::new(self.scheme, self.n, self.transfer, self.v_max, self.unit_pulse)?
            .with_noise(self.noise_sigma))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

impl LogLevel {
    pub fn as_str(&self) -> &'static str {
        match self {
            LogLevel::Error => "error",
            LogLevel::Warn => "warn",
            LogLevel::Info => "info",
            LogLevel::Debug => "debug",
        }
    }
}

/// Seeds inside `compare`, `mapping` and `tuning.train` are replaced by the
/// global `seed`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub log_level: Option<LogLevel>,
    pub paths: Paths,
    pub model: ModelSection,
    pub train: TrainSection,
    pub quantize: QuantizeSection,
    pub crossbar: CrossbarConfig,
    pub encoder: EncoderSection,
    pub compare: CompareConfig,
    pub mapping: SweepConfig,
    pub tuning: TuneConfig,
}

fn parse_override(item: &str) -> Result<(Vec<String>, toml::Value), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{item}`")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_owned).collect();
    if path.iter().any(String::is_empty) {
        return Err(CliError::Config(format!("bad key `{key}` in --set")));
    }
    // bare words are strings
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key present"),
        Err(_) => toml::Value::String(raw.trim().to_owned()),
    };
    Ok((path, value))
}

fn set_path(table: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), CliError> {
    let (last, parents) = path.split_last().expect("non-empty key path");
    let mut cur = table;
    for p in parents {
        let entry = cur.entry(p.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{}` is not a table", path.join("."))))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Parse `text`, applying `KEY=VALUE` overrides first.
    pub fn parse(text: &str, overrides: &[String], origin: &str) -> Result<Self, CliError> {
        let cfg = if overrides.is_empty() {
            toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?
        } else {
            let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
            for o in overrides {
                let (path, value) = parse_override(o)?;
                set_path(&mut table, &path, value)?;
            }
            toml::Value::Table(table)
                .try_into()
                .map_err(|e: toml::de::Error| CliError::Config(format!("{origin} (with --set overrides): {e}")))?
        };
        Ok(cfg)
    }

    /// Read a config file; relative input paths resolve against its directory.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Self::parse("", overrides, "<defaults>");
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        let mut cfg = Self::parse(&text, overrides, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.paths.dataset, &mut cfg.paths.tech, &mut cfg.paths.checkpoint, &mut cfg.paths.out_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.compare.seed = seed;
        self.mapping.seed = seed;
        self.tuning.train.seed = seed;
    }

    /// Checks that do not need any input file.
    pub fn validate(&self) -> Result<(), CliError> {
        self.crossbar.validate().map_err(|e| CliError::Config(format!("crossbar: {e}")))?;
        self.tuning.validate().map_err(|e| CliError::Config(format!("tuning: {e}")))?;
        if !(0.0..1.0).contains(&self.train.val_fraction) {
            return Err(CliError::Config("train.val_fraction must lie in [0, 1)".into()));
        }
        if !(self.model.domain[1] > self.model.domain[0]) {
            return Err(CliError::Config("model.domain must be increasing".into()));
        }
        if self.quantize.grids.is_empty() {
            return Err(CliError::Config("quantize.grids is empty".into()));
        }
        Ok(())
    }
}
