//! Run configuration: one JSON document covering every subcommand, with
//! command-line flags applied on top.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sfcgan::classify::SvmConfig;
use sfcgan::eval::ThresholdConfig;
use sfcgan::synth::SynthConfig;
use sfcgan::trainer::TrainConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// Fraction of strongest edges written to each edge list.
    pub top: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig { top: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset directory; `synth` writes it, every other subcommand reads
    /// `<data_dir>/manifest.json`.
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Name written to the `dataset` column of the classification CSV.
    pub dataset: String,
    /// Worker threads; 1 is the deterministic reference mode.
    pub threads: usize,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub thresholds: ThresholdConfig,
    pub svm: SvmConfig,
    pub render: RenderConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("out"),
            dataset: "synthetic".into(),
            threads: 1,
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            thresholds: ThresholdConfig::default(),
            svm: SvmConfig::default(),
            render: RenderConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.threads == 0 {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        if !(self.render.top > 0.0 && self.render.top <= 1.0) {
            return Err(CliError::Config(format!(
                "render.top must lie in (0, 1], got {}",
                self.render.top
            )));
        }
        self.synth.validate()?;
        self.train.validate()?;
        self.thresholds.validate()?;
        self.svm.validate()?;
        Ok(())
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.data_dir.join("manifest.json")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.out_dir.join("checkpoint.sfcg")
    }
}

/// Every configuration key with its default, one `key = value` line each.
pub fn defaults_help() -> String {
    let value = serde_json::to_value(RunConfig::default()).expect("default config serializes");
    let mut lines = Vec::new();
    flatten("", &value, &mut lines);
    let width = lines.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::from(
        "Configuration (JSON object passed with --config; flags override it, \
         --threads falls back to SFCGAN_THREADS). Keys and defaults:\n",
    );
    for (k, v) in lines {
        let _ = writeln!(out, "  {k:<width$}  {v}");
    }
    out
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}
