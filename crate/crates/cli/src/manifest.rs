use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one subcommand run: enough to reproduce every output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Effective configuration after defaults and flag overrides.
    pub config: Value,
    pub inputs: Vec<String>,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    /// Seconds per stage.
    pub wall_times: BTreeMap<String, f64>,
    /// Thresholds checked by the run and the values it reached.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Value>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: &impl Serialize) -> CliResult<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: surfelgrad_core::array_api::version().into(),
            command: command.into(),
            seed,
            config: serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?,
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_times: BTreeMap::new(),
            calibration: None,
        })
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    pub fn output(&mut self, rel: impl Into<String>) {
        self.outputs.push(rel.into());
    }

    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.wall_times.entry(stage.into()).or_default() += start.elapsed().as_secs_f64();
        out
    }

    pub fn write(&self, dir: &Path, name: &str) -> CliResult<PathBuf> {
        let path = dir.join(name);
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
