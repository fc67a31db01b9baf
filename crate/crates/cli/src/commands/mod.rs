pub mod bench;
pub mod gradcheck;
pub mod iqtt;
pub mod metrics;
pub mod reconstruct;
pub mod render;
pub mod scenes;

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Context {
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
}

impl Context {
    pub fn ensure_out(&self) -> CliResult<()> {
        fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))
    }

    /// Text of `--config`, if given.
    pub fn config_text(&self) -> CliResult<Option<(PathBuf, String)>> {
        match &self.config {
            Some(path) => Ok(Some((path.clone(), read_text(path)?))),
            None => Ok(None),
        }
    }

    /// Parses `--config` as `T`, or returns `T::default()`.
    pub fn load_config<T: DeserializeOwned + Default>(&self) -> CliResult<T> {
        match self.config_text()? {
            Some((path, text)) => parse_json(&path, &text),
            None => Ok(T::default()),
        }
    }

    pub fn write_json(&self, rel: &str, value: &impl Serialize) -> CliResult<()> {
        let path = self.out.join(rel);
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Parse errors carry the file name and the line and column reported by the parser.
pub fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    parse_json(path, &read_text(path)?)
}

/// A camera file, or a scene file whose camera is used.
pub fn read_camera(path: &Path) -> CliResult<surfelgrad_core::Camera> {
    let value: serde_json::Value = read_json(path)?;
    let camera = value.get("camera").cloned().unwrap_or(value);
    serde_json::from_value(camera).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Serialized to stdout as the command's payload.
pub fn print_json(value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    println!("{text}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use surfelgrad_core::scenegen::SceneConfig;

    #[test]
    fn parse_errors_report_line_and_column() {
        let err = parse_json::<SceneConfig>(Path::new("cfg.json"), "{\n  \"n_objects\": ,\n}").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.message().contains("cfg.json"));
        assert!(err.message().contains("line 2 column"), "{}", err.message());
    }

    #[test]
    fn unknown_fields_are_config_errors() {
        let err = parse_json::<SceneConfig>(Path::new("c.json"), "{\"n_object\": 2}").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.message().contains("n_object"));
    }
}
