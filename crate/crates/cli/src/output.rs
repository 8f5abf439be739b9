use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Where a command writes, plus the provenance stamped on every file.
#[derive(Debug, Clone)]
pub struct OutputDir {
    pub dir: PathBuf,
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(dir: &Path, command: &'static str, config_hash: String, seed: u64) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
        Ok(OutputDir { dir: dir.to_path_buf(), command, config_hash, seed, written: Vec::new() })
    }

    fn header(&self) -> String {
        format!("# chanprob {} config_hash={} seed={}\n", self.command, self.config_hash, self.seed)
    }

    /// Writes `rows` as CSV behind a provenance comment line.
    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<PathBuf, CliError> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        for r in rows {
            writer.serialize(r)?;
        }
        let body = writer.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
        let mut text = self.header().into_bytes();
        text.extend(body);
        self.write(name, &text)
    }

    /// Pretty JSON with object keys sorted.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let text = to_sorted_json(value)?;
        self.write(name, text.as_bytes())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path.clone());
        Ok(path)
    }
}

/// serde_json's default map is ordered, so a round trip through `Value` sorts keys.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}
