//! Machine-readable run reports.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::Failure;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: &Path, bytes: &[u8]) -> Self {
        InputDigest { path: path.to_path_buf(), sha256: hex::encode(Sha256::digest(bytes)) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub wall_seconds: f64,
}

/// Everything a run produced. Only `verdict` is expected to be identical
/// across reruns of the same config and inputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: ExperimentConfig,
    pub inputs: Vec<InputDigest>,
    pub verdict: Value,
    pub timings: Timings,
}

impl RunReport {
    /// The verdict section alone, as written to `verdict.json`.
    pub fn verdict_json(&self) -> String {
        to_pretty(&self.verdict)
    }

    pub fn to_json(&self) -> String {
        to_pretty(self)
    }

    /// Writes `report.json`, `verdict.json` and any extra artifacts into `dir`.
    pub fn write_to(&self, dir: &Path, artifacts: &[(String, String)]) -> Result<(), Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
        let mut files =
            vec![("report.json".to_string(), self.to_json()), ("verdict.json".to_string(), self.verdict_json())];
        files.extend(artifacts.iter().cloned());
        for (name, body) in files {
            let path = dir.join(&name);
            fs::write(&path, body).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

fn to_pretty<T: Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report values serialize");
    s.push('\n');
    s
}
