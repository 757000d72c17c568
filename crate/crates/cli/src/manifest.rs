use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use relnam::{Error, Result};

use crate::args::Command;

pub const MANIFEST_FORMAT: &str = "relnam-manifest/1";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to re-run one subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub tool_version: String,
    pub subcommand: String,
    pub seed: u64,
    /// Resolved arguments with every default filled in.
    pub config: Command,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<String>,
    pub formats: BTreeMap<String, String>,
    /// Not part of the reproducible output.
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: RunManifest = serde_json::from_str(&text)?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::parse(
                path.display().to_string(),
                format!("unsupported manifest format {:?}", m.format),
            ));
        }
        Ok(m)
    }
}
