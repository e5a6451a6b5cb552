use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use cloner_core::Result;
use serde::Serialize;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Written next to every output set; `args` re-runs the command.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub tool_version: &'static str,
    pub args: Vec<String>,
    pub threads: usize,
    pub fock_dim: usize,
    pub ring_points: Option<usize>,
    pub outputs: Vec<String>,
    /// Command-specific summary values.
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let f = File::create(dir.join(MANIFEST_FILE))?;
        serde_json::to_writer_pretty(BufWriter::new(f), self)?;
        Ok(())
    }
}
