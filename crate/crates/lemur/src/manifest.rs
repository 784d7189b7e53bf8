//! Run manifests: plain-text key=value records written next to every
//! artifact, carrying the command, all configuration values, seeds, and
//! input digests. Everything except `wall_clock` is deterministic, so a
//! manifest identifies the artifact it produced.

use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{io_err, Result};
use crate::format::file_digest;

#[derive(Debug, Clone)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Manifest { entries: Vec::new() };
        m.push("command", command);
        m.push("artifact_version", crate::format::FORMAT_VERSION);
        let secs =
            SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        // excluded from reproducibility comparisons
        m.push("wall_clock", secs);
        m
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Record an input file's path and FNV-1a digest.
    pub fn push_input(&mut self, key: &str, path: &Path) -> Result<()> {
        self.push(&format!("input.{key}.path"), path.display());
        self.push(&format!("input.{key}.fnv64"), format!("{:016x}", file_digest(path)?));
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        fs::write(path, out).map_err(io_err(path))
    }
}
