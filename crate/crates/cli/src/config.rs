//! Run settings resolved from flags and an optional JSON config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::failure::Failure;

/// Config file keys; each mirrors the flag of the same name.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub scenario: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub basis: Option<String>,
    pub segments: Option<usize>,
    pub order: Option<usize>,
    pub bases: Option<String>,
    pub integrator: Option<String>,
    pub steps: Option<usize>,
    pub noise_px: Option<f64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub json: Option<bool>,
    pub mode: Option<String>,
    pub init: Option<PathBuf>,
    pub restarts: Option<usize>,
    pub shapes_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        let mut cfg: FileConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::Schema(format!("{}: {e}", path.display())))?;
        // relative paths in the file are relative to the file itself
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.scenario,
            &mut cfg.dataset,
            &mut cfg.out,
            &mut cfg.init,
            &mut cfg.shapes_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Fails early when `path` cannot be read.
pub fn check_readable(path: &Path) -> Result<(), Failure> {
    fs::metadata(path)
        .map_err(|e| Failure::io(path, e))
        .and_then(|m| {
            if m.is_file() {
                Ok(())
            } else {
                Err(Failure::Io(format!(
                    "{}: not a regular file",
                    path.display()
                )))
            }
        })
}

/// Fails early when `path` cannot be created or overwritten.
pub fn check_writable(path: &Path) -> Result<(), Failure> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let meta = fs::metadata(parent).map_err(|e| Failure::io(parent, e))?;
    if !meta.is_dir() {
        return Err(Failure::Io(format!(
            "{}: not a directory",
            parent.display()
        )));
    }
    if path.is_dir() {
        return Err(Failure::Io(format!("{}: is a directory", path.display())));
    }
    fs::OpenOptions::new()
        .append(true)
        .create(true)
        .open(path)
        .map(|_| ())
        .map_err(|e| Failure::io(path, e))
}

pub fn required<T>(value: Option<T>, flag: &str) -> Result<T, Failure> {
    value.ok_or_else(|| Failure::Schema(format!("missing required option --{flag}")))
}
