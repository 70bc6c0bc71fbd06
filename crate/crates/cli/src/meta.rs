//! Provenance records written next to every artifact.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use unmix_core::library::library_csv_bytes;
use unmix_core::EndmemberLibrary;

use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct LibraryInfo {
    /// Input path, or `builtin` for the synthetic library.
    pub source: String,
    /// SHA-256 of the library as it was used, in library CSV form.
    pub sha256: String,
    pub names: Vec<String>,
    pub wavelengths: usize,
    pub clamped_entries: usize,
    pub resampled: bool,
}

impl LibraryInfo {
    pub fn new(
        lib: &EndmemberLibrary,
        source: Option<&Path>,
        clamped_entries: usize,
        resampled: bool,
    ) -> Result<Self, CliError> {
        let bytes = library_csv_bytes(lib)?;
        Ok(Self {
            source: source.map_or_else(|| "builtin".to_string(), |p| p.display().to_string()),
            sha256: hex(&Sha256::digest(&bytes)),
            names: lib.names().to_vec(),
            wavelengths: lib.m(),
            clamped_entries,
            resampled,
        })
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Contents of `meta.json`. Holds no timestamps or timings, so identical
/// invocations produce identical files.
#[derive(Debug, Serialize)]
pub struct Meta<P: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub parameters: P,
    pub library: Option<LibraryInfo>,
    pub outputs: Vec<String>,
}

impl<P: Serialize> Meta<P> {
    pub fn new(
        command: &'static str,
        parameters: P,
        library: Option<LibraryInfo>,
        outputs: &[&str],
    ) -> Self {
        Self {
            tool: "unmix",
            version: env!("CARGO_PKG_VERSION"),
            command,
            parameters,
            library,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        write_json(&dir.join("meta.json"), self)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(dir.to_path_buf())
}
