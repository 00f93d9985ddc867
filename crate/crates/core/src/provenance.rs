//! Content hashes and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Everything needed to reproduce a run, echoed into every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub defaults_version: String,
    pub defaults_sha256: String,
    /// Verbatim defaults file, so reruns do not depend on the environment.
    pub defaults_toml: String,
    pub seed: u64,
    pub mu_s_scale: f64,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(lib: &crate::tissue::MediaLibrary, seed: u64) -> Self {
        Provenance {
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            defaults_version: lib.version().to_owned(),
            defaults_sha256: lib.source_hash(),
            defaults_toml: lib.source_text().to_owned(),
            seed,
            mu_s_scale: lib.mu_s_scale(),
            extra: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.insert(key.to_owned(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

/// The manifest written alongside every scenario's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: serde_json::Value,
    pub provenance: Provenance,
    pub outputs: Vec<OutputEntry>,
}

/// Output directory that hashes every file it writes.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    entries: Vec<OutputEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.entries.retain(|e| e.file != name);
        self.entries.push(OutputEntry {
            file: name.to_owned(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::SimulationFault(format!("serializing {name}: {e}")))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn entries(&self) -> &[OutputEntry] {
        &self.entries
    }

    /// Writes the manifest and returns it.
    pub fn finish(
        mut self,
        scenario: serde_json::Value,
        provenance: Provenance,
    ) -> Result<Manifest> {
        self.entries.sort_by(|a, b| a.file.cmp(&b.file));
        let manifest = Manifest {
            scenario,
            provenance,
            outputs: self.entries,
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::SimulationFault(format!("serializing manifest: {e}")))?;
        text.push('\n');
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
    }

    /// Files whose recorded hash differs from `other`'s, including files
    /// present in only one of the two.
    pub fn differences(&self, other: &Manifest) -> Vec<String> {
        let a: BTreeMap<_, _> = self.outputs.iter().map(|e| (&e.file, &e.sha256)).collect();
        let b: BTreeMap<_, _> = other.outputs.iter().map(|e| (&e.file, &e.sha256)).collect();
        let mut out: Vec<String> = a
            .iter()
            .filter(|(k, v)| b.get(*k) != Some(*v))
            .map(|(k, _)| (*k).clone())
            .collect();
        out.extend(
            b.keys()
                .filter(|k| !a.contains_key(*k))
                .map(|k| (*k).clone()),
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_abc() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
