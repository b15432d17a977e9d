//! CSV emission and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Formats a number with the shortest round-trip representation.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// In-memory CSV table with a fixed header.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    body: String,
    rows: usize,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            body: String::new(),
            rows: 0,
        }
    }

    pub fn push<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let cells: Vec<String> = cells.into_iter().map(|c| c.as_ref().to_string()).collect();
        debug_assert_eq!(cells.len(), self.header.len());
        let _ = writeln!(self.body, "{}", cells.join(","));
        self.rows += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn render(&self) -> String {
        format!("{}\n{}", self.header.join(","), self.body)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub step: String,
    pub seconds: f64,
}

/// Record of a run: configuration, seed, emitted files with checksums and
/// step timings. Artifact paths are relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub artifacts: Vec<Artifact>,
    pub timings: Vec<Timing>,
    pub status: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    pub fn new(seed: u64, config: BTreeMap<String, String>) -> Self {
        RunManifest {
            tool: "erdlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config,
            artifacts: Vec::new(),
            timings: Vec::new(),
            status: "running".into(),
        }
    }

    /// Loads an existing manifest from `dir`, keeping its artifacts but
    /// replacing config and seed.
    pub fn load_or_new(dir: &Path, seed: u64, config: BTreeMap<String, String>) -> Self {
        let path = dir.join(MANIFEST_FILE);
        let mut m = std::fs::read(&path)
            .ok()
            .and_then(|b| serde_json::from_slice::<RunManifest>(&b).ok())
            .unwrap_or_else(|| RunManifest::new(seed, config.clone()));
        m.seed = seed;
        m.config = config;
        m
    }

    pub fn record(&mut self, dir: &Path, file: &Path) -> Result<()> {
        let bytes = std::fs::read(file).map_err(|e| Error::io(file, e))?;
        let rel = file
            .strip_prefix(dir)
            .unwrap_or(file)
            .to_string_lossy()
            .replace('\\', "/");
        let art = Artifact {
            path: rel.clone(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        };
        match self.artifacts.iter_mut().find(|a| a.path == rel) {
            Some(a) => *a = art,
            None => self.artifacts.push(art),
        }
        self.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(())
    }

    pub fn time(&mut self, step: &str, seconds: f64) {
        self.timings.push(Timing {
            step: step.into(),
            seconds,
        });
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_vec_pretty(self).expect("manifest serializes");
        write_file(&path, &json)?;
        Ok(path)
    }

    /// Artifacts whose on-disk checksum no longer matches.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.artifacts
            .iter()
            .filter(|a| {
                std::fs::read(dir.join(&a.path))
                    .map(|b| sha256_hex(&b) != a.sha256)
                    .unwrap_or(true)
            })
            .map(|a| a.path.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_renders_header_and_rows() {
        let mut t = Table::new(&["a", "b"]);
        t.push(["1", "x"]);
        t.push([num(0.5), num(1e-20)]);
        assert_eq!(t.rows(), 2);
        assert_eq!(t.render(), "a,b\n1,x\n0.5,0.00000000000000000001\n");
    }

    #[test]
    fn sha_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_records_and_verifies() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("x.csv");
        write_file(&f, b"a\n1\n").unwrap();
        let mut m = RunManifest::new(1, BTreeMap::new());
        m.record(dir.path(), &f).unwrap();
        m.record(dir.path(), &f).unwrap();
        assert_eq!(m.artifacts.len(), 1);
        assert_eq!(m.artifacts[0].path, "x.csv");
        assert!(m.verify(dir.path()).is_empty());
        write_file(&f, b"a\n2\n").unwrap();
        assert_eq!(m.verify(dir.path()), vec!["x.csv".to_string()]);
        m.save(dir.path()).unwrap();
        let back = RunManifest::load_or_new(dir.path(), 2, BTreeMap::new());
        assert_eq!(back.artifacts, m.artifacts);
        assert_eq!(back.seed, 2);
    }
}
