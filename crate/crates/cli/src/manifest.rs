//! `manifest.json`: SHA-256 of every emitted file, keyed by path relative to
//! the output directory.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

impl Manifest {
    pub fn load(out: &Path) -> Result<Option<Manifest>> {
        let path = out.join(FILE_NAME);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path)?;
        let m = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(Some(m))
    }

    pub fn save(&self, out: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(out.join(FILE_NAME), text)?;
        Ok(())
    }

    pub fn record(&mut self, out: &Path, rel: &str) -> Result<()> {
        self.files.insert(rel.to_string(), hash_file(&out.join(rel))?);
        Ok(())
    }

    /// Files that are missing or whose content no longer matches.
    pub fn verify(&self, out: &Path) -> Vec<String> {
        let mut bad = Vec::new();
        for (rel, hash) in &self.files {
            match hash_file(&out.join(rel)) {
                Ok(h) if &h == hash => {}
                Ok(_) => bad.push(format!("{rel}: hash mismatch")),
                Err(_) => bad.push(format!("{rel}: missing")),
            }
        }
        bad
    }

    /// Entries of `self` whose hash differs from, or is absent in, `previous`.
    pub fn differences(&self, previous: &Manifest) -> Vec<String> {
        self.files
            .iter()
            .filter_map(|(rel, h)| match previous.files.get(rel) {
                Some(p) if p == h => None,
                Some(_) => Some(format!("{rel}: differs from previous run")),
                None => Some(format!("{rel}: not in previous manifest")),
            })
            .collect()
    }
}
