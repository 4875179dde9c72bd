//! Staged output: every file is produced in memory first, then written via
//! temp-file + rename, so a failing run leaves no partially-written report.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Default)]
pub struct Staged {
    files: Vec<(String, Vec<u8>)>,
}

#[derive(Serialize)]
struct ManifestEntry {
    name: String,
    bytes: usize,
    sha256: String,
}

impl Staged {
    pub fn add(&mut self, name: &str, contents: Vec<u8>) {
        self.files.push((name.to_string(), contents));
    }

    pub fn add_text(&mut self, name: &str, contents: String) {
        self.add(name, contents.into_bytes());
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    /// Appends `manifest.json`: name, size and sha256 of every staged file,
    /// sorted by name. Byte-stable across runs for identical inputs.
    pub fn add_manifest(&mut self) {
        let mut entries: Vec<ManifestEntry> = self
            .files
            .iter()
            .map(|(name, contents)| ManifestEntry {
                name: name.clone(),
                bytes: contents.len(),
                sha256: hex_digest(contents),
            })
            .collect();
        entries.sort_by(|a, b| a.name.cmp(&b.name));
        let json = serde_json::to_string_pretty(&entries).expect("manifest serialization");
        self.add_text("manifest.json", json + "\n");
    }

    /// Writes every staged file into `dir` atomically (temp + rename).
    pub fn write_all(self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        for (name, contents) in &self.files {
            write_atomic(&dir.join(name), contents)?;
        }
        Ok(())
    }
}

pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let parent = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(parent)
        .with_context(|| format!("creating directory {}", parent.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent)
        .with_context(|| format!("creating temp file in {}", parent.display()))?;
    tmp.write_all(contents).context("writing temp file")?;
    tmp.persist(path)
        .with_context(|| format!("renaming into place: {}", path.display()))?;
    Ok(())
}

fn hex_digest(contents: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(contents);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_is_sorted_and_stable() {
        let mut a = Staged::default();
        a.add_text("z.csv", "2".into());
        a.add_text("a.csv", "1".into());
        a.add_manifest();
        let mut b = Staged::default();
        b.add_text("z.csv", "2".into());
        b.add_text("a.csv", "1".into());
        b.add_manifest();
        let ma = &a.files.last().unwrap().1;
        let mb = &b.files.last().unwrap().1;
        assert_eq!(ma, mb);
        let text = String::from_utf8(ma.clone()).unwrap();
        assert!(text.find("a.csv").unwrap() < text.find("z.csv").unwrap());
    }
}
