//! Error-to-exit-code mapping and tracked, atomic output writing.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// Exit-code scheme: 2 usage/config, 3 I/O, 4 numerical failure.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn io(err: io::Error, context: impl fmt::Display) -> Self {
        CliError::Io(format!("{context}: {err}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
            CliError::Numeric(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Writes files under one output root, atomically (temp file + rename),
/// recording a content hash per file. On failure the caller removes
/// everything written so far via [`OutputTracker::cleanup`].
pub struct OutputTracker {
    root: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl OutputTracker {
    pub fn new(root: PathBuf) -> Self {
        Self {
            root,
            hashes: BTreeMap::new(),
        }
    }

    /// Writes `bytes` to `<root>/<rel>` atomically and records its hash.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(e, parent.display()))?;
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, bytes).map_err(|e| CliError::io(e, tmp.display()))?;
        fs::rename(&tmp, &path).map_err(|e| CliError::io(e, path.display()))?;
        self.hashes.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Removes every file written so far plus any directories that became
    /// empty. Best effort: cleanup failures are ignored.
    pub fn cleanup(&self) {
        for rel in self.hashes.keys() {
            let path = self.root.join(rel);
            let _ = fs::remove_file(&path);
            let mut dir = path.parent().map(Path::to_path_buf);
            while let Some(d) = dir {
                if d == self.root || fs::remove_dir(&d).is_err() {
                    break;
                }
                dir = d.parent().map(Path::to_path_buf);
            }
        }
        let _ = fs::remove_dir(&self.root);
    }

    /// Writes `manifest.json`: tool name/version, the config hash, the
    /// effective seed, and a hash per written file.
    pub fn write_manifest(&mut self, config_sha256: &str, seed: u64) -> Result<(), CliError> {
        let manifest = serde_json::json!({
            "tool": "genlab",
            "version": env!("CARGO_PKG_VERSION"),
            "config_sha256": config_sha256,
            "seed": seed,
            "files": self.hashes,
        });
        let bytes = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let path = self.root.join("manifest.json");
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, bytes.as_bytes()).map_err(|e| CliError::io(e, tmp.display()))?;
        fs::rename(&tmp, &path).map_err(|e| CliError::io(e, path.display()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input_is_the_known_digest() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn sha256_of_abc_is_the_known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn tracker_writes_and_cleans_up() {
        let root = std::env::temp_dir().join(format!("genlab-tracker-{}", std::process::id()));
        let mut tracker = OutputTracker::new(root.clone());
        tracker.write("a/b/file.txt", b"hello").unwrap();
        assert!(root.join("a/b/file.txt").exists());
        tracker.cleanup();
        assert!(!root.join("a/b/file.txt").exists());
        assert!(!root.join("a").exists());
    }
}
