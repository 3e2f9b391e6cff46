//! Output directory layout and the provenance files written next to every
//! artifact: `manifest.json` (the effective manifest) and `hashes.txt`
//! (git blob hashes of the directory's files).

use std::fs;
use std::path::{Path, PathBuf};

use sha1::{Digest, Sha1};
use vulnlab_core::VulnerabilityCategory;

use crate::error::{IoContext, Result};
use crate::manifest::ExperimentManifest;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const HASHES_FILE: &str = "hashes.txt";

/// Where each command reads and writes under an output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn embedding_dir(&self) -> PathBuf {
        self.root.join("embedding")
    }

    pub fn skipgram_file(&self) -> PathBuf {
        self.embedding_dir().join("skipgram.bin")
    }

    pub fn dataset_dir(&self, v: VulnerabilityCategory) -> PathBuf {
        self.root.join(v.as_str()).join("dataset")
    }

    pub fn split_file(&self, v: VulnerabilityCategory, part: &str) -> PathBuf {
        self.dataset_dir(v).join(format!("{part}.vlds"))
    }

    pub fn model_dir(&self, v: VulnerabilityCategory) -> PathBuf {
        self.root.join(v.as_str()).join("model")
    }

    pub fn eval_dir(&self, v: VulnerabilityCategory) -> PathBuf {
        self.root.join(v.as_str()).join("eval")
    }

    pub fn comparison_dir(&self) -> PathBuf {
        self.root.join("comparison")
    }
}

/// Hash git assigns to a blob with these contents.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).at(dir)
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).at(path)
}

/// Writes the manifest copy, then hashes every regular file in `dir`
/// (sorted by name) into `hashes.txt`.
pub fn seal(dir: &Path, manifest: &ExperimentManifest) -> Result<()> {
    write(&dir.join(MANIFEST_FILE), manifest.to_json())?;
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).at(dir)? {
        let entry = entry.at(dir)?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name != HASHES_FILE && entry.file_type().at(dir)?.is_file() {
            names.push(name);
        }
    }
    names.sort();
    let mut out = String::new();
    for name in names {
        let path = dir.join(&name);
        let bytes = fs::read(&path).at(&path)?;
        out.push_str(&format!("{}  {name}\n", git_blob_hash(&bytes)));
    }
    write(&dir.join(HASHES_FILE), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git() {
        // `printf 'hello\n' | git hash-object --stdin`
        assert_eq!(git_blob_hash(b"hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
        assert_eq!(git_blob_hash(b""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    }
}
