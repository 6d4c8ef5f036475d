//! Run manifest: resolved config plus content digests of everything the
//! run read and wrote.
//!
//! Report JSONs are digested with their `wall_ms` field zeroed, so two
//! runs with the same config and seed produce identical digests even
//! though wall-clock timings differ.

use std::path::Path;

use sha2::{Digest, Sha256};

use llt::{Error, Result};

use crate::config::RunConfig;

#[derive(Debug, Clone, serde::Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub inputs: Vec<FileEntry>,
    pub artifacts: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(config: RunConfig) -> Manifest {
        Manifest {
            config,
            inputs: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileEntry {
            path: path.display().to_string(),
            sha256: digest_file(path)?,
        });
        Ok(())
    }

    pub fn record_artifact(&mut self, path: &Path) -> Result<()> {
        self.artifacts.push(FileEntry {
            path: path.display().to_string(),
            sha256: digest_artifact(path)?,
        });
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("manifest serialization: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }
}

/// Plain SHA-256 of the file bytes.
pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Content digest: report JSONs are normalized (wall_ms = 0) before
/// hashing, everything else is hashed verbatim.
pub fn digest_artifact(path: &Path) -> Result<String> {
    let name = path.file_name().map(|n| n.to_string_lossy().to_string());
    let is_report = name
        .as_deref()
        .is_some_and(|n| n.starts_with("report_") && n.ends_with(".json"));
    if !is_report {
        return digest_file(path);
    }
    let text = std::fs::read_to_string(path)?;
    Ok(hex::encode(Sha256::digest(
        normalize_report(&text)?.as_bytes(),
    )))
}

/// Reserialize a report with its timing field zeroed.
pub fn normalize_report(text: &str) -> Result<String> {
    let mut value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Format(format!("report is not valid JSON: {e}")))?;
    if let Some(obj) = value.as_object_mut() {
        if let Some(wall) = obj.get_mut("wall_ms") {
            *wall = serde_json::Value::from(0u64);
        }
    }
    serde_json::to_string(&value).map_err(|e| Error::Format(format!("report rewrite: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn report_digests_ignore_wall_ms() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("report_llt_knn.json");
        let b = dir.path().join("report_llt_knn2.json");
        std::fs::write(&a, r#"{"classifier":"knn","wall_ms":17}"#).unwrap();
        std::fs::write(&b, r#"{"classifier":"knn","wall_ms":99}"#).unwrap();
        // normalized content is identical
        let na = normalize_report(&std::fs::read_to_string(&a).unwrap()).unwrap();
        let nb = normalize_report(&std::fs::read_to_string(&b).unwrap()).unwrap();
        assert_eq!(na, nb);
        assert_eq!(
            digest_artifact(&a).unwrap(),
            digest_artifact(dir.path().join("report_llt_knn2.json").as_path()).unwrap()
        );
    }

    #[test]
    fn non_report_files_hash_verbatim() {
        let mut tmp = tempfile::NamedTempFile::new().unwrap();
        tmp.write_all(b"hello").unwrap();
        let d = digest_artifact(tmp.path()).unwrap();
        assert_eq!(
            d,
            "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        );
    }
}
