//! `index.jsonl`: one summary line per sample, ascending by id.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_jsonl, read_manifest, write_jsonl};
use crate::error::{Error, Result};

pub const INDEX_FILE: &str = "index.jsonl";
pub const SAMPLES_DIR: &str = "samples";
pub const MANIFEST_FILE: &str = "manifest.json";
/// Written instead of a manifest when a sample fails.
pub const ERROR_FILE: &str = "error.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexEntry {
    pub id: String,
    pub status: EntryStatus,
    pub seed: Option<u64>,
    pub layer_count: Option<usize>,
    /// Paths relative to the dataset root.
    pub manifest: Option<String>,
    pub composite: Option<String>,
    pub flags: Vec<String>,
    pub error: Option<String>,
}

impl IndexEntry {
    pub fn is_ok(&self) -> bool {
        self.status == EntryStatus::Ok
    }

    fn failed(id: &str, error: String) -> Self {
        IndexEntry {
            id: id.to_string(),
            status: EntryStatus::Failed,
            seed: None,
            layer_count: None,
            manifest: None,
            composite: None,
            flags: Vec::new(),
            error: Some(error),
        }
    }
}

fn entry_for(out_dir: &Path, id: &str) -> IndexEntry {
    let dir = out_dir.join(SAMPLES_DIR).join(id);
    let manifest_path = dir.join(MANIFEST_FILE);
    if manifest_path.is_file() {
        return match read_manifest(&manifest_path) {
            Ok(m) => IndexEntry {
                id: id.to_string(),
                status: EntryStatus::Ok,
                seed: Some(m.seed),
                layer_count: Some(m.layers.len()),
                manifest: Some(format!("{SAMPLES_DIR}/{id}/{MANIFEST_FILE}")),
                composite: Some(m.composite_path),
                flags: m.flags,
                error: None,
            },
            Err(e) => IndexEntry::failed(id, format!("unreadable manifest: {e}")),
        };
    }
    match fs::read_to_string(dir.join(ERROR_FILE)) {
        Ok(msg) => IndexEntry::failed(id, msg.trim().to_string()),
        Err(_) => IndexEntry::failed(id, "missing manifest".into()),
    }
}

pub fn write_index(out_dir: &Path, entries: &[IndexEntry]) -> Result<PathBuf> {
    let mut sorted: Vec<&IndexEntry> = entries.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let path = out_dir.join(INDEX_FILE);
    write_jsonl(&path, sorted)?;
    Ok(path)
}

/// Indexes every directory under `samples/`.
pub fn build_index(out_dir: &Path) -> Result<PathBuf> {
    let samples = out_dir.join(SAMPLES_DIR);
    let mut ids = Vec::new();
    for entry in fs::read_dir(&samples).map_err(|e| Error::io(&samples, e))? {
        let entry = entry.map_err(|e| Error::io(&samples, e))?;
        if entry.file_type().map_err(|e| Error::io(entry.path(), e))?.is_dir() {
            ids.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    build_index_for(out_dir, &ids)
}

/// Indexes exactly `ids`; ids without a manifest become failed entries.
pub fn build_index_for(out_dir: &Path, ids: &[String]) -> Result<PathBuf> {
    let entries: Vec<IndexEntry> = ids.iter().map(|id| entry_for(out_dir, id)).collect();
    write_index(out_dir, &entries)
}

pub fn read_index(path: &Path) -> Result<Vec<IndexEntry>> {
    read_jsonl(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::serialization::manifest::tests::fixture;
    use crate::serialization::write_manifest;

    fn setup(ok: &[&str], failed: &[&str]) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for id in ok {
            let d = dir.path().join(SAMPLES_DIR).join(id);
            fs::create_dir_all(&d).unwrap();
            let mut m = fixture(2);
            m.sample_id = id.to_string();
            write_manifest(&m, &d.join(MANIFEST_FILE)).unwrap();
        }
        for id in failed {
            let d = dir.path().join(SAMPLES_DIR).join(id);
            fs::create_dir_all(&d).unwrap();
            fs::write(d.join(ERROR_FILE), "boom\n").unwrap();
        }
        dir
    }

    #[test]
    fn ascending_and_stable() {
        let dir = setup(&["00000002", "00000000", "00000001"], &[]);
        let p = build_index(dir.path()).unwrap();
        let first = fs::read(&p).unwrap();
        let entries = read_index(&p).unwrap();
        let ids: Vec<_> = entries.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["00000000", "00000001", "00000002"]);
        assert!(entries.iter().all(|e| e.is_ok() && e.layer_count == Some(2)));
        build_index(dir.path()).unwrap();
        assert_eq!(fs::read(&p).unwrap(), first);
    }

    #[test]
    fn failures_are_entries() {
        let dir = setup(&["00000000", "00000002"], &["00000001"]);
        let ids: Vec<String> = (0..4).map(|i| format!("{i:08}")).collect();
        let entries = read_index(&build_index_for(dir.path(), &ids).unwrap()).unwrap();
        assert_eq!(entries.len(), 4);
        assert_eq!(entries[1].status, EntryStatus::Failed);
        assert_eq!(entries[1].error.as_deref(), Some("boom"));
        assert_eq!(entries[3].error.as_deref(), Some("missing manifest"));
        assert!(entries[2].is_ok());
    }
}
