//! On-disk and wire formats. Every writer is canonical: objects are emitted
//! with sorted keys, so equal values always produce equal bytes. All files
//! are UTF-8 with LF line endings.

mod detector;
mod index;
mod inference;
mod manifest;

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub use detector::{
    build_detector_pair, detector_instruction, parse_detector_output, DetectorOutput, DetectorPair, DetectorTarget,
};
pub use index::{
    build_index, build_index_for, read_index, write_index, EntryStatus, IndexEntry, ERROR_FILE, INDEX_FILE,
    MANIFEST_FILE, SAMPLES_DIR,
};
pub use inference::{build_inference_input, InferenceInput};
pub use manifest::{read_manifest, write_manifest, ManifestLayer, SampleManifest};

fn canonicalize(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, canonicalize(v));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        other => other,
    }
}

/// Single-line JSON with sorted keys.
pub fn to_canonical_line<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::json("serialize", e))?;
    serde_json::to_string(&canonicalize(v)).map_err(|e| Error::json("serialize", e))
}

/// Indented JSON with sorted keys and a trailing newline.
pub fn to_canonical_pretty<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::json("serialize", e))?;
    let mut s = serde_json::to_string_pretty(&canonicalize(v)).map_err(|e| Error::json("serialize", e))?;
    s.push('\n');
    Ok(s)
}

/// Writes one canonical JSON line per item.
pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut buf = String::new();
    for item in items {
        buf.push_str(&to_canonical_line(&item)?);
        buf.push('\n');
    }
    write_atomic(path, buf.as_bytes())
}

/// Parses every non-blank line; errors carry the 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::json(format!("{}:{}", path.display(), i + 1), e))
        })
        .collect()
}

/// Writes through a sibling temporary file so readers never see a torn file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn canonical_sorts_nested_keys() {
        let v = json!({"b": 1, "a": {"z": [ {"y": 1, "x": 2} ], "c": null}});
        assert_eq!(
            to_canonical_line(&v).unwrap(),
            r#"{"a":{"c":null,"z":[{"x":2,"y":1}]},"b":1}"#
        );
        assert!(to_canonical_pretty(&v).unwrap().ends_with("}\n"));
    }

    #[test]
    fn jsonl_roundtrip_and_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        write_jsonl(&p, [json!({"k": 1}), json!({"k": 2})]).unwrap();
        let back: Vec<Value> = read_jsonl(&p).unwrap();
        assert_eq!(back, vec![json!({"k": 1}), json!({"k": 2})]);
        fs::write(&p, "{\"k\":1}\n\n{bad\n").unwrap();
        let err = read_jsonl::<Value>(&p).unwrap_err().to_string();
        assert!(err.contains(":3"), "{err}");
    }
}
