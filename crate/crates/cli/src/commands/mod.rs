pub mod eval;
pub mod export;
pub mod generate;
pub mod refine;
pub mod stats;

use std::fs;
use std::path::{Path, PathBuf};

use layerforge::metrics::BinSet;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Resolves a `--bins` argument: a preset name or an explicit list.
pub fn parse_bins(spec: &str) -> CliResult<BinSet> {
    match spec {
        "distribution" => Ok(BinSet::distribution()),
        "evaluation" => Ok(BinSet::evaluation()),
        custom => custom
            .parse()
            .map_err(|e| CliError::usage(format!("--bins {custom:?}: {e}"))),
    }
}

pub fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let text = layerforge::serialization::to_canonical_pretty(value)?;
    print!("{text}");
    Ok(())
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

/// The dataset root an index file belongs to.
pub fn dataset_root(index: &Path) -> PathBuf {
    match index.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}
