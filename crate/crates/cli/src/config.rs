//! The TOML run configuration read by `generate` and `refine`.
//!
//! ```toml
//! count = 1000
//! out = "dataset"
//! workers = 8
//!
//! [pools]
//! base = "pools/base"          # required
//! donor = "pools/donor"
//! image_crop = "pools/crops"
//! text = "pools/text"
//! foreground = "pools/objects"
//! image_crop_cap = 20000
//!
//! [composition]               # any CompositionConfig field
//! global_seed = 42
//! canvas = { width = 1024, height = 1024 }
//!
//! [refiner]
//! endpoint = "http://localhost:8000/v1/chat/completions"
//! model = "my-vlm"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::fs;
use std::path::{Path, PathBuf};

use layerforge::assets::{ingest_pool, SourceKind, DEFAULT_IMAGE_CROP_CAP};
use layerforge::composer::{CompositionConfig, Pools};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub count: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub pools: PoolConfig,
    #[serde(default)]
    pub composition: CompositionConfig,
    #[serde(default)]
    pub refiner: RefinerSettings,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolConfig {
    pub base: PathBuf,
    pub donor: Option<PathBuf>,
    pub image_crop: Option<PathBuf>,
    pub text: Option<PathBuf>,
    pub foreground: Option<PathBuf>,
    pub image_crop_cap: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinerSettings {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: Option<u64>,
    pub max_retries: Option<u32>,
    pub fallback: Option<bool>,
    pub concurrency: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(dir);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.pools.base);
        for p in [
            &mut self.pools.donor,
            &mut self.pools.image_crop,
            &mut self.pools.text,
            &mut self.pools.foreground,
            &mut self.out,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Checks everything that can be checked before touching any pool.
    pub fn validate(&self) -> CliResult<()> {
        for (name, path) in self.pool_paths() {
            if !path.is_dir() {
                return Err(CliError::usage(format!(
                    "pool directory for {name} does not exist: {}",
                    path.display()
                )));
            }
        }
        if self.workers == Some(0) {
            return Err(CliError::usage("workers must be at least 1"));
        }
        if self.pools.image_crop_cap == Some(0) {
            return Err(CliError::usage("pools.image_crop_cap must be positive"));
        }
        self.composition.validate()?;
        Ok(())
    }

    pub fn pool_paths(&self) -> Vec<(SourceKind, &Path)> {
        let p = &self.pools;
        let mut out = vec![(SourceKind::Base, p.base.as_path())];
        for (kind, path) in [
            (SourceKind::Donor, &p.donor),
            (SourceKind::ImageCrop, &p.image_crop),
            (SourceKind::Text, &p.text),
            (SourceKind::ForegroundObject, &p.foreground),
        ] {
            if let Some(path) = path {
                out.push((kind, path.as_path()));
            }
        }
        out
    }

    /// Ingests every configured pool. A pool without a single valid record
    /// is a configuration error.
    pub fn load_pools(&self) -> CliResult<Pools> {
        let load = |kind: SourceKind, path: &Path| -> CliResult<_> {
            let cap = match kind {
                SourceKind::ImageCrop => self.pools.image_crop_cap.unwrap_or(DEFAULT_IMAGE_CROP_CAP),
                _ => usize::MAX,
            };
            let ingested = ingest_pool(path, kind, cap).map_err(|e| CliError::usage(format!("{kind} pool: {e}")))?;
            if !ingested.diagnostics.is_empty() {
                log::warn!(
                    "{kind} pool {}: skipped {} invalid records",
                    path.display(),
                    ingested.diagnostics.len()
                );
            }
            log::info!("{kind} pool: {} records", ingested.pool.len());
            Ok(ingested.pool)
        };
        let p = &self.pools;
        let opt = |kind, path: &Option<PathBuf>| path.as_deref().map(|path| load(kind, path)).transpose();
        Ok(Pools {
            base: load(SourceKind::Base, &p.base)?,
            donor: opt(SourceKind::Donor, &p.donor)?,
            image_crop: opt(SourceKind::ImageCrop, &p.image_crop)?,
            text: opt(SourceKind::Text, &p.text)?,
            foreground: opt(SourceKind::ForegroundObject, &p.foreground)?,
        })
    }
}
