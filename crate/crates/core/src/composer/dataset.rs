//! Parallel dataset generation onto disk.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;

use super::{format_sample_id, generate_sample, AssembledSample, CompositionConfig, Pools, SEED_SCHEME};
use crate::captioning::draft_caption;
use crate::error::{Error, Result};
use crate::imaging::{flatten, RgbaImage};
use crate::serialization::{
    build_index_for, write_manifest, ManifestLayer, SampleManifest, ERROR_FILE, MANIFEST_FILE, SAMPLES_DIR,
};

pub const COMPOSITE_FILE: &str = "composite.png";
pub const BACKGROUND_FILE: &str = "background.png";

pub fn layer_file_name(k: usize) -> String {
    format!("layer_{k:02}.png")
}

/// What happened to one sample index.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleOutcome {
    Written(Box<SampleManifest>),
    /// The sample itself could not be built; an `error.txt` was written.
    Failed { id: String, error: String },
}

impl SampleOutcome {
    pub fn id(&self) -> &str {
        match self {
            SampleOutcome::Written(m) => &m.sample_id,
            SampleOutcome::Failed { id, .. } => id,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct GenerationReport {
    pub out_dir: PathBuf,
    pub requested: u64,
    pub written: usize,
    /// `(id, error)` for samples recorded as failed.
    pub failed: Vec<(String, String)>,
    /// Set when an output write failed and the run stopped early.
    pub aborted: Option<String>,
    /// Present once the index has been written.
    pub index_path: Option<PathBuf>,
    /// Foreground layer count per written sample, in id order.
    pub layer_counts: Vec<usize>,
}

impl GenerationReport {
    pub fn is_complete(&self) -> bool {
        self.aborted.is_none() && self.index_path.is_some()
    }
}

/// Builds the manifest for an assembled sample; paths are relative to the
/// dataset root.
pub fn manifest_for(sample: &AssembledSample, cfg: &CompositionConfig) -> SampleManifest {
    let id = &sample.sample_id;
    let rel = |file: &str| format!("{SAMPLES_DIR}/{id}/{file}");
    let draft = draft_caption(sample);
    let layers = sample
        .layers
        .iter()
        .zip(&sample.quantized_boxes)
        .enumerate()
        .map(|(k, (l, q))| ManifestLayer {
            index: k,
            source: l.source,
            asset_id: l.asset_id.clone(),
            bbox: l.placed_box,
            quantized_box: *q,
            caption: l.caption.clone(),
            image_path: rel(&layer_file_name(k)),
            overlap_score: l.overlap,
        })
        .collect();
    SampleManifest {
        sample_id: id.clone(),
        seed: sample.seed,
        global_seed: cfg.global_seed,
        seed_scheme: SEED_SCHEME.to_string(),
        canvas: [sample.canvas.width, sample.canvas.height],
        base_id: sample.base_id.clone(),
        composite_path: rel(COMPOSITE_FILE),
        background_path: rel(BACKGROUND_FILE),
        background_caption: sample.background_caption.clone(),
        layers,
        raw_caption: draft.raw,
        refined_caption: None,
        flags: sample.flags.clone(),
    }
}

/// Flattens the stored background and layer PNGs of a manifest.
pub fn recomposite(manifest: &SampleManifest, root: &Path) -> Result<RgbaImage> {
    let background = RgbaImage::load(root.join(&manifest.background_path))?;
    let layers = manifest
        .layers
        .iter()
        .map(|l| {
            let img = RgbaImage::load(root.join(&l.image_path))?;
            if img.dimensions() != (l.bbox.width(), l.bbox.height()) {
                return Err(Error::DimensionMismatch {
                    left_w: img.width(),
                    left_h: img.height(),
                    right_w: l.bbox.width(),
                    right_h: l.bbox.height(),
                });
            }
            Ok((img, (l.bbox.x0, l.bbox.y0)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(flatten(&background, layers.iter().map(|(img, o)| (img, *o))))
}

fn write_sample(sample: &AssembledSample, cfg: &CompositionConfig, out_dir: &Path) -> Result<SampleManifest> {
    let dir = out_dir.join(SAMPLES_DIR).join(&sample.sample_id);
    let manifest = manifest_for(sample, cfg);
    sample.composite.save_png(dir.join(COMPOSITE_FILE))?;
    sample.background.save_png(dir.join(BACKGROUND_FILE))?;
    for (k, layer) in sample.layers.iter().enumerate() {
        layer.image.save_png(dir.join(layer_file_name(k)))?;
    }
    // Last, so a manifest never points at missing images.
    write_manifest(&manifest, &dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Generates sample `index` into `out_dir/samples/<id>/`, replacing any
/// previous contents. A sample that cannot be built is recorded as
/// [`SampleOutcome::Failed`]; only failures to write output are errors.
pub fn generate_sample_to_dir(
    index: u64,
    cfg: &CompositionConfig,
    pools: &Pools,
    out_dir: &Path,
) -> Result<SampleOutcome> {
    let id = format_sample_id(index);
    let dir = out_dir.join(SAMPLES_DIR).join(&id);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    match generate_sample(index, cfg, pools) {
        Ok(sample) => Ok(SampleOutcome::Written(Box::new(write_sample(&sample, cfg, out_dir)?))),
        Err(e) => {
            let error = e.to_string();
            log::warn!("sample {id} failed: {error}");
            let path = dir.join(ERROR_FILE);
            fs::write(&path, format!("{error}\n")).map_err(|e| Error::io(&path, e))?;
            Ok(SampleOutcome::Failed { id, error })
        }
    }
}

pub fn generate_dataset(
    cfg: &CompositionConfig,
    pools: &Pools,
    count: u64,
    workers: usize,
    out_dir: &Path,
) -> Result<GenerationReport> {
    generate_dataset_with_progress(cfg, pools, count, workers, out_dir, |_, _| {})
}

/// Generates samples `0..count` on `workers` threads and writes
/// `index.jsonl`. Output bytes do not depend on `workers`.
///
/// `progress(done, total)` is called from worker threads after each sample.
pub fn generate_dataset_with_progress<F>(
    cfg: &CompositionConfig,
    pools: &Pools,
    count: u64,
    workers: usize,
    out_dir: &Path,
    progress: F,
) -> Result<GenerationReport>
where
    F: Fn(usize, u64) + Sync,
{
    cfg.validate()?;
    if workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    let samples_dir = out_dir.join(SAMPLES_DIR);
    fs::create_dir_all(&samples_dir).map_err(|e| Error::io(&samples_dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;

    let abort = AtomicBool::new(false);
    let first_io_error: Mutex<Option<(u64, String)>> = Mutex::new(None);
    let done = AtomicUsize::new(0);

    let outcomes: Vec<Option<SampleOutcome>> = pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| {
                if abort.load(Ordering::Relaxed) {
                    return None;
                }
                let outcome = match generate_sample_to_dir(i, cfg, pools, out_dir) {
                    Ok(o) => Some(o),
                    Err(e) => {
                        log::error!("writing sample {i} failed: {e}");
                        abort.store(true, Ordering::Relaxed);
                        let mut slot = first_io_error.lock().unwrap_or_else(|p| p.into_inner());
                        if slot.as_ref().is_none_or(|(j, _)| i < *j) {
                            *slot = Some((i, e.to_string()));
                        }
                        None
                    }
                };
                progress(done.fetch_add(1, Ordering::Relaxed) + 1, count);
                outcome
            })
            .collect()
    });

    let mut report = GenerationReport {
        out_dir: out_dir.to_path_buf(),
        requested: count,
        ..Default::default()
    };
    for outcome in outcomes.into_iter().flatten() {
        match outcome {
            SampleOutcome::Written(m) => {
                report.written += 1;
                report.layer_counts.push(m.layers.len());
            }
            SampleOutcome::Failed { id, error } => report.failed.push((id, error)),
        }
    }
    if let Some((i, e)) = first_io_error.into_inner().unwrap_or_else(|p| p.into_inner()) {
        report.aborted = Some(format!("sample {}: {e}", format_sample_id(i)));
        return Ok(report);
    }
    let ids: Vec<String> = (0..count).map(format_sample_id).collect();
    report.index_path = Some(build_index_for(out_dir, &ids)?);
    Ok(report)
}
