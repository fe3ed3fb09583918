//! Asset pools: base designs, donor designs, image crops, pre-rendered text
//! layers and cut-out foreground objects.
//!
//! Each pool is a directory with a `pool.jsonl` sidecar, one record per line:
//!
//! ```text
//! {"id": "...", "kind": "image-crop", "image": "crops/a.png", "caption": "...",
//!  "layers": [{"image": "...", "box": [x0, y0, x1, y1], "caption": "..."}]}
//! ```
//!
//! `layers` is required for `base` and `donor` records, where `image` is the
//! background. A sub-layer image is either already cropped to its box or
//! covers the whole background, in which case it is cropped on load.
//! Paths are relative to the pool directory.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, CanvasSize};
use crate::imaging::RgbaImage;

pub const SIDECAR_FILE: &str = "pool.jsonl";

/// Image-crop pools are capped at this many records unless configured.
pub const DEFAULT_IMAGE_CROP_CAP: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    Base,
    Donor,
    ImageCrop,
    Text,
    ForegroundObject,
}

impl SourceKind {
    pub const ALL: [SourceKind; 5] = [
        SourceKind::Base,
        SourceKind::Donor,
        SourceKind::ImageCrop,
        SourceKind::Text,
        SourceKind::ForegroundObject,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Base => "base",
            SourceKind::Donor => "donor",
            SourceKind::ImageCrop => "image-crop",
            SourceKind::Text => "text",
            SourceKind::ForegroundObject => "foreground-object",
        }
    }

    /// Whether records of this kind are layered designs.
    pub fn is_design(self) -> bool {
        matches!(self, SourceKind::Base | SourceKind::Donor)
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SourceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown source kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubLayer {
    pub image: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
    #[serde(default)]
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetRecord {
    pub id: String,
    pub kind: SourceKind,
    /// Relative to the pool root.
    pub image: String,
    #[serde(default)]
    pub caption: String,
    /// Filled in from the decoded image during ingestion.
    #[serde(default)]
    pub native_size: (u32, u32),
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub layers: Vec<SubLayer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssetPool {
    kind: SourceKind,
    root: PathBuf,
    records: Vec<AssetRecord>,
    cap: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    pub cap: usize,
    /// Fully decode every image instead of reading headers only.
    pub decode_pixels: bool,
}

impl IngestOptions {
    pub fn with_cap(cap: usize) -> Self {
        Self {
            cap,
            decode_pixels: true,
        }
    }
}

/// Why a sidecar line was not admitted into the pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestDiagnostic {
    pub line: usize,
    pub id: Option<String>,
    pub message: String,
}

impl fmt::Display for IngestDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.id {
            Some(id) => write!(f, "line {} ({id}): {}", self.line, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

#[derive(Debug)]
pub struct Ingested {
    pub pool: AssetPool,
    pub diagnostics: Vec<IngestDiagnostic>,
}

pub fn ingest_pool(root: impl AsRef<Path>, kind: SourceKind, cap: usize) -> Result<Ingested> {
    ingest_pool_with(root, kind, IngestOptions::with_cap(cap))
}

/// Reads and validates a pool directory. Records are ordered by id and the
/// first `cap` valid ones are kept; invalid records are skipped with a
/// diagnostic. A pool with no valid record is an error.
pub fn ingest_pool_with(root: impl AsRef<Path>, kind: SourceKind, opts: IngestOptions) -> Result<Ingested> {
    let root = root.as_ref();
    let sidecar = root.join(SIDECAR_FILE);
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;

    let mut diagnostics = Vec::new();
    let mut parsed: Vec<(usize, AssetRecord)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<AssetRecord>(line) {
            Ok(rec) if rec.kind != kind => diagnostics.push(IngestDiagnostic {
                line: line_no,
                id: Some(rec.id),
                message: format!("kind {} in a {kind} pool", rec.kind),
            }),
            Ok(rec) => parsed.push((line_no, rec)),
            Err(e) => diagnostics.push(IngestDiagnostic {
                line: line_no,
                id: None,
                message: format!("malformed record: {e}"),
            }),
        }
    }

    parsed.sort_by(|a, b| a.1.id.cmp(&b.1.id).then(a.0.cmp(&b.0)));
    let mut seen = BTreeSet::new();
    parsed.retain(|(line, rec)| {
        if seen.insert(rec.id.clone()) {
            true
        } else {
            diagnostics.push(IngestDiagnostic {
                line: *line,
                id: Some(rec.id.clone()),
                message: "duplicate id".into(),
            });
            false
        }
    });

    // Validate in id order, in parallel batches, until the cap is reached.
    let mut records = Vec::new();
    let batch = 512usize.max(opts.cap.min(4096));
    for chunk in parsed.chunks(batch) {
        if records.len() >= opts.cap {
            break;
        }
        let checked: Vec<_> = chunk
            .par_iter()
            .map(|(line, rec)| (*line, validate_record(root, rec.clone(), opts.decode_pixels)))
            .collect();
        for (line, outcome) in checked {
            match outcome {
                Ok(rec) if records.len() < opts.cap => records.push(rec),
                Ok(_) => {}
                Err((id, message)) => diagnostics.push(IngestDiagnostic {
                    line,
                    id: Some(id),
                    message,
                }),
            }
        }
    }

    diagnostics.sort_by_key(|d| d.line);
    for d in &diagnostics {
        log::warn!("{}: {d}", sidecar.display());
    }
    if records.is_empty() {
        return Err(Error::EmptyPool(format!("no valid {kind} records in {}", root.display())));
    }
    Ok(Ingested {
        pool: AssetPool {
            kind,
            root: root.to_path_buf(),
            records,
            cap: opts.cap,
        },
        diagnostics,
    })
}

fn image_size(path: &Path, decode: bool) -> std::result::Result<(u32, u32), String> {
    if decode {
        RgbaImage::load(path).map(|img| img.dimensions()).map_err(|e| e.to_string())
    } else {
        image::image_dimensions(path).map_err(|e| format!("{}: {e}", path.display()))
    }
}

fn validate_record(
    root: &Path,
    mut rec: AssetRecord,
    decode: bool,
) -> std::result::Result<AssetRecord, (String, String)> {
    let fail = |rec: &AssetRecord, msg: String| (rec.id.clone(), msg);
    let size = image_size(&root.join(&rec.image), decode).map_err(|m| fail(&rec, m))?;
    if size.0 == 0 || size.1 == 0 {
        return Err(fail(&rec, "zero-sized image".into()));
    }
    rec.native_size = size;

    if rec.kind.is_design() {
        if rec.layers.is_empty() {
            return Err(fail(&rec, "layered design without foreground layers".into()));
        }
        let canvas = BBox::new(0, 0, size.0 as i32, size.1 as i32).expect("nonzero size");
        for (i, layer) in rec.layers.iter().enumerate() {
            if !canvas.contains(&layer.bbox) {
                return Err(fail(&rec, format!("layer {i} box {} outside background", layer.bbox)));
            }
            let dims = image_size(&root.join(&layer.image), decode).map_err(|m| fail(&rec, m))?;
            if dims != (layer.bbox.width(), layer.bbox.height()) && dims != size {
                return Err(fail(
                    &rec,
                    format!(
                        "layer {i} image is {}x{}, expected box size {}x{} or full background",
                        dims.0,
                        dims.1,
                        layer.bbox.width(),
                        layer.bbox.height()
                    ),
                ));
            }
        }
    } else if !rec.layers.is_empty() {
        return Err(fail(&rec, format!("{} records carry no sub-layers", rec.kind)));
    }
    Ok(rec)
}

impl AssetPool {
    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn records(&self) -> &[AssetRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Canonical JSONL form of the validated records.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn load_image(&self, rec: &AssetRecord) -> Result<RgbaImage> {
        RgbaImage::load(self.resolve(&rec.image))
    }

    /// Sub-layer `idx` of a design record, cropped to its box.
    pub fn load_sub_layer(&self, rec: &AssetRecord, idx: usize) -> Result<RgbaImage> {
        let layer = rec
            .layers
            .get(idx)
            .ok_or_else(|| Error::InvalidImage(format!("{} has no layer {idx}", rec.id)))?;
        let img = RgbaImage::load(self.resolve(&layer.image))?;
        if img.dimensions() == (layer.bbox.width(), layer.bbox.height()) {
            Ok(img)
        } else {
            img.crop(layer.bbox)
        }
    }
}

/// Uniform draw from the pool.
pub fn sample_asset<'a, R: Rng + ?Sized>(pool: &'a AssetPool, rng: &mut R) -> Result<&'a AssetRecord> {
    if pool.is_empty() {
        return Err(Error::EmptyPool(pool.kind.to_string()));
    }
    Ok(&pool.records[rng.gen_range(0..pool.len())])
}

/// `min(n, pool size)` distinct records, uniformly without replacement.
pub fn sample_distinct<'a, R: Rng + ?Sized>(
    pool: &'a AssetPool,
    n: usize,
    rng: &mut R,
) -> Result<Vec<&'a AssetRecord>> {
    if pool.is_empty() {
        return Err(Error::EmptyPool(pool.kind.to_string()));
    }
    let n = n.min(pool.len());
    Ok(index::sample(rng, pool.len(), n).into_iter().map(|i| &pool.records[i]).collect())
}

/// Relative scale range `(lo, hi)` with `0 < lo <= hi <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleRange(pub f64, pub f64);

impl ScaleRange {
    pub fn validate(&self, name: &str) -> Result<()> {
        let ScaleRange(lo, hi) = *self;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::Config(format!("{name} must satisfy 0 < lo <= hi <= 1, got ({lo}, {hi})")));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.0 == self.1 {
            self.0
        } else {
            rng.gen_range(self.0..=self.1)
        }
    }
}

/// Size of a `native` image whose longest side is scaled to
/// `scale * max(W, H)`, aspect preserved, shrunk further if needed so it
/// fits on the canvas.
pub fn scaled_size(native: (u32, u32), canvas: CanvasSize, scale: f64) -> Result<(u32, u32)> {
    let (w, h) = native;
    if w == 0 || h == 0 {
        return Err(Error::InvalidImage(format!("degenerate source {w}x{h}")));
    }
    let target_long = (scale * canvas.width.max(canvas.height) as f64).round().max(1.0);
    let factor = (target_long / w.max(h) as f64)
        .min(canvas.width as f64 / w as f64)
        .min(canvas.height as f64 / h as f64);
    let nw = ((w as f64 * factor).round() as u32).clamp(1, canvas.width);
    let nh = ((h as f64 * factor).round() as u32).clamp(1, canvas.height);
    Ok((nw, nh))
}

pub fn scale_image(img: &RgbaImage, canvas: CanvasSize, scale: f64) -> Result<RgbaImage> {
    let (w, h) = scaled_size(img.dimensions(), canvas, scale)?;
    img.resize(w, h)
}

#[derive(Debug, Clone)]
pub struct ScaledAsset {
    pub image: RgbaImage,
    pub scale: f64,
}

impl ScaledAsset {
    pub fn size(&self) -> (u32, u32) {
        self.image.dimensions()
    }
}

/// Loads `rec`, draws `s ~ U[lo, hi]` and resamples bilinearly.
pub fn scale_asset<R: Rng + ?Sized>(
    pool: &AssetPool,
    rec: &AssetRecord,
    canvas: CanvasSize,
    range: ScaleRange,
    rng: &mut R,
) -> Result<ScaledAsset> {
    range.validate("scale range")?;
    let scale = range.sample(rng);
    let img = pool.load_image(rec)?;
    Ok(ScaledAsset {
        image: scale_image(&img, canvas, scale)?,
        scale,
    })
}
