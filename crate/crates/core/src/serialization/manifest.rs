use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{to_canonical_pretty, write_atomic};
use crate::assets::SourceKind;
use crate::error::{Error, Result};
use crate::geometry::{BBox, QUANTUM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestLayer {
    /// Stacking position among foregrounds, 0 = directly above the background.
    pub index: usize,
    pub source: SourceKind,
    pub asset_id: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub quantized_box: BBox,
    pub caption: String,
    /// Relative to the dataset root; the PNG is cropped to `box`.
    pub image_path: String,
    pub overlap_score: f64,
}

/// Everything needed to rebuild, validate or train on one sample. Paths are
/// relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleManifest {
    pub sample_id: String,
    pub seed: u64,
    pub global_seed: u64,
    pub seed_scheme: String,
    /// `[width, height]`.
    pub canvas: [u32; 2],
    pub base_id: String,
    pub composite_path: String,
    pub background_path: String,
    pub background_caption: String,
    pub layers: Vec<ManifestLayer>,
    pub raw_caption: String,
    #[serde(default)]
    pub refined_caption: Option<String>,
    #[serde(default)]
    pub flags: Vec<String>,
}

impl SampleManifest {
    pub fn caption(&self) -> &str {
        self.refined_caption.as_deref().unwrap_or(&self.raw_caption)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config(format!("{}: manifest without layers", self.sample_id)));
        }
        let canvas = BBox::new(0, 0, self.canvas[0] as i32, self.canvas[1] as i32)?;
        for l in &self.layers {
            if !canvas.contains(&l.bbox) || !canvas.contains(&l.quantized_box) {
                return Err(Error::Config(format!("{}: layer {} box outside canvas", self.sample_id, l.index)));
            }
            let aligned = l
                .quantized_box
                .to_array()
                .iter()
                .zip([self.canvas[0], self.canvas[1], self.canvas[0], self.canvas[1]])
                .all(|(&v, edge)| v % QUANTUM == 0 || v as u32 == edge);
            if !aligned || !l.quantized_box.contains(&l.bbox) {
                return Err(Error::Config(format!(
                    "{}: layer {} quantized box {} invalid",
                    self.sample_id, l.index, l.quantized_box
                )));
            }
        }
        Ok(())
    }
}

pub fn write_manifest(manifest: &SampleManifest, path: &Path) -> Result<()> {
    write_atomic(path, to_canonical_pretty(manifest)?.as_bytes())
}

pub fn read_manifest(path: &Path) -> Result<SampleManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}
