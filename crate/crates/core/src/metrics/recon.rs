//! Reconstruction quality of predicted layer stacks against generated
//! ground truth.
//!
//! A prediction directory mirrors the dataset layout:
//! `samples/<id>/composite.png`, `background.png` and `layer_<k>.png`.
//! Layer images may be canvas-sized or cropped to the ground-truth box;
//! cropped ones are expanded onto a transparent canvas before comparison.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layer_stats::BinSet;
use super::report::csv_field;
use super::{mask_metrics, mean};
use crate::composer::{layer_file_name, BACKGROUND_FILE, COMPOSITE_FILE};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::imaging::{
    alpha_mask, composite_over_in_place, flatten, psnr, ssim_with, Channels, RgbaImage, DEFAULT_ALPHA_THRESHOLD,
};
use crate::serialization::{read_index, read_manifest, SampleManifest, INDEX_FILE, MANIFEST_FILE, SAMPLES_DIR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconSample {
    pub id: String,
    pub layer_count: usize,
    /// RGB comparison of the composites.
    pub composite_psnr: f64,
    pub composite_ssim: f64,
    /// RGBA comparison averaged over the background and every foreground.
    pub layer_psnr: f64,
    pub layer_ssim: f64,
    /// Alpha-mask metrics averaged over foregrounds.
    pub mask_iou: f64,
    pub mask_precision: f64,
    pub mask_recall: f64,
    pub mask_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconAggregate {
    pub samples: usize,
    pub composite_psnr: f64,
    pub composite_ssim: f64,
    pub layer_psnr: f64,
    pub layer_ssim: f64,
    pub mask_iou: f64,
    pub mask_precision: f64,
    pub mask_recall: f64,
    pub mask_f1: f64,
}

impl ReconAggregate {
    pub fn over(samples: &[&ReconSample]) -> Option<Self> {
        let m = |f: fn(&ReconSample) -> f64| mean(samples.iter().map(|s| f(s)));
        Some(Self {
            samples: samples.len(),
            composite_psnr: m(|s| s.composite_psnr)?,
            composite_ssim: m(|s| s.composite_ssim)?,
            layer_psnr: m(|s| s.layer_psnr)?,
            layer_ssim: m(|s| s.layer_ssim)?,
            mask_iou: m(|s| s.mask_iou)?,
            mask_precision: m(|s| s.mask_precision)?,
            mask_recall: m(|s| s.mask_recall)?,
            mask_f1: m(|s| s.mask_f1)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconBin {
    pub bin: String,
    pub lo: usize,
    pub hi: usize,
    pub aggregate: Option<ReconAggregate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconReport {
    pub samples: Vec<ReconSample>,
    /// Paired samples that could not be evaluated.
    pub failed: Vec<SampleFailure>,
    /// Ids present on only one side.
    pub unpaired: Vec<String>,
    pub aggregate: Option<ReconAggregate>,
    /// Aggregates grouped by ground-truth layer count.
    pub by_layer_count: Vec<ReconBin>,
}

impl ReconReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "id,layer_count,composite_psnr,composite_ssim,layer_psnr,layer_ssim,mask_iou,mask_precision,mask_recall,mask_f1,error\n",
        );
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},\n",
                csv_field(&s.id),
                s.layer_count,
                s.composite_psnr,
                s.composite_ssim,
                s.layer_psnr,
                s.layer_ssim,
                s.mask_iou,
                s.mask_precision,
                s.mask_recall,
                s.mask_f1
            ));
        }
        for f in &self.failed {
            out.push_str(&format!("{},,,,,,,,,,{}\n", csv_field(&f.id), csv_field(&f.error)));
        }
        out
    }
}

/// Places a box-sized layer on a transparent canvas; canvas-sized layers
/// are returned unchanged.
pub fn expand_layer(img: &RgbaImage, bbox: BBox, canvas: (u32, u32)) -> Result<RgbaImage> {
    if img.dimensions() == canvas {
        return Ok(img.clone());
    }
    if img.dimensions() != (bbox.width(), bbox.height()) {
        return Err(Error::DimensionMismatch {
            left_w: img.width(),
            left_h: img.height(),
            right_w: bbox.width(),
            right_h: bbox.height(),
        });
    }
    let mut out = RgbaImage::new(canvas.0, canvas.1)?;
    composite_over_in_place(&mut out, img, (bbox.x0, bbox.y0));
    Ok(out)
}

fn check_size(img: &RgbaImage, canvas: (u32, u32)) -> Result<()> {
    if img.dimensions() != canvas {
        return Err(Error::DimensionMismatch {
            left_w: img.width(),
            left_h: img.height(),
            right_w: canvas.0,
            right_h: canvas.1,
        });
    }
    Ok(())
}

/// Compares one predicted sample directory against its ground truth.
pub fn evaluate_sample(pred_sample_dir: &Path, gt_root: &Path, gt: &SampleManifest) -> Result<ReconSample> {
    let canvas = (gt.canvas[0], gt.canvas[1]);
    let gt_bg = RgbaImage::load(gt_root.join(&gt.background_path))?;
    let pred_bg = RgbaImage::load(pred_sample_dir.join(BACKGROUND_FILE))?;
    check_size(&pred_bg, canvas)?;

    let mut gt_layers = Vec::with_capacity(gt.layers.len());
    let mut pred_layers = Vec::with_capacity(gt.layers.len());
    for l in &gt.layers {
        gt_layers.push(expand_layer(&RgbaImage::load(gt_root.join(&l.image_path))?, l.bbox, canvas)?);
        let pred = RgbaImage::load(pred_sample_dir.join(layer_file_name(l.index)))?;
        pred_layers.push(expand_layer(&pred, l.bbox, canvas)?);
    }

    let gt_comp = RgbaImage::load(gt_root.join(&gt.composite_path))?;
    let pred_comp_path = pred_sample_dir.join(COMPOSITE_FILE);
    let pred_comp = if pred_comp_path.exists() {
        RgbaImage::load(&pred_comp_path)?
    } else {
        flatten(&pred_bg, pred_layers.iter().map(|l| (l, (0, 0))))
    };
    check_size(&pred_comp, canvas)?;

    let mut layer_psnr = vec![psnr(&pred_bg, &gt_bg, Channels::Rgba)?];
    let mut layer_ssim = vec![ssim_with(&pred_bg, &gt_bg, Channels::Rgba)?];
    let mut masks = Vec::with_capacity(gt_layers.len());
    for (p, g) in pred_layers.iter().zip(&gt_layers) {
        layer_psnr.push(psnr(p, g, Channels::Rgba)?);
        layer_ssim.push(ssim_with(p, g, Channels::Rgba)?);
        masks.push(mask_metrics(
            &alpha_mask(p, DEFAULT_ALPHA_THRESHOLD),
            &alpha_mask(g, DEFAULT_ALPHA_THRESHOLD),
        )?);
    }
    let avg = |v: &[f64]| mean(v.iter().copied()).unwrap_or(0.0);
    let mask_avg = |f: fn(&super::MaskMetrics) -> f64| mean(masks.iter().map(f)).unwrap_or(1.0);
    Ok(ReconSample {
        id: gt.sample_id.clone(),
        layer_count: gt.layers.len(),
        composite_psnr: psnr(&pred_comp, &gt_comp, Channels::Rgb)?,
        composite_ssim: ssim_with(&pred_comp, &gt_comp, Channels::Rgb)?,
        layer_psnr: avg(&layer_psnr),
        layer_ssim: avg(&layer_ssim),
        mask_iou: mask_avg(|m| m.iou),
        mask_precision: mask_avg(|m| m.precision),
        mask_recall: mask_avg(|m| m.recall),
        mask_f1: mask_avg(|m| m.f1),
    })
}

fn sample_ids(root: &Path) -> Result<BTreeSet<String>> {
    let dir = root.join(SAMPLES_DIR);
    let mut ids = BTreeSet::new();
    for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
        let entry = entry.map_err(|e| Error::io(&dir, e))?;
        if entry.path().is_dir() {
            ids.insert(entry.file_name().to_string_lossy().into_owned());
        }
    }
    Ok(ids)
}

/// Ground-truth ids: the successful entries of `index.jsonl` when present,
/// otherwise every sample directory holding a manifest.
fn gt_ids(gt_dir: &Path) -> Result<BTreeSet<String>> {
    let index = gt_dir.join(INDEX_FILE);
    if index.is_file() {
        return Ok(read_index(&index)?.into_iter().filter(|e| e.is_ok()).map(|e| e.id).collect());
    }
    Ok(sample_ids(gt_dir)?
        .into_iter()
        .filter(|id| gt_dir.join(SAMPLES_DIR).join(id).join(MANIFEST_FILE).is_file())
        .collect())
}

/// Evaluates every sample present on both sides. Unreadable or mismatched
/// predictions become [`SampleFailure`]s and are left out of aggregates.
pub fn evaluate_reconstruction(pred_dir: &Path, gt_dir: &Path, bins: &BinSet) -> Result<ReconReport> {
    let gt = gt_ids(gt_dir)?;
    let pred = sample_ids(pred_dir)?;
    let paired: Vec<&String> = gt.intersection(&pred).collect();
    let unpaired: Vec<String> = gt.symmetric_difference(&pred).cloned().collect();
    for id in &unpaired {
        log::warn!("sample {id} has no counterpart, excluded");
    }

    let results: Vec<std::result::Result<ReconSample, SampleFailure>> = paired
        .par_iter()
        .map(|id| {
            let manifest = gt_dir.join(SAMPLES_DIR).join(id).join(MANIFEST_FILE);
            read_manifest(&manifest)
                .and_then(|m| evaluate_sample(&pred_dir.join(SAMPLES_DIR).join(id), gt_dir, &m))
                .map_err(|e| SampleFailure {
                    id: (*id).clone(),
                    error: e.to_string(),
                })
        })
        .collect();

    let mut samples = Vec::new();
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(f) => {
                log::warn!("sample {} not evaluated: {}", f.id, f.error);
                failed.push(f);
            }
        }
    }
    let all: Vec<&ReconSample> = samples.iter().collect();
    let by_layer_count = bins
        .bins()
        .iter()
        .map(|b| {
            let members: Vec<&ReconSample> = samples.iter().filter(|s| b.contains(s.layer_count)).collect();
            ReconBin {
                bin: b.to_string(),
                lo: b.lo,
                hi: b.hi,
                aggregate: ReconAggregate::over(&members),
            }
        })
        .collect();
    Ok(ReconReport {
        aggregate: ReconAggregate::over(&all),
        samples,
        failed,
        unpaired,
        by_layer_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expand_places_crop() {
        let crop = RgbaImage::filled(2, 3, [9, 9, 9, 255]).unwrap();
        let b = BBox::new(1, 1, 3, 4).unwrap();
        let full = expand_layer(&crop, b, (5, 5)).unwrap();
        assert_eq!(full.get(1, 1), [9, 9, 9, 255]);
        assert_eq!(full.get(0, 0), [0, 0, 0, 0]);
        assert_eq!(full.get(3, 4), [0, 0, 0, 0]);
        assert_eq!(expand_layer(&full, b, (5, 5)).unwrap(), full);
        assert!(expand_layer(&RgbaImage::new(4, 4).unwrap(), b, (5, 5)).is_err());
    }

    #[test]
    fn aggregate_over_nothing() {
        assert!(ReconAggregate::over(&[]).is_none());
    }
}
