//! Dataset-level detection evaluation.

use serde::{Deserialize, Serialize};

use super::detection::{
    average_precision, detection_prf, iou_thresholds, localization_from_pairs, match_boxes, matched_localization,
    ApFlag, DetectionCounts, Localization,
};
use super::mean;
use crate::geometry::{BBox, CanvasSize};

/// IoU threshold for the strict counts and matched-box localization.
pub const MATCH_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionItem {
    pub id: String,
    pub pred: Vec<BBox>,
    pub gt: Vec<BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSampleRow {
    pub id: String,
    pub n_pred: usize,
    pub n_gt: usize,
    pub counts: DetectionCounts,
    pub ap50: f64,
    pub ap75: f64,
    pub map: f64,
    pub localization: Option<Localization>,
    pub flags: Vec<String>,
}

/// Counts are pooled over samples before precision/recall/F1; AP values
/// are means of per-sample APs; localization is averaged over every
/// matched pair in the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub canvas: [u32; 2],
    pub iou_threshold: f64,
    pub samples: Vec<DetectionSampleRow>,
    pub counts: DetectionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ap50: f64,
    pub ap75: f64,
    pub map: f64,
    pub localization: Option<Localization>,
    pub flags: Vec<String>,
}

fn ap_flag_name(f: ApFlag) -> &'static str {
    match f {
        ApFlag::NoGroundTruth => "ap:no-ground-truth",
        ApFlag::BothEmpty => "ap:both-empty",
    }
}

pub fn evaluate_detection(items: &[DetectionItem], canvas: CanvasSize) -> DetectionReport {
    let thresholds = iou_thresholds();
    let mut pooled_pairs = Vec::new();
    let samples: Vec<DetectionSampleRow> = items
        .iter()
        .map(|it| {
            let m = match_boxes(&it.pred, &it.gt, MATCH_THRESHOLD);
            pooled_pairs.extend(m.pairs.iter().map(|p| (it.pred[p.pred], it.gt[p.gt])));
            let aps = thresholds.map(|t| average_precision(&it.pred, &it.gt, t));
            let mut flags = Vec::new();
            if let Some(f) = aps[0].flag {
                flags.push(ap_flag_name(f).to_string());
            }
            DetectionSampleRow {
                id: it.id.clone(),
                n_pred: it.pred.len(),
                n_gt: it.gt.len(),
                counts: m.counts(),
                ap50: aps[0].value,
                ap75: aps[5].value,
                map: aps.iter().map(|a| a.value).sum::<f64>() / aps.len() as f64,
                localization: matched_localization(&it.pred, &it.gt, &m, canvas),
                flags,
            }
        })
        .collect();

    let counts: DetectionCounts = samples.iter().map(|s| s.counts).sum();
    let prf = detection_prf(counts);
    let mut flags = Vec::new();
    if prf.precision_undefined {
        flags.push("precision-undefined".to_string());
    }
    if prf.recall_undefined {
        flags.push("recall-undefined".to_string());
    }
    let localization = localization_from_pairs(pooled_pairs, canvas);
    if localization.is_none() {
        flags.push("no-matched-pairs".to_string());
    }
    if samples.is_empty() {
        flags.push("no-samples".to_string());
    }
    DetectionReport {
        canvas: [canvas.width, canvas.height],
        iou_threshold: MATCH_THRESHOLD,
        counts,
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        ap50: mean(samples.iter().map(|s| s.ap50)).unwrap_or(0.0),
        ap75: mean(samples.iter().map(|s| s.ap75)).unwrap_or(0.0),
        map: mean(samples.iter().map(|s| s.map)).unwrap_or(0.0),
        localization,
        flags,
        samples,
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl DetectionReport {
    /// One row per sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,n_pred,n_gt,tp,fp,fn,ap50,ap75,map,miou,mgiou,center_px,center_norm,flags\n");
        for s in &self.samples {
            let l = s.localization;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                csv_field(&s.id),
                s.n_pred,
                s.n_gt,
                s.counts.tp,
                s.counts.fp,
                s.counts.fn_,
                s.ap50,
                s.ap75,
                s.map,
                opt(l.map(|l| l.miou)),
                opt(l.map(|l| l.mgiou)),
                opt(l.map(|l| l.center_px)),
                opt(l.map(|l| l.center_norm)),
                csv_field(&s.flags.join(";")),
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x0: i32, y0: i32, x1: i32, y1: i32) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn perfect_predictions() {
        let gt = vec![b(0, 0, 10, 10), b(100, 100, 300, 200)];
        let items = vec![DetectionItem {
            id: "a".into(),
            pred: gt.clone(),
            gt,
        }];
        let r = evaluate_detection(&items, CanvasSize::DEFAULT);
        assert_eq!((r.precision, r.recall, r.f1, r.map), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(r.localization.unwrap().miou, 1.0);
        assert!(r.flags.is_empty());
        assert_eq!(r.to_csv().lines().count(), 2);
    }

    #[test]
    fn empty_predictions_flagged() {
        let items = vec![DetectionItem {
            id: "a".into(),
            pred: vec![],
            gt: vec![b(0, 0, 10, 10)],
        }];
        let r = evaluate_detection(&items, CanvasSize::DEFAULT);
        assert_eq!(r.recall, 0.0);
        assert!(r.flags.contains(&"precision-undefined".to_string()));
        assert!(r.flags.contains(&"no-matched-pairs".to_string()));
    }

    #[test]
    fn counts_pool_across_samples() {
        let g = b(0, 0, 10, 10);
        let far = b(500, 500, 510, 510);
        let items = vec![
            DetectionItem { id: "a".into(), pred: vec![g], gt: vec![g] },
            DetectionItem { id: "b".into(), pred: vec![far], gt: vec![g, far] },
        ];
        let r = evaluate_detection(&items, CanvasSize::DEFAULT);
        assert_eq!(r.counts, DetectionCounts::new(2, 0, 1));
        assert_eq!(r.localization.unwrap().pairs, 2);
    }

    #[test]
    fn csv_escaping() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("q\""), "\"q\"\"\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
