//! Box matching, strict detection counts, uniform-score AP and matched-box
//! localization.

use serde::{Deserialize, Serialize};

use crate::geometry::{center_distance, giou, iou, BBox, CanvasSize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl DetectionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, fp, fn_ }
    }
}

impl std::ops::Add for DetectionCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

impl std::iter::Sum for DetectionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub pred: usize,
    pub gt: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gt: Vec<usize>,
}

impl MatchResult {
    pub fn counts(&self) -> DetectionCounts {
        DetectionCounts::new(
            self.pairs.len() as u64,
            self.unmatched_pred.len() as u64,
            self.unmatched_gt.len() as u64,
        )
    }
}

/// Greedy one-to-one matching: candidate pairs with IoU at or above the
/// threshold are taken in descending IoU order, ties broken by
/// `(pred, gt)` index.
///
/// Greedy matching maximises the number of matches on typical detector
/// output but not on every input: a box overlapping two ground truths
/// above the threshold can steal the only partner of another prediction.
///
/// # Panics
/// If `threshold` is not in `(0, 1]`.
pub fn match_boxes(pred: &[BBox], gt: &[BBox], threshold: f64) -> MatchResult {
    assert!(threshold > 0.0 && threshold <= 1.0, "IoU threshold {threshold} outside (0, 1]");
    let mut candidates = Vec::new();
    for (p, pb) in pred.iter().enumerate() {
        for (g, gb) in gt.iter().enumerate() {
            let v = iou(pb, gb);
            if v >= threshold {
                candidates.push(MatchedPair { pred: p, gt: g, iou: v });
            }
        }
    }
    candidates.sort_by(|a, b| b.iou.total_cmp(&a.iou).then(a.pred.cmp(&b.pred)).then(a.gt.cmp(&b.gt)));

    let mut pred_used = vec![false; pred.len()];
    let mut gt_used = vec![false; gt.len()];
    let mut pairs = Vec::new();
    for c in candidates {
        if !pred_used[c.pred] && !gt_used[c.gt] {
            pred_used[c.pred] = true;
            gt_used[c.gt] = true;
            pairs.push(c);
        }
    }
    pairs.sort_by_key(|p| p.pred);
    MatchResult {
        pairs,
        unmatched_pred: (0..pred.len()).filter(|&i| !pred_used[i]).collect(),
        unmatched_gt: (0..gt.len()).filter(|&i| !gt_used[i]).collect(),
    }
}

/// Precision, recall and F1 as fractions. An undefined ratio (zero
/// denominator) is reported as 0 and flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

pub fn detection_prf(c: DetectionCounts) -> Prf {
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf {
        precision,
        recall,
        f1,
        precision_undefined: c.tp + c.fp == 0,
        recall_undefined: c.tp + c.fn_ == 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApFlag {
    /// Predictions but no ground truth: AP is 0.
    NoGroundTruth,
    /// Neither predictions nor ground truth: AP is 1.
    BothEmpty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ap {
    pub value: f64,
    pub flag: Option<ApFlag>,
}

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn iou_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

/// Walks predictions in input order; each one takes the unclaimed ground
/// truth with the highest IoU (first index on ties) if that IoU reaches the
/// threshold.
fn sequential_hits(pred: &[BBox], gt: &[BBox], threshold: f64) -> Vec<bool> {
    let mut claimed = vec![false; gt.len()];
    pred.iter()
        .map(|p| {
            let mut best: Option<(usize, f64)> = None;
            for (g, gb) in gt.iter().enumerate() {
                if claimed[g] {
                    continue;
                }
                let v = iou(p, gb);
                if v >= threshold && best.is_none_or(|(_, b)| v > b) {
                    best = Some((g, v));
                }
            }
            match best {
                Some((g, _)) => {
                    claimed[g] = true;
                    true
                }
                None => false,
            }
        })
        .collect()
}

/// 101-point interpolated AP from hit flags in ranking order.
fn interpolated_ap(hits: &[bool], n_gt: usize) -> f64 {
    let mut tp = 0usize;
    let mut points = Vec::with_capacity(hits.len());
    for (i, &hit) in hits.iter().enumerate() {
        tp += hit as usize;
        points.push((tp as f64 / n_gt as f64, tp as f64 / (i + 1) as f64));
    }
    // precision envelope: best precision at this recall or beyond
    for i in (0..points.len().saturating_sub(1)).rev() {
        points[i].1 = points[i].1.max(points[i + 1].1);
    }
    let mut sum = 0.0;
    for t in 0..=100 {
        let r = t as f64 / 100.0;
        if let Some(&(_, p)) = points.iter().find(|(rec, _)| *rec >= r) {
            sum += p;
        }
    }
    sum / 101.0
}

fn ap_from_hits(hits: &[bool], n_pred: usize, n_gt: usize) -> Ap {
    match (n_pred, n_gt) {
        (0, 0) => Ap {
            value: 1.0,
            flag: Some(ApFlag::BothEmpty),
        },
        (_, 0) => Ap {
            value: 0.0,
            flag: Some(ApFlag::NoGroundTruth),
        },
        _ => Ap {
            value: interpolated_ap(hits, n_gt),
            flag: None,
        },
    }
}

/// AP with every prediction sharing one confidence, ranked in input order.
pub fn average_precision(pred: &[BBox], gt: &[BBox], threshold: f64) -> Ap {
    ap_from_hits(&sequential_hits(pred, gt, threshold), pred.len(), gt.len())
}

/// Dataset-level AP: images are matched independently and their hit lists
/// concatenated in image order.
pub fn pooled_average_precision(images: &[(&[BBox], &[BBox])], threshold: f64) -> Ap {
    let mut hits = Vec::new();
    let (mut n_pred, mut n_gt) = (0, 0);
    for (pred, gt) in images {
        hits.extend(sequential_hits(pred, gt, threshold));
        n_pred += pred.len();
        n_gt += gt.len();
    }
    ap_from_hits(&hits, n_pred, n_gt)
}

/// Mean AP over [`iou_thresholds`].
pub fn mean_ap(pred: &[BBox], gt: &[BBox]) -> Ap {
    let aps = iou_thresholds().map(|t| average_precision(pred, gt, t));
    Ap {
        value: aps.iter().map(|a| a.value).sum::<f64>() / aps.len() as f64,
        flag: aps[0].flag,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub pairs: usize,
    pub miou: f64,
    pub mgiou: f64,
    pub center_px: f64,
    /// Center distance divided by the canvas diagonal.
    pub center_norm: f64,
}

/// Means over `(pred, gt)` box pairs; `None` when there are no pairs.
pub fn localization_from_pairs(
    pairs: impl IntoIterator<Item = (BBox, BBox)>,
    canvas: CanvasSize,
) -> Option<Localization> {
    let (mut n, mut si, mut sg, mut sp, mut sn) = (0usize, 0.0, 0.0, 0.0, 0.0);
    for (p, g) in pairs {
        let (px, norm) = center_distance(&p, &g, canvas);
        n += 1;
        si += iou(&p, &g);
        sg += giou(&p, &g);
        sp += px;
        sn += norm;
    }
    (n > 0).then(|| {
        let k = n as f64;
        Localization {
            pairs: n,
            miou: si / k,
            mgiou: sg / k,
            center_px: sp / k,
            center_norm: sn / k,
        }
    })
}

pub fn matched_localization(pred: &[BBox], gt: &[BBox], m: &MatchResult, canvas: CanvasSize) -> Option<Localization> {
    localization_from_pairs(m.pairs.iter().map(|p| (pred[p.pred], gt[p.gt])), canvas)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x0: i32, y0: i32, x1: i32, y1: i32) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn identical_sets_match_fully() {
        let boxes = [b(0, 0, 10, 10), b(20, 20, 40, 40), b(5, 5, 30, 30)];
        let m = match_boxes(&boxes, &boxes, 0.5);
        assert_eq!(m.counts(), DetectionCounts::new(3, 0, 0));
        assert!(m.pairs.iter().all(|p| p.iou == 1.0 && p.pred == p.gt));
    }

    #[test]
    fn disjoint_sets_match_nothing() {
        let m = match_boxes(&[b(0, 0, 10, 10)], &[b(50, 50, 60, 60), b(70, 70, 80, 80)], 0.5);
        assert_eq!(m.counts(), DetectionCounts::new(0, 1, 2));
    }

    #[test]
    fn higher_iou_pred_wins() {
        let gt = [b(0, 0, 100, 100)];
        let pred = [b(0, 0, 80, 100), b(0, 0, 95, 100)];
        let m = match_boxes(&pred, &gt, 0.5);
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].pred, 1);
        assert_eq!(m.unmatched_pred, vec![0]);
    }

    #[test]
    fn greedy_can_lose_a_match() {
        // pred 0 is identical to gt 0 and also overlaps gt 1; pred 1 only
        // overlaps gt 0. Greedy takes (0, 0) first and strands pred 1.
        let gt = [b(0, 0, 100, 100), b(0, 0, 100, 150)];
        let pred = [b(0, 0, 100, 100), b(0, 0, 100, 60)];
        let m = match_boxes(&pred, &gt, 0.5);
        assert_eq!(m.pairs.len(), 1);
    }

    #[test]
    fn prf_values() {
        let p = detection_prf(DetectionCounts::new(1, 1, 1));
        assert_eq!((p.precision, p.recall, p.f1), (0.5, 0.5, 0.5));
        let p = detection_prf(DetectionCounts::new(0, 0, 5));
        assert_eq!((p.precision, p.recall, p.f1), (0.0, 0.0, 0.0));
        assert!(p.precision_undefined && !p.recall_undefined);
    }

    #[test]
    fn ap_single_and_empty() {
        let g = [b(0, 0, 10, 10)];
        assert_eq!(average_precision(&g, &g, 0.5).value, 1.0);
        assert_eq!(average_precision(&[], &g, 0.5), Ap { value: 0.0, flag: None });
        assert_eq!(average_precision(&[], &[], 0.5).flag, Some(ApFlag::BothEmpty));
        assert_eq!(average_precision(&g, &[], 0.5), Ap { value: 0.0, flag: Some(ApFlag::NoGroundTruth) });
    }

    #[test]
    fn ap_depends_on_input_order() {
        let gt = [b(0, 0, 10, 10)];
        let hit = b(0, 0, 10, 10);
        let miss = b(50, 50, 60, 60);
        assert_eq!(average_precision(&[hit, miss], &gt, 0.5).value, 1.0);
        assert!((average_precision(&[miss, hit], &gt, 0.5).value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn map_threshold_count() {
        let gt = [b(0, 0, 10, 10)];
        let pred = [b(0, 0, 10, 6)]; // IoU 60/100
        assert_eq!(iou(&pred[0], &gt[0]), 0.6);
        assert!((mean_ap(&pred, &gt).value - 0.3).abs() < 1e-12);
        assert_eq!(mean_ap(&gt, &gt).value, 1.0);
        assert_eq!(mean_ap(&[], &gt).value, 0.0);
    }

    #[test]
    fn thresholds_are_exact_decimals() {
        let t = iou_thresholds();
        assert_eq!(t[0], 0.5);
        assert_eq!(t[2], 0.6);
        assert_eq!(t[9], 0.95);
    }

    #[test]
    fn localization_means() {
        let g = [b(0, 0, 10, 10), b(100, 100, 200, 200)];
        let m = match_boxes(&g, &g, 0.5);
        let l = matched_localization(&g, &g, &m, CanvasSize::DEFAULT).unwrap();
        assert_eq!((l.miou, l.mgiou, l.center_px, l.center_norm), (1.0, 1.0, 0.0, 0.0));

        let pred = [b(0, 0, 10, 10)];
        let gt = [b(0, 0, 10, 70)]; // IoU 1/7, below any threshold
        let l = localization_from_pairs([(pred[0], gt[0])], CanvasSize::DEFAULT).unwrap();
        assert!((l.miou - 1.0 / 7.0).abs() < 1e-12);
        assert!((l.center_norm - l.center_px / CanvasSize::DEFAULT.diagonal()).abs() < 1e-15);
        assert!(localization_from_pairs([], CanvasSize::DEFAULT).is_none());
    }

    #[test]
    fn pooled_ap_concatenates_images() {
        let g1 = [b(0, 0, 10, 10)];
        let g2 = [b(20, 20, 30, 30)];
        let miss = [b(50, 50, 60, 60)];
        let ap = pooled_average_precision(&[(&g1, &g1), (&miss, &g2)], 0.5);
        // hits [true, false] over 2 gts: recall 0.5 at precision 1
        assert!((ap.value - 51.0 / 101.0).abs() < 1e-12);
    }
}
