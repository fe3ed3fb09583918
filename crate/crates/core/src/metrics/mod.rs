//! Evaluation: box detection, masks, reconstruction quality, layer-count
//! distributions and judge-score aggregation.

mod detection;
mod judge;
mod layer_stats;
mod recon;
mod report;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::PixelMask;

pub use detection::{
    average_precision, detection_prf, iou_thresholds, localization_from_pairs, match_boxes, matched_localization,
    mean_ap, pooled_average_precision, Ap, ApFlag, DetectionCounts, Localization, MatchResult, MatchedPair, Prf,
};
pub use judge::{aggregate_judge, JudgeScores, JUDGE_CRITERIA, JUDGE_WEIGHTS};
pub use layer_stats::{
    layer_count_stats, layer_count_stats_from_index, BinCount, BinSet, CountBin, LayerCountStats, RangeShare,
    DEFAULT_SHARES, DISTRIBUTION_BINS, EVALUATION_BINS,
};
pub use recon::{
    evaluate_reconstruction, evaluate_sample, expand_layer, ReconAggregate, ReconBin, ReconReport, ReconSample,
    SampleFailure,
};
pub use report::{evaluate_detection, DetectionItem, DetectionReport, DetectionSampleRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskMetrics {
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Set metrics over mask pixels. Two empty masks score 1 everywhere; an
/// empty side otherwise yields 0 for the ratio it cannot support.
pub fn mask_metrics(pred: &PixelMask, gt: &PixelMask) -> Result<MaskMetrics> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(Error::DimensionMismatch {
            left_w: pred.width(),
            left_h: pred.height(),
            right_w: gt.width(),
            right_h: gt.height(),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp + fp + fn_ == 0 {
        return Ok(MaskMetrics {
            iou: 1.0,
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        });
    }
    let ratio = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    Ok(MaskMetrics {
        iou: ratio(tp, tp + fp + fn_),
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
    })
}

/// Arithmetic mean; `None` when empty.
pub(crate) fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut n, mut s) = (0usize, 0.0);
    for v in values {
        n += 1;
        s += v;
    }
    (n > 0).then(|| s / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask(w: u32, h: u32, f: impl Fn(u32, u32) -> bool) -> PixelMask {
        let bits = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        PixelMask::from_bits(w, h, bits).unwrap()
    }

    #[test]
    fn identical_and_disjoint() {
        let a = mask(8, 8, |x, _| x < 3);
        let m = mask_metrics(&a, &a).unwrap();
        assert_eq!((m.iou, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
        let b = mask(8, 8, |x, _| x >= 5);
        let m = mask_metrics(&a, &b).unwrap();
        assert_eq!((m.iou, m.precision, m.recall, m.f1), (0.0, 0.0, 0.0, 0.0));
        let e = mask(8, 8, |_, _| false);
        assert_eq!(mask_metrics(&e, &e).unwrap().f1, 1.0);
    }

    #[test]
    fn left_half_against_full() {
        let pred = mask(10, 4, |x, _| x < 5);
        let gt = mask(10, 4, |_, _| true);
        let m = mask_metrics(&pred, &gt).unwrap();
        assert_eq!((m.iou, m.precision, m.recall), (0.5, 1.0, 0.5));
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn size_mismatch() {
        assert!(mask_metrics(&mask(2, 2, |_, _| true), &mask(3, 2, |_, _| true)).is_err());
    }

    proptest! {
        #[test]
        fn f1_jaccard_identity(bits in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..200)) {
            let n = bits.len() as u32;
            let p = PixelMask::from_bits(n, 1, bits.iter().map(|b| b.0).collect()).unwrap();
            let g = PixelMask::from_bits(n, 1, bits.iter().map(|b| b.1).collect()).unwrap();
            let m = mask_metrics(&p, &g).unwrap();
            prop_assert!((m.f1 - 2.0 * m.iou / (1.0 + m.iou)).abs() < 1e-12);
        }
    }
}
