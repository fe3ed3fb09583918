use rand::Rng;

use super::{area, intersect_area, BBox, CanvasSize};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_CANDIDATES: usize = 300;

/// How candidate origins are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateMode {
    /// Up to `n` uniform draws from `[0, W-w] x [0, H-h]`, duplicates allowed.
    Sampled(usize),
    /// Every integer origin, row-major. Only practical on small canvases.
    Exhaustive,
}

impl Default for CandidateMode {
    fn default() -> Self {
        CandidateMode::Sampled(DEFAULT_MAX_CANDIDATES)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementProblem {
    pub layer_size: (u32, u32),
    pub occupied: Vec<BBox>,
    pub canvas: CanvasSize,
    pub mode: CandidateMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub bbox: BBox,
    /// `sum(intersection areas) / area(bbox)`.
    pub overlap: f64,
    /// The integer numerator of `overlap`; ranks candidates exactly.
    pub overlap_sum: u64,
    pub candidates_evaluated: usize,
}

impl Placement {
    pub fn origin(&self) -> (i32, i32) {
        (self.bbox.x0, self.bbox.y0)
    }
}

/// Sum of intersection areas between `b` and every occupied box.
pub fn overlap_numerator(b: &BBox, occupied: &[BBox]) -> u64 {
    occupied.iter().map(|o| intersect_area(b, o)).sum()
}

/// Normalized overlap `(1 / area(b)) * sum_k area(b ∩ occupied_k)`.
pub fn overlap_score(b: &BBox, occupied: &[BBox]) -> f64 {
    overlap_numerator(b, occupied) as f64 / area(b) as f64
}

impl PlacementProblem {
    fn check(&self) -> Result<()> {
        let (w, h) = self.layer_size;
        if w == 0 || h == 0 || w > self.canvas.width || h > self.canvas.height {
            return Err(Error::LayerTooLarge {
                width: w,
                height: h,
                canvas_w: self.canvas.width,
                canvas_h: self.canvas.height,
            });
        }
        if self.mode == CandidateMode::Sampled(0) {
            return Err(Error::Config("placement needs at least one candidate".into()));
        }
        Ok(())
    }

    fn max_origin(&self) -> (i32, i32) {
        (
            (self.canvas.width - self.layer_size.0) as i32,
            (self.canvas.height - self.layer_size.1) as i32,
        )
    }
}

/// Picks an origin for the layer that minimises normalized overlap with the
/// occupied boxes. A zero-overlap candidate is taken as soon as it is seen;
/// otherwise the first candidate with the smallest overlap wins.
pub fn place_layer<R: Rng + ?Sized>(problem: &PlacementProblem, rng: &mut R) -> Result<Placement> {
    problem.check()?;
    let (mx, my) = problem.max_origin();
    match problem.mode {
        CandidateMode::Sampled(n) => {
            let candidates = (0..n).map(|_| (rng.gen_range(0..=mx), rng.gen_range(0..=my)));
            place_layer_among(problem, candidates)
        }
        CandidateMode::Exhaustive => {
            place_layer_among(problem, (0..=my).flat_map(|y| (0..=mx).map(move |x| (x, y))))
        }
    }
}

/// Same selection rule as [`place_layer`] over an explicit candidate list.
/// Candidates that would push the layer off the canvas are skipped.
pub fn place_layer_among(
    problem: &PlacementProblem,
    candidates: impl IntoIterator<Item = (i32, i32)>,
) -> Result<Placement> {
    problem.check()?;
    let (w, h) = problem.layer_size;
    let (mx, my) = problem.max_origin();
    let mut best: Option<(u64, BBox)> = None;
    let mut evaluated = 0;
    for (x, y) in candidates {
        if !(0..=mx).contains(&x) || !(0..=my).contains(&y) {
            continue;
        }
        evaluated += 1;
        let b = BBox::from_origin_size(x, y, w, h)?;
        let sum = overlap_numerator(&b, &problem.occupied);
        if sum == 0 {
            best = Some((0, b));
            break;
        }
        if best.is_none_or(|(s, _)| sum < s) {
            best = Some((sum, b));
        }
    }
    let (sum, bbox) = best.ok_or_else(|| Error::Config("no valid placement candidate".into()))?;
    Ok(Placement {
        bbox,
        overlap: sum as f64 / area(&bbox) as f64,
        overlap_sum: sum,
        candidates_evaluated: evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn problem(size: (u32, u32), occupied: Vec<BBox>, canvas: (u32, u32), mode: CandidateMode) -> PlacementProblem {
        PlacementProblem {
            layer_size: size,
            occupied,
            canvas: CanvasSize::new(canvas.0, canvas.1).unwrap(),
            mode,
        }
    }

    #[test]
    fn empty_occupancy_takes_first_candidate() {
        let p = problem((100, 50), vec![], (1024, 1024), CandidateMode::default());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let got = place_layer(&p, &mut rng).unwrap();
        let mut replay = ChaCha8Rng::seed_from_u64(5);
        let first = (replay.gen_range(0..=924), replay.gen_range(0..=974));
        assert_eq!(got.origin(), first);
        assert_eq!(got.overlap, 0.0);
        assert_eq!(got.candidates_evaluated, 1);
    }

    #[test]
    fn full_cover_returns_first_sampled() {
        let p = problem((50, 100), vec![BBox::new(0, 0, 100, 100).unwrap()], (100, 100), CandidateMode::Sampled(300));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let got = place_layer(&p, &mut rng).unwrap();
        let mut replay = ChaCha8Rng::seed_from_u64(11);
        let first = (replay.gen_range(0..=50), replay.gen_range(0..=0));
        assert_eq!(got.origin(), first);
        assert_eq!(got.overlap, 1.0);
        assert_eq!(got.candidates_evaluated, 300);
    }

    #[test]
    fn exhaustive_finds_the_only_free_slot() {
        let p = problem((50, 100), vec![BBox::new(0, 0, 50, 100).unwrap()], (100, 100), CandidateMode::Exhaustive);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let got = place_layer(&p, &mut rng).unwrap();
        assert_eq!(got.origin(), (50, 0));
        assert_eq!(got.overlap, 0.0);
    }

    #[test]
    fn first_minimum_wins_ties() {
        let occ = vec![BBox::new(0, 0, 10, 10).unwrap()];
        let p = problem((10, 10), occ, (20, 10), CandidateMode::Sampled(3));
        // x=5 and x=5 again tie at 50; x=2 is worse
        let got = place_layer_among(&p, [(2, 0), (5, 0), (5, 0)]).unwrap();
        assert_eq!(got.origin(), (5, 0));
        assert_eq!(got.overlap_sum, 50);
        assert_eq!(got.overlap, 0.5);
    }

    #[test]
    fn oversize_layer_errors() {
        let p = problem((101, 10), vec![], (100, 100), CandidateMode::default());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(place_layer(&p, &mut rng), Err(Error::LayerTooLarge { .. })));
    }

    #[test]
    fn overlap_counts_each_occupied_box() {
        let b = BBox::new(0, 0, 10, 10).unwrap();
        let occ = [BBox::new(0, 0, 10, 10).unwrap(), BBox::new(0, 0, 5, 10).unwrap()];
        assert_eq!(overlap_score(&b, &occ), 1.5);
    }
}
