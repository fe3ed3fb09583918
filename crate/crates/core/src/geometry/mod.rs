//! Box algebra, 16-pixel quantization, 3x3 grid regions and the
//! overlap-minimising placement search.

mod placement;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use placement::{
    overlap_numerator, overlap_score, place_layer, place_layer_among, CandidateMode, Placement,
    PlacementProblem, DEFAULT_MAX_CANDIDATES,
};

/// Grid step every box is aligned to before it reaches the decomposition model.
pub const QUANTUM: i32 = 16;

/// Integer pixel rectangle, half-open: `[x0, x1) x [y0, y1)`.
///
/// Serialized as `[x0, y0, x1, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BBox {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
}

impl BBox {
    pub fn new(x0: i32, y0: i32, x1: i32, y1: i32) -> Result<Self> {
        if x0 < x1 && y0 < y1 {
            Ok(Self { x0, y0, x1, y1 })
        } else {
            Err(Error::InvalidBox { x0, y0, x1, y1 })
        }
    }

    pub fn from_origin_size(x: i32, y: i32, w: u32, h: u32) -> Result<Self> {
        Self::new(x, y, x + w as i32, y + h as i32)
    }

    pub fn full(canvas: CanvasSize) -> Self {
        Self {
            x0: 0,
            y0: 0,
            x1: canvas.width as i32,
            y1: canvas.height as i32,
        }
    }

    pub fn width(&self) -> u32 {
        (self.x1 - self.x0) as u32
    }

    pub fn height(&self) -> u32 {
        (self.y1 - self.y0) as u32
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x0 as f64 + self.x1 as f64) / 2.0,
            (self.y0 as f64 + self.y1 as f64) / 2.0,
        )
    }

    pub fn contains(&self, other: &BBox) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1 >= other.x1 && self.y1 >= other.y1
    }

    pub fn within(&self, canvas: CanvasSize) -> bool {
        BBox::full(canvas).contains(self)
    }

    /// Minimal box containing both.
    pub fn enclosure(&self, other: &BBox) -> BBox {
        BBox {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    pub fn translate(&self, dx: i32, dy: i32) -> BBox {
        BBox {
            x0: self.x0 + dx,
            y0: self.y0 + dy,
            x1: self.x1 + dx,
            y1: self.y1 + dy,
        }
    }

    pub fn to_array(self) -> [i32; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.x0, self.y0, self.x1, self.y1)
    }
}

impl TryFrom<[i32; 4]> for BBox {
    type Error = Error;

    fn try_from(a: [i32; 4]) -> Result<Self> {
        BBox::new(a[0], a[1], a[2], a[3])
    }
}

impl Serialize for BBox {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let a = <[i32; 4]>::deserialize(d)?;
        BBox::try_from(a).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanvasSize {
    pub width: u32,
    pub height: u32,
}

impl CanvasSize {
    pub const DEFAULT: CanvasSize = CanvasSize {
        width: 1024,
        height: 1024,
    };

    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 || width > i32::MAX as u32 / 2 || height > i32::MAX as u32 / 2 {
            return Err(Error::Config(format!("invalid canvas {width}x{height}")));
        }
        Ok(Self { width, height })
    }

    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64)
    }

    pub fn is_grid_aligned(&self) -> bool {
        self.width.is_multiple_of(QUANTUM as u32) && self.height.is_multiple_of(QUANTUM as u32)
    }
}

impl Default for CanvasSize {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl std::str::FromStr for CanvasSize {
    type Err = Error;

    /// Parses `WxH`, e.g. `1024x1024`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("canvas must look like 1024x1024, got {s:?}"));
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let w = w.trim().parse().map_err(|_| bad())?;
        let h = h.trim().parse().map_err(|_| bad())?;
        CanvasSize::new(w, h)
    }
}

/// One of the nine cells of a 3x3 partition of the canvas, in reading order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridRegion {
    TopLeft,
    Top,
    TopRight,
    Left,
    Center,
    Right,
    BottomLeft,
    Bottom,
    BottomRight,
}

impl GridRegion {
    pub const ALL: [GridRegion; 9] = [
        GridRegion::TopLeft,
        GridRegion::Top,
        GridRegion::TopRight,
        GridRegion::Left,
        GridRegion::Center,
        GridRegion::Right,
        GridRegion::BottomLeft,
        GridRegion::Bottom,
        GridRegion::BottomRight,
    ];

    pub fn from_row_col(row: usize, col: usize) -> GridRegion {
        Self::ALL[row.min(2) * 3 + col.min(2)]
    }

    /// (row, column), both in 0..3.
    pub fn row_col(self) -> (usize, usize) {
        let i = self as usize;
        (i / 3, i % 3)
    }

    pub fn label(self) -> &'static str {
        match self {
            GridRegion::TopLeft => "top-left",
            GridRegion::Top => "top",
            GridRegion::TopRight => "top-right",
            GridRegion::Left => "left",
            GridRegion::Center => "center",
            GridRegion::Right => "right",
            GridRegion::BottomLeft => "bottom-left",
            GridRegion::Bottom => "bottom",
            GridRegion::BottomRight => "bottom-right",
        }
    }
}

pub fn area(b: &BBox) -> u64 {
    b.width() as u64 * b.height() as u64
}

pub fn intersect_area(a: &BBox, b: &BBox) -> u64 {
    let w = (a.x1.min(b.x1) as i64 - a.x0.max(b.x0) as i64).max(0);
    let h = (a.y1.min(b.y1) as i64 - a.y0.max(b.y0) as i64).max(0);
    (w * h) as u64
}

fn union_area(a: &BBox, b: &BBox) -> u64 {
    area(a) + area(b) - intersect_area(a, b)
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    intersect_area(a, b) as f64 / union_area(a, b) as f64
}

/// Generalized IoU: `iou - (enclosure - union) / enclosure`.
pub fn giou(a: &BBox, b: &BBox) -> f64 {
    let union = union_area(a, b);
    let hull = area(&a.enclosure(b));
    intersect_area(a, b) as f64 / union as f64 - (hull - union) as f64 / hull as f64
}

/// Distance between box centres, in pixels and as a fraction of the canvas
/// diagonal `sqrt(W^2 + H^2)`.
pub fn center_distance(a: &BBox, b: &BBox, canvas: CanvasSize) -> (f64, f64) {
    let px = center_distance_px(a, b);
    (px, normalize_distance(px, canvas))
}

/// A pixel distance as a fraction of the canvas diagonal.
pub fn normalize_distance(px: f64, canvas: CanvasSize) -> f64 {
    px / canvas.diagonal()
}

pub fn center_distance_px(a: &BBox, b: &BBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

/// Expands `b` outward to the 16-pixel grid (floor the origin, ceil the far
/// corner) and clamps the result to the canvas.
pub fn quantize_box(b: &BBox, canvas: CanvasSize) -> BBox {
    let q = QUANTUM;
    let floor = |v: i32| v.div_euclid(q) * q;
    let ceil = |v: i32| (v + q - 1).div_euclid(q) * q;
    let (w, h) = (canvas.width as i32, canvas.height as i32);
    let mut out = BBox {
        x0: floor(b.x0).clamp(0, w),
        y0: floor(b.y0).clamp(0, h),
        x1: ceil(b.x1).clamp(0, w),
        y1: ceil(b.y1).clamp(0, h),
    };
    // Only reachable on canvases that are not multiples of 16: keep the box
    // nonempty by stepping back one quantum from the edge.
    if out.x0 >= out.x1 {
        out.x0 = floor(out.x1 - 1).max(0);
    }
    if out.y0 >= out.y1 {
        out.y0 = floor(out.y1 - 1).max(0);
    }
    out
}

pub fn assign_grid_region(b: &BBox, canvas: CanvasSize) -> GridRegion {
    let (cx, cy) = b.center();
    region_of_point(cx, cy, canvas)
}

pub fn region_of_point(cx: f64, cy: f64, canvas: CanvasSize) -> GridRegion {
    let cell = |v: f64, extent: u32| ((3.0 * v / extent as f64).floor().clamp(0.0, 2.0)) as usize;
    GridRegion::from_row_col(cell(cy, canvas.height), cell(cx, canvas.width))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(x0: i32, y0: i32, x1: i32, y1: i32) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn areas() {
        assert_eq!(area(&b(0, 0, 1, 1)), 1);
        assert_eq!(area(&b(0, 0, 16, 16)), 256);
        assert_eq!(area(&b(10, 20, 110, 220)), 20000);
        assert!(BBox::new(3, 0, 3, 5).is_err());
    }

    #[test]
    fn intersections_and_iou() {
        let a = b(0, 0, 2, 2);
        assert_eq!(intersect_area(&a, &a), 4);
        assert_eq!(intersect_area(&a, &b(5, 5, 6, 6)), 0);
        assert_eq!(intersect_area(&a, &b(1, 1, 3, 3)), 1);
        // edge-touching boxes do not intersect
        assert_eq!(intersect_area(&a, &b(2, 0, 4, 2)), 0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &b(5, 5, 6, 6)), 0.0);
        assert!((iou(&a, &b(1, 1, 3, 3)) - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn giou_examples() {
        let a = b(0, 0, 2, 2);
        assert_eq!(giou(&a, &a), 1.0);
        assert!((giou(&b(0, 0, 1, 1), &b(2, 0, 3, 1)) + 1.0 / 3.0).abs() < 1e-15);
        let expected = 1.0 / 7.0 - 2.0 / 9.0;
        assert!((giou(&a, &b(1, 1, 3, 3)) - expected).abs() < 1e-15);
        assert!((expected + 0.0794).abs() < 1e-4);
    }

    #[test]
    fn center_distances() {
        let c = CanvasSize::DEFAULT;
        assert_eq!(center_distance(&b(4, 4, 8, 8), &b(4, 4, 8, 8), c), (0.0, 0.0));
        let (px, norm) = center_distance(&b(-1, -1, 1, 1), &b(2, 3, 4, 5), c);
        assert_eq!(px, 5.0);
        assert_eq!(norm, 5.0 / (1024f64 * 1024.0 * 2.0).sqrt());
        // 3.66 px on a 1024 canvas is 0.0025 of the diagonal
        let norm = 3.66 / c.diagonal();
        assert!((norm - 0.00253).abs() < 5e-6);
    }

    #[test]
    fn quantize_examples() {
        let c = CanvasSize::DEFAULT;
        assert_eq!(quantize_box(&b(0, 0, 1024, 1024), c), b(0, 0, 1024, 1024));
        assert_eq!(quantize_box(&b(5, 10, 100, 200), c), b(0, 0, 112, 208));
        assert_eq!(quantize_box(&b(16, 32, 48, 64), c), b(16, 32, 48, 64));
        assert_eq!(quantize_box(&b(1000, 1000, 1023, 1024), c), b(992, 992, 1024, 1024));
    }

    #[test]
    fn quantize_on_unaligned_canvas_stays_nonempty() {
        let c = CanvasSize::new(100, 100).unwrap();
        let q = quantize_box(&b(97, 97, 100, 100), c);
        assert!(q.x0 < q.x1 && q.y0 < q.y1);
        assert_eq!(q, b(96, 96, 100, 100));
    }

    #[test]
    fn grid_regions() {
        let c = CanvasSize::DEFAULT;
        assert_eq!(assign_grid_region(&b(462, 462, 562, 562), c), GridRegion::Center);
        assert_eq!(assign_grid_region(&b(0, 0, 100, 100), c), GridRegion::TopLeft);
        assert_eq!(region_of_point(1023.5, 10.0, c), GridRegion::TopRight);
        assert_eq!(region_of_point(1024.0, 1024.0, c), GridRegion::BottomRight);
        for (i, r) in GridRegion::ALL.iter().enumerate() {
            assert_eq!(r.row_col(), (i / 3, i % 3));
            assert_eq!(GridRegion::from_row_col(i / 3, i % 3), *r);
        }
    }

    #[test]
    fn bbox_serializes_as_array() {
        let s = serde_json::to_string(&b(1, 2, 3, 4)).unwrap();
        assert_eq!(s, "[1,2,3,4]");
        let back: BBox = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b(1, 2, 3, 4));
        assert!(serde_json::from_str::<BBox>("[5,5,1,9]").is_err());
    }

    #[test]
    fn canvas_parse() {
        assert_eq!("1024x768".parse::<CanvasSize>().unwrap(), CanvasSize::new(1024, 768).unwrap());
        assert!("1024".parse::<CanvasSize>().is_err());
        assert!("0x5".parse::<CanvasSize>().is_err());
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0i32..1000, 0i32..1000, 1i32..300, 1i32..300).prop_map(|(x, y, w, h)| b(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn iou_giou_ranges(a in arb_box(), c in arb_box()) {
            let i = iou(&a, &c);
            let g = giou(&a, &c);
            prop_assert!((0.0..=1.0).contains(&i));
            prop_assert!((-1.0..=1.0).contains(&g));
            prop_assert!(g <= i + 1e-12);
            prop_assert!((iou(&c, &a) - i).abs() < 1e-15);
            if area(&a.enclosure(&c)) == union_area(&a, &c) {
                prop_assert!((g - i).abs() < 1e-12);
            }
        }

        #[test]
        fn quantize_aligns_and_contains(a in arb_box()) {
            let c = CanvasSize::DEFAULT;
            let a = BBox { x1: a.x1.min(1024), y1: a.y1.min(1024), ..a };
            let q = quantize_box(&a, c);
            for v in q.to_array() {
                prop_assert_eq!(v % 16, 0);
            }
            prop_assert!(q.contains(&a));
            prop_assert!(q.within(c));
        }

        #[test]
        fn region_invariant_under_scaling(x in 0i32..300, y in 0i32..300, w in 1i32..40, h in 1i32..40, k in 1i32..5) {
            let c = CanvasSize::new(340, 340).unwrap();
            let base = b(x, y, x + w, y + h);
            let scaled = b(x * k, y * k, (x + w) * k, (y + h) * k);
            let cs = CanvasSize::new(340 * k as u32, 340 * k as u32).unwrap();
            prop_assert_eq!(assign_grid_region(&base, c), assign_grid_region(&scaled, cs));
        }
    }
}
