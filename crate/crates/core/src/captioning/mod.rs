//! Grid-based caption drafts and VLM refinement.
//!
//! A draft starts with the background description and then walks the 3x3
//! grid in reading order, emitting one `"<position>, <caption>"` phrase per
//! layer (layers sharing a cell follow their stacking order).

mod refiner;

use serde::{Deserialize, Serialize};

use crate::composer::AssembledSample;
use crate::geometry::{assign_grid_region, BBox, CanvasSize, GridRegion};

pub use refiner::{
    refine_caption, word_count, CaptionRefiner, HttpRefiner, IdentityRefiner, Refinement, RefinerConfig,
    RetryRecord, DEFAULT_SYSTEM_PROMPT, ENV_API_KEY, ENV_ENDPOINT,
};

/// Used for layers that carry no caption of their own.
pub const PLACEHOLDER_CAPTION: &str = "a design element";

/// Leading words of the phrase for each grid cell.
pub fn region_phrase(region: GridRegion) -> &'static str {
    match region {
        GridRegion::TopLeft => "On the top-left",
        GridRegion::Top => "On the top",
        GridRegion::TopRight => "On the top-right",
        GridRegion::Left => "On the left",
        GridRegion::Center => "In the center",
        GridRegion::Right => "On the right",
        GridRegion::BottomLeft => "On the bottom-left",
        GridRegion::Bottom => "On the bottom",
        GridRegion::BottomRight => "On the bottom-right",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionPhrase {
    pub region: GridRegion,
    pub layer_index: usize,
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionDraft {
    pub raw: String,
    /// Reading order.
    pub region_phrases: Vec<RegionPhrase>,
    pub refined: Option<String>,
}

impl CaptionDraft {
    /// The refined caption when present, otherwise the raw draft.
    pub fn best(&self) -> &str {
        self.refined.as_deref().unwrap_or(&self.raw)
    }
}

/// One layer as seen by the caption drafter; `z_order` breaks ties inside a
/// grid cell, then the position in the input slice.
#[derive(Debug, Clone, Copy)]
pub struct CaptionLayer<'a> {
    pub bbox: BBox,
    pub caption: &'a str,
    pub z_order: usize,
}

fn sentence(text: &str) -> String {
    let t = text.trim();
    if t.ends_with(['.', '!', '?']) {
        t.to_string()
    } else {
        format!("{t}.")
    }
}

pub fn draft_caption_from(background_caption: &str, layers: &[CaptionLayer<'_>], canvas: CanvasSize) -> CaptionDraft {
    let mut keyed: Vec<(GridRegion, usize, usize, &str)> = layers
        .iter()
        .enumerate()
        .map(|(i, l)| (assign_grid_region(&l.bbox, canvas), l.z_order, i, l.caption))
        .collect();
    keyed.sort_by_key(|&(region, z, i, _)| (region, z, i));

    let region_phrases: Vec<RegionPhrase> = keyed
        .into_iter()
        .map(|(region, _, layer_index, caption)| {
            let caption = caption.trim();
            RegionPhrase {
                region,
                layer_index,
                caption: if caption.is_empty() { PLACEHOLDER_CAPTION } else { caption }.to_string(),
            }
        })
        .collect();

    let mut parts = Vec::with_capacity(region_phrases.len() + 1);
    if !background_caption.trim().is_empty() {
        parts.push(sentence(background_caption));
    }
    for p in &region_phrases {
        parts.push(sentence(&format!("{}, {}", region_phrase(p.region), p.caption)));
    }
    CaptionDraft {
        raw: parts.join(" "),
        region_phrases,
        refined: None,
    }
}

pub fn draft_caption(sample: &AssembledSample) -> CaptionDraft {
    let layers: Vec<CaptionLayer<'_>> = sample
        .layers
        .iter()
        .map(|l| CaptionLayer {
            bbox: l.placed_box,
            caption: &l.caption,
            z_order: l.z_order,
        })
        .collect();
    draft_caption_from(&sample.background_caption, &layers, sample.canvas)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(b: [i32; 4], caption: &str, z: usize) -> CaptionLayer<'_> {
        CaptionLayer {
            bbox: BBox::try_from(b).unwrap(),
            caption,
            z_order: z,
        }
    }

    #[test]
    fn centred_layer() {
        let d = draft_caption_from("", &[layer([412, 412, 612, 612], "a red kite", 0)], CanvasSize::DEFAULT);
        assert_eq!(d.raw, "In the center, a red kite.");
        assert_eq!(d.raw.matches("In the center, ").count(), 1);
    }

    #[test]
    fn reading_order_beats_stacking_order() {
        let layers = [
            layer([900, 900, 1000, 1000], "a boat", 0),
            layer([0, 0, 100, 100], "a sun", 1),
        ];
        let d = draft_caption_from("", &layers, CanvasSize::DEFAULT);
        assert_eq!(d.raw, "On the top-left, a sun. On the bottom-right, a boat.");
        assert_eq!(d.region_phrases[0].layer_index, 1);
    }

    #[test]
    fn background_comes_first_and_placeholders_fill_gaps() {
        let layers = [
            layer([412, 412, 612, 612], "This is a doodle_art style image.", 0),
            layer([800, 0, 1000, 200], "", 1),
            layer([0, 400, 100, 600], "A pretzel", 2),
        ];
        let d = draft_caption_from("A plain pink backdrop", &layers, CanvasSize::DEFAULT);
        assert_eq!(
            d.raw,
            "A plain pink backdrop. On the top-right, a design element. On the left, A pretzel. \
             In the center, This is a doodle_art style image."
        );
    }

    #[test]
    fn same_cell_orders_by_z_then_index() {
        let layers = [
            layer([0, 0, 10, 10], "upper", 5),
            layer([0, 0, 20, 20], "lower", 1),
            layer([0, 0, 30, 30], "twin-a", 3),
            layer([0, 0, 30, 30], "twin-b", 3),
        ];
        let d = draft_caption_from("", &layers, CanvasSize::DEFAULT);
        let order: Vec<_> = d.region_phrases.iter().map(|p| p.caption.as_str()).collect();
        assert_eq!(order, ["lower", "twin-a", "twin-b", "upper"]);
    }

    #[test]
    fn phrase_table_is_pinned() {
        let all: Vec<_> = GridRegion::ALL.iter().map(|r| region_phrase(*r)).collect();
        assert_eq!(
            all,
            [
                "On the top-left",
                "On the top",
                "On the top-right",
                "On the left",
                "In the center",
                "On the right",
                "On the bottom-left",
                "On the bottom",
                "On the bottom-right"
            ]
        );
    }
}
