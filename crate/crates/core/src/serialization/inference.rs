//! Inputs for the decomposition model: caption plus a box list led by the
//! composite and background boxes.

use serde::{Deserialize, Serialize};

use crate::geometry::{quantize_box, BBox, CanvasSize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceInput {
    pub image: String,
    pub caption: String,
    /// Composite box, background box, then the quantized foreground boxes.
    pub boxes: Vec<BBox>,
}

/// Foreground boxes go through [`quantize_box`]; the two leading boxes are
/// always `[0, 0, W, H]`.
pub fn build_inference_input(image: &str, caption: &str, boxes: &[BBox], canvas: CanvasSize) -> InferenceInput {
    let full = BBox::full(canvas);
    let mut out = Vec::with_capacity(boxes.len() + 2);
    out.push(full);
    out.push(full);
    out.extend(boxes.iter().map(|b| quantize_box(b, canvas)));
    InferenceInput {
        image: image.to_string(),
        caption: caption.to_string(),
        boxes: out,
    }
}
