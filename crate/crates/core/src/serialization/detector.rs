//! Detector instruction pairs and parsing of detector output.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::SampleManifest;
use crate::error::{Error, Result};
use crate::geometry::{BBox, CanvasSize};

/// Instruction text for a canvas of the given size.
pub fn detector_instruction(canvas: CanvasSize) -> String {
    format!(
        "<image> This image is {} pixels in width and {} pixels in height. First describe the whole image in one \
         detailed caption (whole_caption). Then list the bounding box for each visible layer or object in the image. \
         Each box is in the format [x0, y0, x1, y1]. Output a single JSON object with exactly two keys: \
         \"whole_caption\" and \"boxes\". Output only this JSON, no other text or markdown.",
        canvas.width, canvas.height
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorTarget {
    pub whole_caption: String,
    /// Foreground boxes in stacking order.
    pub boxes: Vec<BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorPair {
    pub id: String,
    pub image_path: String,
    pub instruction: String,
    pub target: DetectorTarget,
}

pub fn build_detector_pair(manifest: &SampleManifest) -> DetectorPair {
    let canvas = CanvasSize {
        width: manifest.canvas[0],
        height: manifest.canvas[1],
    };
    DetectorPair {
        id: manifest.sample_id.clone(),
        image_path: manifest.composite_path.clone(),
        instruction: detector_instruction(canvas),
        target: DetectorTarget {
            whole_caption: manifest.caption().to_string(),
            boxes: manifest.layers.iter().map(|l| l.bbox).collect(),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorOutput {
    pub whole_caption: String,
    /// Clamped to the canvas, degenerate boxes removed.
    pub boxes: Vec<BBox>,
    pub diagnostics: Vec<String>,
}

fn strip_fences(raw: &str) -> &str {
    let mut s = raw.trim();
    if let Some(rest) = s.strip_prefix("```") {
        // drop the info string ("json") on the opening fence line
        s = rest.split_once('\n').map_or("", |(_, body)| body);
        s = s.trim_end();
        s = s.strip_suffix("```").unwrap_or(s);
    }
    s.trim()
}

/// Rewrites single-quoted strings as double-quoted ones.
fn normalize_quotes(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    let mut quote: Option<char> = None;
    while let Some(c) = chars.next() {
        match quote {
            None => {
                if c == '"' || c == '\'' {
                    quote = Some(c);
                    out.push('"');
                } else {
                    out.push(c);
                }
            }
            Some(q) => {
                if c == '\\' {
                    match chars.next() {
                        Some('\'') if q == '\'' => out.push('\''),
                        Some(n) => {
                            out.push('\\');
                            out.push(n);
                        }
                        None => out.push('\\'),
                    }
                } else if c == q {
                    quote = None;
                    out.push('"');
                } else if c == '"' {
                    out.push_str("\\\"");
                } else {
                    out.push(c);
                }
            }
        }
    }
    out
}

/// Removes commas directly followed (modulo whitespace) by `}` or `]`.
/// Expects double-quoted strings only.
fn strip_trailing_commas(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut in_str = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if in_str {
            out.push(c);
            if c == '\\' && i + 1 < chars.len() {
                out.push(chars[i + 1]);
                i += 1;
            } else if c == '"' {
                in_str = false;
            }
        } else if c == '"' {
            in_str = true;
            out.push(c);
        } else if c == ',' {
            let next = chars[i + 1..].iter().find(|ch| !ch.is_whitespace());
            if !matches!(next, Some('}') | Some(']')) {
                out.push(c);
            }
        } else {
            out.push(c);
        }
        i += 1;
    }
    out
}

fn parse_lenient(text: &str) -> std::result::Result<Value, String> {
    match serde_json::from_str(text) {
        Ok(v) => Ok(v),
        Err(first) => {
            let repaired = strip_trailing_commas(&normalize_quotes(text));
            serde_json::from_str(&repaired).map_err(|_| first.to_string())
        }
    }
}

fn box_from_value(v: &Value) -> Option<[f64; 4]> {
    let arr = v.as_array()?;
    if arr.len() != 4 {
        return None;
    }
    let mut out = [0.0; 4];
    for (o, x) in out.iter_mut().zip(arr) {
        *o = x.as_f64().filter(|f| f.is_finite())?;
    }
    Some(out)
}

/// Parses a detector response into a caption and canvas-clamped boxes.
///
/// Repairs are limited to code-fence removal, trailing commas and
/// single-quoted strings. Boxes that are malformed or empty after clamping
/// are dropped and reported in `diagnostics`.
pub fn parse_detector_output(raw: &str, canvas: CanvasSize) -> Result<DetectorOutput> {
    let fail = |reason: String| Error::DetectorOutput {
        reason,
        raw: raw.to_string(),
    };
    let body = strip_fences(raw);
    let value = parse_lenient(body).map_err(|e| fail(format!("not valid JSON: {e}")))?;
    let obj = value.as_object().ok_or_else(|| fail("top level is not an object".into()))?;
    let whole_caption = obj
        .get("whole_caption")
        .and_then(Value::as_str)
        .ok_or_else(|| fail("missing string field whole_caption".into()))?
        .to_string();
    let items = obj
        .get("boxes")
        .and_then(Value::as_array)
        .ok_or_else(|| fail("missing list field boxes".into()))?;

    let mut diagnostics = Vec::new();
    for key in obj.keys().filter(|k| *k != "whole_caption" && *k != "boxes") {
        diagnostics.push(format!("ignored extra key {key:?}"));
    }
    let (w, h) = (canvas.width as i64, canvas.height as i64);
    let mut boxes = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let Some(c) = box_from_value(item) else {
            diagnostics.push(format!("box {i}: expected four numbers, got {item}"));
            continue;
        };
        let r = c.map(|v| v.round() as i64);
        let x0 = r[0].clamp(0, w);
        let y0 = r[1].clamp(0, h);
        let x1 = r[2].clamp(0, w);
        let y1 = r[3].clamp(0, h);
        if x1 <= x0 || y1 <= y0 {
            diagnostics.push(format!("box {i}: degenerate after clamping {item}"));
            continue;
        }
        if [x0, y0, x1, y1] != r {
            diagnostics.push(format!("box {i}: clamped {item} to [{x0}, {y0}, {x1}, {y1}]"));
        }
        boxes.push(BBox {
            x0: x0 as i32,
            y0: y0 as i32,
            x1: x1 as i32,
            y1: y1 as i32,
        });
    }
    for d in &diagnostics {
        log::debug!("detector output: {d}");
    }
    Ok(DetectorOutput {
        whole_caption,
        boxes,
        diagnostics,
    })
}
