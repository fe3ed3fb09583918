use std::fs;

use layerforge::serialization::{
    build_detector_pair, build_inference_input, parse_detector_output, read_index, read_manifest, to_canonical_line,
    write_jsonl, InferenceInput,
};
use serde::Serialize;
use serde_json::Value;

use super::dataset_root;
use crate::error::{CliError, CliResult};
use crate::{DetectorPairsArgs, InferenceInputsArgs};

pub const DETECTOR_PAIRS_FILE: &str = "detector_pairs.jsonl";

pub fn detector_pairs(args: DetectorPairsArgs) -> CliResult<()> {
    let root = dataset_root(&args.index);
    let mut pairs = Vec::new();
    for e in read_index(&args.index)?.iter().filter(|e| e.is_ok()) {
        let path = root.join(e.manifest.as_ref().expect("ok entries carry a manifest path"));
        pairs.push(build_detector_pair(&read_manifest(&path)?));
    }
    let out = args.out.unwrap_or_else(|| root.join(DETECTOR_PAIRS_FILE));
    write_jsonl(&out, &pairs)?;
    eprintln!("{} detector pairs", pairs.len());
    println!("{}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct InferenceLine {
    id: String,
    #[serde(flatten)]
    input: InferenceInput,
}

pub fn inference_inputs(args: InferenceInputsArgs) -> CliResult<()> {
    let path = &args.detections;
    let text = fs::read_to_string(path).map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))?;
    let mut out = String::new();
    let mut failed = 0usize;
    let mut written = 0usize;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = format!("{}:{}", path.display(), i + 1);
        let mut rec: serde_json::Map<String, Value> =
            serde_json::from_str(line).map_err(|e| CliError::runtime(format!("{at}: {e}")))?;
        let mut field = |k: &str| match rec.remove(k) {
            Some(Value::String(s)) => Ok(s),
            _ => Err(CliError::runtime(format!("{at}: missing string field {k:?}"))),
        };
        let id = field("id")?;
        let image = field("image")?;
        // Either the raw model text or the parsed object itself.
        let raw = match rec.remove("output") {
            Some(Value::String(s)) => s,
            _ => Value::Object(rec).to_string(),
        };
        match parse_detector_output(&raw, args.canvas) {
            Ok(det) => {
                for d in &det.diagnostics {
                    log::warn!("{at} ({id}): {d}");
                }
                let input = build_inference_input(&image, &det.whole_caption, &det.boxes, args.canvas);
                out.push_str(&to_canonical_line(&InferenceLine { id, input })?);
                out.push('\n');
                written += 1;
            }
            Err(e) => {
                eprintln!("{at} ({id}): {e}");
                failed += 1;
            }
        }
    }
    super::write_file(&args.out, &out)?;
    eprintln!("{written} inference inputs, {failed} unparseable detections");
    println!("{}", args.out.display());
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::runtime(format!("{failed} detections could not be parsed")))
    }
}
