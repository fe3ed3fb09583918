use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use layerforge::geometry::BBox;
use layerforge::metrics::{evaluate_detection, evaluate_reconstruction, DetectionItem, DetectionReport, ReconReport};
use serde::Deserialize;

use super::{parse_bins, print_json, write_file};
use crate::error::{CliError, CliResult};
use crate::{EvalBoxesArgs, EvalReconArgs};

/// One line of a box file. Other keys (a caption, say) are ignored.
#[derive(Debug, Deserialize)]
struct BoxesLine {
    id: String,
    boxes: Vec<BBox>,
}

/// Reads a box file into id -> boxes, rejecting malformed lines and
/// duplicate ids with their line number.
fn read_boxes(path: &Path) -> CliResult<BTreeMap<String, Vec<BBox>>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = || format!("{}:{}", path.display(), i + 1);
        let rec: BoxesLine = serde_json::from_str(line).map_err(|e| CliError::runtime(format!("{}: {e}", at())))?;
        if out.insert(rec.id.clone(), rec.boxes).is_some() {
            return Err(CliError::runtime(format!("{}: duplicate id {:?}", at(), rec.id)));
        }
    }
    Ok(out)
}

pub fn boxes(args: EvalBoxesArgs) -> CliResult<()> {
    let gt = read_boxes(&args.gt)?;
    let mut pred = read_boxes(&args.pred)?;
    let items: Vec<DetectionItem> = gt
        .into_iter()
        .map(|(id, gt)| {
            let pred = pred.remove(&id).unwrap_or_else(|| {
                log::warn!("no prediction for {id}, scored as empty");
                Vec::new()
            });
            DetectionItem { id, pred, gt }
        })
        .collect();
    if !pred.is_empty() {
        log::warn!("{} predicted ids have no ground truth and are ignored", pred.len());
    }
    let report = evaluate_detection(&items, args.canvas);
    if let Some(csv) = &args.csv {
        write_file(csv, &report.to_csv())?;
    }
    if args.json {
        print_json(&report)
    } else {
        print_detection(&report);
        Ok(())
    }
}

fn print_detection(r: &DetectionReport) {
    let pct = |x: f64| format!("{:.2}%", 100.0 * x);
    println!("samples        {}", r.samples.len());
    println!("TP / FP / FN   {} / {} / {}", r.counts.tp, r.counts.fp, r.counts.fn_);
    println!("precision      {}", pct(r.precision));
    println!("recall         {}", pct(r.recall));
    println!("F1             {}", pct(r.f1));
    println!("AP50           {}", pct(r.ap50));
    println!("AP75           {}", pct(r.ap75));
    println!("mAP@.50:.95    {}", pct(r.map));
    match &r.localization {
        Some(l) => {
            println!("matched pairs  {}", l.pairs);
            println!("mIoU           {:.4}", l.miou);
            println!("mGIoU          {:.4}", l.mgiou);
            println!("center dist    {:.2} px ({:.4} of diagonal)", l.center_px, l.center_norm);
        }
        None => println!("matched pairs  0"),
    }
    if !r.flags.is_empty() {
        println!("flags          {}", r.flags.join(", "));
    }
}

pub fn recon(args: EvalReconArgs) -> CliResult<()> {
    let bins = parse_bins(&args.bins)?;
    for dir in [&args.pred_dir, &args.gt_dir] {
        if !dir.is_dir() {
            return Err(CliError::usage(format!("not a directory: {}", dir.display())));
        }
    }
    let report = evaluate_reconstruction(&args.pred_dir, &args.gt_dir, &bins)?;
    if let Some(csv) = &args.csv {
        write_file(csv, &report.to_csv())?;
    }
    if args.json {
        print_json(&report)
    } else {
        print_recon(&report);
        Ok(())
    }
}

fn print_recon(r: &ReconReport) {
    println!(
        "{:<10} {:>7} {:>9} {:>7} {:>9} {:>7} {:>7} {:>7} {:>7}",
        "layers", "samples", "comp-PSNR", "comp-SS", "layer-PSNR", "layer-SS", "m-IoU", "m-prec", "m-rec"
    );
    let row = |label: &str, agg: &Option<layerforge::metrics::ReconAggregate>| match agg {
        Some(a) => println!(
            "{:<10} {:>7} {:>9.2} {:>7.4} {:>9.2} {:>7.4} {:>7.4} {:>7.4} {:>7.4}",
            label,
            a.samples,
            a.composite_psnr,
            a.composite_ssim,
            a.layer_psnr,
            a.layer_ssim,
            a.mask_iou,
            a.mask_precision,
            a.mask_recall
        ),
        None => println!("{label:<10} {:>7}", 0),
    };
    for b in &r.by_layer_count {
        row(&b.bin, &b.aggregate);
    }
    row("all", &r.aggregate);
    if !r.unpaired.is_empty() {
        println!("unpaired: {}", r.unpaired.join(", "));
    }
    for f in &r.failed {
        println!("failed {}: {}", f.id, f.error);
    }
}
