use layerforge::metrics::{layer_count_stats_from_index, CountBin};
use layerforge::serialization::read_index;

use super::{parse_bins, print_json};
use crate::error::{CliError, CliResult};
use crate::StatsArgs;

pub fn run(args: StatsArgs) -> CliResult<()> {
    let bins = parse_bins(&args.bins)?;
    let shares = args
        .shares
        .iter()
        .map(|s| s.parse::<CountBin>().map_err(|e| CliError::usage(format!("--share {s:?}: {e}"))))
        .collect::<CliResult<Vec<_>>>()?;
    let entries = read_index(&args.index)?;
    let stats = layer_count_stats_from_index(&entries, &bins, &shares);

    if args.json {
        return print_json(&stats);
    }
    let pct = |n: usize| {
        if stats.total == 0 {
            0.0
        } else {
            100.0 * n as f64 / stats.total as f64
        }
    };
    println!("{:<8} {:>9} {:>7}", "layers", "samples", "share");
    for b in &stats.histogram {
        println!("{:<8} {:>9} {:>6.1}%", b.bin, b.count, pct(b.count));
    }
    println!("{:<8} {:>9}", "total", stats.total);
    if stats.unbinned > 0 {
        println!("{:<8} {:>9}", "unbinned", stats.unbinned);
    }
    if stats.failed > 0 {
        println!("{:<8} {:>9}", "failed", stats.failed);
    }
    for s in &stats.shares {
        println!("share {}: {:.1}%", s.range, s.share * 100.0);
    }
    Ok(())
}
