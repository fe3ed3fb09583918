use layerforge::composer::generate_dataset_with_progress;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::GenerateArgs;

pub fn run(args: GenerateArgs) -> CliResult<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.composition.global_seed = seed;
    }
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    if let Some(out) = args.out {
        cfg.out = Some(out);
    }
    if let Some(n) = args.count {
        cfg.count = Some(n);
    }
    cfg.validate()?;
    let count = cfg
        .count
        .ok_or_else(|| CliError::usage("sample count missing: set `count` in the config or pass --count"))?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::usage("output directory missing: set `out` in the config or pass --out"))?;
    let workers = cfg
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));

    let pools = cfg.load_pools()?;
    eprintln!("generating {count} samples into {} with {workers} workers", out.display());
    let step = (count / 20).max(1);
    // Each `done` value is reported exactly once.
    let report = generate_dataset_with_progress(&cfg.composition, &pools, count, workers, &out, |done, total| {
        let done = done as u64;
        if done.is_multiple_of(step) || done == total {
            eprintln!("  {done}/{total}");
        }
    })?;

    if let Some(reason) = &report.aborted {
        return Err(CliError::runtime(format!("generation aborted: {reason}")));
    }
    let index = report.index_path.as_ref().expect("index written when not aborted");
    eprintln!("written {}, failed {}", report.written, report.failed.len());
    for (id, error) in report.failed.iter().take(10) {
        eprintln!("  {id}: {error}");
    }
    println!("{}", index.display());
    if report.failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::runtime(format!("{} of {count} samples failed", report.failed.len())))
    }
}
