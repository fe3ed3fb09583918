use std::path::Path;
use std::time::Duration;

use layerforge::captioning::{CaptionDraft, CaptionRefiner, HttpRefiner, IdentityRefiner, RefinerConfig};
use layerforge::imaging::RgbaImage;
use layerforge::serialization::{build_index_for, read_index, read_manifest, write_manifest, SampleManifest};
use rayon::prelude::*;

use super::dataset_root;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::RefineArgs;

/// Set on manifests whose caption was kept because refinement failed or no
/// endpoint was available.
pub const FALLBACK_FLAG: &str = "refine-fallback";

const DEFAULT_CONCURRENCY: usize = 4;

fn settings(args: &RefineArgs) -> CliResult<(RefinerConfig, usize)> {
    let mut cfg = RefinerConfig::from_env();
    cfg.fallback = false;
    let mut concurrency = DEFAULT_CONCURRENCY;
    if let Some(path) = &args.config {
        let r = RunConfig::load(path)?.refiner;
        if let Some(e) = r.endpoint {
            cfg.endpoint = e;
        }
        if let Some(m) = r.model {
            cfg.model = m;
        }
        if let Some(t) = r.timeout_secs {
            cfg.timeout = Duration::from_secs(t);
        }
        if let Some(n) = r.max_retries {
            cfg.max_retries = n;
        }
        if let Some(f) = r.fallback {
            cfg.fallback = f;
        }
        if let Some(c) = r.concurrency {
            concurrency = c;
        }
    }
    if let Some(e) = &args.endpoint {
        cfg.endpoint = e.clone();
    }
    if let Some(m) = &args.model {
        cfg.model = m.clone();
    }
    if let Some(t) = args.timeout_secs {
        cfg.timeout = Duration::from_secs(t);
    }
    if let Some(n) = args.max_retries {
        cfg.max_retries = n;
    }
    if let Some(c) = args.concurrency {
        concurrency = c;
    }
    cfg.fallback |= args.fallback;
    if concurrency == 0 {
        return Err(CliError::usage("concurrency must be at least 1"));
    }
    if cfg.endpoint.is_empty() && !cfg.fallback {
        return Err(CliError::usage(
            "no refiner endpoint: pass --endpoint, set LAYERFORGE_VLM_ENDPOINT, or use --fallback",
        ));
    }
    cfg.validate()?;
    Ok((cfg, concurrency))
}

/// Whether a manifest still needs a refinement pass. Captions kept by an
/// earlier fallback are retried once an endpoint is available.
fn pending(m: &SampleManifest, have_endpoint: bool) -> bool {
    m.refined_caption.is_none() || (have_endpoint && m.flags.iter().any(|f| f == FALLBACK_FLAG))
}

fn refine_one(root: &Path, path: &Path, mut m: SampleManifest, refiner: &dyn CaptionRefiner) -> CliResult<()> {
    let image = RgbaImage::load(root.join(&m.composite_path))?;
    let draft = CaptionDraft {
        raw: m.raw_caption.clone(),
        region_phrases: Vec::new(),
        refined: None,
    };
    let r = refiner.refine(&image, &draft)?;
    for w in &r.warnings {
        log::warn!("{}: {w}", m.sample_id);
    }
    m.refined_caption = Some(r.text);
    m.flags.retain(|f| f != FALLBACK_FLAG);
    if r.fallback_used {
        m.flags.push(FALLBACK_FLAG.into());
    }
    write_manifest(&m, path)?;
    Ok(())
}

pub fn run(args: RefineArgs) -> CliResult<()> {
    let (cfg, concurrency) = settings(&args)?;
    let root = dataset_root(&args.index);
    let entries = read_index(&args.index)?;
    let have_endpoint = !cfg.endpoint.is_empty();
    let refiner: Box<dyn CaptionRefiner> = if have_endpoint {
        Box::new(HttpRefiner::new(cfg)?)
    } else {
        Box::new(IdentityRefiner)
    };

    let mut todo = Vec::new();
    let mut skipped = 0usize;
    for e in entries.iter().filter(|e| e.is_ok()) {
        let path = root.join(e.manifest.as_ref().expect("ok entries carry a manifest path"));
        let m = read_manifest(&path)?;
        if pending(&m, have_endpoint) {
            todo.push((path, m));
        } else {
            skipped += 1;
        }
    }
    eprintln!("refining {} captions ({skipped} already refined)", todo.len());

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency)
        .build()
        .map_err(|e| CliError::runtime(format!("cannot start {concurrency} workers: {e}")))?;
    let failures: Vec<(String, String)> = pool.install(|| {
        todo.into_par_iter()
            .filter_map(|(path, m)| {
                let id = m.sample_id.clone();
                refine_one(&root, &path, m, refiner.as_ref()).err().map(|e| (id, e.to_string()))
            })
            .collect()
    });

    let ids: Vec<String> = entries.iter().map(|e| e.id.clone()).collect();
    let index = build_index_for(&root, &ids)?;
    for (id, e) in &failures {
        eprintln!("  {id}: {e}");
    }
    println!("{}", index.display());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::runtime(format!("{} captions could not be refined", failures.len())))
    }
}
