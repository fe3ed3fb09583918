use std::fs;
use std::path::{Path, PathBuf};

use layerforge::assets::{ingest_pool, AssetRecord, SourceKind, SubLayer, DEFAULT_IMAGE_CROP_CAP, SIDECAR_FILE};
use layerforge::composer::Pools;
use layerforge::geometry::{BBox, CanvasSize};
use layerforge::imaging::RgbaImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shape of a procedurally generated pool set.
#[derive(Debug, Clone)]
pub struct PoolSpec {
    pub canvas: CanvasSize,
    pub bases: usize,
    /// Inclusive range of foreground layers per base design.
    pub base_layers: (usize, usize),
    pub donors: usize,
    pub crops: usize,
    pub texts: usize,
    pub objects: usize,
    /// Draw one base background at half size to exercise rescaling.
    pub odd_sized_base: bool,
    pub seed: u64,
}

impl PoolSpec {
    pub fn small(canvas: CanvasSize) -> Self {
        Self {
            canvas,
            bases: 4,
            base_layers: (2, 8),
            donors: 4,
            crops: 4,
            texts: 3,
            objects: 4,
            odd_sized_base: false,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PoolPaths {
    pub base: PathBuf,
    pub donor: Option<PathBuf>,
    pub image_crop: Option<PathBuf>,
    pub text: Option<PathBuf>,
    pub foreground: Option<PathBuf>,
}

/// A deterministic textured image: smooth gradients plus hashed noise.
pub fn pattern_image(seed: u64, width: u32, height: u32, alpha: u8) -> RgbaImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: [u8; 3] = rng.gen();
    let fx: f64 = rng.gen_range(0.02..0.3);
    let fy: f64 = rng.gen_range(0.02..0.3);
    RgbaImage::from_fn(width, height, |x, y| {
        let wave = ((x as f64 * fx).sin() + (y as f64 * fy).cos()) * 60.0;
        let h = (x.wrapping_mul(73_856_093) ^ y.wrapping_mul(19_349_663) ^ seed as u32) % 23;
        let c = |b: u8, k: f64| (b as f64 + wave * k + h as f64).clamp(0.0, 255.0) as u8;
        [c(base[0], 1.0), c(base[1], -0.7), c(base[2], 0.4), alpha]
    })
    .expect("nonzero size")
}

/// Opaque content inside an ellipse, transparent outside, with a
/// half-transparent rim.
fn blob(seed: u64, width: u32, height: u32) -> RgbaImage {
    let tex = pattern_image(seed, width, height, 255);
    let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
    RgbaImage::from_fn(width, height, |x, y| {
        let dx = (x as f64 + 0.5 - cx) / cx;
        let dy = (y as f64 + 0.5 - cy) / cy;
        let d = dx * dx + dy * dy;
        let mut p = tex.get(x, y);
        p[3] = if d <= 0.8 {
            255
        } else if d <= 1.0 {
            128
        } else {
            0
        };
        p
    })
    .expect("nonzero size")
}

/// Text-like strokes surrounded by a transparent margin.
fn text_block(seed: u64, width: u32, height: u32) -> RgbaImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mx = width / 6;
    let my = height / 4;
    let ink: [u8; 3] = rng.gen();
    RgbaImage::from_fn(width, height, |x, y| {
        let inside = x >= mx && x < width - mx && y >= my && y < height - my;
        let stroke = (x / 3 + y / 5) % 3 != 0;
        if inside && stroke {
            [ink[0], ink[1], ink[2], 255]
        } else {
            [0, 0, 0, 0]
        }
    })
    .expect("nonzero size")
}

fn write_png(dir: &Path, rel: &str, img: &RgbaImage) {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).expect("create fixture dir");
    }
    img.save_png(&path).expect("write fixture png");
}

fn write_sidecar(dir: &Path, records: &[AssetRecord]) {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("record serializes"));
        text.push('\n');
    }
    fs::write(dir.join(SIDECAR_FILE), text).expect("write sidecar");
}

fn design_pool(dir: &Path, kind: SourceKind, n: usize, spec: &PoolSpec, rng: &mut ChaCha8Rng) {
    let (cw, ch) = (spec.canvas.width, spec.canvas.height);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let id = format!("{kind}-{i:03}");
        let (w, h) = if spec.odd_sized_base && kind == SourceKind::Base && i == 0 {
            ((cw / 2).max(1), (ch / 2).max(1))
        } else {
            (cw, ch)
        };
        let bg_rel = format!("{id}/background.png");
        write_png(dir, &bg_rel, &pattern_image(rng.gen(), w, h, 255));
        let n_layers = rng.gen_range(spec.base_layers.0..=spec.base_layers.1);
        let mut layers = Vec::with_capacity(n_layers);
        for k in 0..n_layers {
            let lw = rng.gen_range((w / 8).max(1)..=(w / 2).max(1));
            let lh = rng.gen_range((h / 8).max(1)..=(h / 2).max(1));
            let x0 = rng.gen_range(0..=w - lw) as i32;
            let y0 = rng.gen_range(0..=h - lh) as i32;
            let bbox = BBox::from_origin_size(x0, y0, lw, lh).expect("valid box");
            let rel = format!("{id}/layer_{k:02}.png");
            // Alternate between box-sized and background-sized layer files.
            let img = if k % 3 == 2 {
                let mut full = RgbaImage::new(w, h).expect("nonzero");
                let part = blob(rng.gen(), lw, lh);
                for y in 0..lh {
                    for x in 0..lw {
                        full.put(x + x0 as u32, y + y0 as u32, part.get(x, y));
                    }
                }
                full
            } else if k % 2 == 0 {
                blob(rng.gen(), lw, lh)
            } else {
                pattern_image(rng.gen(), lw, lh, 200)
            };
            write_png(dir, &rel, &img);
            layers.push(SubLayer {
                image: rel,
                bbox,
                caption: format!("{kind} element {k} of design {i}"),
            });
        }
        records.push(AssetRecord {
            id,
            kind,
            image: bg_rel,
            caption: format!("A textured {kind} backdrop number {i}"),
            native_size: (0, 0),
            layers,
        });
    }
    write_sidecar(dir, &records);
}

fn flat_pool(dir: &Path, kind: SourceKind, n: usize, spec: &PoolSpec, rng: &mut ChaCha8Rng) {
    let side = spec.canvas.width.min(spec.canvas.height);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let id = format!("{kind}-{i:03}");
        let w = rng.gen_range((side / 4).max(1)..=side);
        let h = rng.gen_range((side / 4).max(1)..=side);
        let img = match kind {
            SourceKind::Text => text_block(rng.gen(), w, (h / 3).max(4)),
            SourceKind::ForegroundObject => blob(rng.gen(), w, h),
            _ => pattern_image(rng.gen(), w, h, 255),
        };
        let rel = format!("{id}.png");
        write_png(dir, &rel, &img);
        records.push(AssetRecord {
            id,
            kind,
            image: rel,
            caption: format!("a {kind} asset, variant {i}"),
            native_size: (0, 0),
            layers: Vec::new(),
        });
    }
    write_sidecar(dir, &records);
}

/// Writes one pool directory per kind under `root`. Kinds with a count of
/// zero get no directory.
pub fn write_pools(root: &Path, spec: &PoolSpec) -> PoolPaths {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sub = |name: &str| {
        let p = root.join(name);
        fs::create_dir_all(&p).expect("create pool dir");
        p
    };
    let base = sub("base");
    design_pool(&base, SourceKind::Base, spec.bases.max(1), spec, &mut rng);
    let opt = |name: &str, kind: SourceKind, n: usize, rng: &mut ChaCha8Rng| {
        (n > 0).then(|| {
            let p = sub(name);
            if kind.is_design() {
                design_pool(&p, kind, n, spec, rng);
            } else {
                flat_pool(&p, kind, n, spec, rng);
            }
            p
        })
    };
    let donor = opt("donor", SourceKind::Donor, spec.donors, &mut rng);
    let image_crop = opt("crops", SourceKind::ImageCrop, spec.crops, &mut rng);
    let text = opt("text", SourceKind::Text, spec.texts, &mut rng);
    let foreground = opt("objects", SourceKind::ForegroundObject, spec.objects, &mut rng);
    PoolPaths {
        base,
        donor,
        image_crop,
        text,
        foreground,
    }
}

/// Ingests every pool in `paths`, panicking on failure.
pub fn load_pools(paths: &PoolPaths) -> Pools {
    let load = |p: &Path, kind: SourceKind| {
        let cap = if kind == SourceKind::ImageCrop {
            DEFAULT_IMAGE_CROP_CAP
        } else {
            usize::MAX
        };
        ingest_pool(p, kind, cap).expect("fixture pool ingests").pool
    };
    Pools {
        base: load(&paths.base, SourceKind::Base),
        donor: paths.donor.as_deref().map(|p| load(p, SourceKind::Donor)),
        image_crop: paths.image_crop.as_deref().map(|p| load(p, SourceKind::ImageCrop)),
        text: paths.text.as_deref().map(|p| load(p, SourceKind::Text)),
        foreground: paths.foreground.as_deref().map(|p| load(p, SourceKind::ForegroundObject)),
    }
}
