//! The composition pipeline: base layout, donor integration, auxiliary
//! augmentation, overlap-minimising placement and flattening.
//!
//! Randomness is split into independent per-stage streams derived from the
//! per-sample seed (see [`seed`]), so that the auxiliary draw plan for a
//! sample is a function of the configuration and the seed alone.

mod config;
mod dataset;
pub mod seed;

use rand::seq::index;
use rand::Rng;

use crate::assets::{sample_asset, sample_distinct, scale_image, AssetPool, AssetRecord, SourceKind};
use crate::error::{Error, Result};
use crate::geometry::{overlap_score, place_layer, quantize_box, BBox, CanvasSize, PlacementProblem};
use crate::imaging::{flatten, tighten_bbox_to_alpha, RgbaImage};

pub use config::{CompositionConfig, CountRange};
pub use dataset::{
    generate_dataset, generate_dataset_with_progress, generate_sample_to_dir, layer_file_name, manifest_for, recomposite,
    GenerationReport, SampleOutcome, BACKGROUND_FILE, COMPOSITE_FILE,
};
pub use seed::{format_sample_id, sample_seed, stage_rng, Stage, SEED_SCHEME};

/// The asset pools feeding one generation run. Only the base pool is
/// mandatory; a stage whose pool is missing is skipped and flagged.
#[derive(Debug, Clone)]
pub struct Pools {
    pub base: AssetPool,
    pub donor: Option<AssetPool>,
    pub image_crop: Option<AssetPool>,
    pub text: Option<AssetPool>,
    pub foreground: Option<AssetPool>,
}

impl Pools {
    pub fn get(&self, kind: SourceKind) -> Option<&AssetPool> {
        match kind {
            SourceKind::Base => Some(&self.base),
            SourceKind::Donor => self.donor.as_ref(),
            SourceKind::ImageCrop => self.image_crop.as_ref(),
            SourceKind::Text => self.text.as_ref(),
            SourceKind::ForegroundObject => self.foreground.as_ref(),
        }
    }
}

/// One foreground layer as placed on the canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerPlan {
    pub source: SourceKind,
    pub asset_id: String,
    /// Cropped to `placed_box`.
    pub image: RgbaImage,
    pub placed_box: BBox,
    pub caption: String,
    pub z_order: usize,
    /// Normalized overlap with the layers below at the time of placement.
    pub overlap: f64,
}

impl LayerPlan {
    pub fn origin(&self) -> (i32, i32) {
        (self.placed_box.x0, self.placed_box.y0)
    }
}

#[derive(Debug, Clone)]
pub struct SampleDraft {
    pub sample_index: u64,
    pub sample_id: String,
    pub seed: u64,
    pub canvas: CanvasSize,
    pub base_id: String,
    pub background: RgbaImage,
    pub background_caption: String,
    /// Bottom to top.
    pub layers: Vec<LayerPlan>,
    pub flags: Vec<String>,
}

impl SampleDraft {
    pub fn occupied(&self) -> Vec<BBox> {
        self.layers.iter().map(|l| l.placed_box).collect()
    }

    /// Places `image` against every layer already in the draft and pushes
    /// it on top.
    pub fn place<R: Rng + ?Sized>(
        &mut self,
        source: SourceKind,
        asset_id: &str,
        image: RgbaImage,
        caption: &str,
        cfg: &CompositionConfig,
        rng: &mut R,
    ) -> Result<()> {
        let problem = PlacementProblem {
            layer_size: image.dimensions(),
            occupied: self.occupied(),
            canvas: self.canvas,
            mode: cfg.candidate_mode(),
        };
        let placement = place_layer(&problem, rng)?;
        self.layers.push(LayerPlan {
            source,
            asset_id: asset_id.to_string(),
            image,
            placed_box: placement.bbox,
            caption: caption.to_string(),
            z_order: self.layers.len(),
            overlap: placement.overlap,
        });
        Ok(())
    }
}

/// A finished sample: layers capped, composite flattened, boxes quantized.
#[derive(Debug, Clone)]
pub struct AssembledSample {
    pub sample_index: u64,
    pub sample_id: String,
    pub seed: u64,
    pub canvas: CanvasSize,
    pub base_id: String,
    pub background: RgbaImage,
    pub background_caption: String,
    pub layers: Vec<LayerPlan>,
    /// Parallel to `layers`.
    pub quantized_boxes: Vec<BBox>,
    pub composite: RgbaImage,
    pub flags: Vec<String>,
}

/// Background plus the retained foregrounds of a base design.
#[derive(Debug, Clone)]
pub struct BaseLayout {
    pub background: RgbaImage,
    pub background_caption: String,
    pub layers: Vec<LayerPlan>,
    pub flags: Vec<String>,
}

/// Indices (ascending) of the foregrounds kept after removing
/// `min(n_remove, n_fg - 1)` of them uniformly at random.
pub fn retained_layer_indices<R: Rng + ?Sized>(n_fg: usize, n_remove: usize, rng: &mut R) -> Vec<usize> {
    if n_fg == 0 {
        return Vec::new();
    }
    let removals = n_remove.min(n_fg - 1);
    let mut removed = vec![false; n_fg];
    for i in index::sample(rng, n_fg, removals) {
        removed[i] = true;
    }
    (0..n_fg).filter(|&i| !removed[i]).collect()
}

fn scale_box(b: BBox, sx: f64, sy: f64, canvas: CanvasSize) -> BBox {
    let (w, h) = (canvas.width as i32, canvas.height as i32);
    let x0 = ((b.x0 as f64 * sx).round() as i32).clamp(0, w - 1);
    let y0 = ((b.y0 as f64 * sy).round() as i32).clamp(0, h - 1);
    let x1 = ((b.x1 as f64 * sx).round() as i32).clamp(x0 + 1, w);
    let y1 = ((b.y1 as f64 * sy).round() as i32).clamp(y0 + 1, h);
    BBox { x0, y0, x1, y1 }
}

/// Keeps the background of `base` and a random subset of its foregrounds,
/// at their original boxes and in their original order. A background whose
/// size differs from the canvas is resampled, boxes scaled with it.
pub fn build_base_layout<R: Rng + ?Sized>(
    pool: &AssetPool,
    base: &AssetRecord,
    cfg: &CompositionConfig,
    rng: &mut R,
) -> Result<BaseLayout> {
    if base.layers.is_empty() {
        return Err(Error::InvalidImage(format!("base {} has no foreground layers", base.id)));
    }
    let canvas = cfg.canvas;
    let n_remove = cfg.remove_range.sample(rng) as usize;
    let keep = retained_layer_indices(base.layers.len(), n_remove, rng);

    let mut flags = Vec::new();
    let raw_bg = pool.load_image(base)?;
    let (bw, bh) = raw_bg.dimensions();
    let rescale = (bw, bh) != (canvas.width, canvas.height);
    let (sx, sy) = (canvas.width as f64 / bw as f64, canvas.height as f64 / bh as f64);
    let background = if rescale {
        flags.push(format!("base-rescaled:{bw}x{bh}"));
        raw_bg.resize(canvas.width, canvas.height)?
    } else {
        raw_bg
    };

    let mut layers: Vec<LayerPlan> = Vec::with_capacity(keep.len());
    for i in keep {
        let sub = &base.layers[i];
        let mut img = pool.load_sub_layer(base, i)?;
        let mut placed = sub.bbox;
        if rescale {
            placed = scale_box(sub.bbox, sx, sy, canvas);
            img = img.resize(placed.width(), placed.height())?;
        }
        let below: Vec<BBox> = layers.iter().map(|l| l.placed_box).collect();
        layers.push(LayerPlan {
            source: SourceKind::Base,
            asset_id: base.id.clone(),
            image: img,
            placed_box: placed,
            caption: sub.caption.clone(),
            z_order: layers.len(),
            overlap: overlap_score(&placed, &below),
        });
    }
    Ok(BaseLayout {
        background,
        background_caption: base.caption.clone(),
        layers,
        flags,
    })
}

/// Shrinks images that would not fit on the canvas.
fn fit_to_canvas(img: RgbaImage, canvas: CanvasSize) -> Result<RgbaImage> {
    let (w, h) = img.dimensions();
    if w <= canvas.width && h <= canvas.height {
        return Ok(img);
    }
    let f = (canvas.width as f64 / w as f64).min(canvas.height as f64 / h as f64);
    let nw = ((w as f64 * f).floor() as u32).clamp(1, canvas.width);
    let nh = ((h as f64 * f).floor() as u32).clamp(1, canvas.height);
    img.resize(nw, nh)
}

/// Borrows foreground layers from `N_donors` distinct donor designs, at
/// their native crop size, placing each against everything below it.
pub fn add_donor_layers<R: Rng + ?Sized, P: Rng + ?Sized>(
    draft: &mut SampleDraft,
    pools: &Pools,
    cfg: &CompositionConfig,
    rng: &mut R,
    placement_rng: &mut P,
) -> Result<()> {
    let Some(pool) = pools.donor.as_ref() else {
        draft.flags.push("skipped-donor:no-pool".into());
        return Ok(());
    };
    let n_donors = cfg.donor_count_range.sample(rng) as usize;
    let donors = sample_distinct(pool, n_donors, rng)?;
    if donors.len() < n_donors {
        log::debug!("{}: donor pool has {} records, wanted {n_donors}", draft.sample_id, pool.len());
    }
    for donor in donors {
        let wanted = cfg.donor_layers_range.sample(rng) as usize;
        let k = wanted.min(donor.layers.len());
        let mut picks = index::sample(rng, donor.layers.len(), k).into_vec();
        picks.sort_unstable();
        for i in picks {
            let img = fit_to_canvas(pool.load_sub_layer(donor, i)?, draft.canvas)?;
            let caption = donor.layers[i].caption.clone();
            draft.place(SourceKind::Donor, &donor.id, img, &caption, cfg, placement_rng)?;
        }
    }
    Ok(())
}

/// The random decisions of the auxiliary stage, drawn before any asset is
/// touched: whether a crop and a text layer are added (and at what scale),
/// and the scales of the foreground objects.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryPlan {
    pub crop_scale: Option<f64>,
    pub text_scale: Option<f64>,
    pub object_scales: Vec<f64>,
}

pub fn draw_auxiliary_plan<R: Rng + ?Sized>(cfg: &CompositionConfig, rng: &mut R) -> AuxiliaryPlan {
    let crop_scale = rng.gen_bool(cfg.p_image_crop).then(|| cfg.crop_scale.sample(rng));
    let text_scale = rng.gen_bool(cfg.p_text).then(|| cfg.text_scale.sample(rng));
    let k = cfg.fg_count_range.sample(rng);
    let object_scales = (0..k).map(|_| cfg.fg_scale.sample(rng)).collect();
    AuxiliaryPlan {
        crop_scale,
        text_scale,
        object_scales,
    }
}

/// Adds an image crop, a text layer and foreground objects (in that order)
/// according to a freshly drawn [`AuxiliaryPlan`]. Text layers are cut down
/// to their alpha-tight extent before placement. A triggered branch whose
/// pool is missing is skipped and flagged.
pub fn add_auxiliary_layers<R: Rng + ?Sized, P: Rng + ?Sized>(
    draft: &mut SampleDraft,
    pools: &Pools,
    cfg: &CompositionConfig,
    rng: &mut R,
    placement_rng: &mut P,
) -> Result<AuxiliaryPlan> {
    let plan = draw_auxiliary_plan(cfg, rng);
    let canvas = draft.canvas;

    let mut branch = |kind: SourceKind, scale: f64, draft: &mut SampleDraft, rng: &mut R| -> Result<()> {
        let Some(pool) = pools.get(kind) else {
            log::warn!("{}: {kind} branch triggered without a {kind} pool", draft.sample_id);
            draft.flags.push(format!("skipped-{kind}:no-pool"));
            return Ok(());
        };
        let rec = sample_asset(pool, rng)?;
        let mut img = scale_image(&pool.load_image(rec)?, canvas, scale)?;
        if kind == SourceKind::Text {
            match tighten_bbox_to_alpha(&img, cfg.alpha_threshold) {
                Some(tight) => img = img.crop(tight)?,
                None => {
                    draft.flags.push(format!("skipped-text:transparent:{}", rec.id));
                    return Ok(());
                }
            }
        }
        draft.place(kind, &rec.id, img, &rec.caption, cfg, placement_rng)
    };

    if let Some(s) = plan.crop_scale {
        branch(SourceKind::ImageCrop, s, draft, rng)?;
    }
    if let Some(s) = plan.text_scale {
        branch(SourceKind::Text, s, draft, rng)?;
    }
    for &s in &plan.object_scales {
        branch(SourceKind::ForegroundObject, s, draft, rng)?;
    }
    Ok(plan)
}

/// Caps the layer count (dropping the topmost extras), flattens the stack
/// onto the background and quantizes every box.
pub fn assemble_sample(mut draft: SampleDraft, cfg: &CompositionConfig) -> Result<AssembledSample> {
    if draft.layers.is_empty() {
        return Err(Error::InvalidImage(format!("{}: no foreground layers", draft.sample_id)));
    }
    if draft.layers.len() > cfg.max_layers {
        log::warn!(
            "{}: {} layers exceed the cap of {}, dropping the top ones",
            draft.sample_id,
            draft.layers.len(),
            cfg.max_layers
        );
        draft.flags.push(format!("truncated-layers:{}", draft.layers.len()));
        draft.layers.truncate(cfg.max_layers);
    }
    for (z, layer) in draft.layers.iter_mut().enumerate() {
        layer.z_order = z;
    }
    let composite = flatten(&draft.background, draft.layers.iter().map(|l| (&l.image, l.origin())));
    let quantized_boxes = draft.layers.iter().map(|l| quantize_box(&l.placed_box, draft.canvas)).collect();
    Ok(AssembledSample {
        sample_index: draft.sample_index,
        sample_id: draft.sample_id,
        seed: draft.seed,
        canvas: draft.canvas,
        base_id: draft.base_id,
        background: draft.background,
        background_caption: draft.background_caption,
        layers: draft.layers,
        quantized_boxes,
        composite,
        flags: draft.flags,
    })
}

/// Runs every stage for one sample index.
pub fn generate_sample(index: u64, cfg: &CompositionConfig, pools: &Pools) -> Result<AssembledSample> {
    let seed = sample_seed(cfg.global_seed, index);
    let mut base_rng = stage_rng(seed, Stage::Base);
    let mut donor_rng = stage_rng(seed, Stage::Donor);
    let mut aux_rng = stage_rng(seed, Stage::Auxiliary);
    let mut place_rng = stage_rng(seed, Stage::Placement);

    let base = sample_asset(&pools.base, &mut base_rng)?;
    let layout = build_base_layout(&pools.base, base, cfg, &mut base_rng)?;
    let mut draft = SampleDraft {
        sample_index: index,
        sample_id: format_sample_id(index),
        seed,
        canvas: cfg.canvas,
        base_id: base.id.clone(),
        background: layout.background,
        background_caption: layout.background_caption,
        layers: layout.layers,
        flags: layout.flags,
    };
    add_donor_layers(&mut draft, pools, cfg, &mut donor_rng, &mut place_rng)?;
    add_auxiliary_layers(&mut draft, pools, cfg, &mut aux_rng, &mut place_rng)?;
    assemble_sample(draft, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn retained_floor_and_clamp() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n_remove in 1..=4 {
            assert_eq!(retained_layer_indices(1, n_remove, &mut rng), vec![0]);
        }
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(retained_layer_indices(5, 4, &mut rng).len(), 1);
            assert_eq!(retained_layer_indices(3, 4, &mut rng).len(), 1);
            let kept = retained_layer_indices(8, 2, &mut rng);
            assert_eq!(kept.len(), 6);
            assert!(kept.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn auxiliary_plan_all_off() {
        let cfg = CompositionConfig {
            p_image_crop: 0.0,
            p_text: 0.0,
            fg_count_range: CountRange(0, 0),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plan = draw_auxiliary_plan(&cfg, &mut rng);
        assert_eq!(plan, AuxiliaryPlan { crop_scale: None, text_scale: None, object_scales: vec![] });
    }

    #[test]
    fn auxiliary_plan_scales_in_range() {
        let cfg = CompositionConfig::default();
        for seed in 0..200 {
            let plan = draw_auxiliary_plan(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
            if let Some(s) = plan.crop_scale {
                assert!((0.3..=0.4).contains(&s));
            }
            if let Some(s) = plan.text_scale {
                assert!((0.6..=0.8).contains(&s));
            }
            assert!(plan.object_scales.len() <= 3);
            assert!(plan.object_scales.iter().all(|s| (0.25..=0.40).contains(s)));
        }
    }

    #[test]
    fn scale_box_stays_nonempty_and_inside() {
        let c = CanvasSize::new(64, 64).unwrap();
        let b = scale_box(BBox::new(0, 0, 1, 1).unwrap(), 0.1, 0.1, c);
        assert!(b.within(c) && b.width() >= 1 && b.height() >= 1);
        let b = scale_box(BBox::new(10, 20, 30, 40).unwrap(), 2.0, 0.5, c);
        assert_eq!(b, BBox::new(20, 10, 60, 20).unwrap());
    }

    fn draft_with(canvas: CanvasSize) -> SampleDraft {
        SampleDraft {
            sample_index: 0,
            sample_id: format_sample_id(0),
            seed: 0,
            canvas,
            base_id: "b".into(),
            background: RgbaImage::filled(canvas.width, canvas.height, [255, 255, 255, 255]).unwrap(),
            background_caption: String::new(),
            layers: vec![],
            flags: vec![],
        }
    }

    #[test]
    fn single_layer_on_empty_canvas_has_no_overlap() {
        let mut d = draft_with(CanvasSize::DEFAULT);
        let img = RgbaImage::filled(100, 50, [1, 2, 3, 255]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        d.place(SourceKind::Donor, "d", img, "x", &CompositionConfig::default(), &mut rng).unwrap();
        assert_eq!(d.layers[0].overlap, 0.0);
        assert_eq!(d.layers[0].placed_box.width(), 100);
        assert!(d.layers[0].placed_box.within(CanvasSize::DEFAULT));
    }

    #[test]
    fn assemble_caps_layers_and_composites() {
        let canvas = CanvasSize::new(64, 64).unwrap();
        let cfg = CompositionConfig {
            canvas,
            max_layers: 2,
            ..Default::default()
        };
        let mut d = draft_with(canvas);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for v in [10u8, 20, 30] {
            let img = RgbaImage::filled(64, 64, [v, v, v, 255]).unwrap();
            d.place(SourceKind::Text, "t", img, "", &cfg, &mut rng).unwrap();
        }
        let s = assemble_sample(d, &cfg).unwrap();
        assert_eq!(s.layers.len(), 2);
        assert!(s.flags.iter().any(|f| f.starts_with("truncated-layers")));
        // topmost surviving layer covers the canvas
        assert_eq!(s.composite, RgbaImage::filled(64, 64, [20, 20, 20, 255]).unwrap());
        assert!(s.quantized_boxes.iter().all(|q| q.to_array().iter().all(|v| v % 16 == 0)));
    }

    #[test]
    fn assemble_rejects_empty_drafts() {
        let d = draft_with(CanvasSize::new(16, 16).unwrap());
        assert!(assemble_sample(d, &CompositionConfig::default()).is_err());
    }
}
