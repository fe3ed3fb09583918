use serde::{Deserialize, Serialize};

use crate::assets::ScaleRange;
use crate::error::{Error, Result};
use crate::geometry::{CandidateMode, CanvasSize, DEFAULT_MAX_CANDIDATES};

/// Inclusive integer range `{lo..=hi}` drawn uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange(pub u32, pub u32);

impl CountRange {
    pub fn validate(&self, name: &str) -> Result<()> {
        if self.0 > self.1 {
            return Err(Error::Config(format!("{name}: empty range {{{}..{}}}", self.0, self.1)));
        }
        Ok(())
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        rng.gen_range(self.0..=self.1)
    }
}

/// Every tunable of the composition pipeline. Defaults reproduce the
/// reference dataset settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompositionConfig {
    pub canvas: CanvasSize,
    pub p_image_crop: f64,
    pub crop_scale: ScaleRange,
    pub p_text: f64,
    pub text_scale: ScaleRange,
    pub fg_count_range: CountRange,
    pub fg_scale: ScaleRange,
    pub remove_range: CountRange,
    pub donor_count_range: CountRange,
    pub donor_layers_range: CountRange,
    pub max_candidates: usize,
    /// Evaluate every integer origin instead of sampling candidates.
    pub exhaustive_placement: bool,
    pub global_seed: u64,
    /// Upper bound on foreground layers per sample.
    pub max_layers: usize,
    /// Alpha at or below this value is treated as transparent.
    pub alpha_threshold: u8,
}

impl Default for CompositionConfig {
    fn default() -> Self {
        Self {
            canvas: CanvasSize::DEFAULT,
            p_image_crop: 0.60,
            crop_scale: ScaleRange(0.3, 0.4),
            p_text: 0.35,
            text_scale: ScaleRange(0.6, 0.8),
            fg_count_range: CountRange(0, 3),
            fg_scale: ScaleRange(0.25, 0.40),
            remove_range: CountRange(1, 4),
            donor_count_range: CountRange(1, 4),
            donor_layers_range: CountRange(0, 2),
            max_candidates: DEFAULT_MAX_CANDIDATES,
            exhaustive_placement: false,
            global_seed: 0,
            max_layers: 52,
            alpha_threshold: crate::imaging::DEFAULT_ALPHA_THRESHOLD,
        }
    }
}

impl CompositionConfig {
    pub fn validate(&self) -> Result<()> {
        CanvasSize::new(self.canvas.width, self.canvas.height)?;
        for (name, p) in [("p_image_crop", self.p_image_crop), ("p_text", self.p_text)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is not a probability")));
            }
        }
        self.crop_scale.validate("crop_scale")?;
        self.text_scale.validate("text_scale")?;
        self.fg_scale.validate("fg_scale")?;
        self.fg_count_range.validate("fg_count_range")?;
        self.remove_range.validate("remove_range")?;
        self.donor_count_range.validate("donor_count_range")?;
        self.donor_layers_range.validate("donor_layers_range")?;
        if self.max_candidates == 0 {
            return Err(Error::Config("max_candidates must be positive".into()));
        }
        if self.max_layers == 0 {
            return Err(Error::Config("max_layers must be positive".into()));
        }
        Ok(())
    }

    pub fn candidate_mode(&self) -> CandidateMode {
        if self.exhaustive_placement {
            CandidateMode::Exhaustive
        } else {
            CandidateMode::Sampled(self.max_candidates)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = CompositionConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.p_image_crop, 0.60);
        assert_eq!(cfg.p_text, 0.35);
        assert_eq!(cfg.max_candidates, 300);
        assert_eq!(cfg.max_layers, 52);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            CompositionConfig {
                p_text: 1.5,
                ..Default::default()
            },
            CompositionConfig {
                remove_range: CountRange(4, 1),
                ..Default::default()
            },
            CompositionConfig {
                fg_scale: ScaleRange(0.0, 0.2),
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn partial_json_fills_defaults_and_rejects_unknown_keys() {
        let cfg: CompositionConfig = serde_json::from_str(r#"{"p_text": 0.5, "canvas": {"width": 256, "height": 256}}"#).unwrap();
        assert_eq!(cfg.p_text, 0.5);
        assert_eq!(cfg.canvas.width, 256);
        assert_eq!(cfg.p_image_crop, 0.60);
        assert!(serde_json::from_str::<CompositionConfig>(r#"{"p_txt": 0.5}"#).is_err());
    }
}
