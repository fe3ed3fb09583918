//! Aggregation of five-criterion judge scores into a 0 to 100 overall score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Criterion names in weight order.
pub const JUDGE_CRITERIA: [&str; 5] = [
    "image_faithfulness",
    "coverage",
    "reference_alignment",
    "text_accuracy",
    "fluency",
];

pub const JUDGE_WEIGHTS: [f64; 5] = [0.35, 0.20, 0.20, 0.20, 0.05];

/// Per-criterion scores on a 1 to 5 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeScores {
    pub image_faithfulness: f64,
    pub coverage: f64,
    pub reference_alignment: f64,
    pub text_accuracy: f64,
    pub fluency: f64,
}

impl JudgeScores {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.image_faithfulness,
            self.coverage,
            self.reference_alignment,
            self.text_accuracy,
            self.fluency,
        ]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            image_faithfulness: a[0],
            coverage: a[1],
            reference_alignment: a[2],
            text_accuracy: a[3],
            fluency: a[4],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (criterion, value) in JUDGE_CRITERIA.into_iter().zip(self.as_array()) {
            if !(1.0..=5.0).contains(&value) {
                return Err(Error::ScoreOutOfRange { criterion, value });
            }
        }
        Ok(())
    }

    /// Criterion-wise mean; `None` for an empty slice.
    pub fn mean(all: &[JudgeScores]) -> Option<JudgeScores> {
        if all.is_empty() {
            return None;
        }
        let mut sum = [0.0; 5];
        for s in all {
            for (acc, v) in sum.iter_mut().zip(s.as_array()) {
                *acc += v;
            }
        }
        Some(Self::from_array(sum.map(|v| v / all.len() as f64)))
    }
}

/// Weighted mean mapped linearly so that 5 becomes 100 (and 1 becomes 20).
pub fn aggregate_judge(scores: &JudgeScores) -> Result<f64> {
    scores.validate()?;
    let weighted: f64 = JUDGE_WEIGHTS.iter().zip(scores.as_array()).map(|(w, s)| w * s).sum();
    Ok(weighted / 5.0 * 100.0)
}
