//! Promptable segmenter contract.
//!
//! [`MockSegmenter`] is an in-process prototype matcher used to make the
//! retrieval loop observable without a neural decoder. Real decoders are
//! reached through the file-based sidecar protocol in [`sidecar`].

#[cfg(feature = "sidecar")]
pub mod sidecar;

use crate::error::{Error, Result};
use crate::feature::{norm_f32, pixel_to_grid, BinaryMask, FeatureMap, COSINE_EPS};
use crate::prompt::{Prompt, PromptSet};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

pub trait Segmenter: Send + Sync {
    /// Whether negative point prompts are honoured.
    fn accepts_negatives(&self) -> bool {
        true
    }

    /// Grid-resolution mask for `target` under `prompts`.
    fn segment(&self, target: &FeatureMap, prompts: &PromptSet) -> Result<BinaryMask>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MockSegmenter {
    pub threshold: f64,
}

impl Default for MockSegmenter {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl MockSegmenter {
    pub fn new(threshold: f64) -> Self {
        Self { threshold }
    }
}

impl Segmenter for MockSegmenter {
    fn segment(&self, target: &FeatureMap, prompts: &PromptSet) -> Result<BinaryMask> {
        mock_prototype_segment(target, prompts, self.threshold)
    }
}

fn prompt_vectors(target: &FeatureMap, prompts: &[Prompt]) -> Result<Vec<(Vec<f64>, f64)>> {
    prompts
        .iter()
        .map(|p| {
            let cell = pixel_to_grid(p.pixel(), target)?;
            let v: Vec<f64> = target
                .vector_at(cell)
                .iter()
                .map(|&x| f64::from(x))
                .collect();
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            Ok((v, n))
        })
        .collect()
}

/// A cell is foreground when its best cosine similarity to a positive prompt
/// cell beats the best similarity to a negative prompt cell (or -1 without
/// negatives) and reaches `threshold`. Equal scores are background.
pub fn mock_prototype_segment(
    target: &FeatureMap,
    prompts: &PromptSet,
    threshold: f64,
) -> Result<BinaryMask> {
    if prompts.positives.is_empty() {
        return Err(Error::InvalidInput(
            "mock segmenter needs a positive prompt".into(),
        ));
    }
    let positives = prompt_vectors(target, &prompts.positives)?;
    let negatives = prompt_vectors(target, &prompts.negatives)?;
    let best = |cell: &[f32], cell_norm: f64, refs: &[(Vec<f64>, f64)]| -> f64 {
        refs.iter()
            .map(|(v, n)| {
                let dot: f64 = v.iter().zip(cell).map(|(a, &b)| a * f64::from(b)).sum();
                (dot / (n * cell_norm).max(COSINE_EPS)).clamp(-1.0, 1.0)
            })
            .fold(-1.0, f64::max)
    };
    let bits = (0..target.cells())
        .map(|i| {
            let cell = target.vector(i);
            let n = norm_f32(cell);
            let s_pos = best(cell, n, &positives);
            let s_neg = best(cell, n, &negatives);
            u8::from(s_pos > s_neg && s_pos >= threshold)
        })
        .collect();
    BinaryMask::new(target.height(), target.width(), bits)
}
