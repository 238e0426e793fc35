//! Distribution-guided retrieval over candidate prompt configurations.
//!
//! Every candidate `(positives, negatives)` is turned into prompts, segmented,
//! and scored by the distance between the reference foreground features and
//! the target features under the candidate mask. The smallest finite distance
//! wins; ties go to the lexicographically smallest candidate.

use serde::{Deserialize, Serialize};

use crate::distance::{distance, DistanceResult, MeasureSpec, DEFAULT_CAP};
use crate::error::{Error, Result};
use crate::feature::{masked_select, BinaryMask, FeatureMap, FeatureSet, Polarity};
use crate::par;
use crate::prompt::{synthesize_prompts, NegMode, PromptSet};
use crate::seed::{RngSeed, TAG_CANDIDATE, TAG_DISTANCE};
use crate::segmenter::Segmenter;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    /// Inclusive `[low, high]` range of positive part counts.
    pub pos_range: [usize; 2],
    pub neg_mode: NegMode,
    /// Inclusive range of negative counts; natural mode allows only 0 or 1.
    pub neg_range: [usize; 2],
    pub measure: MeasureSpec,
    pub cap: usize,
    pub seed: RngSeed,
    /// Upper bound on concurrently evaluated candidates.
    pub jobs: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            pos_range: [1, 5],
            neg_mode: NegMode::Natural,
            neg_range: [1, 1],
            measure: MeasureSpec::Wasserstein,
            cap: DEFAULT_CAP,
            seed: RngSeed(0),
            jobs: 1,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        let [plo, phi] = self.pos_range;
        let [nlo, nhi] = self.neg_range;
        if plo == 0 || plo > phi {
            return Err(Error::InvalidInput(format!(
                "positive range {plo}-{phi} must be non-empty with low >= 1"
            )));
        }
        if nlo > nhi {
            return Err(Error::InvalidInput(format!(
                "negative range {nlo}-{nhi} is empty"
            )));
        }
        if self.neg_mode == NegMode::Natural && nhi > 1 {
            return Err(Error::InvalidInput(
                "natural mode takes 0 or 1 negatives".into(),
            ));
        }
        if self.cap < 2 {
            return Err(Error::InvalidInput(
                "subsample cap must be at least 2".into(),
            ));
        }
        Ok(())
    }

    /// Cartesian candidate grid in lexicographic order.
    pub fn candidates(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for p in self.pos_range[0]..=self.pos_range[1] {
            for n in self.neg_range[0]..=self.neg_range[1] {
                out.push((p, n));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub pos: usize,
    pub neg: usize,
    pub prompts: PromptSet,
    pub mask: BinaryMask,
    /// `None` when the candidate mask is empty (infinite distance).
    pub distance: Option<DistanceResult>,
}

impl Trial {
    pub fn value(&self) -> f64 {
        self.distance.as_ref().map_or(f64::INFINITY, |d| d.value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalOutcome {
    pub winner: (usize, usize),
    pub trials: Vec<Trial>,
    winner_index: usize,
}

impl RetrievalOutcome {
    pub fn winner_trial(&self) -> &Trial {
        &self.trials[self.winner_index]
    }

    pub fn winner_mask(&self) -> &BinaryMask {
        &self.winner_trial().mask
    }

    pub fn winner_prompts(&self) -> &PromptSet {
        &self.winner_trial().prompts
    }

    /// Report JSON: winner, its prompts, and one entry per candidate.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct TrialDoc<'a> {
            pos: usize,
            neg: usize,
            positives: usize,
            negatives: usize,
            mask_area: usize,
            distance: Option<&'a DistanceResult>,
        }
        #[derive(Serialize)]
        struct WinnerDoc<'a> {
            pos: usize,
            neg: usize,
            distance: Option<&'a DistanceResult>,
            mask_area: usize,
        }
        #[derive(Serialize)]
        struct Report<'a> {
            winner: WinnerDoc<'a>,
            prompts: &'a PromptSet,
            trials: Vec<TrialDoc<'a>>,
        }
        let w = self.winner_trial();
        let report = Report {
            winner: WinnerDoc {
                pos: w.pos,
                neg: w.neg,
                distance: w.distance.as_ref(),
                mask_area: w.mask.area(),
            },
            prompts: &w.prompts,
            trials: self
                .trials
                .iter()
                .map(|t| TrialDoc {
                    pos: t.pos,
                    neg: t.neg,
                    positives: t.prompts.positives.len(),
                    negatives: t.prompts.negatives.len(),
                    mask_area: t.mask.area(),
                    distance: t.distance.as_ref(),
                })
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&report).expect("report serializes");
        out.push('\n');
        out
    }
}

/// Seed used for candidate `(pos, neg)`; fixed-count runs that use it see
/// exactly the prompts and masks retrieval sees.
pub fn candidate_seed(seed: RngSeed, pos: usize, neg: usize) -> RngSeed {
    seed.derive(&[TAG_CANDIDATE, pos as u64, neg as u64])
}

fn evaluate(
    reference: &FeatureMap,
    mask: &BinaryMask,
    reference_fg: &FeatureSet,
    target: &FeatureMap,
    cfg: &RetrievalConfig,
    segmenter: &dyn Segmenter,
    (pos, neg): (usize, usize),
) -> Result<Trial> {
    let seed = candidate_seed(cfg.seed, pos, neg);
    let mut prompts = synthesize_prompts(reference, mask, target, pos, cfg.neg_mode, neg, seed)?;
    if !segmenter.accepts_negatives() {
        prompts.negatives.clear();
    }
    let candidate_mask = segmenter.segment(target, &prompts)?;
    target.check_mask(&candidate_mask)?;
    let distance = if candidate_mask.is_empty() {
        None
    } else {
        let target_fg = masked_select(target, &candidate_mask, Polarity::Foreground)?;
        Some(distance(
            reference_fg,
            &target_fg,
            &cfg.measure,
            cfg.cap,
            seed.derive(&[TAG_DISTANCE]),
        )?)
    };
    Ok(Trial {
        pos,
        neg,
        prompts,
        mask: candidate_mask,
        distance,
    })
}

/// Retrieval over the full cartesian grid of `cfg`.
pub fn retrieve_optimal(
    reference: &FeatureMap,
    mask: &BinaryMask,
    target: &FeatureMap,
    cfg: &RetrievalConfig,
    segmenter: &dyn Segmenter,
) -> Result<RetrievalOutcome> {
    cfg.validate()?;
    retrieve_over(reference, mask, target, cfg, &cfg.candidates(), segmenter)
}

/// Retrieval over an explicit candidate list (kept in the given order).
/// Candidate seeds depend only on `cfg.seed` and the candidate itself.
pub fn retrieve_over(
    reference: &FeatureMap,
    mask: &BinaryMask,
    target: &FeatureMap,
    cfg: &RetrievalConfig,
    candidates: &[(usize, usize)],
    segmenter: &dyn Segmenter,
) -> Result<RetrievalOutcome> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no retrieval candidates".into()));
    }
    let reference_fg = masked_select(reference, mask, Polarity::Foreground)?;
    let run = |c: (usize, usize)| {
        evaluate(reference, mask, &reference_fg, target, cfg, segmenter, c).map_err(|e| {
            Error::Candidate {
                pos: c.0,
                neg: c.1,
                source: Box::new(e),
            }
        })
    };

    let results: Vec<Result<Trial>> = par::ordered_map(candidates, cfg.jobs, |&c| run(c));
    let trials = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut winner_index = None;
    for (i, t) in trials.iter().enumerate() {
        let v = t.value();
        if v.is_finite() && winner_index.is_none_or(|w: usize| v < trials[w].value()) {
            winner_index = Some(i);
        }
    }
    let winner_index = winner_index.ok_or(Error::AllCandidatesEmpty)?;
    Ok(RetrievalOutcome {
        winner: (trials[winner_index].pos, trials[winner_index].neg),
        trials,
        winner_index,
    })
}
