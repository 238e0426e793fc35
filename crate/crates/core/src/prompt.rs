//! Part-aware point prompts: per-part cosine similarity maps over the target
//! grid, one positive point per part, and negatives chosen per mode.

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::cluster::{cluster_parts, PartSet};
use crate::error::{Error, Result};
use crate::feature::{
    grid_to_pixel, masked_select, norm, norm_f32, BinaryMask, FeatureMap, GridPoint, PixelPoint,
    Polarity, COSINE_EPS,
};
use crate::seed::{RngSeed, TAG_NEGATIVE, TAG_POSITIVE};

/// How negative prompts are chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegMode {
    /// At most one negative at the minimum of the averaged similarity map.
    #[default]
    Natural,
    /// Background features are clustered and matched like the positives.
    Medical,
}

impl std::str::FromStr for NegMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "natural" => Ok(NegMode::Natural),
            "medical" => Ok(NegMode::Medical),
            other => Err(Error::InvalidInput(format!("unknown mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for NegMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NegMode::Natural => "natural",
            NegMode::Medical => "medical",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Prompt {
    pub x: usize,
    pub y: usize,
    /// Source part index (`None` for the natural-mode negative).
    pub part: Option<usize>,
    pub score: f64,
}

impl Prompt {
    pub fn pixel(&self) -> PixelPoint {
        PixelPoint::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PromptSet {
    pub mode: NegMode,
    pub positives: Vec<Prompt>,
    pub negatives: Vec<Prompt>,
}

impl PromptSet {
    pub fn new(mode: NegMode, positives: Vec<Prompt>, negatives: Vec<Prompt>) -> Result<Self> {
        if positives.is_empty() {
            return Err(Error::InvalidInput(
                "prompt set needs at least one positive".into(),
            ));
        }
        if mode == NegMode::Natural && negatives.len() > 1 {
            return Err(Error::InvalidInput(
                "natural mode allows at most one negative prompt".into(),
            ));
        }
        for (name, list) in [("positive", &positives), ("negative", &negatives)] {
            let mut seen = std::collections::HashSet::new();
            if let Some(dup) = list.iter().find(|p| !seen.insert(p.pixel())) {
                return Err(Error::InvalidInput(format!(
                    "duplicate {name} prompt at ({}, {})",
                    dup.x, dup.y
                )));
            }
        }
        Ok(Self {
            mode,
            positives,
            negatives,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: PromptSet = serde_json::from_str(text)?;
        Self::new(raw.mode, raw.positives, raw.negatives)
    }

    /// Pretty JSON with fixed field order and six-decimal scores, newline-terminated.
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("prompt set serializes");
        out.push('\n');
        out
    }
}

struct PromptOut<'a>(&'a Prompt);

impl Serialize for PromptOut<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let p = self.0;
        let score =
            RawValue::from_string(format!("{:.6}", p.score)).map_err(serde::ser::Error::custom)?;
        let mut st = s.serialize_struct("Prompt", 4)?;
        st.serialize_field("x", &p.x)?;
        st.serialize_field("y", &p.y)?;
        st.serialize_field("part", &p.part)?;
        st.serialize_field("score", &score)?;
        st.end()
    }
}

impl Serialize for PromptSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let pos: Vec<_> = self.positives.iter().map(PromptOut).collect();
        let neg: Vec<_> = self.negatives.iter().map(PromptOut).collect();
        let mut st = s.serialize_struct("PromptSet", 3)?;
        st.serialize_field("mode", &self.mode)?;
        st.serialize_field("positives", &pos)?;
        st.serialize_field("negatives", &neg)?;
        st.end()
    }
}

/// One similarity grid per part, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityStack {
    pub height: usize,
    pub width: usize,
    pub maps: Vec<Vec<f64>>,
}

impl SimilarityStack {
    pub fn n(&self) -> usize {
        self.maps.len()
    }

    pub fn mean_map(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.height * self.width];
        for map in &self.maps {
            for (m, v) in mean.iter_mut().zip(map) {
                *m += v;
            }
        }
        let n = self.maps.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

pub fn similarity_maps(parts: &PartSet, target: &FeatureMap) -> Result<SimilarityStack> {
    similarity_maps_for(&parts.means, target)
}

/// Cosine similarity of each prototype against every target cell.
pub fn similarity_maps_for(
    prototypes: &[Vec<f64>],
    target: &FeatureMap,
) -> Result<SimilarityStack> {
    if prototypes.is_empty() {
        return Err(Error::InvalidInput("no prototypes".into()));
    }
    for p in prototypes {
        if p.len() != target.dim() {
            return Err(Error::DimMismatch {
                what: "prototype dim vs target features",
                expected: target.dim(),
                got: p.len(),
            });
        }
    }
    let cell_norms: Vec<f64> = (0..target.cells())
        .map(|i| norm_f32(target.vector(i)))
        .collect();
    let maps = prototypes
        .iter()
        .map(|p| {
            let pn = norm(p);
            (0..target.cells())
                .map(|i| {
                    let dot: f64 = p
                        .iter()
                        .zip(target.vector(i))
                        .map(|(a, &b)| a * f64::from(b))
                        .sum();
                    (dot / (pn * cell_norms[i]).max(COSINE_EPS)).clamp(-1.0, 1.0)
                })
                .collect()
        })
        .collect();
    Ok(SimilarityStack {
        height: target.height(),
        width: target.width(),
        maps,
    })
}

/// Index of the largest value; ties go to the smallest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

fn prompt_at(index: usize, score: f64, part: Option<usize>, map: &FeatureMap) -> Result<Prompt> {
    let cell = GridPoint::new(index / map.width(), index % map.width());
    let px = grid_to_pixel(cell, map)?;
    Ok(Prompt {
        x: px.x,
        y: px.y,
        part,
        score,
    })
}

fn check_stack(stack: &SimilarityStack, map: &FeatureMap) -> Result<()> {
    if stack.maps.is_empty() {
        return Err(Error::InvalidInput("empty similarity stack".into()));
    }
    if stack.height != map.height() || stack.width != map.width() {
        return Err(Error::DimMismatch {
            what: "similarity grid vs feature grid cells",
            expected: map.cells(),
            got: stack.height * stack.width,
        });
    }
    Ok(())
}

/// Per-map argmax points; coinciding pixels keep the lowest part index.
pub fn select_positive_prompts(stack: &SimilarityStack, map: &FeatureMap) -> Result<Vec<Prompt>> {
    check_stack(stack, map)?;
    let mut out: Vec<Prompt> = Vec::with_capacity(stack.n());
    for (c, sim) in stack.maps.iter().enumerate() {
        let idx = argmax(sim);
        let prompt = prompt_at(idx, sim[idx], Some(c), map)?;
        if !out.iter().any(|p| p.pixel() == prompt.pixel()) {
            out.push(prompt);
        }
    }
    Ok(out)
}

/// Single negative at the minimum of the part-averaged similarity map.
pub fn select_negative_prompt_natural(stack: &SimilarityStack, map: &FeatureMap) -> Result<Prompt> {
    check_stack(stack, map)?;
    let mean = stack.mean_map();
    let idx = argmin(&mean);
    prompt_at(idx, mean[idx], None, map)
}

/// Negatives for the medical mode: background features of the reference are
/// clustered into `m` parts and each part contributes its best-matching
/// target cell.
pub fn select_negative_prompts_medical(
    reference: &FeatureMap,
    mask: &BinaryMask,
    target: &FeatureMap,
    m: usize,
    seed: RngSeed,
) -> Result<Vec<Prompt>> {
    let background = masked_select(reference, mask, Polarity::Background)?;
    let parts = cluster_parts(&background, m, seed)?;
    let stack = similarity_maps(&parts, target)?;
    select_positive_prompts(&stack, target)
}

/// Full prompt pipeline for one candidate configuration. `pos_count` parts
/// are requested from the reference foreground (clamped by the clustering).
pub fn synthesize_prompts(
    reference: &FeatureMap,
    mask: &BinaryMask,
    target: &FeatureMap,
    pos_count: usize,
    mode: NegMode,
    neg_count: usize,
    seed: RngSeed,
) -> Result<PromptSet> {
    if reference.dim() != target.dim() {
        return Err(Error::DimMismatch {
            what: "reference vs target feature dim",
            expected: reference.dim(),
            got: target.dim(),
        });
    }
    let foreground = masked_select(reference, mask, Polarity::Foreground)?;
    let parts = cluster_parts(&foreground, pos_count, seed.derive(&[TAG_POSITIVE]))?;
    let stack = similarity_maps(&parts, target)?;
    let positives = select_positive_prompts(&stack, target)?;
    let negatives = match (mode, neg_count) {
        (_, 0) => Vec::new(),
        (NegMode::Natural, 1) => vec![select_negative_prompt_natural(&stack, target)?],
        (NegMode::Natural, n) => {
            return Err(Error::InvalidInput(format!(
                "natural mode takes 0 or 1 negatives, got {n}"
            )))
        }
        (NegMode::Medical, m) => select_negative_prompts_medical(
            reference,
            mask,
            target,
            m,
            seed.derive(&[TAG_NEGATIVE]),
        )?,
    };
    PromptSet::new(mode, positives, negatives)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(h: usize, w: usize, dim: usize, f: impl Fn(usize, usize) -> Vec<f32>) -> FeatureMap {
        let mut data = Vec::new();
        for r in 0..h {
            for c in 0..w {
                data.extend(f(r, c));
            }
        }
        FeatureMap::with_unit_stride(h, w, dim, data).unwrap()
    }

    fn stack(h: usize, w: usize, maps: Vec<Vec<f64>>) -> SimilarityStack {
        SimilarityStack {
            height: h,
            width: w,
            maps,
        }
    }

    #[test]
    fn self_similarity_peaks_at_source_cell() {
        let target = grid(4, 5, 3, |r, c| {
            vec![1.0 + r as f32, (c * c) as f32, -(r as f32) * 0.5]
        });
        let proto: Vec<f64> = target
            .vector_at(GridPoint::new(2, 3))
            .iter()
            .map(|&v| f64::from(v))
            .collect();
        let s = similarity_maps_for(&[proto], &target).unwrap();
        let idx = argmax(&s.maps[0]);
        assert_eq!(idx, 2 * 5 + 3);
        assert!((s.maps[0][idx] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn orthogonal_prototype_gives_zero_map() {
        let target = grid(3, 3, 2, |r, c| vec![(r + c) as f32, 0.0]);
        let s = similarity_maps_for(&[vec![0.0, 2.0]], &target).unwrap();
        assert!(s.maps[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cell_scaling_leaves_similarity() {
        let mut target = grid(3, 3, 3, |r, c| vec![r as f32 + 0.3, c as f32 - 1.0, 0.7]);
        let proto = vec![0.2, -0.4, 1.1];
        let before = similarity_maps_for(std::slice::from_ref(&proto), &target).unwrap();
        target.scale_vector(4, 2.0);
        let after = similarity_maps_for(&[proto], &target).unwrap();
        for (a, b) in before.maps[0].iter().zip(&after.maps[0]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn dim_mismatch_is_reported() {
        let target = grid(2, 2, 2, |_, _| vec![1.0, 0.0]);
        assert!(matches!(
            similarity_maps_for(&[vec![1.0, 0.0, 0.0]], &target),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn positive_selection_rules() {
        let map = FeatureMap::new(2, 2, 1, 4, 4, vec![1.0; 4]).unwrap();
        let unique = stack(2, 2, vec![vec![0.9, 0.1, 0.2, 0.3]]);
        let p = select_positive_prompts(&unique, &map).unwrap();
        assert_eq!((p[0].x, p[0].y, p[0].part), (1, 1, Some(0)));

        let constant = stack(2, 2, vec![vec![0.5; 4]]);
        let p = select_positive_prompts(&constant, &map).unwrap();
        assert_eq!((p[0].x, p[0].y), (1, 1));

        let twins = stack(
            2,
            2,
            vec![vec![0.1, 0.8, 0.2, 0.3], vec![0.1, 0.8, 0.2, 0.3]],
        );
        let p = select_positive_prompts(&twins, &map).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!((p[0].x, p[0].y, p[0].part), (3, 1, Some(0)));
    }

    #[test]
    fn natural_negative_rules() {
        let map = FeatureMap::with_unit_stride(8, 8, 1, vec![1.0; 64]).unwrap();
        let mut a = vec![0.5; 64];
        let mut b = vec![0.3; 64];
        a[5 * 8 + 5] = -0.2;
        b[5 * 8 + 5] = 0.1;
        let n = select_negative_prompt_natural(&stack(8, 8, vec![a.clone(), b]), &map).unwrap();
        assert_eq!((n.x, n.y), (5, 5));
        assert!((n.score - (-0.05)).abs() < 1e-12);

        let n = select_negative_prompt_natural(&stack(8, 8, vec![vec![0.2; 64]]), &map).unwrap();
        assert_eq!((n.x, n.y), (0, 0));

        let single = select_negative_prompt_natural(&stack(8, 8, vec![a.clone()]), &map).unwrap();
        assert_eq!(single.score, a[argmin(&a)]);
        assert_eq!((single.x, single.y), (5, 5));
    }

    #[test]
    fn medical_negative_self_similarity() {
        // reference background is all (0,1); only target cell (0,0) matches it
        let reference = grid(3, 3, 2, |r, c| {
            if r == 1 && c == 1 {
                vec![1.0, 0.0]
            } else {
                vec![0.0, 1.0]
            }
        });
        let mut mask = BinaryMask::zeros(3, 3);
        mask.set(1, 1, true);
        let target = grid(3, 3, 2, |r, c| {
            if r == 0 && c == 0 {
                vec![0.0, 1.0]
            } else {
                vec![1.0, 0.2]
            }
        });
        let neg =
            select_negative_prompts_medical(&reference, &mask, &target, 1, RngSeed(0)).unwrap();
        assert_eq!(neg.len(), 1);
        assert_eq!((neg[0].x, neg[0].y), (0, 0));
    }

    #[test]
    fn medical_negative_requires_background() {
        let reference = grid(2, 2, 2, |_, _| vec![1.0, 0.0]);
        let err = select_negative_prompts_medical(
            &reference,
            &BinaryMask::ones(2, 2),
            &reference,
            1,
            RngSeed(0),
        );
        assert!(matches!(err, Err(Error::EmptySelection(_))));
    }

    #[test]
    fn medical_two_cluster_background() {
        // background: left column ~ (1,0,0), right column ~ (0,1,0); foreground centre ~ (0,0,1)
        let reference = grid(3, 3, 3, |r, c| match (r, c) {
            (1, 1) => vec![0.0, 0.0, 1.0],
            (_, 0) => vec![1.0, 0.05 * r as f32, 0.0],
            _ => vec![0.05 * r as f32, 1.0, 0.0],
        });
        let mut mask = BinaryMask::zeros(3, 3);
        mask.set(1, 1, true);
        let target = grid(4, 4, 3, |r, c| {
            vec![
                (r as f32 + 1.0) * 0.3,
                (c as f32 + 1.0) * 0.25,
                ((r * c) % 3) as f32 * 0.4,
            ]
        });
        let neg =
            select_negative_prompts_medical(&reference, &mask, &target, 2, RngSeed(5)).unwrap();

        // oracle: background groups split by column parity, each group's mean
        // matched against every target cell by exhaustive comparison
        let bg = masked_select(&reference, &mask, Polarity::Background).unwrap();
        let groups: [Vec<usize>; 2] = [
            (0..bg.count())
                .filter(|&i| bg.coords()[i].col == 0)
                .collect(),
            (0..bg.count())
                .filter(|&i| bg.coords()[i].col != 0)
                .collect(),
        ];
        let mut expected: Vec<(usize, usize)> = groups
            .iter()
            .map(|g| {
                let m = bg.select(g).unwrap().mean();
                let mut best = (0, f64::NEG_INFINITY);
                for i in 0..target.cells() {
                    let v: Vec<f64> = target.vector(i).iter().map(|&x| f64::from(x)).collect();
                    let s = crate::feature::cosine(&m, &v);
                    if s > best.1 {
                        best = (i, s);
                    }
                }
                (best.0 % 4, best.0 / 4)
            })
            .collect();
        expected.sort();
        expected.dedup();
        let mut got: Vec<(usize, usize)> = neg.iter().map(|p| (p.x, p.y)).collect();
        got.sort();
        assert_eq!(got, expected);
    }

    #[test]
    fn cardinality_contracts() {
        let reference = grid(4, 4, 2, |r, c| vec![r as f32 + 0.5, c as f32 + 0.1]);
        let mut mask = BinaryMask::zeros(4, 4);
        mask.set(1, 1, true);
        mask.set(2, 3, true);
        let target = grid(4, 4, 2, |r, c| vec![c as f32 + 0.2, r as f32 + 0.7]);
        let one = synthesize_prompts(
            &reference,
            &mask,
            &target,
            1,
            NegMode::Natural,
            1,
            RngSeed(0),
        )
        .unwrap();
        assert_eq!((one.positives.len(), one.negatives.len()), (1, 1));
        let clamped = synthesize_prompts(
            &reference,
            &mask,
            &target,
            3,
            NegMode::Natural,
            1,
            RngSeed(0),
        )
        .unwrap();
        assert!(clamped.positives.len() <= 2);
        assert!(synthesize_prompts(
            &reference,
            &mask,
            &target,
            1,
            NegMode::Natural,
            2,
            RngSeed(0)
        )
        .is_err());
    }

    #[test]
    fn json_layout_is_fixed() {
        let set = PromptSet::new(
            NegMode::Natural,
            vec![Prompt {
                x: 8,
                y: 24,
                part: Some(0),
                score: 0.98765432,
            }],
            vec![Prompt {
                x: 1000,
                y: 8,
                part: None,
                score: -0.25,
            }],
        )
        .unwrap();
        let json = set.to_json();
        let expected = r#"{
  "mode": "natural",
  "positives": [
    {
      "x": 8,
      "y": 24,
      "part": 0,
      "score": 0.987654
    }
  ],
  "negatives": [
    {
      "x": 1000,
      "y": 8,
      "part": null,
      "score": -0.250000
    }
  ]
}
"#;
        assert_eq!(json, expected);
        let back = PromptSet::from_json(&json).unwrap();
        assert_eq!(back.positives[0].score, 0.987654);
        assert_eq!(back.negatives[0].pixel(), PixelPoint::new(1000, 8));
    }

    #[test]
    fn prompt_set_validation() {
        let p = Prompt {
            x: 1,
            y: 1,
            part: Some(0),
            score: 1.0,
        };
        assert!(PromptSet::new(NegMode::Natural, vec![], vec![]).is_err());
        assert!(PromptSet::new(NegMode::Natural, vec![p.clone(), p.clone()], vec![]).is_err());
        assert!(PromptSet::new(
            NegMode::Natural,
            vec![p.clone()],
            vec![p.clone(), Prompt { x: 2, ..p.clone() }]
        )
        .is_err());
        assert!(PromptSet::new(
            NegMode::Medical,
            vec![p.clone()],
            vec![p.clone(), Prompt { x: 2, ..p }]
        )
        .is_ok());
    }
}
