//! Batch ablation runs over synthetic scenes.
//!
//! A TOML config lists scenes (explicitly and/or as a seeded suite) and
//! method configurations. Every method runs on every scene; the report holds
//! one row per (scene, method) plus per-method means.
//!
//! ```toml
//! seed = 0
//! threshold = 0.5
//!
//! [suite]
//! count = 50
//! template = { parts = 4 }
//!
//! [[methods]]
//! kind = "fixed"
//! pos = 4
//!
//! [[methods]]
//! kind = "retrieval"
//! pos_range = [1, 5]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{dice, iou};
use super::scene::{generate_scene, Scene, SceneSpec};
use crate::distance::{MeasureSpec, DEFAULT_CAP};
use crate::error::{Error, Result};
use crate::feature::BinaryMask;
use crate::par;
use crate::prompt::{synthesize_prompts, NegMode};
use crate::retrieval::{candidate_seed, retrieve_optimal, RetrievalConfig};
use crate::seed::{RngSeed, TAG_SCENE};
use crate::segmenter::{MockSegmenter, Segmenter, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidecarConfig {
    pub command: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub count: usize,
    /// Scene settings shared by the suite; each scene gets a derived seed.
    #[serde(default)]
    pub template: SceneSpec,
}

fn default_neg() -> usize {
    1
}

fn default_pos_range() -> [usize; 2] {
    [1, 5]
}

fn default_neg_range() -> [usize; 2] {
    [1, 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    /// Fixed prompt counts, no retrieval.
    Fixed {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        pos: usize,
        #[serde(default = "default_neg")]
        neg: usize,
        #[serde(default)]
        mode: NegMode,
    },
    /// Distribution-guided retrieval over a candidate grid.
    Retrieval {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default = "default_pos_range")]
        pos_range: [usize; 2],
        #[serde(default = "default_neg_range")]
        neg_range: [usize; 2],
        #[serde(default)]
        mode: NegMode,
        #[serde(default)]
        measure: MeasureSpec,
    },
}

impl MethodConfig {
    pub fn name(&self) -> String {
        match self {
            MethodConfig::Fixed { name: Some(n), .. }
            | MethodConfig::Retrieval { name: Some(n), .. } => n.clone(),
            MethodConfig::Fixed { pos, neg, mode, .. } => format!("fixed-{mode}-p{pos}-n{neg}"),
            MethodConfig::Retrieval {
                pos_range,
                neg_range,
                mode,
                measure,
                ..
            } => {
                let m = match measure {
                    MeasureSpec::Wasserstein => "wasserstein",
                    MeasureSpec::Sinkhorn { .. } => "sinkhorn",
                    MeasureSpec::Js { .. } => "js",
                    MeasureSpec::Hungarian { .. } => "hungarian",
                };
                format!(
                    "retrieval-{mode}-{m}-p{}-{}-n{}-{}",
                    pos_range[0], pos_range[1], neg_range[0], neg_range[1]
                )
            }
        }
    }
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_jobs() -> usize {
    1
}

fn default_cap() -> usize {
    DEFAULT_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub seed: RngSeed,
    /// Mock segmenter threshold.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default = "default_cap")]
    pub cap: usize,
    /// Use an external segmenter instead of the mock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidecar: Option<SidecarConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<SuiteConfig>,
    #[serde(default)]
    pub scenes: Vec<SceneSpec>,
    #[serde(default)]
    pub methods: Vec<MethodConfig>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: RngSeed(0),
            threshold: DEFAULT_THRESHOLD,
            jobs: 1,
            cap: DEFAULT_CAP,
            sidecar: None,
            suite: None,
            scenes: Vec::new(),
            methods: Vec::new(),
        }
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Explicit scenes first, then the suite with seeds derived from `seed`.
    pub fn scene_specs(&self) -> Vec<SceneSpec> {
        let mut out = self.scenes.clone();
        if let Some(suite) = &self.suite {
            out.extend((0..suite.count).map(|i| SceneSpec {
                seed: self.seed.derive(&[TAG_SCENE, i as u64]),
                ..suite.template.clone()
            }));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub scene: usize,
    pub scene_seed: u64,
    pub method: String,
    /// Prompt counts used; for retrieval the winner, empty when every
    /// candidate mask was empty.
    pub pos: Option<usize>,
    pub neg: Option<usize>,
    pub dice: f64,
    pub iou: f64,
    pub distance: Option<f64>,
    /// Retrieval only: best Dice over all candidates of the grid.
    pub grid_best_dice: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub method: String,
    pub scenes: usize,
    pub mean_dice: f64,
    pub mean_iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub config: BenchConfig,
    pub scene_seeds: Vec<u64>,
    pub rows: Vec<EvalRow>,
    pub aggregates: Vec<Aggregate>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)
                .map_err(|e| Error::Format(format!("csv: {e}")))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Format(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    pub fn aggregate(&self, method: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.method == method)
    }
}

fn segmenter_for(config: &BenchConfig) -> Result<Box<dyn Segmenter>> {
    match &config.sidecar {
        None => Ok(Box::new(MockSegmenter::new(config.threshold))),
        #[cfg(feature = "sidecar")]
        Some(sc) => {
            let mut s = crate::segmenter::sidecar::SidecarSegmenter::new(sc.command.clone());
            if let Some(t) = sc.timeout_secs {
                if !(t.is_finite() && t > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "sidecar timeout {t} must be positive"
                    )));
                }
                s.timeout = std::time::Duration::from_secs_f64(t);
            }
            Ok(Box::new(s))
        }
        #[cfg(not(feature = "sidecar"))]
        Some(_) => Err(Error::InvalidInput("built without sidecar support".into())),
    }
}

fn run_method(
    scene_index: usize,
    spec: &SceneSpec,
    scene: &Scene,
    method: &MethodConfig,
    config: &BenchConfig,
    segmenter: &dyn Segmenter,
) -> Result<EvalRow> {
    let seed = spec.seed;
    let row = |pred: &BinaryMask, pos, neg, distance, grid_best_dice| -> Result<EvalRow> {
        Ok(EvalRow {
            scene: scene_index,
            scene_seed: seed.0,
            method: method.name(),
            pos,
            neg,
            dice: dice(pred, &scene.target_mask)?,
            iou: iou(pred, &scene.target_mask)?,
            distance,
            grid_best_dice,
        })
    };
    match method {
        MethodConfig::Fixed { pos, neg, mode, .. } => {
            let mut prompts = synthesize_prompts(
                &scene.reference,
                &scene.reference_mask,
                &scene.target,
                *pos,
                *mode,
                *neg,
                candidate_seed(seed, *pos, *neg),
            )?;
            if !segmenter.accepts_negatives() {
                prompts.negatives.clear();
            }
            let pred = segmenter.segment(&scene.target, &prompts)?;
            row(&pred, Some(*pos), Some(*neg), None, None)
        }
        MethodConfig::Retrieval {
            pos_range,
            neg_range,
            mode,
            measure,
            ..
        } => {
            let cfg = RetrievalConfig {
                pos_range: *pos_range,
                neg_mode: *mode,
                neg_range: *neg_range,
                measure: *measure,
                cap: config.cap,
                seed,
                jobs: 1,
            };
            match retrieve_optimal(
                &scene.reference,
                &scene.reference_mask,
                &scene.target,
                &cfg,
                segmenter,
            ) {
                Ok(outcome) => {
                    let mut best = 0.0f64;
                    for t in &outcome.trials {
                        best = best.max(dice(&t.mask, &scene.target_mask)?);
                    }
                    let w = outcome.winner_trial();
                    row(
                        &w.mask,
                        Some(w.pos),
                        Some(w.neg),
                        Some(w.value()),
                        Some(best),
                    )
                }
                Err(Error::AllCandidatesEmpty) => {
                    let empty = BinaryMask::zeros(scene.target.height(), scene.target.width());
                    let best = dice(&empty, &scene.target_mask)?;
                    row(&empty, None, None, None, Some(best))
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Runs every method on every scene of `config`. Deterministic in the
/// config; scenes run concurrently up to `config.jobs`.
pub fn run_benchmark_config(config: &BenchConfig) -> Result<EvalReport> {
    let segmenter = segmenter_for(config)?;
    let specs = config.scene_specs();
    let indexed: Vec<(usize, &SceneSpec)> = specs.iter().enumerate().collect();
    let per_scene = par::ordered_map(
        &indexed,
        config.jobs,
        |&(i, spec)| -> Result<Vec<EvalRow>> {
            let scene = generate_scene(spec)?;
            config
                .methods
                .iter()
                .map(|m| run_method(i, spec, &scene, m, config, segmenter.as_ref()))
                .collect()
        },
    );
    let mut rows = Vec::new();
    for r in per_scene {
        rows.extend(r?);
    }

    let mut aggregates = Vec::new();
    if !specs.is_empty() {
        for m in &config.methods {
            let name = m.name();
            if aggregates.iter().any(|a: &Aggregate| a.method == name) {
                continue;
            }
            let mine: Vec<&EvalRow> = rows.iter().filter(|r| r.method == name).collect();
            let n = mine.len() as f64;
            aggregates.push(Aggregate {
                method: name,
                scenes: mine.len(),
                mean_dice: mine.iter().map(|r| r.dice).sum::<f64>() / n,
                mean_iou: mine.iter().map(|r| r.iou).sum::<f64>() / n,
            });
        }
    }
    Ok(EvalReport {
        config: config.clone(),
        scene_seeds: specs.iter().map(|s| s.seed.0).collect(),
        rows,
        aggregates,
    })
}

/// Reads a TOML config and runs it.
pub fn run_benchmark(path: impl AsRef<Path>) -> Result<EvalReport> {
    let path: PathBuf = path.as_ref().to_path_buf();
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    run_benchmark_config(&BenchConfig::from_toml(&text, &path)?)
}
