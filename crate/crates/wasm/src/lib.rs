//! Browser bindings for the demo page. Every call returns a JSON string.

use partprompt::distance::{
    cost_matrix, transport_exact, transport_sinkhorn, MeasureSpec, SinkhornParams, TransportPlan,
};
use partprompt::eval::{dice, generate_scene, iou, Scene, SceneSpec};
use partprompt::{
    retrieve_optimal, synthesize_prompts, BinaryMask, Error, FeatureSet, MockSegmenter, NegMode,
    PromptSet, RetrievalConfig, RngSeed, Segmenter,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn js_err(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn labels(parts: &[Option<usize>]) -> Vec<i32> {
    parts.iter().map(|p| p.map_or(-1, |k| k as i32)).collect()
}

#[derive(Serialize)]
struct SceneView {
    height: usize,
    width: usize,
    parts: usize,
    reference_parts: Vec<i32>,
    target_parts: Vec<i32>,
}

#[derive(Serialize)]
struct Segmentation<'a> {
    prompts: &'a PromptSet,
    mask: &'a [u8],
    dice: f64,
    iou: f64,
}

#[derive(Serialize)]
struct TrialView {
    pos: usize,
    neg: usize,
    distance: Option<f64>,
    mask_area: usize,
    dice: f64,
}

#[derive(Serialize)]
struct RetrievalView<'a> {
    winner: (usize, usize),
    prompts: &'a PromptSet,
    mask: &'a [u8],
    dice: f64,
    trials: Vec<TrialView>,
}

/// Synthetic reference/target pair held between calls.
#[wasm_bindgen]
pub struct Demo {
    scene: Scene,
    spec: SceneSpec,
}

impl Demo {
    pub fn create(parts: usize, seed: u64, noise: f64) -> Result<Demo, Error> {
        let spec = SceneSpec {
            parts,
            noise,
            seed: RngSeed(seed),
            ..SceneSpec::default()
        };
        Ok(Demo {
            scene: generate_scene(&spec)?,
            spec,
        })
    }

    pub fn scene_view(&self) -> String {
        serde_json::to_string(&SceneView {
            height: self.spec.height,
            width: self.spec.width,
            parts: self.spec.parts,
            reference_parts: labels(&self.scene.reference_parts),
            target_parts: labels(&self.scene.target_parts),
        })
        .expect("scene serializes")
    }

    fn truth(&self) -> &BinaryMask {
        &self.scene.target_mask
    }

    pub fn segment_view(
        &self,
        pos: usize,
        medical: bool,
        neg: usize,
        seed: u64,
    ) -> Result<String, Error> {
        let mode = if medical {
            NegMode::Medical
        } else {
            NegMode::Natural
        };
        let s = &self.scene;
        let prompts = synthesize_prompts(
            &s.reference,
            &s.reference_mask,
            &s.target,
            pos,
            mode,
            neg,
            RngSeed(seed),
        )?;
        let mask = MockSegmenter::default().segment(&s.target, &prompts)?;
        Ok(serde_json::to_string(&Segmentation {
            prompts: &prompts,
            mask: mask.bits(),
            dice: dice(&mask, self.truth())?,
            iou: iou(&mask, self.truth())?,
        })?)
    }

    pub fn retrieval_view(
        &self,
        pos_lo: usize,
        pos_hi: usize,
        measure: &str,
        seed: u64,
    ) -> Result<String, Error> {
        let cfg = RetrievalConfig {
            pos_range: [pos_lo, pos_hi],
            measure: MeasureSpec::from_name(measure)?,
            seed: RngSeed(seed),
            ..RetrievalConfig::default()
        };
        let s = &self.scene;
        let out = retrieve_optimal(
            &s.reference,
            &s.reference_mask,
            &s.target,
            &cfg,
            &MockSegmenter::default(),
        )?;
        let trials = out
            .trials
            .iter()
            .map(|t| {
                Ok(TrialView {
                    pos: t.pos,
                    neg: t.neg,
                    distance: t.distance.as_ref().map(|d| d.value),
                    mask_area: t.mask.area(),
                    dice: dice(&t.mask, self.truth())?,
                })
            })
            .collect::<Result<Vec<_>, Error>>()?;
        Ok(serde_json::to_string(&RetrievalView {
            winner: out.winner,
            prompts: out.winner_prompts(),
            mask: out.winner_mask().bits(),
            dice: dice(out.winner_mask(), self.truth())?,
            trials,
        })?)
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(parts: usize, seed: u64, noise: f64) -> Result<Demo, JsError> {
        Demo::create(parts, seed, noise).map_err(js_err)
    }

    /// Grid size and per-cell part labels (-1 for background).
    pub fn scene(&self) -> String {
        self.scene_view()
    }

    /// Prompts for a fixed part count and the resulting mock mask.
    pub fn segment(
        &self,
        pos: usize,
        medical: bool,
        neg: usize,
        seed: u64,
    ) -> Result<String, JsError> {
        self.segment_view(pos, medical, neg, seed).map_err(js_err)
    }

    /// Retrieval over `pos_lo..=pos_hi` positives with one negative.
    pub fn retrieve(
        &self,
        pos_lo: usize,
        pos_hi: usize,
        measure: &str,
        seed: u64,
    ) -> Result<String, JsError> {
        self.retrieval_view(pos_lo, pos_hi, measure, seed)
            .map_err(js_err)
    }
}

#[derive(Serialize)]
struct PlanView {
    value: f64,
    mass: Vec<f64>,
}

#[derive(Serialize)]
struct TransportView {
    /// Angles of the unit 2-D feature vectors of each set.
    a: Vec<f64>,
    b: Vec<f64>,
    exact: PlanView,
    sinkhorn: PlanView,
    epsilon: f64,
    iterations: usize,
    converged: bool,
}

fn random_angles(rng: &mut ChaCha8Rng, n: usize, center: f64) -> Vec<f64> {
    (0..n)
        .map(|_| center + rng.random_range(-1.2..1.2))
        .collect()
}

fn plan_view(plan: &TransportPlan, cost: &partprompt::distance::CostMatrix) -> PlanView {
    PlanView {
        value: plan.cost(cost),
        mass: plan.mass.clone(),
    }
}

pub fn transport_view(n: usize, m: usize, seed: u64, epsilon: f64) -> Result<String, Error> {
    if n == 0 || m == 0 || n > 64 || m > 64 {
        return Err(Error::InvalidInput("set sizes must lie in 1..=64".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_angles(&mut rng, n, 0.0);
    let b = random_angles(&mut rng, m, 1.0);
    let set = |angles: &[f64]| {
        let vs: Vec<[f64; 2]> = angles.iter().map(|t| [t.cos(), t.sin()]).collect();
        FeatureSet::from_vectors(&vs)
    };
    let cost = cost_matrix(&set(&a)?, &set(&b)?)?;
    let (exact, _) = transport_exact(&cost)?;
    let (entropic, iterations, converged) = transport_sinkhorn(
        &cost,
        SinkhornParams {
            epsilon,
            max_iter: 20_000,
            tol: 1e-9,
        },
    )?;
    Ok(serde_json::to_string(&TransportView {
        exact: plan_view(&exact, &cost),
        sinkhorn: plan_view(&entropic, &cost),
        a,
        b,
        epsilon,
        iterations,
        converged,
    })?)
}

/// Exact and entropic transport plans between two random sets of unit
/// vectors in the plane.
#[wasm_bindgen]
pub fn transport(n: usize, m: usize, seed: u64, epsilon: f64) -> Result<String, JsError> {
    transport_view(n, m, seed, epsilon).map_err(js_err)
}
