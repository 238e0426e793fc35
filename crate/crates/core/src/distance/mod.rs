//! Distances between two foreground feature sets.
//!
//! Ground cost everywhere is the cosine distance `1 - cos(a, b)`, so identical
//! sets are at distance zero. Both marginals are uniform.

mod hungarian;
mod js;
mod pca;
mod simplex;
mod sinkhorn;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::{norm, FeatureSet, COSINE_EPS};
use crate::seed::{RngSeed, TAG_SUBSAMPLE_A, TAG_SUBSAMPLE_B};

pub use hungarian::{hungarian_part_distance, matching_parts, solve_assignment, Assignment};
pub use js::{js_divergence, js_divergence_2pc};
pub use pca::{pca_top2, Projection};
pub use simplex::{transport_exact, wasserstein_exact};
pub use sinkhorn::{transport_sinkhorn, wasserstein_sinkhorn, SinkhornParams};

/// Default per-set subsample cap for the transport solvers.
pub const DEFAULT_CAP: usize = 1024;
pub const DEFAULT_JS_BINS: usize = 32;
pub const DEFAULT_HUNGARIAN_K: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || values.len() != rows * cols {
            return Err(Error::DimMismatch {
                what: "cost matrix values",
                expected: rows * cols,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(
                "cost values must be finite and non-negative".into(),
            ));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Non-negative plan with uniform row/column marginals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    pub mass: Vec<f64>,
    pub row_marginals: Vec<f64>,
    pub col_marginals: Vec<f64>,
}

impl TransportPlan {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mass[i * self.cols + j]
    }

    pub fn cost(&self, cost: &CostMatrix) -> f64 {
        self.mass.iter().zip(&cost.values).map(|(t, c)| t * c).sum()
    }

    /// Largest absolute deviation of row or column sums from the marginals.
    pub fn marginal_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            let s: f64 = self.mass[i * self.cols..(i + 1) * self.cols].iter().sum();
            worst = worst.max((s - self.row_marginals[i]).abs());
        }
        for j in 0..self.cols {
            let s: f64 = (0..self.rows).map(|i| self.get(i, j)).sum();
            worst = worst.max((s - self.col_marginals[j]).abs());
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    WassersteinExact,
    Sinkhorn,
    #[serde(rename = "js_2pc")]
    Js2pc,
    Hungarian,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DistanceMeta {
    pub subsample_a: usize,
    pub subsample_b: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceResult {
    pub value: f64,
    pub measure: Measure,
    pub meta: DistanceMeta,
}

/// Measure selection with its parameters, as used by retrieval and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    #[default]
    Wasserstein,
    Sinkhorn {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Js {
        #[serde(default = "default_bins")]
        bins: usize,
    },
    Hungarian {
        #[serde(default = "default_k")]
        k: usize,
    },
}

fn default_epsilon() -> f64 {
    0.05
}
fn default_max_iter() -> usize {
    10_000
}
fn default_tol() -> f64 {
    1e-9
}
fn default_bins() -> usize {
    DEFAULT_JS_BINS
}
fn default_k() -> usize {
    DEFAULT_HUNGARIAN_K
}

impl MeasureSpec {
    /// Parses a measure name with default parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "wasserstein" | "wasserstein_exact" => MeasureSpec::Wasserstein,
            "sinkhorn" => MeasureSpec::Sinkhorn {
                epsilon: default_epsilon(),
                max_iter: default_max_iter(),
                tol: default_tol(),
            },
            "js" | "js_2pc" => MeasureSpec::Js {
                bins: DEFAULT_JS_BINS,
            },
            "hungarian" => MeasureSpec::Hungarian {
                k: DEFAULT_HUNGARIAN_K,
            },
            other => return Err(Error::InvalidInput(format!("unknown measure {other:?}"))),
        })
    }
}

/// Evaluates `spec` between `a` and `b`. Transport measures subsample each
/// set to at most `cap` vectors first.
pub fn distance(
    a: &FeatureSet,
    b: &FeatureSet,
    spec: &MeasureSpec,
    cap: usize,
    seed: RngSeed,
) -> Result<DistanceResult> {
    match *spec {
        MeasureSpec::Wasserstein => wasserstein_exact(a, b, cap, seed),
        MeasureSpec::Sinkhorn {
            epsilon,
            max_iter,
            tol,
        } => {
            let (a, b) = subsample_pair(a, b, cap, seed)?;
            wasserstein_sinkhorn(
                &a,
                &b,
                SinkhornParams {
                    epsilon,
                    max_iter,
                    tol,
                },
            )
        }
        MeasureSpec::Js { bins } => js_divergence_2pc(a, b, bins),
        MeasureSpec::Hungarian { k } => hungarian_part_distance(a, b, k, seed),
    }
}

pub fn cost_matrix(a: &FeatureSet, b: &FeatureSet) -> Result<CostMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            what: "feature dim of compared sets",
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let unit = |v: &[f64]| -> Vec<f64> {
        let n = norm(v).max(COSINE_EPS);
        v.iter().map(|x| x / n).collect()
    };
    let b_unit: Vec<Vec<f64>> = b.vectors().map(unit).collect();
    let mut values = Vec::with_capacity(a.count() * b.count());
    for va in a.vectors() {
        let ua = unit(va);
        for ub in &b_unit {
            let cos: f64 = ua.iter().zip(ub).map(|(x, y)| x * y).sum();
            values.push((1.0 - cos.clamp(-1.0, 1.0)).clamp(0.0, 2.0));
        }
    }
    CostMatrix::new(a.count(), b.count(), values)
}

/// Seeded uniform subsample without replacement, kept in original order.
pub fn subsample(x: &FeatureSet, cap: usize, seed: RngSeed) -> Result<FeatureSet> {
    if x.count() <= cap {
        return Ok(x.clone());
    }
    let mut rng = seed.rng();
    let mut picked = index::sample(&mut rng, x.count(), cap).into_vec();
    picked.sort_unstable();
    x.select(&picked)
}

pub(crate) fn subsample_pair(
    a: &FeatureSet,
    b: &FeatureSet,
    cap: usize,
    seed: RngSeed,
) -> Result<(FeatureSet, FeatureSet)> {
    if cap < 2 {
        return Err(Error::InvalidInput(format!(
            "subsample cap must be at least 2, got {cap}"
        )));
    }
    Ok((
        subsample(a, cap, seed.derive(&[TAG_SUBSAMPLE_A]))?,
        subsample(b, cap, seed.derive(&[TAG_SUBSAMPLE_B]))?,
    ))
}
