//! Jensen-Shannon divergence between 2-D histograms of the two sets projected
//! on the reference set's top-two principal axes.

use super::{pca_top2, DistanceMeta, DistanceResult, Measure};
use crate::error::{Error, Result};
use crate::feature::FeatureSet;

const SMOOTHING: f64 = 1e-9;

/// Base-2 JS divergence of two distributions over the same support.
pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    let kl_to_mix = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, y)| x * (2.0 * x / (x + y)).log2())
            .sum()
    };
    (0.5 * kl_to_mix(p, q) + 0.5 * kl_to_mix(q, p)).clamp(0.0, 1.0)
}

fn histogram(points: &[[f64; 2]], lo: [f64; 2], hi: [f64; 2], bins: usize) -> Vec<f64> {
    let bin = |v: f64, axis: usize| -> usize {
        let span = hi[axis] - lo[axis];
        if span <= 0.0 {
            return 0;
        }
        (((v - lo[axis]) / span * bins as f64).floor() as usize).min(bins - 1)
    };
    let mut h = vec![0.0; bins * bins];
    for p in points {
        h[bin(p[0], 0) * bins + bin(p[1], 1)] += 1.0;
    }
    let n = points.len() as f64;
    h.iter_mut().for_each(|v| *v = *v / n + SMOOTHING);
    let total: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= total);
    h
}

pub fn js_divergence_2pc(a: &FeatureSet, b: &FeatureSet, bins: usize) -> Result<DistanceResult> {
    if bins < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 bins, got {bins}"
        )));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            what: "feature dim of compared sets",
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let projection = pca_top2(a)?;
    let pa: Vec<[f64; 2]> = a.vectors().map(|v| projection.project(v)).collect();
    let pb: Vec<[f64; 2]> = b.vectors().map(|v| projection.project(v)).collect();
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in pa.iter().chain(&pb) {
        for axis in 0..2 {
            lo[axis] = lo[axis].min(p[axis]);
            hi[axis] = hi[axis].max(p[axis]);
        }
    }
    let ha = histogram(&pa, lo, hi, bins);
    let hb = histogram(&pb, lo, hi, bins);
    Ok(DistanceResult {
        value: js_divergence(&ha, &hb),
        measure: Measure::Js2pc,
        meta: DistanceMeta {
            subsample_a: a.count(),
            subsample_b: b.count(),
            ..Default::default()
        },
    })
}
