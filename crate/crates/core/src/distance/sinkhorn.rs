//! Entropic optimal transport (log-domain Sinkhorn).

use super::{cost_matrix, CostMatrix, DistanceMeta, DistanceResult, Measure, TransportPlan};
use crate::error::{Error, Result};
use crate::feature::FeatureSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornParams {
    pub epsilon: f64,
    pub max_iter: usize,
    /// Stop once the largest marginal violation drops below this.
    pub tol: f64,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Moves a near-feasible plan onto the uniform transport polytope: rows and
/// columns are scaled down to their marginals, then the missing mass is
/// added back as a rank-one correction.
fn round_to_polytope(mass: &mut [f64], m: usize, n: usize) {
    let (a, b) = (1.0 / m as f64, 1.0 / n as f64);
    for i in 0..m {
        let row = &mut mass[i * n..(i + 1) * n];
        let s: f64 = row.iter().sum();
        if s > a {
            row.iter_mut().for_each(|x| *x *= a / s);
        }
    }
    for j in 0..n {
        let s: f64 = (0..m).map(|i| mass[i * n + j]).sum();
        if s > b {
            (0..m).for_each(|i| mass[i * n + j] *= b / s);
        }
    }
    let err_r: Vec<f64> = (0..m)
        .map(|i| (a - mass[i * n..(i + 1) * n].iter().sum::<f64>()).max(0.0))
        .collect();
    let err_c: Vec<f64> = (0..n)
        .map(|j| (b - (0..m).map(|i| mass[i * n + j]).sum::<f64>()).max(0.0))
        .collect();
    let total: f64 = err_r.iter().sum();
    if total > 0.0 {
        for i in 0..m {
            for j in 0..n {
                mass[i * n + j] += err_r[i] * err_c[j] / total;
            }
        }
    }
}

/// Entropic plan for uniform marginals, rounded onto the transport polytope
/// so its cost never undercuts the exact optimum. Returns the plan, the iterations used
/// and whether the marginal tolerance was reached.
pub fn transport_sinkhorn(
    cost: &CostMatrix,
    params: SinkhornParams,
) -> Result<(TransportPlan, usize, bool)> {
    if !(params.epsilon.is_finite() && params.epsilon > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sinkhorn epsilon must be positive, got {}",
            params.epsilon
        )));
    }
    let (m, n) = (cost.rows, cost.cols);
    let eps = params.epsilon;
    let log_a = -(m as f64).ln();
    let log_b = -(n as f64).ln();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let c = |i: usize, j: usize| cost.values[i * n + j];

    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        iterations += 1;
        for (i, fi) in f.iter_mut().enumerate() {
            *fi = eps * log_a - eps * log_sum_exp((0..n).map(|j| (g[j] - c(i, j)) / eps));
        }
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = eps * log_b - eps * log_sum_exp((0..m).map(|i| (f[i] - c(i, j)) / eps));
        }
        // columns are exact after the g-update; rows carry the violation
        let violation = (0..m)
            .map(|i| {
                let row: f64 = (0..n).map(|j| ((f[i] + g[j] - c(i, j)) / eps).exp()).sum();
                (row - 1.0 / m as f64).abs()
            })
            .fold(0.0, f64::max);
        if violation < params.tol {
            converged = true;
            break;
        }
    }

    let mut mass = Vec::with_capacity(m * n);
    for (i, fi) in f.iter().enumerate() {
        for (j, gj) in g.iter().enumerate() {
            mass.push(((fi + gj - c(i, j)) / eps).exp());
        }
    }
    round_to_polytope(&mut mass, m, n);
    let plan = TransportPlan {
        rows: m,
        cols: n,
        mass,
        row_marginals: vec![1.0 / m as f64; m],
        col_marginals: vec![1.0 / n as f64; n],
    };
    Ok((plan, iterations, converged))
}

/// Transport cost (entropy term excluded) of the entropic plan. A plan that
/// misses the tolerance is still returned, flagged `converged: false`.
pub fn wasserstein_sinkhorn(
    a: &FeatureSet,
    b: &FeatureSet,
    params: SinkhornParams,
) -> Result<DistanceResult> {
    let cost = cost_matrix(a, b)?;
    let (plan, iterations, converged) = transport_sinkhorn(&cost, params)?;
    Ok(DistanceResult {
        value: plan.cost(&cost).max(0.0),
        measure: Measure::Sinkhorn,
        meta: DistanceMeta {
            subsample_a: a.count(),
            subsample_b: b.count(),
            iterations: Some(iterations),
            converged: Some(converged),
            parts: None,
        },
    })
}
