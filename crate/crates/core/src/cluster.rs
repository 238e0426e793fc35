//! k-means++ clustering of foreground features into parts.

use rand::Rng;

use crate::error::{Error, Result};
use crate::feature::FeatureSet;
use crate::seed::{RngSeed, TAG_RESTART};

const MAX_ITERS: usize = 100;
const RESTARTS: u64 = 3;

/// Part means plus per-vector assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct PartSet {
    pub means: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after each assignment step of the kept restart.
    pub trace: Vec<f64>,
}

impl PartSet {
    pub fn k(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Number of distinct vectors (bitwise equality).
pub fn distinct_count(x: &FeatureSet) -> usize {
    let mut idx: Vec<usize> = (0..x.count()).collect();
    idx.sort_by(|&a, &b| lex_cmp(x.vector(a), x.vector(b)));
    1 + idx
        .windows(2)
        .filter(|w| lex_cmp(x.vector(w[0]), x.vector(w[1])).is_ne())
        .count()
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Clusters `x` into `k` parts: k-means++ seeding, Lloyd iterations until the
/// assignment is stable (or 100 iterations), best of three seeded restarts.
/// `k` is clamped to the number of distinct vectors so that no part is empty.
pub fn cluster_parts(x: &FeatureSet, k: usize, seed: RngSeed) -> Result<PartSet> {
    if k == 0 {
        return Err(Error::InvalidInput("part count must be at least 1".into()));
    }
    let k = k.min(distinct_count(x));
    let mut best: Option<PartSet> = None;
    for restart in 0..RESTARTS {
        let parts = run_once(x, k, seed.derive(&[TAG_RESTART, restart]));
        if best.as_ref().is_none_or(|b| parts.inertia < b.inertia) {
            best = Some(parts);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn run_once(x: &FeatureSet, k: usize, seed: RngSeed) -> PartSet {
    let mut rng = seed.rng();
    let mut means = seed_plus_plus(x, k, &mut rng);
    let mut trace = Vec::new();
    let mut previous: Option<Vec<usize>> = None;

    for _ in 0..MAX_ITERS {
        let (mut assignments, inertia) = assign(x, &means);
        trace.push(inertia);
        if previous.as_ref() == Some(&assignments) {
            break;
        }
        fill_empty_parts(x, &means, &mut assignments);
        means = centroids(x, &assignments, k);
        previous = Some(assignments);
    }

    let assignments = previous.expect("at least one Lloyd step");
    let inertia = x
        .vectors()
        .zip(&assignments)
        .map(|(v, &c)| sq_dist(v, &means[c]))
        .sum();
    PartSet {
        means,
        assignments,
        inertia,
        trace,
    }
}

fn seed_plus_plus(x: &FeatureSet, k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = x.count();
    let mut means = vec![x.vector(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = x.vectors().map(|v| sq_dist(v, &means[0])).collect();
    while means.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave `acc` just below `target`; take the last candidate
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive weight"))
        } else {
            rng.random_range(0..n)
        };
        let center = x.vector(pick).to_vec();
        for (d, v) in d2.iter_mut().zip(x.vectors()) {
            *d = d.min(sq_dist(v, &center));
        }
        means.push(center);
    }
    means
}

/// Nearest-mean assignment, ties to the lowest part index.
fn assign(x: &FeatureSet, means: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let assignments = x
        .vectors()
        .map(|v| {
            let (best, d) = nearest(v, means);
            inertia += d;
            best
        })
        .collect();
    (assignments, inertia)
}

pub(crate) fn nearest(v: &[f64], means: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, m) in means.iter().enumerate() {
        let d = sq_dist(v, m);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Moves, for each empty part, the point farthest from its current mean into
/// that part. Only points whose part has other members are eligible.
fn fill_empty_parts(x: &FeatureSet, means: &[Vec<f64>], assignments: &mut [usize]) {
    let k = means.len();
    let mut sizes = vec![0usize; k];
    for &c in assignments.iter() {
        sizes[c] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut far: Option<(usize, f64)> = None;
        for (i, v) in x.vectors().enumerate() {
            let c = assignments[i];
            if sizes[c] < 2 {
                continue;
            }
            let d = sq_dist(v, &means[c]);
            if far.is_none_or(|(_, fd)| d > fd) {
                far = Some((i, d));
            }
        }
        if let Some((i, _)) = far {
            sizes[assignments[i]] -= 1;
            assignments[i] = empty;
            sizes[empty] = 1;
        }
    }
}

fn centroids(x: &FeatureSet, assignments: &[usize], k: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; x.dim()]; k];
    let mut counts = vec![0usize; k];
    for (v, &c) in x.vectors().zip(assignments) {
        counts[c] += 1;
        for (s, val) in sums[c].iter_mut().zip(v) {
            *s += val;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        if n > 0 {
            s.iter_mut().for_each(|v| *v /= n as f64);
        }
    }
    sums
}
