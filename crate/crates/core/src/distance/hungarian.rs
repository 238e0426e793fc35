//! Part-level matching distance: both sets are clustered into the same number
//! of parts and the part means are matched by an exact linear assignment.

use super::{CostMatrix, DistanceMeta, DistanceResult, Measure};
use crate::cluster::{cluster_parts, distinct_count, lex_cmp, PartSet};
use crate::error::{Error, Result};
use crate::feature::{cosine, FeatureSet};
use crate::seed::RngSeed;

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `columns[row]` is the column matched to `row`.
    pub columns: Vec<usize>,
    pub total: f64,
}

/// Exact minimum-cost assignment for a square cost matrix (Kuhn-Munkres with
/// potentials, O(n^3)).
pub fn solve_assignment(cost: &CostMatrix) -> Result<Assignment> {
    if cost.rows != cost.cols {
        return Err(Error::DimMismatch {
            what: "assignment matrix must be square",
            expected: cost.rows,
            got: cost.cols,
        });
    }
    let n = cost.rows;
    // 1-based arrays; column 0 is the virtual start
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        matched_row[0] = row;
        let mut col0 = 0;
        let mut min_v = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = matched_row[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let cur = cost.get(r0 - 1, col - 1) - u[r0] - v[col];
                if cur < min_v[col] {
                    min_v[col] = cur;
                    way[col] = col0;
                }
                if min_v[col] < delta {
                    delta = min_v[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[matched_row[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_v[col] -= delta;
                }
            }
            col0 = col1;
            if matched_row[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            matched_row[col0] = matched_row[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut columns = vec![0; n];
    for col in 1..=n {
        columns[matched_row[col] - 1] = col - 1;
    }
    let total = columns
        .iter()
        .enumerate()
        .map(|(r, &c)| cost.get(r, c))
        .sum();
    Ok(Assignment { columns, total })
}

fn canonical(x: &FeatureSet) -> Result<FeatureSet> {
    let mut idx: Vec<usize> = (0..x.count()).collect();
    idx.sort_by(|&a, &b| lex_cmp(x.vector(a), x.vector(b)));
    x.select(&idx)
}

/// Clusters both sets with a shared part count and seed. Inputs are put in
/// canonical (lexicographic) order first, so the result does not depend on
/// the order of the vectors.
pub fn matching_parts(
    a: &FeatureSet,
    b: &FeatureSet,
    k: usize,
    seed: RngSeed,
) -> Result<(PartSet, PartSet)> {
    if k == 0 {
        return Err(Error::InvalidInput("part count must be at least 1".into()));
    }
    let k = k.min(distinct_count(a)).min(distinct_count(b));
    let pa = cluster_parts(&canonical(a)?, k, seed)?;
    let pb = cluster_parts(&canonical(b)?, k, seed)?;
    Ok((pa, pb))
}

pub fn hungarian_part_distance(
    a: &FeatureSet,
    b: &FeatureSet,
    k: usize,
    seed: RngSeed,
) -> Result<DistanceResult> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            what: "feature dim of compared sets",
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let (pa, pb) = matching_parts(a, b, k, seed)?;
    let k = pa.k();
    let mut values = Vec::with_capacity(k * k);
    for ma in &pa.means {
        for mb in &pb.means {
            values.push((1.0 - cosine(ma, mb)).clamp(0.0, 2.0));
        }
    }
    let assignment = solve_assignment(&CostMatrix::new(k, k, values)?)?;
    Ok(DistanceResult {
        value: assignment.total / k as f64,
        measure: Measure::Hungarian,
        meta: DistanceMeta {
            subsample_a: a.count(),
            subsample_b: b.count(),
            parts: Some(k),
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn assignment_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..=6 {
            for _ in 0..10 {
                let c = CostMatrix::new(
                    n,
                    n,
                    (0..n * n).map(|_| rng.random::<f64>() * 2.0).collect(),
                )
                .unwrap();
                let got = solve_assignment(&c).unwrap();
                let best = permutations(n)
                    .iter()
                    .map(|p| {
                        p.iter()
                            .enumerate()
                            .map(|(r, &col)| c.get(r, col))
                            .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min);
                assert!((got.total - best).abs() < 1e-12);
                let mut cols = got.columns.clone();
                cols.sort_unstable();
                assert_eq!(cols, (0..n).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn identical_sets_match_perfectly() {
        let pts: Vec<[f64; 2]> = (0..20)
            .map(|i| [(i % 5) as f64 + 0.5, (i / 5) as f64 - 1.0])
            .collect();
        let a = FeatureSet::from_vectors(&pts).unwrap();
        for k in [1, 3, 8] {
            let d = hungarian_part_distance(&a, &a, k, RngSeed(4)).unwrap();
            assert!(d.value.abs() < 1e-12);
        }
    }

    #[test]
    fn k_one_compares_means() {
        let a = FeatureSet::from_vectors(&[[1.0, 0.0], [1.0, 2.0]]).unwrap();
        let b = FeatureSet::from_vectors(&[[0.0, 1.0], [-1.0, 1.0], [0.5, 0.5]]).unwrap();
        let d = hungarian_part_distance(&a, &b, 1, RngSeed(0)).unwrap();
        assert!((d.value - (1.0 - cosine(&a.mean(), &b.mean()))).abs() < 1e-12);
    }

    #[test]
    fn order_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pts: Vec<[f64; 3]> = (0..25)
            .map(|_| [rng.random(), rng.random(), rng.random()])
            .collect();
        let mut shuffled = pts.clone();
        shuffled.reverse();
        shuffled.swap(3, 17);
        let b: Vec<[f64; 3]> = (0..18)
            .map(|_| [rng.random(), rng.random(), rng.random()])
            .collect();
        let x = FeatureSet::from_vectors(&pts).unwrap();
        let y = FeatureSet::from_vectors(&shuffled).unwrap();
        let bs = FeatureSet::from_vectors(&b).unwrap();
        let d1 = hungarian_part_distance(&x, &bs, 4, RngSeed(1)).unwrap();
        let d2 = hungarian_part_distance(&y, &bs, 4, RngSeed(1)).unwrap();
        assert_eq!(d1.value, d2.value);
    }

    #[test]
    fn rectangular_is_rejected() {
        let c = CostMatrix::new(2, 3, vec![0.0; 6]).unwrap();
        assert!(solve_assignment(&c).is_err());
    }
}
