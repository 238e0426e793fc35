//! Exact optimal transport between two uniform discrete distributions.
//!
//! The transportation problem is solved as a min-cost flow with a primal
//! network simplex. Uniform weights `1/m` and `1/n` are scaled to integer
//! supplies `n` per source and demands `m` per sink, so flows stay integral
//! and degenerate pivots are exact. A strongly feasible spanning tree rooted
//! at an artificial node prevents cycling.

use super::{
    cost_matrix, subsample_pair, CostMatrix, DistanceMeta, DistanceResult, Measure, TransportPlan,
};
use crate::error::{Error, Result};
use crate::feature::FeatureSet;
use crate::seed::RngSeed;

const NONE: usize = usize::MAX;

struct Network<'a> {
    cost: &'a CostMatrix,
    m: usize,
    n: usize,
    root: usize,
    artificial_cost: f64,
    flow: Vec<i64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    depth: Vec<usize>,
    potential: Vec<f64>,
    // scratch for the tree rebuild
    child_start: Vec<usize>,
    child_list: Vec<usize>,
    queue: Vec<usize>,
}

impl<'a> Network<'a> {
    fn new(cost: &'a CostMatrix) -> Self {
        let (m, n) = (cost.rows, cost.cols);
        let nodes = m + n + 1;
        let root = m + n;
        let max_cost = cost.values.iter().cloned().fold(0.0, f64::max);
        let artificial_cost = (max_cost + 1.0) * (m + n) as f64;
        let mut net = Self {
            cost,
            m,
            n,
            root,
            artificial_cost,
            flow: vec![0; m * n + m + n],
            parent: vec![root; nodes],
            pred: vec![NONE; nodes],
            depth: vec![1; nodes],
            potential: vec![0.0; nodes],
            child_start: vec![0; nodes + 1],
            child_list: vec![0; nodes],
            queue: Vec::with_capacity(nodes),
        };
        net.parent[root] = NONE;
        net.depth[root] = 0;
        for v in 0..m + n {
            let arc = m * n + v;
            net.pred[v] = arc;
            net.flow[arc] = if v < m { n as i64 } else { m as i64 };
            net.potential[v] = if v < m {
                -artificial_cost
            } else {
                artificial_cost
            };
        }
        net
    }

    fn arc_count(&self) -> usize {
        self.m * self.n + self.m + self.n
    }

    fn tail(&self, arc: usize) -> usize {
        let real = self.m * self.n;
        if arc < real {
            arc / self.n
        } else if arc - real < self.m {
            arc - real
        } else {
            self.root
        }
    }

    fn head(&self, arc: usize) -> usize {
        let real = self.m * self.n;
        if arc < real {
            self.m + arc % self.n
        } else if arc - real < self.m {
            self.root
        } else {
            arc - real
        }
    }

    fn arc_cost(&self, arc: usize) -> f64 {
        if arc < self.m * self.n {
            self.cost.values[arc]
        } else {
            self.artificial_cost
        }
    }

    fn reduced_cost(&self, arc: usize) -> f64 {
        self.arc_cost(arc) + self.potential[self.tail(arc)] - self.potential[self.head(arc)]
    }

    fn solve(&mut self) -> Result<usize> {
        let arcs = self.arc_count();
        let block = ((arcs as f64).sqrt().ceil() as usize).max(10);
        let tol = 1e-12 * self.artificial_cost.max(1.0);
        let mut next = 0;
        let mut pivots = 0;
        loop {
            // block search: scan blocks until one holds a violating arc
            let mut best = NONE;
            let mut best_rc = -tol;
            let mut scanned = 0;
            while scanned < arcs {
                let end = (scanned + block).min(arcs);
                for _ in scanned..end {
                    let rc = self.reduced_cost(next);
                    if rc < best_rc {
                        best_rc = rc;
                        best = next;
                    }
                    next += 1;
                    if next == arcs {
                        next = 0;
                    }
                }
                scanned = end;
                if best != NONE {
                    break;
                }
            }
            if best == NONE {
                return Ok(pivots);
            }
            self.pivot(best)?;
            pivots += 1;
        }
    }

    fn pivot(&mut self, entering: usize) -> Result<()> {
        let (u, v) = (self.tail(entering), self.head(entering));
        let join = {
            let (mut a, mut b) = (u, v);
            while a != b {
                if self.depth[a] >= self.depth[b] {
                    a = self.parent[a];
                } else {
                    b = self.parent[b];
                }
            }
            a
        };

        // flow travels u -> v, then up from v to the join, then down to u
        let mut delta = i64::MAX;
        let mut leaving = NONE;
        let mut on_u_side = false;
        let mut w = u;
        while w != join {
            let arc = self.pred[w];
            if self.tail(arc) == w && self.flow[arc] < delta {
                delta = self.flow[arc];
                leaving = w;
                on_u_side = true;
            }
            w = self.parent[w];
        }
        let mut w = v;
        while w != join {
            let arc = self.pred[w];
            if self.head(arc) == w && self.flow[arc] <= delta {
                delta = self.flow[arc];
                leaving = w;
                on_u_side = false;
            }
            w = self.parent[w];
        }
        if leaving == NONE {
            return Err(Error::SolverFailure("unbounded pivot cycle".into()));
        }

        if delta > 0 {
            self.flow[entering] += delta;
            let mut w = u;
            while w != join {
                let arc = self.pred[w];
                self.flow[arc] += if self.head(arc) == w { delta } else { -delta };
                w = self.parent[w];
            }
            let mut w = v;
            while w != join {
                let arc = self.pred[w];
                self.flow[arc] += if self.tail(arc) == w { delta } else { -delta };
                w = self.parent[w];
            }
        }

        // re-hang the detached subtree from the entering arc
        let (mut child, mut new_parent) = if on_u_side { (u, v) } else { (v, u) };
        let mut new_pred = entering;
        loop {
            let old_parent = self.parent[child];
            let old_pred = self.pred[child];
            self.parent[child] = new_parent;
            self.pred[child] = new_pred;
            if child == leaving {
                break;
            }
            new_parent = child;
            new_pred = old_pred;
            child = old_parent;
        }
        self.rebuild();
        Ok(())
    }

    /// Recomputes depths and potentials from the parent pointers.
    fn rebuild(&mut self) {
        let nodes = self.parent.len();
        self.child_start.iter_mut().for_each(|c| *c = 0);
        for v in 0..nodes {
            if v != self.root {
                self.child_start[self.parent[v] + 1] += 1;
            }
        }
        for i in 0..nodes {
            self.child_start[i + 1] += self.child_start[i];
        }
        let mut fill = self.child_start.clone();
        for v in 0..nodes {
            if v != self.root {
                let p = self.parent[v];
                self.child_list[fill[p]] = v;
                fill[p] += 1;
            }
        }
        self.queue.clear();
        self.queue.push(self.root);
        self.potential[self.root] = 0.0;
        self.depth[self.root] = 0;
        let mut head = 0;
        while head < self.queue.len() {
            let p = self.queue[head];
            head += 1;
            for idx in self.child_start[p]..self.child_start[p + 1] {
                let c = self.child_list[idx];
                let arc = self.pred[c];
                let cost = self.arc_cost(arc);
                self.potential[c] = if self.tail(arc) == c {
                    self.potential[p] - cost
                } else {
                    self.potential[p] + cost
                };
                self.depth[c] = self.depth[p] + 1;
                self.queue.push(c);
            }
        }
    }
}

/// Optimal plan and its cost for uniform marginals `1/rows`, `1/cols`.
pub fn transport_exact(cost: &CostMatrix) -> Result<(TransportPlan, f64)> {
    let mut net = Network::new(cost);
    net.solve()?;
    let (m, n) = (cost.rows, cost.cols);
    if net.flow[m * n..].iter().any(|&f| f != 0) {
        return Err(Error::SolverFailure(
            "artificial arcs carry flow at optimum (infeasible marginals)".into(),
        ));
    }
    let total = (m * n) as f64;
    let mut objective = 0.0;
    let mass: Vec<f64> = net.flow[..m * n]
        .iter()
        .zip(&cost.values)
        .map(|(&f, &c)| {
            objective += f as f64 * c;
            f as f64 / total
        })
        .collect();
    let plan = TransportPlan {
        rows: m,
        cols: n,
        mass,
        row_marginals: vec![1.0 / m as f64; m],
        col_marginals: vec![1.0 / n as f64; n],
    };
    Ok((plan, objective / total))
}

/// Exact Wasserstein distance under the cosine ground cost, after seeded
/// subsampling of each set to at most `cap` vectors.
pub fn wasserstein_exact(
    a: &FeatureSet,
    b: &FeatureSet,
    cap: usize,
    seed: RngSeed,
) -> Result<DistanceResult> {
    let (a, b) = subsample_pair(a, b, cap, seed)?;
    let cost = cost_matrix(&a, &b)?;
    let (_, value) = transport_exact(&cost)?;
    Ok(DistanceResult {
        value: value.max(0.0),
        measure: Measure::WassersteinExact,
        meta: DistanceMeta {
            subsample_a: a.count(),
            subsample_b: b.count(),
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cost(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CostMatrix {
        CostMatrix::new(
            m,
            n,
            (0..m * n).map(|_| rng.random::<f64>() * 2.0).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_sets_cost_zero() {
        let a = FeatureSet::from_vectors(&[[1.0, 0.2], [0.3, -1.0], [0.0, 1.0]]).unwrap();
        let d = wasserstein_exact(&a, &a, 1024, RngSeed(0)).unwrap();
        assert!(d.value <= 1e-9);
    }

    #[test]
    fn singletons_use_the_only_plan() {
        let a = FeatureSet::from_vectors(&[[1.0, 1.0]]).unwrap();
        let b = FeatureSet::from_vectors(&[[1.0, 0.0]]).unwrap();
        let d = wasserstein_exact(&a, &b, 1024, RngSeed(0)).unwrap();
        assert!((d.value - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn two_by_three_matches_grid_search() {
        // the 2x3 polytope has two free coordinates t00, t01 (first row);
        // its vertices have coordinates in multiples of 1/6, all on the grid
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let c = random_cost(&mut rng, 2, 3);
            let (plan, value) = transport_exact(&c).unwrap();
            let steps = 600;
            let mut best = f64::INFINITY;
            for i in 0..=steps {
                for j in 0..=steps {
                    let t00 = i as f64 / steps as f64 / 3.0;
                    let t01 = j as f64 / steps as f64 / 3.0;
                    let t02 = 0.5 - t00 - t01;
                    if !(-1e-15..=1.0 / 3.0 + 1e-15).contains(&t02) {
                        continue;
                    }
                    let row1 = [1.0 / 3.0 - t00, 1.0 / 3.0 - t01, 1.0 / 3.0 - t02];
                    if row1.iter().any(|&t| t < -1e-15) {
                        continue;
                    }
                    let v = t00 * c.get(0, 0)
                        + t01 * c.get(0, 1)
                        + t02 * c.get(0, 2)
                        + row1[0] * c.get(1, 0)
                        + row1[1] * c.get(1, 1)
                        + row1[2] * c.get(1, 2);
                    best = best.min(v);
                }
            }
            assert!((value - best).abs() < 1e-12, "{value} vs grid {best}");
            assert!(plan.marginal_violation() < 1e-12);
        }
    }

    #[test]
    fn larger_instances_are_dual_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (m, n) in [(7, 5), (12, 12), (30, 17), (1, 9)] {
            let c = random_cost(&mut rng, m, n);
            let mut net = Network::new(&c);
            net.solve().unwrap();
            for arc in 0..m * n {
                assert!(net.reduced_cost(arc) > -1e-9);
                assert!(net.flow[arc] >= 0);
            }
            let (plan, value) = transport_exact(&c).unwrap();
            assert!(plan.marginal_violation() < 1e-12);
            assert!((plan.cost(&c) - value).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_for_equal_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts = |rng: &mut ChaCha8Rng| -> Vec<[f64; 3]> {
            (0..6)
                .map(|_| [rng.random(), rng.random::<f64>() - 0.5, rng.random()])
                .collect()
        };
        let a = FeatureSet::from_vectors(&pts(&mut rng)).unwrap();
        let b = FeatureSet::from_vectors(&pts(&mut rng)).unwrap();
        let ab = wasserstein_exact(&a, &b, 64, RngSeed(0)).unwrap().value;
        let ba = wasserstein_exact(&b, &a, 64, RngSeed(0)).unwrap().value;
        assert!((ab - ba).abs() < 1e-9);
    }

    #[test]
    fn subsampling_respects_cap() {
        let pts: Vec<[f64; 2]> = (0..40).map(|i| [1.0, i as f64 * 0.1]).collect();
        let a = FeatureSet::from_vectors(&pts).unwrap();
        let d = wasserstein_exact(&a, &a, 8, RngSeed(1)).unwrap();
        assert_eq!((d.meta.subsample_a, d.meta.subsample_b), (8, 8));
        assert!(wasserstein_exact(&a, &a, 1, RngSeed(1)).is_err());
    }
}
