//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances and instance counts are fixed here.

use std::process::Command;
use std::time::{Duration, Instant};

use partprompt::cluster::cluster_parts;
use partprompt::distance::{
    cost_matrix, hungarian_part_distance, matching_parts, wasserstein_exact, wasserstein_sinkhorn,
    SinkhornParams,
};
use partprompt::eval::bench::SuiteConfig;
use partprompt::eval::{run_benchmark_config, BenchConfig, MethodConfig, SceneSpec};
use partprompt::io::{
    decode_feature_map, decode_mask, encode_feature_map, encode_mask_npy, pgm, read_feature_map,
    read_mask, write_feature_map, write_mask,
};
use partprompt::{BinaryMask, FeatureMap, FeatureSet, MockSegmenter, NegMode, RngSeed, Segmenter};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_set(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> FeatureSet {
    let vs: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    FeatureSet::from_vectors(&vs).unwrap()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Minimum cost over all vertices of the uniform transportation polytope.
/// Vertices are basic solutions supported on spanning trees of the
/// bipartite row/column graph; each tree is solved by peeling leaves with
/// integer supplies (`n` per row, `m` per column).
fn vertex_enumeration_ot(cost: &[Vec<f64>]) -> f64 {
    let m = cost.len();
    let n = cost[0].len();
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let basis = m + n - 1;
    let mut best = f64::INFINITY;
    let mut choose = vec![0usize; basis];
    fn next_combination(c: &mut [usize], total: usize) -> bool {
        let k = c.len();
        for i in (0..k).rev() {
            if c[i] < total - k + i {
                c[i] += 1;
                for j in i + 1..k {
                    c[j] = c[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (i, c) in choose.iter_mut().enumerate() {
        *c = i;
    }
    loop {
        let mut row_left = vec![n as i64; m];
        let mut col_left = vec![m as i64; n];
        let mut open: Vec<(usize, usize)> = choose.iter().map(|&k| cells[k]).collect();
        let mut flow = Vec::with_capacity(basis);
        let mut feasible = true;
        while !open.is_empty() {
            let leaf = (0..open.len()).find_map(|idx| {
                let (i, j) = open[idx];
                if open.iter().filter(|c| c.0 == i).count() == 1 {
                    Some((idx, row_left[i]))
                } else if open.iter().filter(|c| c.1 == j).count() == 1 {
                    Some((idx, col_left[j]))
                } else {
                    None
                }
            });
            let Some((idx, amount)) = leaf else {
                feasible = false;
                break;
            };
            let (i, j) = open.swap_remove(idx);
            if amount < 0 {
                feasible = false;
                break;
            }
            row_left[i] -= amount;
            col_left[j] -= amount;
            flow.push((i, j, amount));
        }
        if feasible && row_left.iter().all(|&r| r == 0) && col_left.iter().all(|&c| c == 0) {
            let total = (m * n) as f64;
            let v: f64 = flow
                .iter()
                .map(|&(i, j, f)| f as f64 / total * cost[i][j])
                .sum();
            best = best.min(v);
        }
        if !next_combination(&mut choose, cells.len()) {
            break;
        }
    }
    best
}

fn ot_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x07);
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let m = rng.random_range(1..=4);
        let n = rng.random_range(1..=4);
        let a = random_set(&mut rng, m, 3);
        let b = random_set(&mut rng, n, 3);
        let cost: Vec<Vec<f64>> = a
            .vectors()
            .map(|va| b.vectors().map(|vb| cosine_distance(va, vb)).collect())
            .collect();
        let exact = wasserstein_exact(&a, &b, 1024, RngSeed(0)).unwrap().value;
        worst = worst.max((exact - vertex_enumeration_ot(&cost)).abs());
    }
    let elapsed = started.elapsed();
    outcome(
        worst <= 1e-9 && elapsed < Duration::from_secs(10),
        format!("200 instances, max |exact - enumeration| = {worst:.2e} (tol 1e-9), {elapsed:.2?} (limit 10s)"),
    )
}

fn sinkhorn_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51);
    let started = Instant::now();
    let mut below = 0.0f64;
    let mut worst_gap = 0.0f64;
    for _ in 0..50 {
        let a = random_set(&mut rng, 8, 4);
        let b = random_set(&mut rng, 8, 4);
        let exact = wasserstein_exact(&a, &b, 1024, RngSeed(0)).unwrap().value;
        let mean_cost = cost_matrix(&a, &b).unwrap().mean();
        let mut last = f64::NAN;
        for factor in [0.5, 0.1, 0.02] {
            let params = SinkhornParams {
                epsilon: factor * mean_cost,
                max_iter: 10_000,
                tol: 1e-9,
            };
            let v = wasserstein_sinkhorn(&a, &b, params).unwrap().value;
            below = below.max(exact - v);
            last = v;
        }
        worst_gap = worst_gap.max(last - exact);
    }
    let elapsed = started.elapsed();
    outcome(
        below <= 1e-9 && worst_gap <= 0.02 && elapsed < Duration::from_secs(30),
        format!(
            "50 8x8 instances, max(exact - entropic) = {below:.2e} (tol 1e-9), gap at 0.02*mean(C) = {worst_gap:.4} (tol 0.02), {elapsed:.2?} (limit 30s)"
        ),
    )
}

fn clustering_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let mut failures = Vec::new();
    for d in 0..100 {
        let count = rng.random_range(2..60);
        let dim = rng.random_range(1..6);
        let x = random_set(&mut rng, count, dim);
        let k = rng.random_range(1..=6);
        let parts = cluster_parts(&x, k, RngSeed(d)).unwrap();
        if parts
            .trace
            .windows(2)
            .any(|w| w[1] > w[0] + 1e-12 * w[0].abs().max(1.0))
        {
            failures.push(format!("dataset {d}: trace increases"));
        }
        for (i, v) in x.vectors().enumerate() {
            let own = sq_dist(v, &parts.means[parts.assignments[i]]);
            if parts.means.iter().any(|m| sq_dist(v, m) < own - 1e-12) {
                failures.push(format!("dataset {d}: point {i} not at nearest center"));
                break;
            }
        }
        let one = cluster_parts(&x, 1, RngSeed(d)).unwrap();
        let mean: Vec<f64> = (0..dim)
            .map(|c| x.vectors().map(|v| v[c]).sum::<f64>() / count as f64)
            .collect();
        if one.means[0]
            .iter()
            .zip(&mean)
            .any(|(a, b)| (a - b).abs() > 1e-9)
        {
            failures.push(format!("dataset {d}: k=1 mean differs"));
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "100 datasets: traces non-increasing, nearest-center assignments, k=1 mean within 1e-9"
                .into()
        } else {
            failures.join("; ")
        },
    )
}

fn assignment_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA5);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for s in 0..100 {
        let (na, nb) = (rng.random_range(3..20), rng.random_range(3..20));
        let a = random_set(&mut rng, na, 4);
        let b = random_set(&mut rng, nb, 4);
        let seed = RngSeed(s);
        let value = hungarian_part_distance(&a, &b, 3, seed).unwrap().value;
        let (pa, pb) = matching_parts(&a, &b, 3, seed).unwrap();
        let k = pa.k();
        let perms: &[[usize; 3]] = &[
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let best = perms
            .iter()
            .map(|p| {
                (0..k)
                    .map(|i| cosine_distance(&pa.means[i], &pb.means[p[i]]))
                    .sum::<f64>()
                    / k as f64
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((value - best).abs());
        checked += usize::from(k == 3);
    }
    outcome(
        worst <= 1e-12 && checked == 100,
        format!("100 instances with k=3 parts ({checked} at full k), max |hungarian - enumeration| = {worst:.2e} (tol 1e-12)"),
    )
}

fn suite_config(methods: Vec<MethodConfig>) -> BenchConfig {
    BenchConfig {
        seed: RngSeed(2024),
        jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
        suite: Some(SuiteConfig {
            count: 50,
            template: SceneSpec {
                parts: 4,
                ..SceneSpec::default()
            },
        }),
        methods,
        ..BenchConfig::default()
    }
}

fn fixed(pos: usize) -> MethodConfig {
    MethodConfig::Fixed {
        name: Some(format!("n={pos}")),
        pos,
        neg: 1,
        mode: NegMode::Natural,
    }
}

fn part_count_trend() -> Outcome {
    let started = Instant::now();
    let report = run_benchmark_config(&suite_config(vec![fixed(1), fixed(4)])).unwrap();
    let elapsed = started.elapsed();
    let d1 = report.aggregate("n=1").unwrap().mean_dice;
    let d4 = report.aggregate("n=4").unwrap().mean_dice;
    outcome(
        (d4 - d1) * 100.0 >= 10.0 && elapsed < Duration::from_secs(60),
        format!(
            "50 K=4 scenes: mean Dice n=1 {:.1}, n=4 {:.1}, gain {:.1} points (need 10), {elapsed:.2?} (limit 60s)",
            d1 * 100.0,
            d4 * 100.0,
            (d4 - d1) * 100.0
        ),
    )
}

fn retrieval_trend() -> Outcome {
    let mut methods: Vec<MethodConfig> = (1..=5).map(fixed).collect();
    methods.push(MethodConfig::Retrieval {
        name: Some("retrieval".into()),
        pos_range: [1, 5],
        neg_range: [1, 1],
        mode: NegMode::Natural,
        measure: Default::default(),
    });
    let report = run_benchmark_config(&suite_config(methods)).unwrap();
    let rows: Vec<_> = report
        .rows
        .iter()
        .filter(|r| r.method == "retrieval")
        .collect();
    let near = rows
        .iter()
        .filter(|r| r.dice >= r.grid_best_dice.unwrap() - 0.02)
        .count();
    let share = near as f64 / rows.len() as f64;
    let retrieved = report.aggregate("retrieval").unwrap().mean_dice;
    let worst_margin = (1..=5)
        .map(|n| retrieved - report.aggregate(&format!("n={n}")).unwrap().mean_dice)
        .fold(f64::INFINITY, f64::min);
    outcome(
        share >= 0.8 && worst_margin * 100.0 >= -1.0,
        format!(
            "{near}/{} scenes within 2 points of best-over-grid (need 80%), mean retrieved Dice {:.1}, min margin over fixed n {:+.1} points (need >= -1)",
            rows.len(),
            retrieved * 100.0,
            worst_margin * 100.0
        ),
    )
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_partprompt"))
        .args(args)
        .output()
        .expect("cli runs")
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |name: &str| d.join(name).to_string_lossy().into_owned();
    let gen = run_cli(&["gen-scene", "--out-dir", &p(""), "--seed", "11"]);
    if !gen.status.success() {
        return outcome(
            false,
            format!("gen-scene failed: {}", String::from_utf8_lossy(&gen.stderr)),
        );
    }
    let mut outputs = Vec::new();
    for run in 0..2 {
        let (json, mask) = (
            p(&format!("report{run}.json")),
            p(&format!("mask{run}.pgm")),
        );
        let out = run_cli(&[
            "retrieve",
            "--ref-feat",
            &p("reference.npy"),
            "--ref-mask",
            &p("reference_mask.pgm"),
            "--target",
            &p("target.npy"),
            "--neg-range",
            "0-1",
            "--seed",
            "5",
            "--jobs",
            if run == 0 { "1" } else { "4" },
            "--out",
            &json,
            "--mask-out",
            &mask,
        ]);
        if !out.status.success() {
            return outcome(
                false,
                format!("retrieve failed: {}", String::from_utf8_lossy(&out.stderr)),
            );
        }
        outputs.push((std::fs::read(&json).unwrap(), std::fs::read(&mask).unwrap()));
    }
    let same = outputs[0] == outputs[1];
    outcome(
        same,
        format!(
            "two retrieve runs (jobs 1 and 4): JSON {} bytes, mask {} bytes, byte-identical: {same}",
            outputs[0].0.len(),
            outputs[0].1.len()
        ),
    )
}

fn format_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF0);
    let dir = tempfile::tempdir().unwrap();
    let mut failures = Vec::new();
    for t in 0..100 {
        let (h, w, d) = (
            rng.random_range(1..20),
            rng.random_range(1..20),
            rng.random_range(1..9),
        );
        let data: Vec<f32> = (0..h * w * d)
            .map(|_| loop {
                let v = f32::from_bits(rng.random());
                if v.is_finite() {
                    break v;
                }
            })
            .collect();
        let map = FeatureMap::with_unit_stride(h, w, d, data).unwrap();
        let path = dir.path().join(format!("f{t}.npy"));
        write_feature_map(&map, &path).unwrap();
        let back = read_feature_map(&path).unwrap();
        let bits = |m: &FeatureMap| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        if bits(&back) != bits(&map) || (back.height(), back.width(), back.dim()) != (h, w, d) {
            failures.push(format!("feature map {h}x{w}x{d}"));
        }
        if encode_feature_map(&decode_feature_map(&encode_feature_map(&map)).unwrap())
            != encode_feature_map(&map)
        {
            failures.push(format!("feature map bytes {h}x{w}x{d}"));
        }

        let bits: Vec<u8> = (0..h * w).map(|_| rng.random_range(0..2)).collect();
        let mask = BinaryMask::new(h, w, bits).unwrap();
        for ext in ["pgm", "npy"] {
            let path = dir.path().join(format!("m{t}.{ext}"));
            write_mask(&mask, &path).unwrap();
            if read_mask(&path).unwrap() != mask {
                failures.push(format!("mask {h}x{w} via {ext}"));
            }
        }
        if decode_mask(&encode_mask_npy(&mask)).unwrap() != mask
            || decode_mask(&pgm::encode(&mask)).unwrap() != mask
        {
            failures.push(format!("mask bytes {h}x{w}"));
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "100 random shapes: feature maps bit-exact, PGM and NPY masks identical".into()
        } else {
            failures.join("; ")
        },
    )
}

fn scale_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5C);
    let segmenter = MockSegmenter::default();
    let mut failures = Vec::new();
    let mut trials = 0;
    for s in 0..20u64 {
        let scene = partprompt::eval::generate_scene(&SceneSpec {
            seed: RngSeed(s),
            ..SceneSpec::default()
        })
        .unwrap();
        for (pos, mode, neg) in [
            (1, NegMode::Natural, 1),
            (4, NegMode::Natural, 1),
            (3, NegMode::Medical, 2),
        ] {
            let seed = RngSeed(s);
            let synth = |target: &FeatureMap| {
                partprompt::synthesize_prompts(
                    &scene.reference,
                    &scene.reference_mask,
                    target,
                    pos,
                    mode,
                    neg,
                    seed,
                )
                .unwrap()
            };
            let base_prompts = synth(&scene.target);
            let base_mask = segmenter.segment(&scene.target, &base_prompts).unwrap();
            for _ in 0..5 {
                let mut scaled = scene.target.clone();
                let cell = rng.random_range(0..scaled.cells());
                let factor = 10f32.powf(rng.random_range(-3.0..3.0));
                scaled.scale_vector(cell, factor);
                let prompts = synth(&scaled);
                let coords = |p: &partprompt::PromptSet| {
                    p.positives
                        .iter()
                        .chain(&p.negatives)
                        .map(|q| (q.x, q.y))
                        .collect::<Vec<_>>()
                };
                if coords(&prompts) != coords(&base_prompts) {
                    failures.push(format!(
                        "scene {s} n={pos}: prompts moved after scaling cell {cell} by {factor}"
                    ));
                }
                if segmenter.segment(&scaled, &base_prompts).unwrap() != base_mask {
                    failures.push(format!(
                        "scene {s} n={pos}: mask changed after scaling cell {cell} by {factor}"
                    ));
                }
                trials += 1;
            }
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{trials} single-vector rescalings of target features (factors 1e-3..1e3): prompts and masks unchanged")
        } else {
            failures.join("; ")
        },
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("ot-oracle-equivalence", ot_oracle),
        ("sinkhorn-consistency", sinkhorn_consistency),
        ("clustering-invariants", clustering_invariants),
        ("assignment-oracle", assignment_oracle),
        ("part-count-trend", part_count_trend),
        ("retrieval-trend", retrieval_trend),
        ("determinism", determinism),
        ("format-round-trips", format_round_trips),
        ("scale-invariance", scale_invariance),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let r = check();
        println!(
            "{} {name}: {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        );
        failed += usize::from(!r.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
