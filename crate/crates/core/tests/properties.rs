//! Property tests over the public pipeline.

use partprompt::cluster::cluster_parts;
use partprompt::distance::{
    cost_matrix, hungarian_part_distance, js_divergence_2pc, wasserstein_exact,
    wasserstein_sinkhorn, SinkhornParams,
};
use partprompt::eval::{generate_scene, SceneSpec};
use partprompt::prompt::similarity_maps;
use partprompt::segmenter::mock_prototype_segment;
use partprompt::{
    grid_to_pixel, masked_select, synthesize_prompts, FeatureMap, FeatureSet, GridPoint, NegMode,
    Polarity, RngSeed,
};
use proptest::prelude::*;

fn feature_set(max_count: usize, dim: usize) -> impl Strategy<Value = FeatureSet> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, dim), 1..=max_count)
        .prop_filter("non-zero vectors", |vs| {
            vs.iter().all(|v| v.iter().any(|x| x.abs() > 1e-3))
        })
        .prop_map(|vs| FeatureSet::from_vectors(&vs).unwrap())
}

fn scene(parts: usize, seed: u64) -> partprompt::eval::Scene {
    generate_scene(&SceneSpec {
        height: 12,
        width: 12,
        dim: 10,
        parts,
        object: [6, 6],
        seed: RngSeed(seed),
        ..SceneSpec::default()
    })
    .unwrap()
}

fn shuffled(x: &FeatureSet, seed: u64) -> FeatureSet {
    let mut idx: Vec<usize> = (0..x.count()).collect();
    let mut state = seed | 1;
    for i in (1..idx.len()).rev() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        idx.swap(i, (state % (i as u64 + 1)) as usize);
    }
    x.select(&idx).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exact_transport_is_a_semimetric(a in feature_set(7, 3), b in feature_set(7, 3)) {
        let ab = wasserstein_exact(&a, &b, 1024, RngSeed(0)).unwrap().value;
        prop_assert!(ab >= 0.0);
        prop_assert!(wasserstein_exact(&a, &a, 1024, RngSeed(0)).unwrap().value <= 1e-9);
        if a.count() == b.count() {
            let ba = wasserstein_exact(&b, &a, 1024, RngSeed(0)).unwrap().value;
            prop_assert!((ab - ba).abs() <= 1e-9);
        }
    }

    #[test]
    fn sinkhorn_approaches_exact_from_above(a in feature_set(6, 3), b in feature_set(6, 3)) {
        let exact = wasserstein_exact(&a, &b, 1024, RngSeed(0)).unwrap().value;
        let scale = cost_matrix(&a, &b).unwrap().mean().max(1e-3);
        let mut previous = f64::INFINITY;
        for factor in [1.0, 0.5, 0.2, 0.1] {
            let params = SinkhornParams { epsilon: factor * scale, max_iter: 50_000, tol: 1e-13 };
            let v = wasserstein_sinkhorn(&a, &b, params).unwrap().value;
            prop_assert!(v >= exact - 1e-9);
            prop_assert!(v <= previous + 1e-9, "{v} after {previous}");
            previous = v;
        }
    }

    #[test]
    fn hungarian_ignores_vector_order(a in feature_set(12, 3), b in feature_set(12, 3), s in any::<u64>(), k in 1usize..5) {
        let d = hungarian_part_distance(&a, &b, k, RngSeed(3)).unwrap().value;
        let e = hungarian_part_distance(&shuffled(&a, s), &shuffled(&b, s ^ 0xff), k, RngSeed(3)).unwrap().value;
        prop_assert_eq!(d, e);
    }

    #[test]
    fn js_lies_in_unit_interval(a in feature_set(20, 3), b in feature_set(20, 3)) {
        if let Ok(d) = js_divergence_2pc(&a, &b, 16) {
            prop_assert!((0.0..=1.0).contains(&d.value));
        }
    }

    #[test]
    fn clustering_is_seed_deterministic(x in feature_set(30, 2), k in 1usize..5, seed in any::<u64>()) {
        let a = cluster_parts(&x, k, RngSeed(seed)).unwrap();
        let b = cluster_parts(&x, k, RngSeed(seed)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn prompts_and_masks_ignore_target_rescaling(
        parts in 1usize..5,
        seed in 0u64..500,
        pos in 1usize..6,
        cell in 0usize..144,
        log_factor in -4.0f32..4.0,
    ) {
        let s = scene(parts, seed);
        let mut scaled = s.target.clone();
        scaled.scale_vector(cell, 10f32.powf(log_factor));
        for (mode, neg) in [(NegMode::Natural, 1), (NegMode::Medical, 2)] {
            let run = |t: &FeatureMap| {
                synthesize_prompts(&s.reference, &s.reference_mask, t, pos, mode, neg, RngSeed(seed)).unwrap()
            };
            let (p0, p1) = (run(&s.target), run(&scaled));
            let coords = |p: &partprompt::PromptSet| {
                p.positives.iter().chain(&p.negatives).map(|q| (q.x, q.y)).collect::<Vec<_>>()
            };
            prop_assert_eq!(coords(&p0), coords(&p1));
            prop_assert_eq!(
                mock_prototype_segment(&s.target, &p0, 0.5).unwrap(),
                mock_prototype_segment(&scaled, &p0, 0.5).unwrap()
            );
        }
    }

    #[test]
    fn positives_sit_on_map_maxima(parts in 1usize..5, seed in 0u64..500, pos in 1usize..6) {
        let s = scene(parts, seed);
        let prompts =
            synthesize_prompts(&s.reference, &s.reference_mask, &s.target, pos, NegMode::Natural, 1, RngSeed(seed))
                .unwrap();
        let fg = masked_select(&s.reference, &s.reference_mask, Polarity::Foreground).unwrap();
        let parts = cluster_parts(&fg, pos, RngSeed(seed).derive(&[1])).unwrap();
        let stack = similarity_maps(&parts, &s.target).unwrap();
        for p in &prompts.positives {
            let map = &stack.maps[p.part.unwrap()];
            let max = map.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let idx = (0..map.len())
                .find(|&i| {
                    let px = grid_to_pixel(GridPoint::new(i / s.target.width(), i % s.target.width()), &s.target).unwrap();
                    (px.x, px.y) == (p.x, p.y)
                })
                .unwrap();
            prop_assert_eq!(map[idx], max);
        }
    }

    #[test]
    fn single_part_equals_mean_prototype_baseline(parts in 1usize..5, seed in 0u64..500) {
        let s = scene(parts, seed);
        let prompts =
            synthesize_prompts(&s.reference, &s.reference_mask, &s.target, 1, NegMode::Natural, 1, RngSeed(seed))
                .unwrap();
        let fg = masked_select(&s.reference, &s.reference_mask, Polarity::Foreground).unwrap();
        let proto = fg.mean();
        let pnorm = proto.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut best = (f64::NEG_INFINITY, 0);
        for i in 0..s.target.cells() {
            let v = s.target.vector(i);
            let dot: f64 = v.iter().zip(&proto).map(|(a, b)| f64::from(*a) * b).sum();
            let vn = v.iter().map(|a| f64::from(*a).powi(2)).sum::<f64>().sqrt();
            let c = dot / (vn * pnorm);
            if c > best.0 + 1e-12 {
                best = (c, i);
            }
        }
        let px = grid_to_pixel(GridPoint::new(best.1 / s.target.width(), best.1 % s.target.width()), &s.target).unwrap();
        prop_assert_eq!((prompts.positives[0].x, prompts.positives[0].y), (px.x, px.y));
        prop_assert_eq!(prompts.positives.len(), 1);
    }

    #[test]
    fn select_is_order_stable(parts in 1usize..4, seed in 0u64..200) {
        let s = scene(parts, seed);
        let a = masked_select(&s.target, &s.target_mask, Polarity::Foreground).unwrap();
        let b = masked_select(&s.target, &s.target_mask, Polarity::Foreground).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.coords().windows(2).all(|w| (w[0].row, w[0].col) < (w[1].row, w[1].col)));
    }
}
