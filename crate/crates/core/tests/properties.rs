use std::sync::Arc;

use proptest::prelude::*;

use forest_lab::adaptive::{adaptive_linear_tree, approx_split_counts, empirical_delta, SubsetSampling};
use forest_lab::analytics::{
    fit_rate_exponent, halving_binomial, halving_exact, mc_bias_variance, DecompositionPlan, ForestSetup,
};
use forest_lab::bounds::{alpha_exponent, bias_upper_bound, variance_upper_bound, BoundInputs};
use forest_lab::forest::{leaf_population, tree_weights};
use forest_lab::rng::stream;
use forest_lab::{
    overlap_via_counts, overlap_volume, tree_predict, CenteredTree, Dataset, ForestModel, ModelSpec, SelectionProbs,
};

fn probs_strategy(max_dim: usize) -> impl Strategy<Value = Arc<SelectionProbs>> {
    prop::collection::vec(0.05f64..1.0, 1..=max_dim).prop_map(|w| {
        let total: f64 = w.iter().sum();
        Arc::new(SelectionProbs::new(w.iter().map(|v| v / total).collect()).unwrap())
    })
}

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, dim)
}

fn tree_and_points(max_dim: usize, max_depth: u32) -> impl Strategy<Value = (CenteredTree, Vec<Vec<f64>>)> {
    (probs_strategy(max_dim), any::<u64>(), 0..=max_depth).prop_flat_map(|(p, seed, depth)| {
        let d = p.dim();
        (
            Just(CenteredTree::new(seed, depth, p)),
            prop::collection::vec(point(d), 1..200),
        )
    })
}

fn dataset(dim: usize, n: usize, seed: u64) -> Dataset {
    let model = ModelSpec::linear(vec![1.0; dim], 0.3).unwrap();
    model.sample(n, &mut stream(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn leaves_partition_the_cube((tree, xs) in tree_and_points(4, 12)) {
        let cells: Vec<_> = xs.iter().map(|x| tree.route(x).unwrap().cell).collect();
        let volume = 2f64.powi(-(tree.depth() as i32));
        let mut distinct = cells.clone();
        distinct.sort_by(|a, b| a.prefixes().cmp(b.prefixes()).then(a.counts().cmp(b.counts())));
        distinct.dedup();
        for (x, c) in xs.iter().zip(&cells) {
            prop_assert_eq!(c.volume(), volume);
            prop_assert_eq!(c.counts().iter().map(|&k| u64::from(k)).sum::<u64>(), u64::from(tree.depth()));
            prop_assert_eq!(distinct.iter().filter(|d| d.contains(x)).count(), 1);
        }
    }

    #[test]
    fn intervals_along_a_path_are_nested(
        p in probs_strategy(4),
        seeds in (any::<u64>(), any::<u64>()),
        depth in 0u32..=26,
        u in prop::collection::vec(0.0f64..1.0, 4),
    ) {
        let x = &u[..p.dim()];
        let a = CenteredTree::new(seeds.0, depth, p.clone()).route(x).unwrap().cell;
        let b = CenteredTree::new(seeds.1, depth, p).route(x).unwrap().cell;
        for j in 0..x.len() {
            let (coarse, fine) = if a.counts()[j] <= b.counts()[j] { (&a, &b) } else { (&b, &a) };
            let (lo, hi) = coarse.interval(j);
            let (flo, fhi) = fine.interval(j);
            prop_assert!(lo <= flo && fhi <= hi);
        }
    }

    #[test]
    fn overlap_identity_is_exact(
        p in probs_strategy(4),
        seeds in (any::<u64>(), any::<u64>()),
        depth in 0u32..=26,
        u in prop::collection::vec(0.0f64..1.0, 4),
    ) {
        let x = &u[..p.dim()];
        let a = CenteredTree::new(seeds.0, depth, p.clone());
        let b = CenteredTree::new(seeds.1, depth, p);
        let geometric = overlap_volume(&a.route(x).unwrap().cell, &b.route(x).unwrap().cell).unwrap();
        prop_assert_eq!(geometric.to_bits(), overlap_via_counts(x, &a, &b).unwrap().to_bits());
    }

    #[test]
    fn selection_probabilities_are_normalized(p in probs_strategy(12)) {
        prop_assert!(p.as_slice().iter().all(|&v| v >= 0.0));
        prop_assert!((p.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn ideal_probabilities(d in 1usize..12, mask in any::<u16>()) {
        let strong: Vec<usize> = (0..d).filter(|j| mask >> j & 1 == 1).collect();
        prop_assume!(!strong.is_empty());
        let p = SelectionProbs::ideal(d, &strong).unwrap();
        for j in 0..d {
            let want = if strong.contains(&j) { 1.0 / strong.len() as f64 } else { 0.0 };
            prop_assert_eq!(p.as_slice()[j], want);
        }
    }

    #[test]
    fn weights_sum_to_one_on_nonempty_leaves(
        seed in any::<u64>(),
        depth in 0u32..10,
        n in 1usize..80,
        u in prop::collection::vec(0.0f64..1.0, 2),
    ) {
        let data = dataset(2, n, seed);
        let tree = CenteredTree::new(seed ^ 1, depth, Arc::new(SelectionProbs::uniform(2).unwrap()));
        let w = tree_weights(&tree, &data, &u).unwrap();
        prop_assert!(w.iter().all(|&v| v >= 0.0));
        let total: f64 = w.iter().sum();
        if leaf_population(&tree, &data, &u).unwrap() == 0 {
            prop_assert_eq!(total, 0.0);
        } else {
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn forest_weights_reproduce_prediction(
        seed in any::<u64>(),
        depth in 0u32..8,
        n in 1usize..60,
        u in prop::collection::vec(0.0f64..1.0, 3),
    ) {
        let data = dataset(3, n, seed);
        let forest = ForestModel::grow(&data, Arc::new(SelectionProbs::uniform(3).unwrap()), 1 << depth, 7, seed).unwrap();
        let w = forest.weights(&u).unwrap();
        let via_weights: f64 = w.iter().zip(data.ys()).map(|(a, b)| a * b).sum();
        let direct = forest.predict(&u).unwrap();
        prop_assert!((via_weights - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        let indexed = ForestModel::grow(&data, Arc::new(SelectionProbs::uniform(3).unwrap()), 1 << depth, 7, seed)
            .unwrap()
            .indexed()
            .predict(&u)
            .unwrap();
        prop_assert_eq!(indexed.to_bits(), direct.to_bits());
    }

    #[test]
    fn shifting_responses_shifts_predictions(
        seed in any::<u64>(),
        depth in 0u32..8,
        n in 1usize..80,
        c in -50.0f64..50.0,
        u in prop::collection::vec(0.0f64..1.0, 2),
    ) {
        let data = dataset(2, n, seed);
        let shifted = data.with_ys(data.ys().iter().map(|y| y + c).collect()).unwrap();
        let tree = CenteredTree::new(seed ^ 2, depth, Arc::new(SelectionProbs::uniform(2).unwrap()));
        prop_assume!(leaf_population(&tree, &data, &u).unwrap() > 0);
        let a = tree_predict(&tree, &data, &u).unwrap();
        let b = tree_predict(&tree, &shifted, &u).unwrap();
        prop_assert!((b - a - c).abs() <= 1e-12 * (1.0 + c.abs() + a.abs()));
    }

    #[test]
    fn delta_ignores_constant_shifts(
        left in prop::collection::vec(-10.0f64..10.0, 0..20),
        right in prop::collection::vec(-10.0f64..10.0, 1..20),
        c in -100.0f64..100.0,
    ) {
        let n = left.len() + right.len();
        let base = empirical_delta(&left, &right, n).unwrap();
        let l: Vec<f64> = left.iter().map(|v| v + c).collect();
        let r: Vec<f64> = right.iter().map(|v| v + c).collect();
        let moved = empirical_delta(&l, &r, n).unwrap();
        prop_assert!(base >= 0.0);
        prop_assert!((moved - base).abs() <= 1e-9 * (1.0 + base));
    }

    #[test]
    fn adaptive_counts_sum_to_depth_and_skip_zero_coefficients(
        beta in prop::collection::vec(prop_oneof![Just(0.0), -1.0f64..1.0], 1..8),
        depth in 0u32..300,
        seed in any::<u64>(),
    ) {
        prop_assume!(beta.iter().any(|&b| b != 0.0));
        let d = beta.len();
        let k = adaptive_linear_tree(&beta, d, depth, SubsetSampling::WithoutReplacement, &mut stream(seed)).unwrap();
        prop_assert_eq!(k.total(), u64::from(depth));
        for (b, kj) in beta.iter().zip(&k.k) {
            if *b == 0.0 {
                prop_assert_eq!(*kj, 0);
            }
        }
    }

    // Each step splits the coordinate with the largest log₂|β_j| − K_j, so once
    // the initial spread is used up these values stay within one of each other.
    #[test]
    fn adaptive_counts_balance_the_score(
        beta in prop::collection::vec(0.01f64..1.0, 1..8),
        extra in 0u32..200,
        seed in any::<u64>(),
    ) {
        let d = beta.len();
        let logs: Vec<f64> = beta.iter().map(|b| b.log2()).collect();
        let low = logs.iter().copied().fold(f64::INFINITY, f64::min);
        let burn: u32 = logs.iter().map(|l| (l - low).ceil() as u32).sum();
        let depth = burn + d as u32 + extra;
        let k = adaptive_linear_tree(&beta, d, depth, SubsetSampling::WithoutReplacement, &mut stream(seed)).unwrap();
        let gap: Vec<f64> = logs.iter().zip(&k.k).map(|(l, &kj)| l - f64::from(kj)).collect();
        let spread = gap.iter().copied().fold(f64::NEG_INFINITY, f64::max) - gap.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(spread <= 1.0 + 1e-9, "spread {spread} for {:?}", k.k);
    }

    #[test]
    fn approximate_counts_sum_to_depth(
        mut beta in prop::collection::vec(0.01f64..1.0, 1..10),
        depth in 1u32..5000,
    ) {
        beta.sort_by(|a, b| b.total_cmp(a));
        let k = approx_split_counts(&beta, depth).unwrap();
        prop_assert!((k.iter().sum::<f64>() - f64::from(depth)).abs() <= 1e-9 * f64::from(depth));
    }

    #[test]
    fn binomial_shortcut_matches_enumeration(m in 0u64..40, p1 in 0.01f64..0.99) {
        let exact = halving_exact(m, &[p1, 1.0 - p1]).unwrap();
        let fast = halving_binomial(m, p1).unwrap();
        prop_assert!((exact - fast).abs() <= 1e-12);
    }

    #[test]
    fn fit_recovers_power_laws(exponent in -3.0f64..3.0, scale in 0.1f64..10.0) {
        let pts: Vec<(f64, f64)> = (1..8).map(|i| {
            let x = 2f64.powi(i);
            (x, scale * x.powf(exponent))
        }).collect();
        let fit = fit_rate_exponent(&pts).unwrap();
        prop_assert!((fit.exponent - exponent).abs() <= 1e-9);
        prop_assert!((fit.intercept - scale.ln()).abs() <= 1e-9);
    }

    #[test]
    fn bias_bound_tracks_its_exponent(s in 1u32..8, k in 2.0f64..1e6) {
        let at = |k: f64| bias_upper_bound(&BoundInputs::new(1e300, k, s, s).lipschitz(1.0)).unwrap();
        let e = 2.0 * (1.0 - 1.0 / (2.0 * f64::from(s))).log2();
        prop_assert!(((at(4.0 * k) / at(k)).log(4.0) - e).abs() <= 1e-9);
    }
}

#[test]
fn alpha_decreases_and_beats_the_approximation() {
    let alphas: Vec<f64> = (1..=1000)
        .map(|s| alpha_exponent(1.0 / f64::from(s)).unwrap())
        .collect();
    assert!(alphas.windows(2).all(|w| w[1] < w[0]));
    for (i, a) in alphas.iter().enumerate() {
        let s = (i + 1) as f64;
        assert!(a * (s * std::f64::consts::LN_2 + 1.0) > 1.0, "S = {s}");
    }
}

#[test]
fn one_strong_variable_variance_bound() {
    for (n, k, sigma) in [(100.0, 4.0, 1.0), (5000.0, 37.0, 0.3), (1e6, 1024.0, 2.5)] {
        let v = variance_upper_bound(&BoundInputs::new(n, k, 1, 3).sigma(sigma)).unwrap();
        assert_eq!(v, 12.0 * sigma * sigma * (k / n));
    }
}

#[test]
fn decomposition_terms_add_up() {
    let model = ModelSpec::linear(vec![1.0, -0.5], 0.4).unwrap();
    let plan = DecompositionPlan {
        blocks: 4,
        queries: 20,
        datasets: 3,
    };
    for (seed, leaves) in [(1, 4), (2, 16), (3, 64)] {
        let setup = ForestSetup::new(
            model.clone(),
            300,
            leaves,
            Arc::new(SelectionProbs::uniform(2).unwrap()),
            20,
        )
        .unwrap();
        let e = mc_bias_variance(&setup, plan, seed).unwrap();
        let sum = e.variance.mean + e.bias_sq.mean;
        assert!((e.mse.mean - sum).abs() <= 1e-12 * e.mse.mean, "{e:?}");
        assert!(e.variance.mean >= -3.0 * e.variance.stderr);
        assert!(e.bias_sq.mean >= -3.0 * e.bias_sq.stderr);
    }
}
