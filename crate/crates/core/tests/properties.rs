mod common;

use std::collections::BTreeSet;

use elicit::clustering::{distance_matrix, hac, select_prototype, Agglomeration};
use elicit::corpus::GeneratorSpec;
use elicit::model::DecisionModel;
use elicit::tree::{
    build_tree, candidate_splits, classify, gain, SplitKind, TrainingSet, TreeNode,
};
use elicit::utility::{distance, utility_loss, LossTable};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn unit_vec(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..=1.0f64, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn expected_utility_is_linear(
        u in unit_vec(22), v in unit_vec(22),
        a in -2.0..2.0f64, b in -2.0..2.0f64,
        s in 0..18usize, h in 0..4usize,
    ) {
        let m = DecisionModel::mini_panda();
        let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let lhs = m.expected_utility(&mix, s, h).unwrap();
        let rhs = a * m.expected_utility(&u, s, h).unwrap() + b * m.expected_utility(&v, s, h).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn argmax_survives_positive_affine_maps(u in unit_vec(22), a in 0.05..20.0f64, b in -5.0..5.0f64, h in 0..4usize) {
        let m = DecisionModel::mini_panda();
        let eus = m.strategy_utilities(&u, h).unwrap();
        let mut sorted = eus.clone();
        sorted.sort_by(|x, y| y.total_cmp(x));
        // Skip near-ties where rounding in the transform can reorder.
        prop_assume!(sorted[0] - sorted[1] > 1e-9);
        let t: Vec<f64> = u.iter().map(|x| a * x + b).collect();
        prop_assert_eq!(m.best_strategy(&u, h).unwrap().0, m.best_strategy(&t, h).unwrap().0);
    }

    #[test]
    fn best_strategy_matches_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, 5, 4, 2);
        let u = random_utility(&mut rng, 5);
        for h in 0..2 {
            let (s, eu) = m.best_strategy(&u, h).unwrap();
            let (bs, beu) = brute_best(&m, &u, h);
            prop_assert_eq!(s, bs);
            prop_assert!((eu - beu).abs() < 1e-12);
        }
    }

    #[test]
    fn utility_loss_properties(u in unit_vec(22), p in unit_vec(22), a in 0.01..10.0f64, h in 0..4usize) {
        let m = DecisionModel::mini_panda();
        let ul = utility_loss(&m, &u, &p, h).unwrap();
        prop_assert!(ul >= 0.0);
        prop_assert!(ul <= 1.0);
        prop_assert_eq!(utility_loss(&m, &u, &u, h).unwrap(), 0.0);
        let scaled: Vec<f64> = u.iter().map(|x| a * x).collect();
        prop_assert!((utility_loss(&m, &scaled, &p, h).unwrap() - a * ul).abs() < 1e-9);
        prop_assert_eq!(distance(&m, &u, &p, h).unwrap(), distance(&m, &p, &u, h).unwrap());
    }

    #[test]
    fn distance_vanishes_for_mutually_optimal_pairs(seed in any::<u64>(), a in 0.1..5.0f64, b in -1.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, 4, 3, 1);
        let u = random_utility(&mut rng, 4);
        let v = random_utility(&mut rng, 4);
        // Brute force: zero iff each best strategy is optimal for the other.
        let bd = brute_distance(&m, &u, &v, 0);
        prop_assert!((distance(&m, &u, &v, 0).unwrap() - bd).abs() < 1e-12);
        let (su, eu_u) = brute_best(&m, &u, 0);
        let (sv, eu_v) = brute_best(&m, &v, 0);
        let cross_u: f64 = (0..4).map(|o| m.distribution(sv, 0)[o] * u[o]).sum();
        let cross_v: f64 = (0..4).map(|o| m.distribution(su, 0)[o] * v[o]).sum();
        if su == sv || (cross_u == eu_u && cross_v == eu_v) {
            prop_assert_eq!(distance(&m, &u, &v, 0).unwrap(), 0.0);
        }
        // An affine copy shares the argmax, so it sits at distance zero.
        let eus = m.strategy_utilities(&u, 0).unwrap();
        let mut sorted = eus.clone();
        sorted.sort_by(|x, y| y.total_cmp(x));
        prop_assume!(sorted[0] - sorted[1] > 1e-9);
        let w: Vec<f64> = u.iter().map(|x| a * x + b).collect();
        prop_assert_eq!(distance(&m, &u, &w, 0).unwrap(), 0.0);
    }

    #[test]
    fn recurrence_matches_mean_of_pairs_and_merges_are_optimal(seed in any::<u64>(), n in 2..=12usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, 5, 4, 1);
        let db = random_db(&mut rng, n, 5);
        let table = LossTable::new(&m, db.functions(), 0).unwrap();
        let base = distance_matrix(&table);
        let mut ag = Agglomeration::new(n, base.clone());
        loop {
            let clusters: Vec<(usize, Vec<usize>)> = ag.clusters().map(|(s, c)| (s, c.to_vec())).collect();
            let mut min = f64::INFINITY;
            for (x, (sa, a)) in clusters.iter().enumerate() {
                for (sb, b) in &clusters[x + 1..] {
                    let direct = a.iter().flat_map(|&i| b.iter().map(move |&j| (i, j)))
                        .map(|(i, j)| base[i * n + j]).sum::<f64>() / (a.len() * b.len()) as f64;
                    prop_assert!((ag.linkage(*sa, *sb) - direct).abs() < 1e-9);
                    min = min.min(direct);
                }
            }
            match ag.step() {
                Some(merge) => prop_assert!((merge.distance - min).abs() < 1e-9),
                None => break,
            }
        }
    }

    #[test]
    fn prototypes_minimize_score(seed in any::<u64>(), n in 1..=12usize, k in 1..=4usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, 5, 4, 1);
        let db = random_db(&mut rng, n, 5);
        let k = k.min(n);
        let c = hac(&db, &m, 0, k).unwrap();
        prop_assert_eq!(c.len(), k);
        for cluster in &c.clusters {
            let f = db.functions();
            let score = |p: usize| -> f64 {
                cluster.members.iter().map(|&j| brute_loss(&m, &f[j].values, &f[p].values, 0)).sum()
            };
            let best = cluster.members.iter().map(|&p| score(p)).fold(f64::INFINITY, f64::min);
            prop_assert!((score(cluster.prototype) - best).abs() < 1e-9);
            prop_assert!((cluster.prototype_score - best).abs() < 1e-9);
            prop_assert_eq!(select_prototype(&db, &cluster.members, &m, 0).unwrap().0, cluster.prototype);
        }
        prop_assert_eq!(hac(&db, &m, 0, k).unwrap(), c);
    }

    #[test]
    fn trees_are_consistent_with_their_training_data(seed in any::<u64>(), n in 1..=14usize, k in 1..=4usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, 5, 4, 1);
        let db = random_db(&mut rng, n, 5);
        let c = hac(&db, &m, 0, k.min(n)).unwrap();
        let ts = TrainingSet::from_clustering(&db, &c).unwrap();
        let tree = build_tree(&ts, &m, 0, 0.05).unwrap();
        let depth = tree.depth();
        prop_assert!(depth <= n.saturating_sub(1));

        let mut reach: Vec<Vec<usize>> = Vec::new();
        for (i, u) in db.functions().iter().enumerate() {
            let r = classify(&tree, |q| q.answer(&u.values));
            prop_assert!(r.questions_asked <= depth);
            let path: Vec<bool> = r.transcript.iter().map(|(_, a)| *a).collect();
            let TreeNode::Leaf(leaf) = tree.root.descend(&path).unwrap() else { unreachable!() };
            if leaf.is_pure() {
                prop_assert_eq!(r.label, ts.labels[i]);
            }
            for len in 0..=path.len() {
                let key = path[..len].iter().fold(1usize, |acc, &b| acc * 2 + b as usize);
                if reach.len() <= key { reach.resize(key + 1, Vec::new()); }
                reach[key].push(i);
            }
        }
        // Every split sends a non-empty, strict subset of its examples each way.
        fn walk(node: &TreeNode, key: usize, reach: &[Vec<usize>]) -> bool {
            match node {
                TreeNode::Leaf(_) => true,
                TreeNode::Split { yes, no, .. } => {
                    let here = reach.get(key).map_or(0, Vec::len);
                    let y = reach.get(key * 2 + 1).map_or(0, Vec::len);
                    let n = reach.get(key * 2).map_or(0, Vec::len);
                    y > 0 && n > 0 && y < here && n < here && y + n == here
                        && walk(yes, key * 2 + 1, reach) && walk(no, key * 2, reach)
                }
            }
        }
        prop_assert!(walk(&tree.root, 1, &reach));
    }

    #[test]
    fn gain_is_non_negative(parent in prop::collection::vec(0..20usize, 1..6), frac in prop::collection::vec(0.0..=1.0f64, 6)) {
        prop_assume!(parent.iter().sum::<usize>() > 0);
        let yes: Vec<usize> = parent.iter().zip(&frac).map(|(&p, f)| (p as f64 * f).floor() as usize).collect();
        prop_assert!(gain(&parent, &yes).unwrap() >= -1e-12);
    }

    #[test]
    fn wider_gaps_give_fewer_feature_splits(seed in any::<u64>(), g1 in 0.0..0.5f64, dg in 0.0..0.5f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let db = random_db(&mut rng, 10, 6);
        let feats = |g: f64| -> BTreeSet<(usize, u64)> {
            candidate_splits(db.functions(), g).into_iter().filter_map(|s| match s {
                SplitKind::Feature { outcome, threshold } => Some((outcome, threshold.to_bits())),
                _ => None,
            }).collect()
        };
        prop_assert!(feats(g1 + dg).is_subset(&feats(g1)));
    }

    #[test]
    fn generator_output_is_normalized(seed in any::<u64>(), noise in 0.0..0.3f64, samples in 1..40usize) {
        let mut spec = GeneratorSpec::bundled();
        spec.seed = seed;
        spec.noise = noise;
        spec.samples = samples;
        let (db, labels) = spec.generate().unwrap();
        prop_assert_eq!(db.len(), samples);
        prop_assert_eq!(labels.len(), samples);
        for u in db.functions() {
            prop_assert_eq!(u.values[0], 1.0);
            prop_assert_eq!(u.values[21], 0.0);
            prop_assert!(u.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn noiseless_samples_sit_on_their_archetype() {
    let m = DecisionModel::mini_panda();
    let mut spec = GeneratorSpec::bundled();
    spec.noise = 0.0;
    spec.samples = 20;
    let (db, labels) = spec.generate().unwrap();
    for (u, &l) in db.functions().iter().zip(&labels) {
        for h in 0..4 {
            let ds: Vec<f64> = spec
                .archetypes
                .iter()
                .map(|a| distance(&m, &u.values, &a.values, h).unwrap())
                .collect();
            assert_eq!(ds[l], 0.0);
            assert!(ds.iter().enumerate().all(|(i, &d)| i == l || d > 0.0));
        }
    }
}

#[test]
fn pipeline_stages_are_deterministic() {
    let m = DecisionModel::mini_panda();
    let (a, la) = GeneratorSpec::bundled_noisy().generate().unwrap();
    let (b, lb) = GeneratorSpec::bundled_noisy().generate().unwrap();
    assert_eq!(a, b);
    assert_eq!(la, lb);
    for h in 0..4 {
        let ca = hac(&a, &m, h, 4).unwrap();
        assert_eq!(ca, hac(&b, &m, h, 4).unwrap());
        let ta = build_tree(&TrainingSet::from_clustering(&a, &ca).unwrap(), &m, h, 0.05).unwrap();
        let tb = build_tree(&TrainingSet::from_clustering(&b, &ca).unwrap(), &m, h, 0.05).unwrap();
        assert_eq!(ta.to_json().unwrap(), tb.to_json().unwrap());
    }
}
