mod common;

use common::{ap_reference, first_appearance, naive_agglomerative, random_points, three_blobs};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsi_core::clustering::{
    affinity_propagation, agglomerative, cut_tree, linkage_tree, AffinityConfig,
    AgglomerativeConfig, Linkage, Metric, Preference,
};

const COMBOS: [(Linkage, Metric); 7] = [
    (Linkage::Ward, Metric::Euclidean),
    (Linkage::Average, Metric::Euclidean),
    (Linkage::Average, Metric::Manhattan),
    (Linkage::Average, Metric::Cosine),
    (Linkage::Complete, Metric::Euclidean),
    (Linkage::Complete, Metric::Manhattan),
    (Linkage::Complete, Metric::Cosine),
];

fn agg(points: &[Vec<f64>], k: usize, linkage: Linkage, metric: Metric) -> Vec<usize> {
    agglomerative(
        points,
        &AgglomerativeConfig {
            n_clusters: k,
            linkage,
            metric,
        },
    )
    .unwrap()
    .labels
}

#[test]
fn matches_naive_reference_at_every_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for round in 0..30 {
        let n = rng.gen_range(2..=30);
        let dim = rng.gen_range(1..=6);
        let points = random_points(&mut rng, n, dim);
        for (linkage, metric) in COMBOS {
            let levels = naive_agglomerative(&points, linkage, metric);
            let tree = linkage_tree(&points, linkage, metric).unwrap();
            for k in 1..=n {
                assert_eq!(
                    cut_tree(n, &tree, k),
                    levels[n - k],
                    "round {round}, {linkage}/{metric}, k={k}"
                );
            }
            let k = rng.gen_range(1..=n);
            assert_eq!(agg(&points, k, linkage, metric), levels[n - k]);
        }
    }
}

#[test]
fn tied_distances_merge_lowest_pair() {
    // Integer grid with many equal manhattan distances; complete linkage
    // keeps the tied values exact in both implementations.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let n = rng.gen_range(3..=16);
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.gen_range(0..4) as f64, rng.gen_range(0..4) as f64])
            .collect();
        for metric in [Metric::Manhattan, Metric::Euclidean] {
            let levels = naive_agglomerative(&points, Linkage::Complete, metric);
            let tree = linkage_tree(&points, Linkage::Complete, metric).unwrap();
            for k in 1..=n {
                assert_eq!(cut_tree(n, &tree, k), levels[n - k], "{points:?} k={k}");
            }
        }
    }
}

#[test]
fn equidistant_points_merge_in_index_order() {
    let points = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
    assert_eq!(
        agg(&points, 3, Linkage::Complete, Metric::Euclidean),
        vec![0, 0, 1, 2]
    );
    assert_eq!(
        agg(&points, 2, Linkage::Complete, Metric::Euclidean),
        vec![0, 0, 1, 1]
    );
}

#[test]
fn complete_linkage_merge_heights_never_decrease() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let points = random_points(&mut rng, 25, 3);
        for (linkage, metric) in COMBOS {
            let tree = linkage_tree(&points, linkage, metric).unwrap();
            for w in tree.windows(2) {
                assert!(w[1].distance >= w[0].distance - 1e-12, "{linkage}/{metric}");
            }
        }
    }
}

fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len()
        && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

fn point_set() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=4).prop_flat_map(|dim| {
        prop::collection::vec(prop::collection::vec(-10.0f64..10.0, dim), 2..=20)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permuting_points_permutes_the_partition(points in point_set(), seed in any::<u64>(), k in 1usize..6) {
        let n = points.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..n).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let shuffled: Vec<Vec<f64>> = order.iter().map(|&i| points[i].clone()).collect();
        for (linkage, metric) in COMBOS {
            let base = agg(&points, k, linkage, metric);
            let moved = agg(&shuffled, k, linkage, metric);
            let pulled_back: Vec<usize> = order.iter().map(|&i| base[i]).collect();
            prop_assert!(same_partition(&pulled_back, &moved));
        }
    }

    #[test]
    fn translation_leaves_partitions_unchanged(points in point_set(), shift in -50.0f64..50.0, k in 1usize..6) {
        let moved: Vec<Vec<f64>> = points.iter().map(|p| p.iter().map(|x| x + shift).collect()).collect();
        for (linkage, metric) in COMBOS.into_iter().filter(|(_, m)| *m != Metric::Cosine) {
            prop_assert!(same_partition(&agg(&points, k, linkage, metric), &agg(&moved, k, linkage, metric)));
        }
        let cfg = AffinityConfig { preference: Preference::Value(-30.0), ..AffinityConfig::default() };
        let a = affinity_propagation(&points, &cfg).unwrap();
        let b = affinity_propagation(&moved, &cfg).unwrap();
        if a.converged && b.converged {
            prop_assert!(same_partition(&a.labels, &b.labels));
        }
    }

    #[test]
    fn clustering_is_deterministic(points in point_set()) {
        let cfg = AgglomerativeConfig { n_clusters: 2, linkage: Linkage::Average, metric: Metric::Cosine };
        prop_assert_eq!(agglomerative(&points, &cfg).unwrap(), agglomerative(&points, &cfg).unwrap());
        let ap = AffinityConfig::default();
        prop_assert_eq!(affinity_propagation(&points, &ap).unwrap(), affinity_propagation(&points, &ap).unwrap());
    }
}

#[test]
fn affinity_propagation_matches_reference_on_blobs() {
    for seed in 0..5 {
        let (points, blob) = three_blobs(10, seed);
        let cfg = AffinityConfig::default();
        let ours = affinity_propagation(&points, &cfg).unwrap();
        let reference = ap_reference(&points, 0.5, None, 200, 15);
        assert!(ours.converged && reference.converged);
        assert!(!ours.jittered);
        assert_eq!(ours.labels, reference.labels);
        assert_eq!(ours.exemplars, reference.exemplars);
        assert_eq!(ours.labels, first_appearance(&blob));
    }
}

#[test]
fn affinity_propagation_matches_reference_on_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut compared = 0;
    for _ in 0..60 {
        let n = rng.gen_range(3..=15);
        let points = random_points(&mut rng, n, 2);
        let damping = [0.5, 0.7, 0.9][rng.gen_range(0..3)];
        let preference = [None, Some(-2.0), Some(-0.5), Some(0.0)][rng.gen_range(0..4)];
        let cfg = AffinityConfig {
            damping,
            preference: preference.map_or(Preference::Median, Preference::Value),
            ..AffinityConfig::default()
        };
        let ours = affinity_propagation(&points, &cfg).unwrap();
        let reference = ap_reference(&points, damping, preference, 200, 15);
        if ours.jittered || !reference.converged {
            continue;
        }
        compared += 1;
        assert_eq!(ours.labels, reference.labels, "{points:?} {cfg:?}");
        assert_eq!(ours.converged, reference.converged);
    }
    assert!(compared >= 40, "only {compared} comparable runs");
}

#[test]
fn raising_preference_never_removes_clusters() {
    for seed in 0..5 {
        let (points, _) = three_blobs(10, seed);
        let mut last = 0;
        for p in [-20.0, -10.0, -5.0, 0.0, 5.0] {
            let cfg = AffinityConfig {
                preference: Preference::Value(p),
                ..AffinityConfig::default()
            };
            let k = affinity_propagation(&points, &cfg).unwrap().k;
            assert!(k >= last, "seed {seed}: preference {p} gave {k} < {last}");
            last = k;
        }
    }
}

#[test]
fn affinity_propagation_degenerate_inputs() {
    let single = affinity_propagation(&[vec![1.0, 2.0]], &AffinityConfig::default()).unwrap();
    assert_eq!(
        (
            single.labels.clone(),
            single.exemplars.clone(),
            single.converged
        ),
        (vec![0], vec![0], true)
    );

    let same = vec![vec![3.0, 3.0]; 6];
    let res = affinity_propagation(&same, &AffinityConfig::default()).unwrap();
    assert_eq!(res.k, 1);
    assert_eq!(res.labels, vec![0; 6]);
    assert!(res.converged);

    let empty: Vec<Vec<f64>> = Vec::new();
    assert!(affinity_propagation(&empty, &AffinityConfig::default()).is_err());
}

#[test]
fn tied_exemplar_pair_settles_after_jitter() {
    // Points 0 and 2 are equally good exemplars for each other; without
    // jitter the exemplar set keeps swinging between {1} and {0, 1, 2}.
    let points = vec![
        vec![-5.129882536421322, 0.0],
        vec![0.0, 3.1384912208068174],
        vec![-9.082125111387152, -1.3370500929118503],
    ];
    let reference = ap_reference(&points, 0.5, Some(-30.0), 60, 15);
    assert!(!reference.converged);
    let cfg = AffinityConfig {
        preference: Preference::Value(-30.0),
        ..AffinityConfig::default()
    };
    for shift in [0.0, 39.97250106468384] {
        let moved: Vec<Vec<f64>> = points
            .iter()
            .map(|p| p.iter().map(|x| x + shift).collect())
            .collect();
        let res = affinity_propagation(&moved, &cfg).unwrap();
        assert!(res.jittered && res.converged);
        assert_eq!(res.labels, vec![0, 1, 0]);
    }
}
