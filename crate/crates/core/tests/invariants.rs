mod oracles;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cfgnn::dataset::split;
use cfgnn::dgcnn::{dynamic_max_pool, softmax, Aggregation, Network};
use cfgnn::linalg::Matrix;

use oracles::{permute_graph, random_encoded_graph, random_params, small_dims};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn forward_pass_ignores_vertex_order(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = [6, 4];
        let graph = random_encoded_graph(&mut rng, n, &sizes);
        let params = random_params(&mut rng, small_dims(6), &sizes, 3);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let permuted = permute_graph(&graph, &perm);
        for agg in [Aggregation::Sum, Aggregation::Mean] {
            let net = Network::new(&params, agg);
            let a = net.forward(&graph).unwrap();
            let b = net.forward(&permuted).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_is_normalized(logits in prop::collection::vec(-700.0f64..700.0, 1..12)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn pooled_vector_dominates_every_vertex(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 1..15)
    ) {
        let pooled = dynamic_max_pool(&Matrix::from_rows(&rows)).unwrap();
        for row in &rows {
            for (p, x) in pooled.iter().zip(row) {
                prop_assert!(p >= x);
            }
        }
        for (j, p) in pooled.iter().enumerate() {
            prop_assert!(rows.iter().any(|r| r[j] == *p));
        }
    }

    #[test]
    fn split_partitions_samples(n in 5usize..300, seed in any::<u64>()) {
        let folds = split((0..n).collect::<Vec<_>>(), seed).unwrap();
        let mut all: Vec<usize> = folds.train.iter().chain(&folds.validation).chain(&folds.test).copied().collect();
        prop_assert_eq!(all.len(), n);
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all.len(), n);
    }
}
