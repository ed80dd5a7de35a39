mod oracles;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cfgnn::metrics::{
    accuracy, auc, binary_roc, macro_average_roc, micro_average_roc, roc_one_vs_rest,
    ConfusionMatrix,
};

use oracles::{binary_labels, enumerate_roc, random_probabilities, tied_scores, wilcoxon_statistic};

#[test]
fn auc_equals_wilcoxon_statistic() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let n = rng.random_range(2..60);
        let scores = tied_scores(&mut rng, n);
        let labels = binary_labels(&mut rng, n);
        let curve = binary_roc(&scores, &labels).unwrap();
        let w = wilcoxon_statistic(&scores, &labels);
        assert!((auc(&curve) - w).abs() < 1e-9, "{} vs {w}", auc(&curve));
    }
}

#[test]
fn roc_points_match_threshold_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let scores = tied_scores(&mut rng, 20);
        let labels = binary_labels(&mut rng, 20);
        let curve = binary_roc(&scores, &labels).unwrap();
        let got: Vec<(f64, f64)> = curve.points().iter().map(|p| (p.fpr, p.tpr)).collect();
        assert_eq!(got, enumerate_roc(&scores, &labels));
    }
}

#[test]
fn micro_average_matches_pooled_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let scores = random_probabilities(&mut rng, 10, 5);
        let actual: Vec<usize> = (0..10).map(|_| rng.random_range(0..5)).collect();
        let pooled: Vec<f64> = scores.iter().flatten().copied().collect();
        let is_pos: Vec<bool> = actual
            .iter()
            .flat_map(|&a| (0..5).map(move |c| c == a))
            .collect();
        assert_eq!(pooled.len(), 50);
        let curve = micro_average_roc(&scores, &actual).unwrap();
        let got: Vec<(f64, f64)> = curve.points().iter().map(|p| (p.fpr, p.tpr)).collect();
        assert_eq!(got, enumerate_roc(&pooled, &is_pos));
    }
}

#[test]
fn macro_auc_is_mean_of_class_aucs() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let scores = random_probabilities(&mut rng, 30, 4);
        let mut actual: Vec<usize> = (0..30).map(|_| rng.random_range(0..4)).collect();
        actual[..4].copy_from_slice(&[0, 1, 2, 3]);
        let curves: Vec<_> = (0..4).map(|c| roc_one_vs_rest(&scores, &actual, c).unwrap()).collect();
        let mean = curves.iter().map(auc).sum::<f64>() / 4.0;
        let m = macro_average_roc(&curves).unwrap();
        assert!((auc(&m) - mean).abs() < 1e-12);
        let mut reversed = curves.clone();
        reversed.reverse();
        assert_eq!(macro_average_roc(&reversed).unwrap(), m);
    }
}

#[test]
fn accuracy_equals_confusion_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let n = rng.random_range(1..100);
        let predicted: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
        let actual: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
        let m = ConfusionMatrix::new(&predicted, &actual, 5).unwrap();
        assert_eq!(accuracy(&predicted, &actual).unwrap(), m.trace() as f64 / n as f64);
        assert_eq!(m.total(), n);
    }
}

#[test]
fn dominating_curve_has_larger_auc() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..200 {
        let n = 30;
        let labels = binary_labels(&mut rng, n);
        let scores = tied_scores(&mut rng, n);
        // raising every positive score can only move the curve up
        let boosted: Vec<f64> = scores
            .iter()
            .zip(&labels)
            .map(|(&s, &y)| if y { s + 0.5 } else { s })
            .collect();
        let a = auc(&binary_roc(&scores, &labels).unwrap());
        let b = auc(&binary_roc(&boosted, &labels).unwrap());
        assert!(b >= a - 1e-12);
    }
}
