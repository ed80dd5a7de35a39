use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Score cut-off producing this point; `None` for the origin and for
    /// averaged curves.
    pub threshold: Option<f64>,
}

/// Points sorted by fpr with nondecreasing tpr, from (0,0) to (1,1).
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    points: Vec<RocPoint>,
}

impl RocCurve {
    pub fn new(points: Vec<RocPoint>) -> Result<Self, MetricsError> {
        let (first, last) = match (points.first(), points.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(MetricsError::InvalidCurve("no points")),
        };
        if (first.fpr, first.tpr) != (0.0, 0.0) {
            return Err(MetricsError::InvalidCurve("does not start at (0,0)"));
        }
        if (last.fpr, last.tpr) != (1.0, 1.0) {
            return Err(MetricsError::InvalidCurve("does not end at (1,1)"));
        }
        let in_range = |x: f64| (0.0..=1.0).contains(&x);
        if points.iter().any(|p| !in_range(p.fpr) || !in_range(p.tpr)) {
            return Err(MetricsError::InvalidCurve("coordinate outside [0,1]"));
        }
        if points.windows(2).any(|w| w[1].fpr < w[0].fpr || w[1].tpr < w[0].tpr) {
            return Err(MetricsError::InvalidCurve("not monotone"));
        }
        Ok(RocCurve { points })
    }

    pub fn points(&self) -> &[RocPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Tpr approached from the left at `x`, i.e. the lowest tpr recorded at
    /// `x` or the linear interpolation between neighbouring points.
    fn tpr_left(&self, x: f64) -> f64 {
        let i = self.points.partition_point(|p| p.fpr < x);
        self.at_or_interpolate(i, x)
    }

    /// Tpr approached from the right at `x`.
    fn tpr_right(&self, x: f64) -> f64 {
        let i = self.points.partition_point(|p| p.fpr <= x);
        if i > 0 && self.points[i - 1].fpr == x {
            return self.points[i - 1].tpr;
        }
        self.at_or_interpolate(i, x)
    }

    fn at_or_interpolate(&self, i: usize, x: f64) -> f64 {
        let p = &self.points;
        if i < p.len() && p[i].fpr == x {
            return p[i].tpr;
        }
        let (a, b) = (p[i - 1], p[i]);
        a.tpr + (b.tpr - a.tpr) * (x - a.fpr) / (b.fpr - a.fpr)
    }
}

/// ROC curve of a binary scoring: a sample is called positive when its score
/// is at least the threshold. Thresholds run over the distinct scores from
/// high to low, so tied scores move together in one step.
pub fn binary_roc(scores: &[f64], positive: &[bool]) -> Result<RocCurve, MetricsError> {
    if scores.len() != positive.len() {
        return Err(MetricsError::LengthMismatch {
            predicted: scores.len(),
            actual: positive.len(),
        });
    }
    let p_total = positive.iter().filter(|&&p| p).count();
    let n_total = positive.len() - p_total;
    if p_total == 0 {
        return Err(MetricsError::ClassAbsent { class: 1 });
    }
    if n_total == 0 {
        return Err(MetricsError::NoNegatives { class: 1 });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: None,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / n_total as f64,
            tpr: tp as f64 / p_total as f64,
            threshold: Some(t),
        });
    }
    if points.last().map(|p| (p.fpr, p.tpr)) != Some((1.0, 1.0)) {
        points.push(RocPoint {
            fpr: 1.0,
            tpr: 1.0,
            threshold: None,
        });
    }
    RocCurve::new(points)
}

fn check_scores(scores: &[Vec<f64>], actual: &[usize]) -> Result<usize, MetricsError> {
    if scores.len() != actual.len() {
        return Err(MetricsError::LengthMismatch {
            predicted: scores.len(),
            actual: actual.len(),
        });
    }
    let classes = scores.first().ok_or(MetricsError::Empty)?.len();
    for (sample, (row, &label)) in scores.iter().zip(actual).enumerate() {
        if row.len() != classes {
            return Err(MetricsError::ScoreWidth {
                sample,
                expected: classes,
                got: row.len(),
            });
        }
        if label >= classes {
            return Err(MetricsError::LabelOutOfRange {
                sample,
                label,
                classes,
            });
        }
    }
    Ok(classes)
}

/// ROC of `positive_class` against all other classes, scored by that
/// class's probability.
pub fn roc_one_vs_rest(
    scores: &[Vec<f64>],
    actual: &[usize],
    positive_class: usize,
) -> Result<RocCurve, MetricsError> {
    let classes = check_scores(scores, actual)?;
    if positive_class >= classes || !actual.contains(&positive_class) {
        return Err(MetricsError::ClassAbsent {
            class: positive_class,
        });
    }
    let column: Vec<f64> = scores.iter().map(|row| row[positive_class]).collect();
    let is_pos: Vec<bool> = actual.iter().map(|&a| a == positive_class).collect();
    binary_roc(&column, &is_pos).map_err(|e| match e {
        MetricsError::NoNegatives { .. } => MetricsError::NoNegatives {
            class: positive_class,
        },
        other => other,
    })
}

/// Mean tpr of the curves over the union of their fpr breakpoints.
///
/// Between breakpoints each curve is interpolated linearly. Where a curve
/// rises vertically the averaged curve gets two points at that fpr, one for
/// the values just left of it and one for the values just right of it, so
/// the area of the average equals the average of the areas.
pub fn macro_average_roc(curves: &[RocCurve]) -> Result<RocCurve, MetricsError> {
    if curves.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut grid: Vec<f64> = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.fpr))
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut points = Vec::with_capacity(2 * grid.len());
    for &x in &grid {
        let left = order_free_mean(curves.iter().map(|c| c.tpr_left(x)));
        let right = order_free_mean(curves.iter().map(|c| c.tpr_right(x)));
        for tpr in [left, right] {
            if points.last().is_none_or(|p: &RocPoint| (p.fpr, p.tpr) != (x, tpr)) {
                points.push(RocPoint {
                    fpr: x,
                    tpr: tpr.clamp(0.0, 1.0),
                    threshold: None,
                });
            }
        }
    }
    snap_end(&mut points);
    RocCurve::new(points)
}

// Sums in sorted order so the result does not depend on curve order.
fn order_free_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

// Averages of exact 1.0 values can land a rounding step below it.
fn snap_end(points: &mut [RocPoint]) {
    if let Some(last) = points.last_mut() {
        if last.fpr == 1.0 && (1.0 - last.tpr).abs() < 1e-12 {
            last.tpr = 1.0;
        }
    }
}

/// Binary ROC over all (sample, class) decisions pooled together: each
/// sample contributes its true-class score as a positive and its other
/// scores as negatives.
pub fn micro_average_roc(scores: &[Vec<f64>], actual: &[usize]) -> Result<RocCurve, MetricsError> {
    let classes = check_scores(scores, actual)?;
    let mut pooled = Vec::with_capacity(scores.len() * classes);
    let mut is_pos = Vec::with_capacity(scores.len() * classes);
    for (row, &label) in scores.iter().zip(actual) {
        for (c, &s) in row.iter().enumerate() {
            pooled.push(s);
            is_pos.push(c == label);
        }
    }
    binary_roc(&pooled, &is_pos)
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(v: &[(f64, f64)]) -> RocCurve {
        RocCurve::new(
            v.iter()
                .map(|&(fpr, tpr)| RocPoint {
                    fpr,
                    tpr,
                    threshold: None,
                })
                .collect(),
        )
        .unwrap()
    }

    fn coords(c: &RocCurve) -> Vec<(f64, f64)> {
        c.points().iter().map(|p| (p.fpr, p.tpr)).collect()
    }

    #[test]
    fn perfect_separation_hits_top_left() {
        let c = binary_roc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert!(coords(&c).contains(&(0.0, 1.0)));
        assert_eq!(auc(&c), 1.0);
    }

    #[test]
    fn identical_scores_give_diagonal() {
        let c = binary_roc(&[0.5; 4], &[true, false, true, false]).unwrap();
        assert_eq!(coords(&c), vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(auc(&c), 0.5);
        assert_eq!(c.points()[1].threshold, Some(0.5));
    }

    #[test]
    fn one_vs_rest_reports_missing_class() {
        let scores = vec![vec![0.7, 0.3, 0.0], vec![0.2, 0.8, 0.0]];
        assert_eq!(
            roc_one_vs_rest(&scores, &[0, 1], 2),
            Err(MetricsError::ClassAbsent { class: 2 })
        );
        assert_eq!(
            roc_one_vs_rest(&scores, &[0, 0], 0),
            Err(MetricsError::NoNegatives { class: 0 })
        );
        let c = roc_one_vs_rest(&scores, &[0, 1], 1).unwrap();
        assert_eq!(auc(&c), 1.0);
    }

    #[test]
    fn macro_of_diagonal_and_perfect() {
        let diag = pts(&[(0.0, 0.0), (1.0, 1.0)]);
        let perfect = pts(&[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
        let m = macro_average_roc(&[diag.clone(), perfect.clone()]).unwrap();
        assert_eq!(coords(&m), vec![(0.0, 0.0), (0.0, 0.5), (1.0, 1.0)]);
        assert_eq!(auc(&m), 0.75);
        let swapped = macro_average_roc(&[perfect, diag]).unwrap();
        assert_eq!(m, swapped);
    }

    #[test]
    fn macro_of_identical_curves() {
        let c = pts(&[(0.0, 0.0), (0.25, 0.5), (0.5, 0.5), (1.0, 1.0)]);
        let m = macro_average_roc(&[c.clone(), c.clone()]).unwrap();
        assert_eq!(coords(&m), coords(&c));
        assert!(macro_average_roc(&[]).is_err());
    }

    #[test]
    fn macro_interpolates_between_breakpoints() {
        let a = pts(&[(0.0, 0.0), (0.5, 1.0), (1.0, 1.0)]);
        let b = pts(&[(0.0, 0.0), (1.0, 1.0)]);
        let m = macro_average_roc(&[a, b]).unwrap();
        assert_eq!(coords(&m), vec![(0.0, 0.0), (0.5, 0.75), (1.0, 1.0)]);
    }

    #[test]
    fn micro_single_sample() {
        let c = micro_average_roc(&[vec![0.9, 0.1]], &[0]).unwrap();
        assert_eq!(auc(&c), 1.0);
        assert!(micro_average_roc(&[], &[]).is_err());
    }

    #[test]
    fn invalid_curves_rejected() {
        let p = |fpr, tpr| RocPoint {
            fpr,
            tpr,
            threshold: None,
        };
        assert!(RocCurve::new(vec![]).is_err());
        assert!(RocCurve::new(vec![p(0.0, 0.1), p(1.0, 1.0)]).is_err());
        assert!(RocCurve::new(vec![p(0.0, 0.0), p(0.5, 0.6), p(0.4, 0.7), p(1.0, 1.0)]).is_err());
        assert!(RocCurve::new(vec![p(0.0, 0.0), p(0.9, 0.9)]).is_err());
    }

    fn binary_case() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec((0u8..6).prop_map(|s| s as f64 / 5.0), n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
    }

    proptest! {
        #[test]
        fn curves_are_monotone((scores, labels) in binary_case()) {
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let c = binary_roc(&scores, &labels).unwrap();
            for w in c.points().windows(2) {
                prop_assert!(w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr);
            }
            let a = auc(&c);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn macro_auc_is_mean_of_aucs((s1, l1) in binary_case(), (s2, l2) in binary_case()) {
            prop_assume!(l1.iter().any(|&l| l) && l1.iter().any(|&l| !l));
            prop_assume!(l2.iter().any(|&l| l) && l2.iter().any(|&l| !l));
            let a = binary_roc(&s1, &l1).unwrap();
            let b = binary_roc(&s2, &l2).unwrap();
            let m = macro_average_roc(&[a.clone(), b.clone()]).unwrap();
            prop_assert!((auc(&m) - (auc(&a) + auc(&b)) / 2.0).abs() < 1e-12);
        }
    }
}
