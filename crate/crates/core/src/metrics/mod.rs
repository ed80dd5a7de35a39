//! Classification metrics: accuracy, confusion matrices, one-vs-rest ROC
//! curves with macro and micro averaging, and trapezoidal AUC.

mod report;
mod roc;

use thiserror::Error;

pub use report::{roc_csv, roc_svg, summary_csv, SummaryRow};
pub use roc::{
    auc, binary_roc, macro_average_roc, micro_average_roc, roc_one_vs_rest, RocCurve, RocPoint,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {predicted} predictions for {actual} labels")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("no samples")]
    Empty,
    #[error("class {class} does not occur among the labels")]
    ClassAbsent { class: usize },
    #[error("every sample belongs to class {class}; no negatives for its ROC curve")]
    NoNegatives { class: usize },
    #[error("sample {sample} has {got} scores, expected {expected}")]
    ScoreWidth {
        sample: usize,
        expected: usize,
        got: usize,
    },
    #[error("label {label} of sample {sample} is outside 0..{classes}")]
    LabelOutOfRange {
        sample: usize,
        label: usize,
        classes: usize,
    },
    #[error("invalid ROC curve: {0}")]
    InvalidCurve(&'static str),
}

/// Fraction of positions where `predicted` equals `actual`.
pub fn accuracy(predicted: &[usize], actual: &[usize]) -> Result<f64, MetricsError> {
    check_lengths(predicted.len(), actual.len())?;
    let hits = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    Ok(hits as f64 / actual.len() as f64)
}

fn check_lengths(predicted: usize, actual: usize) -> Result<(), MetricsError> {
    if predicted != actual {
        return Err(MetricsError::LengthMismatch { predicted, actual });
    }
    if actual == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Counts indexed `[actual][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(predicted: &[usize], actual: &[usize], classes: usize) -> Result<Self, MetricsError> {
        check_lengths(predicted.len(), actual.len())?;
        let mut counts = vec![vec![0; classes]; classes];
        for (sample, (&p, &a)) in predicted.iter().zip(actual).enumerate() {
            for label in [p, a] {
                if label >= classes {
                    return Err(MetricsError::LabelOutOfRange {
                        sample,
                        label,
                        classes,
                    });
                }
            }
            counts[a][p] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, actual: usize, predicted: usize) -> usize {
        self.counts[actual][predicted]
    }

    pub fn trace(&self) -> usize {
        (0..self.classes()).map(|c| self.counts[c][c]).sum()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// CSV with one row per actual class and one column per predicted class.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("actual");
        for c in 0..self.classes() {
            out.push_str(&format!(",pred_{c}"));
        }
        out.push('\n');
        for (a, row) in self.counts.iter().enumerate() {
            out.push_str(&a.to_string());
            for n in row {
                out.push_str(&format!(",{n}"));
            }
            out.push('\n');
        }
        out
    }
}
