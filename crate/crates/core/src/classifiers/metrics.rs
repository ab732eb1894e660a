use serde::{Deserialize, Serialize};

use crate::datasets::ClassLabel;

/// Test-set metrics. `confusion[true][predicted]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub f1_macro: f64,
    pub confusion: [[usize; 3]; 3],
}

impl EvalMetrics {
    pub fn from_confusion(confusion: [[usize; 3]; 3]) -> Self {
        let total: usize = confusion.iter().flatten().sum();
        let correct: usize = (0..3).map(|k| confusion[k][k]).sum();
        let accuracy = if total == 0 { 0.0 } else { correct as f64 / total as f64 };
        let f1_macro = (0..3).map(|k| per_class_f1(&confusion, k)).sum::<f64>() / 3.0;
        Self {
            accuracy,
            f1_macro,
            confusion,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (ClassLabel, ClassLabel)>) -> Self {
        let mut c = [[0; 3]; 3];
        for (truth, pred) in pairs {
            c[truth.ordinal()][pred.ordinal()] += 1;
        }
        Self::from_confusion(c)
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn f1_per_class(&self) -> [f64; 3] {
        [0, 1, 2].map(|k| per_class_f1(&self.confusion, k))
    }
}

/// Zero when precision + recall is zero.
fn per_class_f1(c: &[[usize; 3]; 3], k: usize) -> f64 {
    let tp = c[k][k] as f64;
    let predicted: usize = (0..3).map(|t| c[t][k]).sum();
    let actual: usize = c[k].iter().sum();
    let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
    let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let m = EvalMetrics::from_confusion([[4, 0, 0], [0, 5, 0], [0, 0, 6]]);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.f1_macro, 1.0);
    }

    #[test]
    fn hand_computed_macro_f1() {
        let m = EvalMetrics::from_confusion([[10, 0, 0], [0, 0, 10], [0, 0, 10]]);
        assert!((m.accuracy - 20.0 / 30.0).abs() < 1e-12);
        let f1 = m.f1_per_class();
        assert!((f1[0] - 1.0).abs() < 1e-12);
        assert_eq!(f1[1], 0.0);
        assert!((f1[2] - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.f1_macro - 5.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn totals_and_ranges() {
        let m = EvalMetrics::from_pairs([
            (ClassLabel::Real, ClassLabel::Gan),
            (ClassLabel::Gan, ClassLabel::Gan),
            (ClassLabel::Dm, ClassLabel::Real),
        ]);
        assert_eq!(m.total(), 3);
        assert!((0.0..=1.0).contains(&m.accuracy) && (0.0..=1.0).contains(&m.f1_macro));
        assert_eq!(m.confusion[0].iter().sum::<usize>(), 1);
    }

    proptest::proptest! {
        #[test]
        fn totals_match_and_scores_are_bounded(pairs in proptest::collection::vec((0usize..3, 0usize..3), 0..200)) {
            let n = pairs.len();
            let m = EvalMetrics::from_pairs(pairs.into_iter().map(|(t, p)| {
                (ClassLabel::from_ordinal(t).unwrap(), ClassLabel::from_ordinal(p).unwrap())
            }));
            proptest::prop_assert_eq!(m.total(), n);
            proptest::prop_assert!((0.0..=1.0).contains(&m.accuracy));
            proptest::prop_assert!((0.0..=1.0).contains(&m.f1_macro));
        }
    }
}
