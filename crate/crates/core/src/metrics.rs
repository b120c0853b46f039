//! Overall, average and per-category accuracy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Category;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Accuracy per question category present in the evaluated samples.
    pub per_class_accuracy: BTreeMap<Category, f64>,
    pub overall_accuracy: f64,
    /// Unweighted mean over the categories in `per_class_accuracy`.
    pub average_accuracy: f64,
    /// `confusion[truth][predicted]` over answer classes.
    pub confusion: Vec<Vec<u64>>,
    pub n_samples: usize,
}

impl Metrics {
    pub fn compute(
        categories: &[Category],
        predictions: &[usize],
        labels: &[usize],
        n_classes: usize,
    ) -> Result<Self> {
        if categories.len() != predictions.len() || labels.len() != predictions.len() {
            return Err(Error::Dimension(format!(
                "{} categories, {} predictions, {} labels",
                categories.len(),
                predictions.len(),
                labels.len()
            )));
        }
        if predictions.is_empty() {
            return Err(Error::Dimension("no samples to evaluate".into()));
        }
        let mut confusion = vec![vec![0u64; n_classes]; n_classes];
        let mut tally: BTreeMap<Category, (usize, usize)> = BTreeMap::new();
        let mut correct = 0;
        for ((&c, &p), &y) in categories.iter().zip(predictions).zip(labels) {
            for label in [p, y] {
                if label >= n_classes {
                    return Err(Error::Label { label, n_classes });
                }
            }
            confusion[y][p] += 1;
            let entry = tally.entry(c).or_default();
            entry.1 += 1;
            if p == y {
                entry.0 += 1;
                correct += 1;
            }
        }
        let per_class_accuracy: BTreeMap<Category, f64> = tally
            .into_iter()
            .map(|(c, (hit, n))| (c, hit as f64 / n as f64))
            .collect();
        let average_accuracy =
            per_class_accuracy.values().sum::<f64>() / per_class_accuracy.len() as f64;
        Ok(Self {
            overall_accuracy: correct as f64 / predictions.len() as f64,
            average_accuracy,
            per_class_accuracy,
            confusion,
            n_samples: predictions.len(),
        })
    }

    /// Logs a warning for each expected category that had no samples and so
    /// does not contribute to AA.
    pub fn warn_missing(&self, expected: &[Category]) -> Vec<Category> {
        let missing: Vec<Category> = expected
            .iter()
            .copied()
            .filter(|c| !self.per_class_accuracy.contains_key(c))
            .collect();
        for c in &missing {
            log::warn!(
                "category `{}` absent from split; AA covers present categories only",
                c.name()
            );
        }
        missing
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Category::*;

    #[test]
    fn constant_predictor() {
        let cats: Vec<Category> = [Count, Presence, Comparison, RuralUrban]
            .iter()
            .flat_map(|&c| std::iter::repeat_n(c, 4))
            .collect();
        let labels: Vec<usize> = (0..16)
            .map(|i| if i % 4 == 0 { 0 } else { 1 + i % 3 })
            .collect();
        let m = Metrics::compute(&cats, &[0; 16], &labels, 4).unwrap();
        assert_eq!(m.overall_accuracy, 0.25);
        assert_eq!(m.average_accuracy, 0.25);
    }

    #[test]
    fn hand_counted_example() {
        let cats = [Count, Count, Count, Count, Presence, Presence];
        let labels = [0, 1, 2, 3, 0, 1];
        let preds = [0, 1, 2, 0, 0, 0];
        let m = Metrics::compute(&cats, &preds, &labels, 4).unwrap();
        assert!((m.overall_accuracy - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.average_accuracy, 0.625);
        assert_eq!(m.per_class_accuracy[&Count], 0.75);
        assert_eq!(m.confusion[3][0], 1);
    }

    #[test]
    fn perfect_predictor() {
        let cats = [Area, Count, Presence];
        let m = Metrics::compute(&cats, &[1, 2, 3], &[1, 2, 3], 4).unwrap();
        assert_eq!((m.overall_accuracy, m.average_accuracy), (1.0, 1.0));
    }

    #[test]
    fn absent_category_is_left_out() {
        let m = Metrics::compute(&[Count, Presence], &[0, 1], &[0, 0], 2).unwrap();
        assert_eq!(m.warn_missing(&[Count, Presence, Area]), vec![Area]);
        assert_eq!(m.average_accuracy, 0.5);
    }

    #[test]
    fn duplicating_a_category_keeps_aa() {
        let cats = [Count, Count, Presence, Presence];
        let labels = [0, 1, 0, 1];
        let preds = [0, 0, 0, 0];
        let base = Metrics::compute(&cats, &preds, &labels, 2).unwrap();
        let cats2 = [Count, Count, Count, Count, Presence, Presence];
        let dup = Metrics::compute(&cats2, &[0, 0, 0, 0, 0, 0], &[0, 1, 0, 1, 0, 1], 2).unwrap();
        assert_eq!(base.average_accuracy, dup.average_accuracy);

        let cats3 = [Count, Count, Presence, Presence, Presence, Presence];
        let skew = Metrics::compute(&cats3, &[0, 0, 1, 1, 1, 1], &[0, 0, 1, 1, 1, 0], 2).unwrap();
        assert_ne!(skew.overall_accuracy, skew.average_accuracy);
    }

    #[test]
    fn out_of_range_label_is_an_error() {
        assert!(matches!(
            Metrics::compute(&[Count], &[5], &[0], 3),
            Err(Error::Label {
                label: 5,
                n_classes: 3
            })
        ));
    }
}
