use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CLASSES: usize = 5;

fn check_labels(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    if pred.is_empty() {
        return Err(Error::Empty("label list"));
    }
    match pred.iter().chain(truth).find(|&&l| l >= CLASSES) {
        Some(&bad) => Err(Error::LabelOutOfRange(bad)),
        None => Ok(()),
    }
}

/// Fraction of samples whose predicted label is within one level of the truth.
pub fn rough_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_labels(pred, truth)?;
    let hits = pred.iter().zip(truth).filter(|(&p, &t)| p.abs_diff(t) <= 1).count();
    Ok(hits as f64 / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    /// Macro average over classes that occur in either list.
    pub precision: f64,
    pub f1: f64,
}

/// Exact-match accuracy with macro precision and F1. A class that is never
/// predicted contributes precision 0; classes absent from both lists are
/// left out of the average.
pub fn classification_metrics(pred: &[usize], truth: &[usize]) -> Result<ClassificationMetrics> {
    check_labels(pred, truth)?;
    let mut confusion = [[0usize; CLASSES]; CLASSES];
    for (&p, &t) in pred.iter().zip(truth) {
        confusion[t][p] += 1;
    }
    let mut precision = 0.0;
    let mut f1 = 0.0;
    let mut present = 0;
    for c in 0..CLASSES {
        let tp = confusion[c][c];
        let predicted: usize = (0..CLASSES).map(|t| confusion[t][c]).sum();
        let actual: usize = confusion[c].iter().sum();
        if predicted == 0 && actual == 0 {
            continue;
        }
        present += 1;
        if predicted > 0 {
            precision += tp as f64 / predicted as f64;
        }
        f1 += 2.0 * tp as f64 / (predicted + actual) as f64;
    }
    let correct: usize = (0..CLASSES).map(|c| confusion[c][c]).sum();
    Ok(ClassificationMetrics {
        accuracy: correct as f64 / pred.len() as f64,
        precision: precision / present as f64,
        f1: f1 / present as f64,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn rough_accuracy_examples() {
        assert_eq!(rough_accuracy(&[0, 1, 4], &[0, 1, 4]).unwrap(), 1.0);
        assert_eq!(rough_accuracy(&[2], &[4]).unwrap(), 0.0);
        assert_eq!(rough_accuracy(&[3, 0, 2, 2], &[4, 2, 2, 1]).unwrap(), 0.75);
        assert!(matches!(rough_accuracy(&[5], &[0]), Err(Error::LabelOutOfRange(5))));
        assert!(rough_accuracy(&[], &[]).is_err());
        assert!(rough_accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn classification_examples() {
        let perfect = classification_metrics(&[0, 3, 4, 3], &[0, 3, 4, 3]).unwrap();
        assert_eq!((perfect.accuracy, perfect.precision, perfect.f1), (1.0, 1.0, 1.0));

        // class 0: tp 1, fp 1, fn 0 -> P 1/2, F1 2/3; class 1: tp 0, fp 0, fn 1 -> P 0, F1 0
        let m = classification_metrics(&[0, 0], &[0, 1]).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert!((m.precision - 0.25).abs() < 1e-15);
        assert!((m.f1 - 1.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn rough_accuracy_symmetric(
            pairs in prop::collection::vec((0usize..5, 0usize..5), 1..50)
        ) {
            let (p, t): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            prop_assert_eq!(rough_accuracy(&p, &t).unwrap(), rough_accuracy(&t, &p).unwrap());
            let m = classification_metrics(&p, &t).unwrap();
            prop_assert!(m.accuracy <= rough_accuracy(&p, &t).unwrap());
            for v in [m.accuracy, m.precision, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
