//! Bipartition evaluation measures.

use serde::{Deserialize, Serialize};

use crate::data::LabelVector;
use crate::error::{Error, Result};

fn check_shapes(truth: &[LabelVector], predicted: &[LabelVector]) -> Result<usize> {
    if truth.len() != predicted.len() {
        return Err(Error::Shape(format!(
            "{} true label vectors but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Shape("cannot evaluate an empty set of examples".into()));
    }
    let num_labels = truth[0].len();
    if truth.iter().chain(predicted).any(|y| y.len() != num_labels) {
        return Err(Error::Shape("label vectors differ in length".into()));
    }
    Ok(num_labels)
}

/// Fraction of wrongly predicted labels.
pub fn hamming_loss(truth: &[LabelVector], predicted: &[LabelVector]) -> Result<f64> {
    let num_labels = check_shapes(truth, predicted)?;
    let wrong: usize = truth
        .iter()
        .zip(predicted)
        .map(|(y, p)| y.as_slice().iter().zip(p.as_slice()).filter(|(a, b)| a != b).count())
        .sum();
    Ok(wrong as f64 / (truth.len() * num_labels) as f64)
}

/// Fraction of examples with at least one wrong label.
pub fn subset_zero_one_loss(truth: &[LabelVector], predicted: &[LabelVector]) -> Result<f64> {
    check_shapes(truth, predicted)?;
    let wrong = truth.iter().zip(predicted).filter(|(y, p)| y != p).count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// Mean per-example F1 of the relevant-label sets. An example where both
/// sets are empty scores 1.
pub fn example_based_f1(truth: &[LabelVector], predicted: &[LabelVector]) -> Result<f64> {
    check_shapes(truth, predicted)?;
    let total: f64 = truth
        .iter()
        .zip(predicted)
        .map(|(y, p)| {
            let (mut both, mut relevant, mut predicted) = (0usize, 0usize, 0usize);
            for (a, b) in y.as_slice().iter().zip(p.as_slice()) {
                relevant += usize::from(*a > 0);
                predicted += usize::from(*b > 0);
                both += usize::from(*a > 0 && *b > 0);
            }
            if relevant + predicted == 0 {
                1.0
            } else {
                2.0 * both as f64 / (relevant + predicted) as f64
            }
        })
        .sum();
    Ok(total / truth.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub hamming_loss: f64,
    pub subset_zero_one_loss: f64,
    pub example_f1: f64,
    pub examples: usize,
}

impl Report {
    pub fn compute(truth: &[LabelVector], predicted: &[LabelVector]) -> Result<Self> {
        Ok(Report {
            hamming_loss: hamming_loss(truth, predicted)?,
            subset_zero_one_loss: subset_zero_one_loss(truth, predicted)?,
            example_f1: example_based_f1(truth, predicted)?,
            examples: truth.len(),
        })
    }

    /// Flat `key=value` lines.
    pub fn to_key_value(&self) -> String {
        format!(
            "examples={}\nhamming_loss={}\nsubset_zero_one_loss={}\nexample_f1={}\n",
            self.examples, self.hamming_loss, self.subset_zero_one_loss, self.example_f1
        )
    }
}
