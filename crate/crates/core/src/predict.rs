//! Turning aggregated scores into label vectors.

use std::fmt;
use std::str::FromStr;

use crate::data::{Ensemble, Example, LabelVector};
use crate::error::{Error, Result};
use crate::losses::{ExampleWiseLogistic, LossFunction, LossId};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decoding {
    Sign,
    KnownVectors,
}

impl Decoding {
    /// Default decoding for models trained on `loss`.
    pub fn for_loss(loss: LossId) -> Self {
        match loss {
            LossId::LabelWiseLogistic => Decoding::Sign,
            LossId::ExampleWiseLogistic => Decoding::KnownVectors,
        }
    }
}

impl fmt::Display for Decoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decoding::Sign => "sign",
            Decoding::KnownVectors => "known-vectors",
        })
    }
}

impl FromStr for Decoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sign" => Ok(Decoding::Sign),
            "known-vectors" => Ok(Decoding::KnownVectors),
            other => Err(Error::Config(format!("unknown decoding '{other}' (expected sign or known-vectors)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PredictionStrategy {
    SignThreshold,
    /// Argmin of the example-wise logistic loss over these label vectors.
    KnownVectors(Vec<LabelVector>),
}

impl PredictionStrategy {
    /// Builds a known-vector strategy; duplicates are dropped, first
    /// occurrence wins.
    pub fn known_vectors(candidates: Vec<LabelVector>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::InvalidInput("known-vector decoding needs at least one candidate".into()));
        }
        let mut seen = std::collections::HashSet::new();
        let distinct = candidates.into_iter().filter(|y| seen.insert(y.clone())).collect();
        Ok(PredictionStrategy::KnownVectors(distinct))
    }

    pub fn for_ensemble(ensemble: &Ensemble, decoding: Decoding) -> Result<Self> {
        match decoding {
            Decoding::Sign => Ok(PredictionStrategy::SignThreshold),
            Decoding::KnownVectors => Self::known_vectors(ensemble.known_label_vectors().to_vec()),
        }
    }

    pub fn decode(&self, scores: &[f64]) -> Result<LabelVector> {
        match self {
            PredictionStrategy::SignThreshold => predict_sign(scores),
            PredictionStrategy::KnownVectors(c) => predict_known_vector(scores, c),
        }
    }
}

/// Element-wise sign with sgn(0) = −1.
pub fn predict_sign(scores: &[f64]) -> Result<LabelVector> {
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("cannot decode NaN scores".into()));
    }
    let labels = scores.iter().map(|&s| if s > 0.0 { 1 } else { -1 }).collect();
    LabelVector::new(labels)
}

/// Candidate with the lowest example-wise logistic loss; the earliest one on
/// ties.
pub fn predict_known_vector(scores: &[f64], candidates: &[LabelVector]) -> Result<LabelVector> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("cannot decode non-finite scores".into()));
    }
    let mut best: Option<(&LabelVector, f64)> = None;
    for y in candidates {
        if y.len() != scores.len() {
            return Err(Error::Shape("candidate label vector has the wrong length".into()));
        }
        let loss = ExampleWiseLogistic.value(y.as_slice(), scores);
        if best.is_none_or(|(_, b)| loss < b) {
            best = Some((y, loss));
        }
    }
    best.map(|(y, _)| y.clone())
        .ok_or_else(|| Error::InvalidInput("no candidate label vectors".into()))
}

/// Predicted label vectors for a batch of examples.
pub fn predict(ensemble: &Ensemble, examples: &[Example], strategy: &PredictionStrategy) -> Result<Vec<LabelVector>> {
    par::try_map(examples.len(), |i| strategy.decode(&ensemble.aggregate(&examples[i])?))
}

/// Decodes a row-major score matrix.
pub fn decode_scores(scores: &[f64], num_labels: usize, strategy: &PredictionStrategy) -> Result<Vec<LabelVector>> {
    if num_labels == 0 || !scores.len().is_multiple_of(num_labels) {
        return Err(Error::Shape("score matrix does not have whole rows".into()));
    }
    par::try_map(scores.len() / num_labels, |i| {
        strategy.decode(&scores[i * num_labels..(i + 1) * num_labels])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn y(v: &[i8]) -> LabelVector {
        LabelVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sign_examples() {
        assert_eq!(predict_sign(&[0.3, -0.2]).unwrap(), y(&[1, -1]));
        assert_eq!(predict_sign(&[0.0, 0.0]).unwrap(), y(&[-1, -1]));
        assert_eq!(predict_sign(&[1e-12, -1e-12]).unwrap(), y(&[1, -1]));
        assert!(predict_sign(&[f64::NAN]).is_err());
    }

    #[test]
    fn known_vector_examples() {
        let c = [y(&[1, 1]), y(&[-1, -1])];
        assert_eq!(predict_known_vector(&[2.0, 1.0], &c).unwrap(), y(&[1, 1]));
        assert_eq!(predict_known_vector(&[-5.0, 3.0], &[y(&[1, -1])]).unwrap(), y(&[1, -1]));
        let c = [y(&[1, -1]), y(&[-1, 1])];
        assert_eq!(predict_known_vector(&[0.0, 0.0], &c).unwrap(), y(&[1, -1]));
        assert!(predict_known_vector(&[0.0, 0.0], &[]).is_err());
    }

    #[test]
    fn strategy_deduplicates() {
        let s = PredictionStrategy::known_vectors(vec![y(&[1]), y(&[-1]), y(&[1])]).unwrap();
        assert_eq!(s, PredictionStrategy::KnownVectors(vec![y(&[1]), y(&[-1])]));
        assert!(PredictionStrategy::known_vectors(vec![]).is_err());
    }

    #[test]
    fn decoding_defaults() {
        assert_eq!(Decoding::for_loss(LossId::LabelWiseLogistic), Decoding::Sign);
        assert_eq!(Decoding::for_loss(LossId::ExampleWiseLogistic), Decoding::KnownVectors);
        assert_eq!("known-vectors".parse::<Decoding>().unwrap(), Decoding::KnownVectors);
    }
}
