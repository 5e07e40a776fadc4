//! Test-set performance as rules are added.
//!
//! Rules are additive, so the prediction of the first t rules of an ensemble
//! equals the prediction of a model trained with t rules under the same seed.
//! Each variant is therefore trained once up to the last checkpoint and
//! evaluated on every prefix along the way.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::boosting::{TrainConfig, Trainer};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::head::HeadKind;
use crate::losses::{LossId, ScoreMatrix};
use crate::metrics::{hamming_loss, subset_zero_one_loss};
use crate::par;
use crate::predict::{decode_scores, Decoding, PredictionStrategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variant {
    pub loss: LossId,
    pub head: HeadKind,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::new(LossId::LabelWiseLogistic, HeadKind::Single),
        Variant::new(LossId::LabelWiseLogistic, HeadKind::Multi),
        Variant::new(LossId::ExampleWiseLogistic, HeadKind::Single),
        Variant::new(LossId::ExampleWiseLogistic, HeadKind::Multi),
    ];

    pub const fn new(loss: LossId, head: HeadKind) -> Self {
        Variant { loss, head }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let loss = match self.loss {
            LossId::LabelWiseLogistic => "lw",
            LossId::ExampleWiseLogistic => "ew",
        };
        write!(f, "{loss}-{}", self.head)
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant '{s}' (expected lw-single, lw-multi, ew-single or ew-multi)")))
    }
}

/// 1, 2, 4, …, 512, 1000.
pub fn default_checkpoints() -> Vec<usize> {
    let mut c: Vec<usize> = (0..10).map(|i| 1 << i).collect();
    c.push(1000);
    c
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub rules: usize,
    pub hamming: f64,
    pub subset01: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub variant: Variant,
    pub points: Vec<TrajectoryPoint>,
}

impl Series {
    pub fn at(&self, rules: usize) -> Option<&TrajectoryPoint> {
        self.points.iter().find(|p| p.rules == rules)
    }
}

/// Trains every variant with `base` (loss, head and rule count overridden)
/// and evaluates it on `test` at each checkpoint.
pub fn run_trajectory(
    train: &Dataset,
    test: &Dataset,
    variants: &[Variant],
    checkpoints: &[usize],
    base: &TrainConfig,
) -> Result<Vec<Series>> {
    if checkpoints.is_empty() || checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("checkpoints must be strictly ascending and >= 1".into()));
    }
    if train.num_labels() != test.num_labels() || train.schema() != test.schema() {
        return Err(Error::Shape("train and test sets are not compatible".into()));
    }
    par::try_map(variants.len(), |v| run_variant(train, test, variants[v], checkpoints, base))
}

fn run_variant(
    train: &Dataset,
    test: &Dataset,
    variant: Variant,
    checkpoints: &[usize],
    base: &TrainConfig,
) -> Result<Series> {
    let config = TrainConfig {
        loss: variant.loss,
        head: variant.head,
        rules: *checkpoints.last().expect("non-empty"),
        ..base.clone()
    };
    let strategy = match Decoding::for_loss(variant.loss) {
        Decoding::Sign => PredictionStrategy::SignThreshold,
        Decoding::KnownVectors => PredictionStrategy::known_vectors(train.distinct_label_vectors())?,
    };
    let num_labels = train.num_labels();
    let mut scores = ScoreMatrix::zeros(test.num_examples(), num_labels);
    let mut trainer = Trainer::new(train, config)?;
    let mut points = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    while !trainer.is_done() {
        let rule = trainer.step()?;
        let examples = test.examples();
        let covered = par::try_map(examples.len(), |i| rule.body.covers(&examples[i]))?;
        scores.add_to_rows(&covered, rule.head.scores());
        let t = trainer.rules().len();
        if checkpoints[next] == t {
            let predicted = decode_scores(scores.as_slice(), num_labels, &strategy)?;
            points.push(TrajectoryPoint {
                rules: t,
                hamming: hamming_loss(test.labels(), &predicted)?,
                subset01: subset_zero_one_loss(test.labels(), &predicted)?,
            });
            next += 1;
        }
    }
    Ok(Series { variant, points })
}

/// Tab-separated blocks, one per variant, separated by two blank lines.
pub fn to_tsv(series: &[Series]) -> String {
    let mut out = String::new();
    for (i, s) in series.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# {}", s.variant);
        out.push_str("rules\thamming\tsubset01\n");
        for p in &s.points {
            let _ = writeln!(out, "{}\t{}\t{}", p.rules, p.hamming, p.subset01);
        }
    }
    out
}
