//! Hold-out grid search over shrinkage, L2 weight and number of rules.
//!
//! Each (shrinkage, L2) pair is trained once up to the largest rule count;
//! smaller rule counts are evaluated on prefixes of that ensemble.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boosting::{TrainConfig, Trainer};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::ScoreMatrix;
use crate::metrics::{hamming_loss, subset_zero_one_loss};
use crate::par;
use crate::predict::{decode_scores, Decoding, PredictionStrategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMetric {
    Hamming,
    Subset01,
}

impl SelectionMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMetric::Hamming => "hamming",
            SelectionMetric::Subset01 => "subset01",
        }
    }
}

impl fmt::Display for SelectionMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hamming" => Ok(SelectionMetric::Hamming),
            "subset01" => Ok(SelectionMetric::Subset01),
            _ => Err(Error::Config(format!("unknown metric '{s}' (expected hamming or subset01)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearchConfig {
    pub shrinkage: Vec<f64>,
    pub l2: Vec<f64>,
    pub rules: Vec<usize>,
    pub validation_fraction: f64,
    pub metric: SelectionMetric,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        GridSearchConfig {
            shrinkage: vec![0.1, 0.3, 0.5],
            l2: vec![0.0, 0.25, 1.0, 4.0, 16.0, 64.0],
            rules: vec![50, 100, 250, 500, 1000, 2500, 5000, 10000],
            validation_fraction: 0.2,
            metric: SelectionMetric::Subset01,
        }
    }
}

impl GridSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shrinkage.is_empty() || self.l2.is_empty() || self.rules.is_empty() {
            return Err(Error::Config("every grid needs at least one value".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "validation fraction must be in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if self.rules.contains(&0) {
            return Err(Error::Config("rule counts must be at least 1".into()));
        }
        Ok(())
    }
}

/// One evaluated grid point. `error` is set when training failed, in which
/// case both losses are NaN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub shrinkage: f64,
    pub l2: f64,
    pub rules: usize,
    pub hamming: f64,
    pub subset01: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl GridCell {
    pub fn metric(&self, metric: SelectionMetric) -> f64 {
        match metric {
            SelectionMetric::Hamming => self.hamming,
            SelectionMetric::Subset01 => self.subset01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: TrainConfig,
    pub metric: SelectionMetric,
    pub best_value: f64,
    pub cells: Vec<GridCell>,
}

/// Random train/validation split of example indices.
pub fn holdout_split(num_examples: usize, validation_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if num_examples < 2 {
        return Err(Error::InvalidInput("need at least two examples to split".into()));
    }
    let mut indices: Vec<usize> = (0..num_examples).collect();
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = ((num_examples as f64 * validation_fraction).round() as usize).clamp(1, num_examples - 1);
    let validation = indices.split_off(num_examples - n_val);
    Ok((indices, validation))
}

/// Tunes `base` (loss, head, seed and sampling switches are kept) on a
/// hold-out split of `dataset`.
pub fn grid_search(dataset: &Dataset, base: &TrainConfig, config: &GridSearchConfig) -> Result<GridSearchResult> {
    config.validate()?;
    let (train_idx, val_idx) = holdout_split(dataset.num_examples(), config.validation_fraction, base.seed)?;
    let train = dataset.subset(&train_idx);
    let validation = dataset.subset(&val_idx);

    let mut rules = config.rules.clone();
    rules.sort_unstable();
    rules.dedup();
    let pairs: Vec<(f64, f64)> = config
        .shrinkage
        .iter()
        .flat_map(|&eta| config.l2.iter().map(move |&l2| (eta, l2)))
        .collect();
    let blocks = par::map(pairs.len(), |p| {
        let (shrinkage, l2) = pairs[p];
        let cfg = TrainConfig {
            shrinkage,
            l2,
            rules: *rules.last().expect("non-empty"),
            ..base.clone()
        };
        evaluate_prefixes(&train, &validation, &cfg, &rules).unwrap_or_else(|e| {
            rules
                .iter()
                .map(|&t| GridCell {
                    shrinkage,
                    l2,
                    rules: t,
                    hamming: f64::NAN,
                    subset01: f64::NAN,
                    error: Some(e.to_string()),
                })
                .collect()
        })
    });
    let cells: Vec<GridCell> = blocks.into_iter().flatten().collect();

    let best = cells
        .iter()
        .filter(|c| c.error.is_none())
        .min_by(|a, b| {
            a.metric(config.metric)
                .total_cmp(&b.metric(config.metric))
                .then(a.rules.cmp(&b.rules))
                .then(a.l2.total_cmp(&b.l2))
                .then(a.shrinkage.total_cmp(&b.shrinkage))
        })
        .ok_or_else(|| {
            let reason = cells.first().and_then(|c| c.error.clone()).unwrap_or_default();
            Error::Config(format!("every grid point failed to train: {reason}"))
        })?;
    Ok(GridSearchResult {
        best: TrainConfig {
            shrinkage: best.shrinkage,
            l2: best.l2,
            rules: best.rules,
            ..base.clone()
        },
        metric: config.metric,
        best_value: best.metric(config.metric),
        cells,
    })
}

fn evaluate_prefixes(train: &Dataset, validation: &Dataset, config: &TrainConfig, rules: &[usize]) -> Result<Vec<GridCell>> {
    let strategy = match Decoding::for_loss(config.loss) {
        Decoding::Sign => PredictionStrategy::SignThreshold,
        Decoding::KnownVectors => PredictionStrategy::known_vectors(train.distinct_label_vectors())?,
    };
    let num_labels = train.num_labels();
    let examples = validation.examples();
    let mut scores = ScoreMatrix::zeros(validation.num_examples(), num_labels);
    let mut trainer = Trainer::new(train, config.clone())?;
    let mut cells = Vec::with_capacity(rules.len());
    let mut next = 0;
    while !trainer.is_done() {
        let rule = trainer.step()?;
        let covered = examples
            .iter()
            .map(|x| rule.body.covers(x))
            .collect::<Result<Vec<_>>>()?;
        scores.add_to_rows(&covered, rule.head.scores());
        if trainer.rules().len() == rules[next] {
            let predicted = decode_scores(scores.as_slice(), num_labels, &strategy)?;
            cells.push(GridCell {
                shrinkage: config.shrinkage,
                l2: config.l2,
                rules: rules[next],
                hamming: hamming_loss(validation.labels(), &predicted)?,
                subset01: subset_zero_one_loss(validation.labels(), &predicted)?,
                error: None,
            });
            next += 1;
        }
    }
    Ok(cells)
}

/// Tab-separated table of all cells.
pub fn report_tsv(result: &GridSearchResult) -> String {
    let mut out = String::from("shrinkage\tl2\trules\thamming\tsubset01\terror\n");
    for c in &result.cells {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            c.shrinkage,
            c.l2,
            c.rules,
            c.hamming,
            c.subset01,
            c.error.as_deref().unwrap_or("")
        ));
    }
    out
}
