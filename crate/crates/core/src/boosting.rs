//! Stagewise training of a rule ensemble.
//!
//! The first rule is a default rule with an empty body whose head minimizes
//! the objective over all training examples. Every later round draws a
//! bootstrap sample, refines a rule on it, refits the head on the full
//! training set and multiplies it by the shrinkage factor.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Body, Dataset, Ensemble, EnsembleMetadata, Head, HeadMode, LabelVector, Rule};
use crate::error::{Error, Result};
use crate::head::{find_head, AggregatedStats, HeadKind, HeadTarget};
use crate::losses::{GradHessStore, LossFunction, LossId, ScoreMatrix};
use crate::par;
use crate::refine::{refine_rule, FeatureIndex, RefinementContext};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossId,
    pub head: HeadKind,
    /// Number of rules including the default rule.
    pub rules: usize,
    pub shrinkage: f64,
    pub l2: f64,
    /// Refine each rule on a bootstrap sample of N examples.
    pub bagging: bool,
    /// Consider a random attribute subset at every refinement step.
    pub feature_sampling: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossId::LabelWiseLogistic,
            head: HeadKind::Single,
            rules: 1000,
            shrinkage: 0.3,
            l2: 1.0,
            bagging: true,
            feature_sampling: true,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rules < 1 {
            return Err(Error::Config("the number of rules must be at least 1".into()));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(Error::Config(format!("shrinkage must be in (0, 1], got {}", self.shrinkage)));
        }
        if !self.l2.is_finite() || self.l2 < 0.0 {
            return Err(Error::Config(format!("l2 must be finite and >= 0, got {}", self.l2)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
enum Stream {
    Bagging = 0,
    Features = 1,
}

/// Random stream for one purpose in one round. Streams are independent of
/// each other and of every other round, so disabling bagging does not change
/// the attribute draws and training a prefix reproduces the same rules.
fn round_rng(seed: u64, round: usize, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((round as u64) << 1) | stream as u64);
    rng
}

/// Bootstrap multiplicities: N draws with replacement.
pub fn bootstrap_weights<R: Rng>(num_examples: usize, rng: &mut R) -> Vec<f64> {
    let mut weights = vec![0.0; num_examples];
    for _ in 0..num_examples {
        weights[rng.gen_range(0..num_examples)] += 1.0;
    }
    weights
}

/// What happened in one round, kept for diagnostics and tests.
#[derive(Clone, Debug)]
pub struct RoundRecord {
    /// Head fitted on the full training set, before shrinkage.
    pub fitted_head: Head,
    /// Objective after each refinement step, on the sample.
    pub refinement_objectives: Vec<f64>,
    /// Training examples covered by the rule.
    pub covered: usize,
}

/// Incremental trainer; each call to [`Trainer::step`] adds one rule.
pub struct Trainer<'a> {
    dataset: &'a Dataset,
    config: TrainConfig,
    loss: &'static dyn LossFunction,
    index: FeatureIndex,
    store: GradHessStore,
    scores: ScoreMatrix,
    rules: Vec<Rule>,
    records: Vec<RoundRecord>,
}

impl<'a> Trainer<'a> {
    pub fn new(dataset: &'a Dataset, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if dataset.num_examples() == 0 {
            return Err(Error::InvalidInput("cannot train on an empty dataset".into()));
        }
        if dataset.num_labels() == 0 {
            return Err(Error::InvalidInput("the dataset has no labels".into()));
        }
        let loss = config.loss.function();
        Ok(Trainer {
            dataset,
            loss,
            index: FeatureIndex::new(dataset),
            store: GradHessStore::init(loss, dataset),
            scores: ScoreMatrix::zeros(dataset.num_examples(), dataset.num_labels()),
            rules: Vec::with_capacity(config.rules),
            records: Vec::with_capacity(config.rules),
            config,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    /// Scores of the training examples under the rules learned so far.
    pub fn scores(&self) -> &ScoreMatrix {
        &self.scores
    }

    pub fn store(&self) -> &GradHessStore {
        &self.store
    }

    pub fn is_done(&self) -> bool {
        self.rules.len() >= self.config.rules
    }

    /// Learns the next rule and applies it to the training scores.
    pub fn step(&mut self) -> Result<&Rule> {
        let n = self.dataset.num_examples();
        let round = self.rules.len();
        let (rule, record, covered) = if round == 0 {
            let stats = AggregatedStats::from_weights(&self.store, &vec![1.0; n]);
            let head = find_head(&stats, HeadTarget::Full, self.config.l2)?;
            let record = RoundRecord {
                fitted_head: head.clone(),
                refinement_objectives: Vec::new(),
                covered: n,
            };
            (Rule::new(Body::empty(), head), record, vec![true; n])
        } else {
            let weights = if self.config.bagging {
                bootstrap_weights(n, &mut round_rng(self.config.seed, round, Stream::Bagging))
            } else {
                vec![1.0; n]
            };
            let ctx = RefinementContext {
                dataset: self.dataset,
                store: &self.store,
                index: &self.index,
                head: self.config.head,
                l2: self.config.l2,
                feature_sampling: self.config.feature_sampling,
            };
            let mut rng = round_rng(self.config.seed, round, Stream::Features);
            let refinement = refine_rule(&ctx, &weights, &mut rng)?;
            let body = refinement.rule.body;

            let examples = self.dataset.examples();
            let covered = par::try_map(n, |i| body.covers(&examples[i]))?;
            let mask: Vec<f64> = covered.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
            let stats = AggregatedStats::from_weights(&self.store, &mask);
            let target = match refinement.rule.head.mode() {
                HeadMode::Single(label) => HeadTarget::Single(Some(label)),
                HeadMode::Full => HeadTarget::Full,
            };
            let fitted = find_head(&stats, target, self.config.l2)?;
            let head = fitted.scaled(self.config.shrinkage);
            let record = RoundRecord {
                fitted_head: fitted,
                refinement_objectives: refinement.objectives,
                covered: covered.iter().filter(|c| **c).count(),
            };
            (Rule::new(body, head), record, covered)
        };
        self.store
            .update_covered(self.loss, self.dataset, &covered, rule.head.scores(), &mut self.scores);
        self.rules.push(rule);
        self.records.push(record);
        Ok(self.rules.last().expect("just pushed"))
    }

    /// Trains the remaining rules.
    pub fn run(&mut self) -> Result<()> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(())
    }

    pub fn ensemble(&self) -> Result<Ensemble> {
        Ensemble::new(
            self.rules.clone(),
            self.dataset.schema().clone(),
            self.dataset.label_names().to_vec(),
            self.dataset.distinct_label_vectors(),
            EnsembleMetadata {
                loss: self.config.loss,
                head: self.config.head,
                shrinkage: self.config.shrinkage,
                l2: self.config.l2,
                seed: self.config.seed,
            },
        )
    }
}

/// Trains an ensemble of exactly `config.rules` rules.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<Ensemble> {
    let mut trainer = Trainer::new(dataset, config.clone())?;
    trainer.run()?;
    trainer.ensemble()
}

/// Training loss plus the L2 penalty of every rule head.
pub fn regularized_objective(
    loss: &dyn LossFunction,
    labels: &[LabelVector],
    scores: &ScoreMatrix,
    rules: &[Rule],
    l2: f64,
) -> f64 {
    let data: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, y)| loss.value(y.as_slice(), scores.row(i)))
        .sum();
    let penalty: f64 = rules
        .iter()
        .map(|r| 0.5 * l2 * r.head.scores().iter().map(|p| p * p).sum::<f64>())
        .sum();
    data + penalty
}
