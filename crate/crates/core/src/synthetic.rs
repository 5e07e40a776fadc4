//! Synthetic multi-label data with linear boundaries through the origin.
//!
//! Points are drawn uniformly from the unit disk. Label k is relevant iff the
//! point lies on the non-negative side of the line through the origin whose
//! normal has angle θₖ. Noise either flips single labels or whole label
//! vectors, which gives known Bayes-optimal losses.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Attribute, AttributeSchema, Dataset, Example, LabelVector, Value};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Independent boundary angles, each label flipped with probability p.
    MarginalIndependence,
    /// Boundary angles within a narrow fan, each label flipped with probability p.
    MarginalDependence,
    /// Independent boundary angles, the whole label vector flipped with probability p.
    ConditionalDependence,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [
        Scenario::MarginalIndependence,
        Scenario::MarginalDependence,
        Scenario::ConditionalDependence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::MarginalIndependence => "marginal-independence",
            Scenario::MarginalDependence => "marginal-dependence",
            Scenario::ConditionalDependence => "conditional-dependence",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub scenario: Scenario,
    pub n_examples: usize,
    pub n_labels: usize,
    pub noise: f64,
    /// Width of the fan of boundary angles (radians), dependence scenario only.
    pub spread: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            scenario: Scenario::MarginalIndependence,
            n_examples: 10_000,
            n_labels: 6,
            noise: 0.1,
            spread: 0.1,
            seed: 1,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.noise) {
            return Err(Error::Config(format!("noise must be in [0, 1), got {}", self.noise)));
        }
        if self.n_labels == 0 || self.n_examples == 0 {
            return Err(Error::Config("need at least one example and one label".into()));
        }
        if !self.spread.is_finite() || self.spread < 0.0 {
            return Err(Error::Config(format!("spread must be finite and >= 0, got {}", self.spread)));
        }
        Ok(())
    }

    /// Analytic (Hamming, subset 0/1) losses of the Bayes-optimal classifier.
    pub fn bayes_losses(&self) -> (f64, f64) {
        let p = self.noise;
        match self.scenario {
            Scenario::ConditionalDependence => (p, p),
            _ => (p, 1.0 - (1.0 - p).powi(self.n_labels as i32)),
        }
    }
}

const DIRECTIONS_STREAM: u64 = 0;
const TRAIN_STREAM: u64 = 1;
const TEST_STREAM: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// True boundary normals of a generated problem; written as a sidecar file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boundaries {
    pub scenario: Scenario,
    pub noise: f64,
    pub seed: u64,
    /// Normal angle of each label's boundary, radians.
    pub angles: Vec<f64>,
}

impl Boundaries {
    pub fn from_config(config: &SyntheticConfig) -> Self {
        let mut rng = stream(config.seed, DIRECTIONS_STREAM);
        let angles = match config.scenario {
            Scenario::MarginalDependence => {
                let first = rng.gen_range(0.0..2.0 * PI);
                let half = config.spread / 2.0;
                (0..config.n_labels)
                    .map(|k| {
                        if k == 0 || half == 0.0 {
                            first
                        } else {
                            first + rng.gen_range(-half..half)
                        }
                    })
                    .collect()
            }
            _ => (0..config.n_labels).map(|_| rng.gen_range(0.0..2.0 * PI)).collect(),
        };
        Boundaries {
            scenario: config.scenario,
            noise: config.noise,
            seed: config.seed,
            angles,
        }
    }

    /// Noise-free labels of a point; points on a boundary are relevant.
    pub fn label(&self, x1: f64, x2: f64) -> LabelVector {
        let relevant: Vec<bool> = self
            .angles
            .iter()
            .map(|&a| x1 * a.cos() + x2 * a.sin() >= 0.0)
            .collect();
        LabelVector::from_bools(&relevant)
    }
}

pub struct SyntheticData {
    pub train: Dataset,
    pub test: Dataset,
    pub boundaries: Boundaries,
}

pub fn schema() -> AttributeSchema {
    AttributeSchema::new(vec![Attribute::numeric("x1"), Attribute::numeric("x2")]).expect("static schema")
}

fn label_names(n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("y{k}")).collect()
}

/// Uniform point in the closed unit disk.
fn disk_point<R: Rng>(rng: &mut R) -> (f64, f64) {
    let r = rng.gen::<f64>().sqrt();
    let phi = rng.gen_range(0.0..2.0 * PI);
    (r * phi.cos(), r * phi.sin())
}

fn sample<R: Rng>(config: &SyntheticConfig, boundaries: &Boundaries, n: usize, rng: &mut R) -> Result<Dataset> {
    let schema = schema();
    let mut examples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let (x1, x2) = disk_point(rng);
        let clean = boundaries.label(x1, x2);
        let noisy: Vec<i8> = match config.scenario {
            Scenario::ConditionalDependence => {
                let flip = rng.gen::<f64>() < config.noise;
                clean.as_slice().iter().map(|&y| if flip { -y } else { y }).collect()
            }
            _ => clean
                .as_slice()
                .iter()
                .map(|&y| if rng.gen::<f64>() < config.noise { -y } else { y })
                .collect(),
        };
        examples.push(Example::new(&schema, vec![Value::Numeric(x1), Value::Numeric(x2)])?);
        labels.push(LabelVector::new(noisy)?);
    }
    Dataset::new(schema, examples, labels, label_names(config.n_labels))
}

/// Train and test sets of `n_examples` each, drawn from disjoint streams.
pub fn generate(config: &SyntheticConfig) -> Result<SyntheticData> {
    config.validate()?;
    let boundaries = Boundaries::from_config(config);
    let train = sample(config, &boundaries, config.n_examples, &mut stream(config.seed, TRAIN_STREAM))?;
    let test = sample(config, &boundaries, config.n_examples, &mut stream(config.seed, TEST_STREAM))?;
    Ok(SyntheticData { train, test, boundaries })
}

/// A test set of arbitrary size from the test stream.
pub fn generate_test_set(config: &SyntheticConfig, n: usize) -> Result<Dataset> {
    config.validate()?;
    let boundaries = Boundaries::from_config(config);
    sample(config, &boundaries, n, &mut stream(config.seed, TEST_STREAM))
}

/// Noise-free labels, which minimize both Hamming and subset 0/1 loss for
/// noise rates below one half.
pub fn bayes_optimal_predict(boundaries: &Boundaries, example: &Example) -> Result<LabelVector> {
    match example.values() {
        [Value::Numeric(x1), Value::Numeric(x2)] => Ok(boundaries.label(*x1, *x2)),
        _ => Err(Error::Schema("synthetic examples have two numeric attributes".into())),
    }
}
