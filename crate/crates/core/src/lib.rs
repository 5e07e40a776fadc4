//! Gradient boosted multi-label classification rules.
//!
//! Rules are learned stagewise by minimizing a second-order approximation of
//! either the label-wise or the example-wise logistic loss. Heads predict one
//! label or all labels at once; the latter can capture label dependencies when
//! paired with the example-wise loss.

pub mod boosting;
pub mod data;
pub mod error;
pub mod head;
pub mod io;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod par;
pub mod predict;
pub mod refine;
pub mod synthetic;
pub mod trajectory;
pub mod tune;

pub use boosting::{train, TrainConfig, Trainer};
pub use data::{
    Attribute, AttributeKind, AttributeSchema, Body, Condition, Dataset, Ensemble, Example, Head, HeadMode,
    LabelVector, Operator, Rule, Threshold, Value,
};
pub use error::{Error, Result};
pub use head::HeadKind;
pub use io::LabelSpec;
pub use losses::LossId;
pub use metrics::Report;
pub use predict::{predict, Decoding, PredictionStrategy};
