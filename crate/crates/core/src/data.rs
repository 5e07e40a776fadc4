//! Examples, labels, rules and ensembles.
//!
//! Everything here is immutable once built, so datasets and ensembles can be
//! shared read-only between worker threads.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::head::HeadKind;
use crate::losses::LossId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AttributeKind {
    Numeric,
    Nominal { values: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn numeric(name: impl Into<String>) -> Self {
        Attribute {
            name: name.into(),
            kind: AttributeKind::Numeric,
        }
    }

    pub fn nominal<S: Into<String>>(name: impl Into<String>, values: impl IntoIterator<Item = S>) -> Self {
        Attribute {
            name: name.into(),
            kind: AttributeKind::Nominal {
                values: values.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, AttributeKind::Numeric)
    }

    /// Position of `value` in the nominal domain, if this attribute is nominal.
    pub fn nominal_index(&self, value: &str) -> Option<u32> {
        match &self.kind {
            AttributeKind::Nominal { values } => values.iter().position(|v| v == value).map(|i| i as u32),
            AttributeKind::Numeric => None,
        }
    }

    pub fn nominal_values(&self) -> Option<&[String]> {
        match &self.kind {
            AttributeKind::Nominal { values } => Some(values),
            AttributeKind::Numeric => None,
        }
    }
}

/// Ordered attribute list with unique names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Attribute>", into = "Vec<Attribute>")]
pub struct AttributeSchema {
    attributes: Vec<Attribute>,
}

impl AttributeSchema {
    pub fn new(attributes: Vec<Attribute>) -> Result<Self> {
        let mut seen = HashSet::new();
        for attr in &attributes {
            if !seen.insert(attr.name.as_str()) {
                return Err(Error::Schema(format!("duplicate attribute name '{}'", attr.name)));
            }
            if let AttributeKind::Nominal { values } = &attr.kind {
                if values.is_empty() {
                    return Err(Error::Schema(format!(
                        "nominal attribute '{}' has an empty value set",
                        attr.name
                    )));
                }
            }
        }
        Ok(AttributeSchema { attributes })
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn attribute(&self, index: usize) -> Option<&Attribute> {
        self.attributes.get(index)
    }
}

impl TryFrom<Vec<Attribute>> for AttributeSchema {
    type Error = Error;

    fn try_from(attributes: Vec<Attribute>) -> Result<Self> {
        AttributeSchema::new(attributes)
    }
}

impl From<AttributeSchema> for Vec<Attribute> {
    fn from(schema: AttributeSchema) -> Self {
        schema.attributes
    }
}

/// A single attribute value. Nominal values are stored as indices into the
/// attribute's value set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Numeric(f64),
    Nominal(u32),
    Missing,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    values: Vec<Value>,
}

impl Example {
    pub fn new(schema: &AttributeSchema, values: Vec<Value>) -> Result<Self> {
        if values.len() != schema.len() {
            return Err(Error::Schema(format!(
                "example has {} values, schema has {} attributes",
                values.len(),
                schema.len()
            )));
        }
        for (attr, value) in schema.attributes().iter().zip(&values) {
            match (&attr.kind, value) {
                (_, Value::Missing) => {}
                (AttributeKind::Numeric, Value::Numeric(x)) => {
                    if x.is_nan() {
                        return Err(Error::Schema(format!("NaN value for attribute '{}'", attr.name)));
                    }
                }
                (AttributeKind::Nominal { values }, Value::Nominal(i)) => {
                    if *i as usize >= values.len() {
                        return Err(Error::Schema(format!(
                            "nominal index {i} out of range for attribute '{}'",
                            attr.name
                        )));
                    }
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "value {value:?} does not match the kind of attribute '{}'",
                        attr.name
                    )))
                }
            }
        }
        Ok(Example { values })
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn value(&self, attribute: usize) -> Value {
        self.values[attribute]
    }
}

/// Binary label vector with entries in {-1, +1}.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct LabelVector(Vec<i8>);

impl LabelVector {
    pub fn new(labels: Vec<i8>) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(Error::InvalidInput(format!("label entry {bad} is not -1 or +1")));
        }
        Ok(LabelVector(labels))
    }

    /// Maps `true` to +1 and `false` to -1.
    pub fn from_bools(relevant: &[bool]) -> Self {
        LabelVector(relevant.iter().map(|&b| if b { 1 } else { -1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn is_relevant(&self, label: usize) -> bool {
        self.0[label] > 0
    }
}

impl TryFrom<Vec<i8>> for LabelVector {
    type Error = Error;

    fn try_from(labels: Vec<i8>) -> Result<Self> {
        LabelVector::new(labels)
    }
}

impl From<LabelVector> for Vec<i8> {
    fn from(v: LabelVector) -> Self {
        v.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: AttributeSchema,
    examples: Vec<Example>,
    labels: Vec<LabelVector>,
    label_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        schema: AttributeSchema,
        examples: Vec<Example>,
        labels: Vec<LabelVector>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if examples.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} examples but {} label vectors",
                examples.len(),
                labels.len()
            )));
        }
        if let Some((i, y)) = labels.iter().enumerate().find(|(_, y)| y.len() != label_names.len()) {
            return Err(Error::Shape(format!(
                "label vector {i} has length {}, expected {}",
                y.len(),
                label_names.len()
            )));
        }
        if let Some(i) = examples.iter().position(|x| x.values.len() != schema.len()) {
            return Err(Error::Schema(format!("example {i} does not match the schema")));
        }
        Ok(Dataset {
            schema,
            examples,
            labels,
            label_names,
        })
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn labels(&self) -> &[LabelVector] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn num_examples(&self) -> usize {
        self.examples.len()
    }

    pub fn num_labels(&self) -> usize {
        self.label_names.len()
    }

    pub fn num_attributes(&self) -> usize {
        self.schema.len()
    }

    /// A new dataset made of the given rows, in order (duplicates allowed).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            label_names: self.label_names.clone(),
        }
    }

    /// Distinct label vectors in order of first occurrence.
    pub fn distinct_label_vectors(&self) -> Vec<LabelVector> {
        let mut seen = HashSet::new();
        self.labels
            .iter()
            .filter(|y| seen.insert(*y))
            .cloned()
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operator {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
}

impl Operator {
    pub fn is_numeric(self) -> bool {
        matches!(self, Operator::Le | Operator::Gt)
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Operator::Eq => "==",
            Operator::Ne => "!=",
            Operator::Le => "<=",
            Operator::Gt => ">",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Threshold {
    Numeric(f64),
    Nominal(u32),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Condition {
    pub attribute: usize,
    pub operator: Operator,
    pub threshold: Threshold,
}

impl Condition {
    pub fn le(attribute: usize, threshold: f64) -> Self {
        Condition {
            attribute,
            operator: Operator::Le,
            threshold: Threshold::Numeric(threshold),
        }
    }

    pub fn gt(attribute: usize, threshold: f64) -> Self {
        Condition {
            attribute,
            operator: Operator::Gt,
            threshold: Threshold::Numeric(threshold),
        }
    }

    pub fn eq(attribute: usize, value: u32) -> Self {
        Condition {
            attribute,
            operator: Operator::Eq,
            threshold: Threshold::Nominal(value),
        }
    }

    pub fn ne(attribute: usize, value: u32) -> Self {
        Condition {
            attribute,
            operator: Operator::Ne,
            threshold: Threshold::Nominal(value),
        }
    }

    /// Checks operator and threshold against the attribute kind.
    pub fn validate(&self, schema: &AttributeSchema) -> Result<()> {
        let attr = schema.attribute(self.attribute).ok_or_else(|| {
            Error::Schema(format!("condition refers to attribute {} which does not exist", self.attribute))
        })?;
        match (&attr.kind, self.operator.is_numeric(), self.threshold) {
            (AttributeKind::Numeric, true, Threshold::Numeric(t)) if t.is_finite() => Ok(()),
            (AttributeKind::Nominal { values }, false, Threshold::Nominal(v)) if (v as usize) < values.len() => Ok(()),
            _ => Err(Error::Schema(format!(
                "condition {self:?} is not valid for attribute '{}'",
                attr.name
            ))),
        }
    }

    /// Evaluates the condition on a single value. Missing values satisfy no
    /// condition.
    #[inline]
    pub fn test(&self, value: Value) -> Result<bool> {
        match (self.operator, self.threshold, value) {
            (_, _, Value::Missing) => Ok(false),
            (Operator::Le, Threshold::Numeric(t), Value::Numeric(x)) => Ok(x <= t),
            (Operator::Gt, Threshold::Numeric(t), Value::Numeric(x)) => Ok(x > t),
            (Operator::Eq, Threshold::Nominal(t), Value::Nominal(x)) => Ok(x == t),
            (Operator::Ne, Threshold::Nominal(t), Value::Nominal(x)) => Ok(x != t),
            _ => Err(Error::Schema(format!(
                "condition on attribute {} cannot be applied to value {value:?}",
                self.attribute
            ))),
        }
    }
}

/// Conjunction of conditions, kept in the order they were added.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Body {
    pub conditions: Vec<Condition>,
}

impl Body {
    pub fn empty() -> Self {
        Body::default()
    }

    pub fn new(conditions: Vec<Condition>) -> Self {
        Body { conditions }
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn covers(&self, example: &Example) -> Result<bool> {
        for c in &self.conditions {
            let value = *example.values.get(c.attribute).ok_or_else(|| {
                Error::Schema(format!("example has no attribute {}", c.attribute))
            })?;
            if !c.test(value)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Whether a head predicts for all labels or for a single one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadMode {
    Full,
    Single(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Head {
    scores: Vec<f64>,
    mode: HeadMode,
}

impl Head {
    pub fn full(scores: Vec<f64>) -> Result<Self> {
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput("head scores must be finite".into()));
        }
        Ok(Head {
            scores,
            mode: HeadMode::Full,
        })
    }

    /// Head predicting `score` for `label` and abstaining (0) for the others.
    pub fn single(num_labels: usize, label: usize, score: f64) -> Result<Self> {
        if label >= num_labels {
            return Err(Error::InvalidInput(format!(
                "label {label} out of range for {num_labels} labels"
            )));
        }
        if !score.is_finite() {
            return Err(Error::InvalidInput("head scores must be finite".into()));
        }
        let mut scores = vec![0.0; num_labels];
        scores[label] = score;
        Ok(Head {
            scores,
            mode: HeadMode::Single(label),
        })
    }

    pub fn zeros(num_labels: usize) -> Self {
        Head {
            scores: vec![0.0; num_labels],
            mode: HeadMode::Full,
        }
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn mode(&self) -> HeadMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Multiplies all scores by `factor`.
    pub fn scaled(&self, factor: f64) -> Head {
        Head {
            scores: self.scores.iter().map(|s| s * factor).collect(),
            mode: self.mode,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub body: Body,
    pub head: Head,
}

impl Rule {
    pub fn new(body: Body, head: Head) -> Self {
        Rule { body, head }
    }

    /// Head scores if the example is covered, the null vector otherwise.
    pub fn apply(&self, example: &Example) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.head.len()];
        self.add_to(example, &mut out)?;
        Ok(out)
    }

    /// Adds the rule's prediction for `example` to `scores`.
    #[inline]
    pub fn add_to(&self, example: &Example, scores: &mut [f64]) -> Result<bool> {
        let covered = self.body.covers(example)?;
        if covered {
            for (s, h) in scores.iter_mut().zip(self.head.scores()) {
                *s += h;
            }
        }
        Ok(covered)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMetadata {
    pub loss: LossId,
    pub head: HeadKind,
    pub shrinkage: f64,
    pub l2: f64,
    pub seed: u64,
}

/// Ordered list of rules whose first member is the default rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    rules: Vec<Rule>,
    schema: AttributeSchema,
    label_names: Vec<String>,
    known_label_vectors: Vec<LabelVector>,
    metadata: EnsembleMetadata,
}

impl Ensemble {
    pub fn new(
        rules: Vec<Rule>,
        schema: AttributeSchema,
        label_names: Vec<String>,
        known_label_vectors: Vec<LabelVector>,
        metadata: EnsembleMetadata,
    ) -> Result<Self> {
        match rules.first() {
            None => return Err(Error::InvalidInput("an ensemble needs at least the default rule".into())),
            Some(first) if !first.body.is_empty() => {
                return Err(Error::InvalidInput("the first rule must have an empty body".into()))
            }
            _ => {}
        }
        let num_labels = label_names.len();
        for (t, rule) in rules.iter().enumerate() {
            if rule.head.len() != num_labels {
                return Err(Error::Shape(format!(
                    "rule {t} predicts {} scores, expected {num_labels}",
                    rule.head.len()
                )));
            }
            for c in &rule.body.conditions {
                c.validate(&schema)?;
            }
        }
        if let Some(y) = known_label_vectors.iter().find(|y| y.len() != num_labels) {
            return Err(Error::Shape(format!("known label vector {y:?} has the wrong length")));
        }
        Ok(Ensemble {
            rules,
            schema,
            label_names,
            known_label_vectors,
            metadata,
        })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn num_labels(&self) -> usize {
        self.label_names.len()
    }

    pub fn known_label_vectors(&self) -> &[LabelVector] {
        &self.known_label_vectors
    }

    pub fn metadata(&self) -> &EnsembleMetadata {
        &self.metadata
    }

    /// The first `t` rules as an ensemble of their own.
    pub fn prefix(&self, t: usize) -> Result<Ensemble> {
        if t == 0 || t > self.rules.len() {
            return Err(Error::InvalidInput(format!(
                "prefix length {t} outside 1..={}",
                self.rules.len()
            )));
        }
        Ok(Ensemble {
            rules: self.rules[..t].to_vec(),
            ..self.clone()
        })
    }

    /// Vector sum of all rule predictions for one example.
    pub fn aggregate(&self, example: &Example) -> Result<Vec<f64>> {
        let mut scores = vec![0.0; self.num_labels()];
        for rule in &self.rules {
            rule.add_to(example, &mut scores)?;
        }
        Ok(scores)
    }

    /// Aggregated scores for every example of `dataset`, row-major N×ℓ.
    pub fn score_matrix(&self, examples: &[Example]) -> Result<Vec<Vec<f64>>> {
        crate::par::try_map(examples.len(), |i| self.aggregate(&examples[i]))
    }
}
