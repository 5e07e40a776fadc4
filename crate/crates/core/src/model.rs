//! Versioned JSON model documents.
//!
//! Field order is fixed by the document structs below. Scores are written
//! with the shortest representation that parses back to the same `f64`, so a
//! save/load cycle is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{
    Attribute, AttributeSchema, Body, Condition, Ensemble, EnsembleMetadata, Head, HeadMode, LabelVector, Operator,
    Rule, Threshold,
};
use crate::error::{Error, Result};
use crate::head::HeadKind;
use crate::losses::LossId;

pub const FORMAT: &str = "mlrules-model";
pub const VERSION: u32 = 1;

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    format: String,
    version: u32,
    loss: LossId,
    head: HeadKind,
    shrinkage: f64,
    l2: f64,
    seed: u64,
    attributes: Vec<Attribute>,
    labels: Vec<String>,
    known_label_vectors: Vec<LabelVector>,
    rules: Vec<RuleDocument>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDocument {
    conditions: Vec<ConditionDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
    scores: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConditionDocument {
    attribute: String,
    operator: Operator,
    threshold: ThresholdDocument,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ThresholdDocument {
    Number(f64),
    Value(String),
}

pub fn to_string(ensemble: &Ensemble) -> Result<String> {
    let schema = ensemble.schema();
    let rules = ensemble
        .rules()
        .iter()
        .map(|rule| {
            let conditions = rule
                .body
                .conditions
                .iter()
                .map(|c| {
                    let attr = &schema.attributes()[c.attribute];
                    let threshold = match c.threshold {
                        Threshold::Numeric(t) => ThresholdDocument::Number(t),
                        Threshold::Nominal(v) => ThresholdDocument::Value(
                            attr.nominal_values().expect("validated nominal attribute")[v as usize].clone(),
                        ),
                    };
                    ConditionDocument {
                        attribute: attr.name.clone(),
                        operator: c.operator,
                        threshold,
                    }
                })
                .collect();
            RuleDocument {
                conditions,
                label: match rule.head.mode() {
                    HeadMode::Single(label) => Some(label),
                    HeadMode::Full => None,
                },
                scores: rule.head.scores().to_vec(),
            }
        })
        .collect();
    let meta = ensemble.metadata();
    let doc = ModelDocument {
        format: FORMAT.to_string(),
        version: VERSION,
        loss: meta.loss,
        head: meta.head,
        shrinkage: meta.shrinkage,
        l2: meta.l2,
        seed: meta.seed,
        attributes: schema.attributes().to_vec(),
        labels: ensemble.label_names().to_vec(),
        known_label_vectors: ensemble.known_label_vectors().to_vec(),
        rules,
    };
    let mut out = serde_json::to_string_pretty(&doc)?;
    out.push('\n');
    Ok(out)
}

pub fn from_str(text: &str) -> Result<Ensemble> {
    let header: Header = serde_json::from_str(text)?;
    if header.format != FORMAT {
        return Err(Error::InvalidInput(format!(
            "not a model document (format '{}', expected '{FORMAT}')",
            header.format
        )));
    }
    if header.version != VERSION {
        return Err(Error::UnsupportedVersion {
            found: header.version,
            expected: VERSION,
        });
    }
    let doc: ModelDocument = serde_json::from_str(text)?;
    let schema = AttributeSchema::new(doc.attributes)?;
    let num_labels = doc.labels.len();
    let rules = doc
        .rules
        .into_iter()
        .enumerate()
        .map(|(t, r)| {
            let conditions = r
                .conditions
                .into_iter()
                .map(|c| condition_from_document(&schema, c))
                .collect::<Result<Vec<_>>>()?;
            let head = match r.label {
                None => Head::full(r.scores)?,
                Some(label) => {
                    if r.scores.len() != num_labels
                        || label >= num_labels
                        || r.scores.iter().enumerate().any(|(k, s)| k != label && *s != 0.0)
                    {
                        return Err(Error::InvalidInput(format!(
                            "rule {t}: single-label head must have exactly one nonzero score at label {label}"
                        )));
                    }
                    Head::single(num_labels, label, r.scores[label])?
                }
            };
            Ok(Rule::new(Body::new(conditions), head))
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(
        rules,
        schema,
        doc.labels,
        doc.known_label_vectors,
        EnsembleMetadata {
            loss: doc.loss,
            head: doc.head,
            shrinkage: doc.shrinkage,
            l2: doc.l2,
            seed: doc.seed,
        },
    )
}

fn condition_from_document(schema: &AttributeSchema, c: ConditionDocument) -> Result<Condition> {
    let attribute = schema
        .attributes()
        .iter()
        .position(|a| a.name == c.attribute)
        .ok_or_else(|| Error::Schema(format!("condition refers to unknown attribute '{}'", c.attribute)))?;
    let attr = &schema.attributes()[attribute];
    let threshold = match c.threshold {
        ThresholdDocument::Number(t) => Threshold::Numeric(t),
        ThresholdDocument::Value(v) => Threshold::Nominal(
            attr.nominal_index(&v)
                .ok_or_else(|| Error::Schema(format!("'{v}' is not a value of attribute '{}'", attr.name)))?,
        ),
    };
    let condition = Condition {
        attribute,
        operator: c.operator,
        threshold,
    };
    condition.validate(schema)?;
    Ok(condition)
}

pub fn save(ensemble: &Ensemble, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_string(ensemble)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Ensemble> {
    from_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ensemble() -> Ensemble {
        let schema =
            AttributeSchema::new(vec![Attribute::numeric("x"), Attribute::nominal("c", ["red", "green"])]).unwrap();
        let rules = vec![
            Rule::new(Body::empty(), Head::full(vec![0.1, -0.30000000000000004]).unwrap()),
            Rule::new(
                Body::new(vec![Condition::le(0, 0.5), Condition::ne(1, 1)]),
                Head::single(2, 1, -1e-300).unwrap(),
            ),
        ];
        Ensemble::new(
            rules,
            schema,
            vec!["a".into(), "b".into()],
            vec![LabelVector::new(vec![1, -1]).unwrap()],
            EnsembleMetadata {
                loss: LossId::ExampleWiseLogistic,
                head: HeadKind::Single,
                shrinkage: 0.3,
                l2: 0.25,
                seed: 9,
            },
        )
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let e = ensemble();
        let text = to_string(&e).unwrap();
        assert_eq!(from_str(&text).unwrap(), e);
        assert!(text.contains("\"version\": 1"));
        assert!(text.contains("\"threshold\": \"green\""));
    }

    #[test]
    fn truncated_document_fails() {
        let text = to_string(&ensemble()).unwrap();
        let err = from_str(&text[..text.len() / 2]).unwrap_err();
        assert!(matches!(err, Error::Model(_)));
        assert!(err.to_string().contains("line"));
    }

    #[test]
    fn other_version_fails() {
        let text = to_string(&ensemble()).unwrap().replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(
            from_str(&text),
            Err(Error::UnsupportedVersion { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn unknown_attribute_fails() {
        let text = to_string(&ensemble()).unwrap().replace("\"attribute\": \"x\"", "\"attribute\": \"z\"");
        assert!(matches!(from_str(&text), Err(Error::Schema(_))));
    }
}
