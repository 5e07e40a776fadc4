//! Dataset files.

mod arff;
mod csv;

use std::path::Path;

pub use self::arff::{load_arff, parse_arff, save_arff, to_arff_string};
pub use self::csv::{load_csv, parse_csv};

use crate::data::{Attribute, AttributeKind, AttributeSchema, Dataset, Example, LabelVector, Value};
use crate::error::{Error, Result};

/// Which attributes of a file hold the labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelSpec {
    /// The last `n` attributes.
    Trailing(usize),
    /// Attributes with these names, in this order.
    Names(Vec<String>),
}

/// Loads `.arff` or `.csv` by extension.
pub fn load_dataset(path: impl AsRef<Path>, labels: &LabelSpec) -> Result<Dataset> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("arff") => load_arff(path, labels),
        Some("csv") => load_csv(path, labels),
        _ => Err(Error::InvalidInput(format!(
            "cannot tell the format of '{}' (expected .arff or .csv)",
            path.display()
        ))),
    }
}

/// Splits parsed rows into features and ±1 labels. Label attributes must be
/// nominal with domain {0,1}.
pub(crate) fn assemble(
    attributes: Vec<Attribute>,
    rows: Vec<(usize, Vec<Value>)>,
    labels: &LabelSpec,
) -> Result<Dataset> {
    let label_columns: Vec<usize> = match labels {
        LabelSpec::Trailing(n) => {
            if *n == 0 || *n > attributes.len() {
                return Err(Error::Schema(format!(
                    "cannot take {n} trailing label attributes from {} attributes",
                    attributes.len()
                )));
            }
            (attributes.len() - n..attributes.len()).collect()
        }
        LabelSpec::Names(names) => {
            if names.is_empty() {
                return Err(Error::Schema("no label attributes given".into()));
            }
            names
                .iter()
                .map(|name| {
                    attributes
                        .iter()
                        .position(|a| &a.name == name)
                        .ok_or_else(|| Error::Schema(format!("label attribute '{name}' not found")))
                })
                .collect::<Result<_>>()?
        }
    };
    // index of the value "1" in each label's domain
    let positive: Vec<u32> = label_columns
        .iter()
        .map(|&c| {
            let attr = &attributes[c];
            match &attr.kind {
                AttributeKind::Nominal { values }
                    if values.len() == 2 && values.iter().any(|v| v == "0") && values.iter().any(|v| v == "1") =>
                {
                    Ok(attr.nominal_index("1").expect("checked"))
                }
                _ => Err(Error::Schema(format!(
                    "label attribute '{}' must be nominal with domain {{0,1}}",
                    attr.name
                ))),
            }
        })
        .collect::<Result<_>>()?;

    let mut is_label = vec![false; attributes.len()];
    for &c in &label_columns {
        is_label[c] = true;
    }
    let label_names = label_columns.iter().map(|&c| attributes[c].name.clone()).collect();
    let features: Vec<Attribute> = attributes
        .iter()
        .zip(&is_label)
        .filter(|(_, l)| !**l)
        .map(|(a, _)| a.clone())
        .collect();
    let schema = AttributeSchema::new(features)?;

    let mut examples = Vec::with_capacity(rows.len());
    let mut label_vectors = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        let y = label_columns
            .iter()
            .zip(&positive)
            .map(|(&c, &pos)| match row[c] {
                Value::Nominal(v) => Ok(if v == pos { 1 } else { -1 }),
                _ => Err(Error::Schema(format!(
                    "line {line}: label '{}' is missing",
                    attributes[c].name
                ))),
            })
            .collect::<Result<Vec<i8>>>()?;
        let x: Vec<Value> = row
            .into_iter()
            .zip(&is_label)
            .filter(|(_, l)| !**l)
            .map(|(v, _)| v)
            .collect();
        examples.push(Example::new(&schema, x)?);
        label_vectors.push(LabelVector::new(y)?);
    }
    Dataset::new(schema, examples, label_vectors, label_names)
}
