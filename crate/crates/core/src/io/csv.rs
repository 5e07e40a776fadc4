//! CSV with a header row. A column is numeric when its first non-missing
//! entry parses as a number; otherwise it is nominal with values in order of
//! first appearance. Empty cells and `?` are missing. Label columns hold 0/1.

use std::fs;
use std::path::Path;

use crate::data::{Attribute, Dataset, Value};
use crate::error::{Error, Result};
use crate::io::{assemble, LabelSpec};

pub fn load_csv(path: impl AsRef<Path>, labels: &LabelSpec) -> Result<Dataset> {
    parse_csv(&fs::read_to_string(path)?, labels)
}

enum Column {
    Unknown,
    Numeric,
    Nominal(Vec<String>),
}

pub fn parse_csv(text: &str, labels: &LabelSpec) -> Result<Dataset> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(::csv::Trim::All)
        .from_reader(text.as_bytes());
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let is_label: Vec<bool> = match labels {
        LabelSpec::Trailing(n) => (0..names.len()).map(|i| i + n >= names.len()).collect(),
        LabelSpec::Names(l) => names.iter().map(|n| l.contains(n)).collect(),
    };

    let mut columns: Vec<Column> = is_label
        .iter()
        .map(|&l| {
            if l {
                Column::Nominal(vec!["0".into(), "1".into()])
            } else {
                Column::Unknown
            }
        })
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut row = Vec::with_capacity(names.len());
        for (c, cell) in record.iter().enumerate() {
            if cell.is_empty() || cell == "?" {
                row.push(Value::Missing);
                continue;
            }
            if matches!(columns[c], Column::Unknown) {
                columns[c] = if cell.parse::<f64>().is_ok() {
                    Column::Numeric
                } else {
                    Column::Nominal(Vec::new())
                };
            }
            let value = match &mut columns[c] {
                Column::Numeric => Value::Numeric(cell.parse().map_err(|_| {
                    Error::parse(line, format!("'{cell}' is not a number (column '{}')", names[c]))
                })?),
                Column::Nominal(values) if is_label[c] => match values.iter().position(|v| v == cell) {
                    Some(i) => Value::Nominal(i as u32),
                    None => {
                        return Err(Error::Schema(format!(
                            "line {line}: label '{}' must be 0 or 1, got '{cell}'",
                            names[c]
                        )))
                    }
                },
                Column::Nominal(values) => match values.iter().position(|v| v == cell) {
                    Some(i) => Value::Nominal(i as u32),
                    None => {
                        values.push(cell.to_string());
                        Value::Nominal((values.len() - 1) as u32)
                    }
                },
                Column::Unknown => unreachable!("resolved above"),
            };
            row.push(value);
        }
        rows.push((line, row));
    }
    let attributes = names
        .into_iter()
        .zip(columns)
        .map(|(name, column)| match column {
            // a column without any value defaults to numeric
            Column::Unknown | Column::Numeric => Attribute::numeric(name),
            Column::Nominal(values) => Attribute::nominal(name, values),
        })
        .collect();
    assemble(attributes, rows, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "x,colour,a,b
1.5,red,1,0
,blue,0,0
-2,red,1,1
";

    #[test]
    fn infers_column_types() {
        let d = parse_csv(TEXT, &LabelSpec::Trailing(2)).unwrap();
        assert!(d.schema().attributes()[0].is_numeric());
        assert_eq!(d.schema().attributes()[1].nominal_values().unwrap(), &["red", "blue"]);
        assert_eq!(d.examples()[1].values(), &[Value::Missing, Value::Nominal(1)]);
        assert_eq!(d.labels()[2].as_slice(), &[1, 1]);
        assert_eq!(d.labels()[1].as_slice(), &[-1, -1]);
    }

    #[test]
    fn named_labels() {
        let d = parse_csv(TEXT, &LabelSpec::Names(vec!["b".into(), "a".into()])).unwrap();
        assert_eq!(d.label_names(), &["b".to_string(), "a".to_string()]);
        assert_eq!(d.labels()[0].as_slice(), &[-1, 1]);
    }

    #[test]
    fn bad_cells() {
        let bad = TEXT.replace("-2,red", "oops,red");
        assert!(matches!(parse_csv(&bad, &LabelSpec::Trailing(2)), Err(Error::Parse { line: 4, .. })));
        let bad = TEXT.replace("red,1,0", "red,2,0");
        assert!(matches!(parse_csv(&bad, &LabelSpec::Trailing(2)), Err(Error::Schema(_))));
        let bad = TEXT.replace("red,1,0", "red,1");
        assert!(matches!(parse_csv(&bad, &LabelSpec::Trailing(2)), Err(Error::Parse { .. })));
    }
}
