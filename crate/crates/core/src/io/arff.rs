//! ARFF reader and writer (dense and sparse rows, numeric and nominal
//! attributes, `?` for missing values).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::{Attribute, AttributeKind, Dataset, Value};
use crate::error::{Error, Result};
use crate::io::{assemble, LabelSpec};

/// Reads an ARFF file and splits off the label attributes.
pub fn load_arff(path: impl AsRef<Path>, labels: &LabelSpec) -> Result<Dataset> {
    parse_arff(&fs::read_to_string(path)?, labels)
}

pub fn parse_arff(text: &str, labels: &LabelSpec) -> Result<Dataset> {
    let mut attributes: Vec<Attribute> = Vec::new();
    let mut rows: Vec<(usize, Vec<Value>)> = Vec::new();
    let mut in_data = false;

    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if !in_data {
            let lower = line.to_ascii_lowercase();
            if lower.starts_with("@relation") {
                continue;
            } else if lower.starts_with("@attribute") {
                attributes.push(parse_attribute(&line["@attribute".len()..], line_no)?);
            } else if lower.starts_with("@data") {
                in_data = true;
            } else {
                return Err(Error::parse(line_no, format!("unexpected header line '{line}'")));
            }
            continue;
        }
        let values = if line.starts_with('{') {
            parse_sparse_row(line, &attributes, line_no)?
        } else {
            parse_dense_row(line, &attributes, line_no)?
        };
        rows.push((line_no, values));
    }
    if !in_data {
        return Err(Error::parse(text.lines().count(), "missing @data section"));
    }
    assemble(attributes, rows, labels)
}

fn parse_attribute(rest: &str, line_no: usize) -> Result<Attribute> {
    let rest = rest.trim();
    let (name, rest) = take_token(rest).ok_or_else(|| Error::parse(line_no, "attribute without a name"))?;
    let rest = rest.trim();
    if rest.starts_with('{') {
        let close = rest
            .rfind('}')
            .ok_or_else(|| Error::parse(line_no, "unterminated nominal value list"))?;
        let values = split_values(&rest[1..close], line_no)?;
        if values.is_empty() {
            return Err(Error::parse(line_no, format!("nominal attribute '{name}' has no values")));
        }
        return Ok(Attribute::nominal(name, values));
    }
    match rest.to_ascii_lowercase().as_str() {
        "numeric" | "real" | "integer" => Ok(Attribute::numeric(name)),
        other => Err(Error::parse(
            line_no,
            format!("unsupported type '{other}' for attribute '{name}'"),
        )),
    }
}

/// First whitespace-delimited or quoted token and the remainder.
fn take_token(s: &str) -> Option<(String, &str)> {
    let s = s.trim_start();
    let first = s.chars().next()?;
    if first == '\'' || first == '"' {
        let mut out = String::new();
        let mut escaped = false;
        for (i, c) in s.char_indices().skip(1) {
            if escaped {
                out.push(c);
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == first {
                return Some((out, &s[i + 1..]));
            } else {
                out.push(c);
            }
        }
        None
    } else {
        let end = s.find(char::is_whitespace).unwrap_or(s.len());
        Some((s[..end].to_string(), &s[end..]))
    }
}

/// Splits a comma-separated list, honoring single and double quotes.
fn split_values(s: &str, line_no: usize) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    let mut quoted = false;
    let mut escaped = false;
    for c in s.chars() {
        if let Some(q) = quote {
            if escaped {
                current.push(c);
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            } else {
                current.push(c);
            }
            continue;
        }
        match c {
            '\'' | '"' => {
                if current.trim().is_empty() {
                    current.clear();
                }
                quote = Some(c);
                quoted = true;
            }
            ',' => {
                out.push(finish(&mut current, &mut quoted));
            }
            _ => current.push(c),
        }
    }
    if quote.is_some() {
        return Err(Error::parse(line_no, "unterminated quote"));
    }
    if !current.trim().is_empty() || quoted || !out.is_empty() {
        out.push(finish(&mut current, &mut quoted));
    }
    Ok(out)
}

fn finish(current: &mut String, quoted: &mut bool) -> String {
    let v = if *quoted {
        current.clone()
    } else {
        current.trim().to_string()
    };
    current.clear();
    *quoted = false;
    v
}

fn parse_value(token: &str, attr: &Attribute, line_no: usize) -> Result<Value> {
    if token == "?" {
        return Ok(Value::Missing);
    }
    match &attr.kind {
        AttributeKind::Numeric => token.parse::<f64>().map(Value::Numeric).map_err(|_| {
            Error::parse(line_no, format!("'{token}' is not a number (attribute '{}')", attr.name))
        }),
        AttributeKind::Nominal { .. } => attr.nominal_index(token).map(Value::Nominal).ok_or_else(|| {
            Error::Schema(format!(
                "line {line_no}: '{token}' is not a value of attribute '{}'",
                attr.name
            ))
        }),
    }
}

fn parse_dense_row(line: &str, attributes: &[Attribute], line_no: usize) -> Result<Vec<Value>> {
    let tokens = split_values(line, line_no)?;
    if tokens.len() != attributes.len() {
        return Err(Error::parse(
            line_no,
            format!("row has {} values, expected {}", tokens.len(), attributes.len()),
        ));
    }
    tokens
        .iter()
        .zip(attributes)
        .map(|(t, a)| parse_value(t, a, line_no))
        .collect()
}

/// Omitted entries are 0 for numeric attributes and the first declared value
/// for nominal ones.
fn parse_sparse_row(line: &str, attributes: &[Attribute], line_no: usize) -> Result<Vec<Value>> {
    let inner = line
        .strip_prefix('{')
        .and_then(|s| s.trim_end().strip_suffix('}'))
        .ok_or_else(|| Error::parse(line_no, "unterminated sparse row"))?;
    let mut values: Vec<Value> = attributes
        .iter()
        .map(|a| match a.kind {
            AttributeKind::Numeric => Value::Numeric(0.0),
            AttributeKind::Nominal { .. } => Value::Nominal(0),
        })
        .collect();
    for entry in split_values(inner, line_no)? {
        let entry = entry.trim();
        let (index, token) = entry
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::parse(line_no, format!("malformed sparse entry '{entry}'")))?;
        let index: usize = index
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad sparse index '{index}'")))?;
        let attr = attributes
            .get(index)
            .ok_or_else(|| Error::parse(line_no, format!("sparse index {index} out of range")))?;
        let token = token.trim();
        let token = token
            .strip_prefix('\'')
            .and_then(|t| t.strip_suffix('\''))
            .or_else(|| token.strip_prefix('"').and_then(|t| t.strip_suffix('"')))
            .unwrap_or(token);
        values[index] = parse_value(token, attr, line_no)?;
    }
    Ok(values)
}

fn quote_if_needed(s: &str) -> String {
    let special = s.is_empty()
        || s == "?"
        || s.chars()
            .any(|c| c.is_whitespace() || matches!(c, ',' | '\'' | '"' | '{' | '}' | '%' | '\\'));
    if special {
        format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
    } else {
        s.to_string()
    }
}

/// Dense ARFF with the labels as trailing `{0,1}` attributes.
pub fn to_arff_string(dataset: &Dataset, relation: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "@relation {}\n", quote_if_needed(relation));
    for attr in dataset.schema().attributes() {
        match &attr.kind {
            AttributeKind::Numeric => {
                let _ = writeln!(out, "@attribute {} numeric", quote_if_needed(&attr.name));
            }
            AttributeKind::Nominal { values } => {
                let values: Vec<String> = values.iter().map(|v| quote_if_needed(v)).collect();
                let _ = writeln!(out, "@attribute {} {{{}}}", quote_if_needed(&attr.name), values.join(","));
            }
        }
    }
    for name in dataset.label_names() {
        let _ = writeln!(out, "@attribute {} {{0,1}}", quote_if_needed(name));
    }
    out.push_str("\n@data\n");
    let schema = dataset.schema();
    for (x, y) in dataset.examples().iter().zip(dataset.labels()) {
        let mut fields: Vec<String> = x
            .values()
            .iter()
            .zip(schema.attributes())
            .map(|(v, a)| match v {
                Value::Missing => "?".to_string(),
                Value::Numeric(x) => format!("{x}"),
                Value::Nominal(i) => quote_if_needed(&a.nominal_values().expect("nominal")[*i as usize]),
            })
            .collect();
        fields.extend(y.as_slice().iter().map(|&l| if l > 0 { "1".to_string() } else { "0".to_string() }));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn save_arff(dataset: &Dataset, relation: &str, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_arff_string(dataset, relation))?;
    Ok(())
}
