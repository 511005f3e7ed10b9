//! Generic delimited-file ingestion driven by a schema side-file.
//!
//! The side-file is line oriented; `#` starts a comment:
//!
//! ```text
//! delimiter=tab          # or comma, or any single character
//! header=false           # skip the first data line when true
//! min_frequency=10
//! column label label
//! column I1 numerical
//! column C1 categorical
//! column id ignore
//! ```
//!
//! `column` lines list every column of the data file in order. Exactly one
//! column must be the label (`0`/`1`).

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::featurestore::schema::{build_vocabulary, Dataset, EncodedSample, FieldKind};
use crate::featurestore::transform::numeric_token;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnRole {
    Label,
    Feature(FieldKind),
    Ignore,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnSpec {
    pub name: String,
    pub role: ColumnRole,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DelimitedSchema {
    pub delimiter: char,
    pub header: bool,
    pub min_frequency: usize,
    pub columns: Vec<ColumnSpec>,
}

impl DelimitedSchema {
    pub fn parse(text: &str) -> Result<Self> {
        let mut delimiter = '\t';
        let mut header = false;
        let mut min_frequency = 1;
        let mut columns = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |reason: String| Error::MalformedRecord { line: i + 1, reason };
            if let Some(rest) = line.strip_prefix("column") {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                let [name, role] = parts[..] else {
                    return Err(bad(format!("expected `column <name> <role>`, got {line:?}")));
                };
                let role = match role {
                    "label" => ColumnRole::Label,
                    "categorical" => ColumnRole::Feature(FieldKind::Categorical),
                    "numerical" => ColumnRole::Feature(FieldKind::Numerical),
                    "ignore" => ColumnRole::Ignore,
                    other => return Err(bad(format!("unknown column role {other:?}"))),
                };
                columns.push(ColumnSpec {
                    name: name.to_string(),
                    role,
                });
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(bad(format!("expected key=value, got {line:?}")));
            };
            let value = value.trim();
            match key.trim() {
                "delimiter" => {
                    delimiter = match value {
                        "tab" => '\t',
                        "comma" => ',',
                        v if v.chars().count() == 1 => v.chars().next().unwrap(),
                        v => return Err(bad(format!("bad delimiter {v:?}"))),
                    }
                }
                "header" => {
                    header = value
                        .parse()
                        .map_err(|_| bad(format!("header must be true/false, got {value:?}")))?
                }
                "min_frequency" => {
                    min_frequency = value
                        .parse()
                        .map_err(|_| bad(format!("bad min_frequency {value:?}")))?
                }
                k => return Err(bad(format!("unknown key {k:?}"))),
            }
        }
        let labels = columns.iter().filter(|c| c.role == ColumnRole::Label).count();
        if labels != 1 {
            return Err(Error::Config(format!("schema needs exactly one label column, found {labels}")));
        }
        if !columns.iter().any(|c| matches!(c.role, ColumnRole::Feature(_))) {
            return Err(Error::Config("schema has no feature columns".into()));
        }
        Ok(DelimitedSchema {
            delimiter,
            header,
            min_frequency,
            columns,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Criteo layout: label, 13 numerical, 26 categorical; tab separated.
    pub fn criteo() -> Self {
        let mut columns = vec![ColumnSpec {
            name: "label".into(),
            role: ColumnRole::Label,
        }];
        columns.extend((1..=13).map(|i| ColumnSpec {
            name: format!("I{i}"),
            role: ColumnRole::Feature(FieldKind::Numerical),
        }));
        columns.extend((1..=26).map(|i| ColumnSpec {
            name: format!("C{i}"),
            role: ColumnRole::Feature(FieldKind::Categorical),
        }));
        DelimitedSchema {
            delimiter: '\t',
            header: false,
            min_frequency: 10,
            columns,
        }
    }

    /// Avazu layout (`train` csv with header): `id` dropped, `click` label,
    /// every other column categorical.
    pub fn avazu() -> Self {
        const COLS: [&str; 22] = [
            "hour", "C1", "banner_pos", "site_id", "site_domain", "site_category", "app_id",
            "app_domain", "app_category", "device_id", "device_ip", "device_model", "device_type",
            "device_conn_type", "C14", "C15", "C16", "C17", "C18", "C19", "C20", "C21",
        ];
        let mut columns = vec![
            ColumnSpec {
                name: "id".into(),
                role: ColumnRole::Ignore,
            },
            ColumnSpec {
                name: "click".into(),
                role: ColumnRole::Label,
            },
        ];
        columns.extend(COLS.iter().map(|c| ColumnSpec {
            name: c.to_string(),
            role: ColumnRole::Feature(FieldKind::Categorical),
        }));
        DelimitedSchema {
            delimiter: ',',
            header: true,
            min_frequency: 4,
            columns,
        }
    }
}

/// Reads up to `limit` data rows of `path` (all rows when `None`).
pub fn load_delimited(path: &Path, schema: &DelimitedSchema, limit: Option<usize>) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let features: Vec<(usize, &ColumnSpec, FieldKind)> = schema
        .columns
        .iter()
        .enumerate()
        .filter_map(|(i, c)| match c.role {
            ColumnRole::Feature(k) => Some((i, c, k)),
            _ => None,
        })
        .collect();
    let label_col = schema
        .columns
        .iter()
        .position(|c| c.role == ColumnRole::Label)
        .ok_or_else(|| Error::Config("no label column".into()))?;

    let mut tokens: Vec<Vec<Option<String>>> = vec![Vec::new(); features.len()];
    let mut labels = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if (schema.header && i == 0) || line.trim().is_empty() {
            continue;
        }
        if limit.is_some_and(|l| labels.len() >= l) {
            break;
        }
        let cells: Vec<&str> = line.split(schema.delimiter).collect();
        if cells.len() != schema.columns.len() {
            return Err(Error::MalformedRecord {
                line: i + 1,
                reason: format!("{} columns, schema lists {}", cells.len(), schema.columns.len()),
            });
        }
        let label = match cells[label_col].trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::MalformedRecord {
                    line: i + 1,
                    reason: format!("label {other:?} is not 0/1"),
                })
            }
        };
        labels.push(label);
        for (slot, &(col, _, kind)) in tokens.iter_mut().zip(&features) {
            let raw = cells[col].trim();
            slot.push(match kind {
                FieldKind::Numerical => numeric_token(raw),
                FieldKind::Categorical => (!raw.is_empty()).then(|| raw.to_string()),
            });
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset(format!("no rows in {}", path.display())));
    }

    let mut fields = Vec::with_capacity(features.len());
    for (col_tokens, &(_, spec, kind)) in tokens.iter().zip(&features) {
        let present = col_tokens.iter().flatten().map(String::as_str);
        let field = if col_tokens.iter().any(Option::is_some) {
            build_vocabulary(present, &spec.name, kind, schema.min_frequency)?
        } else {
            // every value missing: only the unknown slot exists
            crate::featurestore::schema::FieldSchema::from_tokens(spec.name.clone(), kind, Vec::new())?
        };
        fields.push(field);
    }
    let samples = (0..labels.len())
        .map(|r| {
            let ids = fields
                .iter()
                .zip(&tokens)
                .map(|(f, col)| f.encode(col[r].as_deref()))
                .collect();
            EncodedSample::new(ids, labels[r])
        })
        .collect();
    Ok(Dataset { fields, samples })
}
