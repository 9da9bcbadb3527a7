//! Header-first tables written as CSV or as a JSON array of records.

use std::collections::BTreeSet;
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    fn of_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Text(String),
    Int(u64),
    Float(f64),
    Empty,
}

impl Cell {
    pub fn opt_text(v: Option<&str>) -> Cell {
        v.map_or(Cell::Empty, |s| Cell::Text(s.to_string()))
    }

    pub fn opt_float(v: Option<f64>) -> Cell {
        v.map_or(Cell::Empty, Cell::Float)
    }

    fn to_csv(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Int(v) => Value::Number((*v).into()),
            Cell::Float(v) => Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Empty => Value::Null,
        }
    }

    /// Text form used when reading tables back.
    pub fn as_text(&self) -> String {
        self.to_csv()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.columns).map_err(CliError::internal)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::to_csv))
                        .map_err(CliError::internal)?;
                }
                w.into_inner()
                    .map_err(|e| CliError::internal(e.to_string()))
            }
            Format::Json => {
                let records: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let mut obj = Map::new();
                        for (name, cell) in self.columns.iter().zip(row) {
                            obj.insert(name.clone(), cell.to_json());
                        }
                        Value::Object(obj)
                    })
                    .collect();
                let mut out = serde_json::to_vec_pretty(&Value::Array(records))
                    .map_err(CliError::internal)?;
                out.push(b'\n');
                Ok(out)
            }
        }
    }

    /// Reads a table written by [`Table::render`]; the format follows the extension.
    pub fn read(path: &Path) -> Result<Table, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let bad = |msg: String| CliError::Validation(format!("{}: {msg}", path.display()));
        match Format::of_path(path) {
            Format::Csv => {
                let mut r = csv::Reader::from_reader(bytes.as_slice());
                let columns: Vec<String> = r
                    .headers()
                    .map_err(|e| bad(e.to_string()))?
                    .iter()
                    .map(str::to_string)
                    .collect();
                let mut table = Table::new(columns);
                for rec in r.records() {
                    let rec = rec.map_err(|e| bad(e.to_string()))?;
                    table.rows.push(
                        rec.iter()
                            .map(|s| {
                                if s.is_empty() {
                                    Cell::Empty
                                } else {
                                    Cell::Text(s.to_string())
                                }
                            })
                            .collect(),
                    );
                }
                Ok(table)
            }
            Format::Json => {
                let value: Value =
                    serde_json::from_slice(&bytes).map_err(|e| bad(e.to_string()))?;
                let Value::Array(records) = value else {
                    return Err(bad("expected an array of records".into()));
                };
                let mut columns: Vec<String> = Vec::new();
                let mut seen = BTreeSet::new();
                for rec in &records {
                    let Value::Object(obj) = rec else {
                        return Err(bad("expected an array of records".into()));
                    };
                    for k in obj.keys() {
                        if seen.insert(k.clone()) {
                            columns.push(k.clone());
                        }
                    }
                }
                let mut table = Table::new(columns.clone());
                for rec in &records {
                    let obj = rec.as_object().expect("checked above");
                    table.rows.push(
                        columns
                            .iter()
                            .map(|c| match obj.get(c) {
                                None | Some(Value::Null) => Cell::Empty,
                                Some(Value::String(s)) => Cell::Text(s.clone()),
                                Some(v) => Cell::Text(v.to_string()),
                            })
                            .collect(),
                    );
                }
                Ok(table)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_share_field_names() {
        let mut t = Table::new(["ym", "value", "note"]);
        t.push(vec![
            Cell::Text("2014-01".into()),
            Cell::Float(0.5),
            Cell::Empty,
        ]);
        let csv = String::from_utf8(t.render(Format::Csv).unwrap()).unwrap();
        assert_eq!(csv, "ym,value,note\n2014-01,0.5,\n");
        let json: Value = serde_json::from_slice(&t.render(Format::Json).unwrap()).unwrap();
        assert_eq!(json[0]["ym"], "2014-01");
        assert_eq!(json[0]["value"], 0.5);
        assert!(json[0]["note"].is_null());
    }
}
