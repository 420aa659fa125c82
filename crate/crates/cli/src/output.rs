//! Report rendering: one JSON object, or a CSV table with metadata on stderr.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};

pub const SCHEMA_VERSION: u32 = 1;

pub const UNITS_NOTE: &str = "boundaries a, b, control limit h and headstart w are in \
log-likelihood-ratio units; for the Gaussian shift model (log LR = theta*X - theta^2/2) a limit \
h_X set on the cumulative statistic sum(X - theta/2) converts as h_logLR = theta * h_X";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Rounds to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

pub fn num(x: f64) -> Value {
    let r = round_sig(x);
    serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number)
}

impl Cell {
    fn to_json(&self) -> Value {
        match self {
            Cell::Num(v) => num(*v),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }

    fn to_csv(&self) -> String {
        match self {
            Cell::Num(v) => {
                let r = round_sig(*v);
                if r.is_finite() {
                    serde_json::to_string(&r).expect("finite float")
                } else {
                    r.to_string()
                }
            }
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub spec: Map<String, Value>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub diagnostics: Map<String, Value>,
    pub labels: Option<Map<String, Value>>,
}

impl Report {
    pub fn new(command: &'static str, spec: Map<String, Value>, columns: Vec<&'static str>) -> Self {
        Self {
            command,
            spec,
            columns,
            rows: Vec::new(),
            diagnostics: Map::new(),
            labels: None,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn diag(&mut self, key: &str, value: Value) {
        self.diagnostics.insert(key.to_string(), value);
    }

    pub fn to_json(&self) -> Value {
        let results: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.to_string(), v.to_json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let mut out = Map::new();
        out.insert("schema_version".into(), json!(SCHEMA_VERSION));
        out.insert("command".into(), json!(self.command));
        out.insert("spec".into(), Value::Object(self.spec.clone()));
        out.insert("units".into(), json!(UNITS_NOTE));
        if let Some(labels) = &self.labels {
            out.insert("labels".into(), Value::Object(labels.clone()));
        }
        out.insert("results".into(), Value::Array(results));
        out.insert("diagnostics".into(), Value::Object(self.diagnostics.clone()));
        Value::Object(out)
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::to_csv).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// Metadata lines written to stderr alongside CSV output.
    pub fn csv_notes(&self) -> String {
        let mut s = format!("# units: {UNITS_NOTE}\n");
        for (k, v) in &self.diagnostics {
            match v {
                Value::String(text) => s.push_str(&format!("# {k}: {text}\n")),
                _ => s.push_str(&format!("# {k}: {v}\n")),
            }
        }
        s
    }

    pub fn emit(&self, format: Format, path: Option<&Path>) -> std::io::Result<()> {
        let body = match format {
            Format::Json => serde_json::to_string_pretty(&self.to_json()).expect("serializable") + "\n",
            Format::Csv => {
                eprint!("{}", self.csv_notes());
                self.to_csv()
            }
        };
        match path {
            Some(p) => std::fs::write(p, body),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(body.as_bytes())?;
                out.flush()
            }
        }
    }
}
