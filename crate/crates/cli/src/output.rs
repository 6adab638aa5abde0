//! CSV and JSON writers with fixed 17-significant-digit number formatting.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::Format;
use crate::error::CliResult;

/// `d.dddddddddddddddde±x`: 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
    S(String),
    B(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::U(n) => n.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    pub fn json(&self) -> Value {
        match self {
            Cell::F(x) => real(*x),
            Cell::U(n) => Value::from(*n),
            Cell::S(s) => Value::String(s.clone()),
            Cell::B(b) => Value::Bool(*b),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<u64> for Cell {
    fn from(n: u64) -> Self {
        Cell::U(n)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::B(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::S(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::S(s)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// Finite reals become JSON numbers; infinities and NaN become the strings used in CSV.
pub fn real(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(fmt_f64(x)), Value::Number)
}

pub fn reals(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| real(x)).collect())
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    /// Rows as an array of objects keyed by column name.
    pub fn json_rows(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(r)
                        .map(|(c, v)| (c.to_string(), v.json()))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

struct SigFormatter;

impl serde_json::ser::Formatter for SigFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }
}

pub fn to_json_bytes(value: &Value) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFormatter);
    value.serialize(&mut ser).expect("in-memory JSON");
    buf.push(b'\n');
    buf
}

/// Writes files into one directory, stamping each with the config hash and version.
pub struct Emitter {
    dir: PathBuf,
    format: Format,
    hash: String,
    version: &'static str,
    written: Vec<PathBuf>,
}

impl Emitter {
    pub fn new(dir: &Path, format: Format, hash: String, version: &'static str) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            hash,
            version,
            written: Vec::new(),
        })
    }

    pub fn format(&self) -> Format {
        self.format
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// `<stem>.csv` with `config_hash` and `version` appended to every row.
    pub fn csv(&mut self, stem: &str, table: &Table) -> CliResult<()> {
        let path = self.dir.join(format!("{stem}.csv"));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)?;
        let mut header: Vec<&str> = table.columns.clone();
        header.extend(["config_hash", "version"]);
        w.write_record(&header)?;
        for row in &table.rows {
            let mut rec: Vec<String> = row.iter().map(Cell::csv).collect();
            rec.push(self.hash.clone());
            rec.push(self.version.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        self.written.push(path);
        Ok(())
    }

    /// `<stem>.json`, one object with `config_hash` and `version` added.
    pub fn json(&mut self, stem: &str, mut object: Map<String, Value>) -> CliResult<()> {
        object.insert("config_hash".into(), Value::String(self.hash.clone()));
        object.insert("version".into(), Value::String(self.version.into()));
        let path = self.dir.join(format!("{stem}.json"));
        fs::write(&path, to_json_bytes(&Value::Object(object)))?;
        self.written.push(path);
        Ok(())
    }

    pub fn table(&mut self, stem: &str, table: &Table, mut extra: Map<String, Value>) -> CliResult<()> {
        if self.format.csv() {
            self.csv(stem, table)?;
        }
        if self.format.json() {
            extra.insert("rows".into(), table.json_rows());
            self.json(stem, extra)?;
        }
        Ok(())
    }
}

/// A real number in file names: `0.5` -> `0.5`, `1e-3` -> `0.001`.
pub fn tag(x: f64) -> String {
    format!("{x}")
}
