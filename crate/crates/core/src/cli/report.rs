//! Tabular reports written as CSV with a JSON mirror.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::error::Result;

/// Columns whose content depends on the machine, not on the experiment.
pub const VOLATILE_COLUMNS: [&str; 1] = ["runtime_s"];

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// 17 significant digits, `.` as separator, independent of locale.
pub fn format_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format_num(*v),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
            Cell::Text(s) => {
                if s.contains([',', '"', '\n']) {
                    format!("\"{}\"", s.replace('"', "\"\""))
                } else {
                    s.clone()
                }
            }
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(v) => json!(format_num(*v)),
            Cell::Int(i) => json!(i),
            Cell::Bool(b) => json!(b),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub command: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Summary values that are not rows (JSON only).
    pub meta: BTreeMap<String, Value>,
}

impl Report {
    pub fn new(command: &str, columns: &[&str]) -> Self {
        Report {
            command: command.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            meta: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width differs from the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> String {
        self.csv_excluding(&[])
    }

    /// CSV without the named columns (used to compare runs).
    pub fn csv_excluding(&self, skip: &[&str]) -> String {
        let keep: Vec<usize> = (0..self.columns.len()).filter(|&i| !skip.contains(&self.columns[i].as_str())).collect();
        let mut out = String::new();
        let header: Vec<&str> = keep.iter().map(|&i| self.columns[i].as_str()).collect();
        let _ = writeln!(out, "{}", header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = keep.iter().map(|&i| row[i].csv()).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut m = Map::new();
                for (c, v) in self.columns.iter().zip(r) {
                    m.insert(c.clone(), v.json());
                }
                Value::Object(m)
            })
            .collect();
        json!({
            "command": self.command,
            "columns": self.columns,
            "rows": rows,
            "meta": self.meta,
        })
    }

    /// Write `path` (CSV) and its `.json` sibling; returns the JSON path.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        std::fs::write(path, self.to_csv())?;
        let jpath = path.with_extension("json");
        let text = serde_json::to_string_pretty(&self.to_json()).expect("report JSON");
        std::fs::write(&jpath, text + "\n")?;
        Ok(jpath)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(format_num(0.1), "1.0000000000000001e-1");
        assert_eq!(format_num(0.0), "0.0000000000000000e0");
        assert_eq!(format_num(f64::INFINITY), "inf");
        let v: f64 = format_num(std::f64::consts::PI).parse().unwrap();
        assert_eq!(v, std::f64::consts::PI);
    }

    #[test]
    fn csv_quoting_and_skip() {
        let mut r = Report::new("x", &["a", "runtime_s", "b"]);
        r.push(vec![Cell::Text("p,q".into()), 1.5.into(), Cell::Empty]);
        assert_eq!(r.to_csv(), "a,runtime_s,b\n\"p,q\",1.5000000000000000e0,\n");
        assert_eq!(r.csv_excluding(&VOLATILE_COLUMNS), "a,b\n\"p,q\",\n");
        assert_eq!(r.to_json()["rows"][0]["b"], Value::Null);
    }
}
