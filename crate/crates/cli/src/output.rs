//! Run results: a JSON summary, CSV tables and verbatim data files.
//!
//! Numbers in summaries and tables carry 12 significant digits so that
//! regression diffs stay meaningful. Data files meant to be read back
//! (reducing matrices, split results) keep full precision.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::CliError;

/// `v` with 12 significant digits, in the shortest of fixed or scientific
/// notation.
pub fn fmt12(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, v);
        trim_zeros(&fixed)
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// `v` rounded to 12 significant digits.
pub fn round12(v: f64) -> f64 {
    if v.is_finite() {
        fmt12(v).parse().expect("formatted float parses")
    } else {
        v
    }
}

/// JSON number with 12 significant digits; non-finite values become strings.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(round12(v))
    } else {
        json!(fmt12(v))
    }
}

pub fn opt_num(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num)
}

/// Table cell for an optional number; missing values print as `na`.
pub fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "na".into(), fmt12)
}

/// Count, extremes and median of the finite values.
pub fn envelope(values: &[f64]) -> Value {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return json!({"count": 0, "max": null, "median": null, "min": null});
    }
    let mid = v.len() / 2;
    let median = if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) };
    json!({"count": v.len(), "max": num(v[v.len() - 1]), "median": num(median), "min": num(v[0])})
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| CliError::Csv(e.to_string()))?;
        for row in &self.rows {
            w.write_record(row).map_err(|e| CliError::Csv(e.to_string()))?;
        }
        w.into_inner().map_err(|e| CliError::Csv(e.to_string()))
    }
}

/// Everything a subcommand produces.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub command: String,
    pub summary: Value,
    pub tables: Vec<Table>,
    /// `(file name, contents)` written verbatim.
    pub files: Vec<(String, String)>,
    /// Invariants that failed during the run.
    pub violations: Vec<String>,
}

impl Outcome {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            summary: json!({}),
            tables: Vec::new(),
            files: Vec::new(),
            violations: Vec::new(),
        }
    }

    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn check(&mut self, holds: bool, what: impl FnOnce() -> String) {
        if !holds {
            self.violations.push(what());
        }
    }

    pub fn summary_json(&self) -> String {
        let doc = json!({
            "command": self.command,
            "ok": self.ok(),
            "summary": self.summary,
            "violations": self.violations,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("summary serialises");
        text.push('\n');
        text
    }

    /// Writes `summary.json`, one CSV per table and the data files into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
        let write = |name: &str, bytes: &[u8]| {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| CliError::Io(path, e))
        };
        write("summary.json", self.summary_json().as_bytes())?;
        for t in &self.tables {
            write(&format!("{}.csv", t.name), &t.to_csv()?)?;
        }
        for (name, contents) in &self.files {
            write(name, contents.as_bytes())?;
        }
        Ok(())
    }
}
