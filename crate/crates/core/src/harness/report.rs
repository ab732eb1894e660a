use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::classifiers::Algorithm;
use crate::error::{Error, Result};

/// Test condition of a report row: untouched images or JPEG at a quality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    Raw,
    Qf(i64),
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Raw => f.write_str("RAW"),
            Condition::Qf(q) => write!(f, "QF{q}"),
        }
    }
}

impl FromStr for Condition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("raw") {
            return Ok(Condition::Raw);
        }
        s.strip_prefix("QF")
            .or_else(|| s.strip_prefix("qf"))
            .and_then(|q| q.parse().ok())
            .filter(|q| (1..=100).contains(q))
            .map(Condition::Qf)
            .ok_or_else(|| Error::InvalidParameter(format!("bad condition {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub subset: String,
    pub algorithm: Algorithm,
    pub condition: Condition,
    pub accuracy: f64,
    pub f1_macro: f64,
    pub n_test: usize,
}

pub const REPORT_HEADER: [&str; 6] = ["subset", "algorithm", "condition", "accuracy", "f1_macro", "n_test"];

/// Metrics use the shortest exact decimal form, so the file is both
/// byte-stable and lossless.
pub fn write_report_csv<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        w.write_record([
            r.subset.clone(),
            r.algorithm.to_string(),
            r.condition.to_string(),
            r.accuracy.to_string(),
            r.f1_macro.to_string(),
            r.n_test.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn report_to_string(rows: &[ReportRow]) -> String {
    let mut buf = Vec::new();
    write_report_csv(rows, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("utf-8")
}

pub fn read_report_csv(path: impl AsRef<Path>) -> Result<Vec<ReportRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_report(&text).map_err(|msg| Error::format("report", path, msg))
}

pub fn parse_report(text: &str) -> std::result::Result<Vec<ReportRow>, String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| e.to_string())?;
    if header.iter().ne(REPORT_HEADER) {
        return Err(format!("header must be {}", REPORT_HEADER.join(",")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let metric = |i: usize| -> std::result::Result<f64, String> {
            let v: f64 = rec[i].parse().map_err(|_| format!("bad number {:?}", &rec[i]))?;
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(format!("metric {v} outside [0, 1]"))
            }
        };
        rows.push(ReportRow {
            subset: rec[0].to_string(),
            algorithm: rec[1].parse().map_err(|e: Error| e.to_string())?,
            condition: rec[2].parse().map_err(|e: Error| e.to_string())?,
            accuracy: metric(3)?,
            f1_macro: metric(4)?,
            n_test: rec[5].parse().map_err(|_| format!("bad count {:?}", &rec[5]))?,
        });
    }
    Ok(rows)
}
