use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Format};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Config,
    Metric,
    Assertion,
    Verdict,
    Timing,
}

impl RowKind {
    fn name(self) -> &'static str {
        match self {
            RowKind::Config => "config",
            RowKind::Metric => "metric",
            RowKind::Assertion => "assertion",
            RowKind::Verdict => "verdict",
            RowKind::Timing => "timing",
        }
    }
}

/// A cell value: numbers stay numbers in JSONL, everything else is text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Text(s) => s.parse().ok(),
        }
    }

    fn render(&self) -> String {
        match self {
            Value::Num(x) => number(*x),
            Value::Text(s) => s.clone(),
        }
    }
}

/// Numbers are written exactly as the JSONL emission writes them.
fn number(x: f64) -> String {
    serde_json::to_string(&x).unwrap_or_else(|_| x.to_string())
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        // JSON has no NaN or infinities; keep them as their text form.
        if x.is_finite() {
            Value::Num(x)
        } else {
            Value::Text(x.to_string())
        }
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub kind: RowKind,
    pub name: String,
    pub value: Value,
    pub std_err: Option<f64>,
    pub threshold: Option<String>,
    pub passed: Option<bool>,
}

/// Rows of one suite run: config echo, metrics, assertions, then the
/// verdict and the elapsed time.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RunReport {
    pub rows: Vec<Row>,
}

pub const CSV_HEADER: [&str; 6] = ["kind", "name", "value", "std_err", "threshold", "passed"];

impl RunReport {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        let rows = cfg
            .echo()
            .into_iter()
            .map(|(k, v)| Row {
                kind: RowKind::Config,
                name: k.to_string(),
                value: Value::Text(v),
                std_err: None,
                threshold: None,
                passed: None,
            })
            .collect();
        Self { rows }
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metric_se(name, value, None);
    }

    pub fn metric_se(&mut self, name: impl Into<String>, value: f64, std_err: Option<f64>) {
        self.rows.push(Row {
            kind: RowKind::Metric,
            name: name.into(),
            value: value.into(),
            std_err,
            threshold: None,
            passed: None,
        });
    }

    /// Records an assertion and returns whether it passed.
    pub fn check(&mut self, name: impl Into<String>, value: f64, threshold: impl Into<String>, passed: bool) -> bool {
        self.check_se(name, value, None, threshold, passed)
    }

    pub fn check_se(
        &mut self,
        name: impl Into<String>,
        value: f64,
        std_err: Option<f64>,
        threshold: impl Into<String>,
        passed: bool,
    ) -> bool {
        self.rows.push(Row {
            kind: RowKind::Assertion,
            name: name.into(),
            value: value.into(),
            std_err,
            threshold: Some(threshold.into()),
            passed: Some(passed),
        });
        passed
    }

    pub fn assertions(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| r.kind == RowKind::Assertion)
    }

    /// True when every assertion passed.
    pub fn passed(&self) -> bool {
        self.assertions().all(|r| r.passed == Some(true))
    }

    /// Appends the verdict and timing rows.
    pub fn finish(&mut self, elapsed_seconds: f64) {
        let pass = self.passed();
        let failed = self.assertions().filter(|r| r.passed != Some(true)).count();
        self.rows.push(Row {
            kind: RowKind::Verdict,
            name: "verdict".into(),
            value: Value::Num(failed as f64),
            std_err: None,
            threshold: Some("0 failed assertions".into()),
            passed: Some(pass),
        });
        self.rows.push(Row {
            kind: RowKind::Timing,
            name: "elapsed_seconds".into(),
            value: elapsed_seconds.into(),
            std_err: None,
            threshold: None,
            passed: None,
        });
    }

    pub fn row(&self, name: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.row(name).and_then(|r| r.value.as_f64())
    }

    /// The report with timing rows dropped, for comparing reruns.
    pub fn without_timing(&self) -> Self {
        Self { rows: self.rows.iter().filter(|r| r.kind != RowKind::Timing).cloned().collect() }
    }

    pub fn write<W: Write>(&self, format: Format, out: W) -> Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Jsonl => self.write_jsonl(out),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.kind.name().to_string(),
                r.name.clone(),
                r.value.render(),
                r.std_err.map(number).unwrap_or_default(),
                r.threshold.clone().unwrap_or_default(),
                r.passed.map(|p| p.to_string()).unwrap_or_default(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.rows {
            serde_json::to_writer(&mut out, r).map_err(|e| Error::Io(e.to_string()))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_string(&self, format: Format) -> Result<String> {
        let mut buf = Vec::new();
        self.write(format, &mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn read_jsonl(text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse { line: i + 1, reason: e.to_string() }))
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    pub fn read_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse { line: i + 2, reason: e.to_string() })?;
            let bad = |reason: String| Error::Parse { line: i + 2, reason };
            let kind = match &rec[0] {
                "config" => RowKind::Config,
                "metric" => RowKind::Metric,
                "assertion" => RowKind::Assertion,
                "verdict" => RowKind::Verdict,
                "timing" => RowKind::Timing,
                other => return Err(bad(format!("unknown row kind {other:?}"))),
            };
            let opt_f64 = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad(format!("bad number {s:?}")))
                }
            };
            let value = if kind == RowKind::Config {
                Value::Text(rec[2].to_string())
            } else {
                match rec[2].parse::<f64>() {
                    Ok(x) if x.is_finite() => Value::Num(x),
                    _ => Value::Text(rec[2].to_string()),
                }
            };
            rows.push(Row {
                kind,
                name: rec[1].to_string(),
                value,
                std_err: opt_f64(&rec[3])?,
                threshold: (!rec[4].is_empty()).then(|| rec[4].to_string()),
                passed: match &rec[5] {
                    "" => None,
                    "true" => Some(true),
                    "false" => Some(false),
                    other => return Err(bad(format!("bad flag {other:?}"))),
                },
            });
        }
        Ok(Self { rows })
    }
}
