//! Training telemetry as JSON lines.
//!
//! The first line is a header object `{"format":"afv-metrics","version":1}`;
//! each following line is one [`MetricsRecord`]. Similarity fields are
//! omitted on iterations without monitoring.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const METRICS_FORMAT: &str = "afv-metrics";
pub const METRICS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub iteration: u64,
    /// Loss of the last discriminator step of the iteration.
    pub d_loss: f64,
    pub g_loss: f64,
    pub mean_d_real: f64,
    pub mean_d_fake: f64,
    pub delta_g: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fisher_similarity_train: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fisher_similarity_val: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

/// An in-memory log with strictly increasing iterations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    records: Vec<MetricsRecord>,
}

/// What [`MetricsLog::parse`] found.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLog {
    pub log: MetricsLog,
    /// The final line was cut short and skipped.
    pub truncated_tail: bool,
}

pub fn header_line() -> String {
    serde_json::to_string(&Header {
        format: METRICS_FORMAT.into(),
        version: METRICS_VERSION,
    })
    .expect("header serializes")
}

impl MetricsLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[MetricsRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: MetricsRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.iteration <= last.iteration {
                return Err(Error::contract(format!(
                    "metrics iteration {} does not follow {}",
                    record.iteration, last.iteration
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = header_line();
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses a log. A malformed final line without a trailing newline is
    /// treated as an interrupted write: it is dropped and reported.
    pub fn parse(text: &str) -> Result<ParsedLog> {
        let mut lines = text.split_inclusive('\n').enumerate().peekable();
        let (_, first) = lines.next().ok_or_else(|| Error::format("metrics log is empty"))?;
        let header: Header =
            serde_json::from_str(first.trim_end()).map_err(|e| Error::format(format!("bad metrics header: {e}")))?;
        if header.format != METRICS_FORMAT {
            return Err(Error::format(format!("not a metrics log: `{}`", header.format)));
        }
        if header.version != METRICS_VERSION {
            return Err(Error::Version {
                kind: "metrics",
                found: header.version,
                expected: METRICS_VERSION,
            });
        }
        let mut log = MetricsLog::new();
        let mut truncated_tail = false;
        while let Some((n, line)) = lines.next() {
            let is_last = lines.peek().is_none();
            let body = line.trim_end();
            if body.is_empty() {
                continue;
            }
            match serde_json::from_str::<MetricsRecord>(body) {
                Ok(r) => log.push(r)?,
                Err(_) if is_last && !line.ends_with('\n') => truncated_tail = true,
                Err(e) => return Err(Error::format(format!("metrics line {}: {e}", n + 1))),
            }
        }
        Ok(ParsedLog { log, truncated_tail })
    }

    /// `iteration,fisher_similarity_val,fisher_similarity_train,delta_g,d_loss,g_loss`
    /// rows; similarities are empty on iterations without monitoring.
    pub fn to_monitor_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:?}"));
        let mut out = String::from("iteration,fisher_similarity_val,fisher_similarity_train,delta_g,d_loss,g_loss\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{:?},{:?},{:?}\n",
                r.iteration,
                opt(r.fisher_similarity_val),
                opt(r.fisher_similarity_train),
                r.delta_g,
                r.d_loss,
                r.g_loss
            ));
        }
        out
    }

    pub fn read(path: &Path) -> Result<ParsedLog> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Appends records to a file, flushing after each one.
#[derive(Debug)]
pub struct MetricsWriter {
    path: PathBuf,
    out: BufWriter<File>,
    last: Option<u64>,
}

impl MetricsWriter {
    /// Starts a new log (truncating any existing file).
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = MetricsWriter {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
            last: None,
        };
        w.write_line(&header_line())?;
        Ok(w)
    }

    /// Continues an existing log; a truncated tail is cut off first.
    pub fn append(path: &Path) -> Result<Self> {
        Self::append_through(path, u64::MAX)
    }

    /// Like [`MetricsWriter::append`], but first drops records after
    /// `iteration`, as when resuming from an earlier checkpoint.
    pub fn append_through(path: &Path, iteration: u64) -> Result<Self> {
        let mut parsed = MetricsLog::read(path)?;
        parsed.log.records.retain(|r| r.iteration <= iteration);
        let text = parsed.log.to_jsonl();
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(MetricsWriter {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
            last: parsed.log.records().last().map(|r| r.iteration),
        })
    }

    fn write_line(&mut self, line: &str) -> Result<()> {
        let path = &self.path;
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn write(&mut self, record: &MetricsRecord) -> Result<()> {
        if self.last.is_some_and(|l| record.iteration <= l) {
            return Err(Error::contract("metrics records must be written in iteration order"));
        }
        self.last = Some(record.iteration);
        self.write_line(&serde_json::to_string(record)?)
    }
}
