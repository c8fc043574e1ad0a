use std::path::Path;

use super::header::{put_f64s, put_u32s, read_file, write_atomic, Header, Payload};
use crate::data::Dataset;
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &str = "AFVDATA";
pub const DATASET_VERSION: u32 = 1;

pub fn encode_dataset(d: &Dataset) -> Result<Vec<u8>> {
    let mut h = Header::default();
    h.push("name", d.name());
    h.push("dim", d.dim());
    h.push("count", d.len());
    h.push("labels", u8::from(d.labels().is_some()));
    let mut out = h.encode(DATASET_MAGIC, DATASET_VERSION)?;
    put_f64s(&mut out, d.features());
    if let Some(l) = d.labels() {
        put_u32s(&mut out, l);
    }
    Ok(out)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let (h, payload) = Header::decode(bytes, DATASET_MAGIC, DATASET_VERSION)?;
    let dim: usize = h.parse("dim")?;
    let count: usize = h.parse("count")?;
    let labeled = match h.get("labels")? {
        "0" => false,
        "1" => true,
        other => return Err(Error::format(format!("labels flag must be 0 or 1, got `{other}`"))),
    };
    let mut p = Payload::new(payload);
    let features = p.f64s(
        count
            .checked_mul(dim)
            .ok_or_else(|| Error::format("dataset size overflows"))?,
    )?;
    let labels = if labeled { Some(p.u32s(count)?) } else { None };
    p.finish()?;
    Dataset::new(h.get("name")?, dim, features, labels).map_err(|e| Error::format(e.to_string()))
}

pub fn save_dataset(path: &Path, d: &Dataset) -> Result<()> {
    write_atomic(path, &encode_dataset(d)?)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&read_file(path)?)
}

/// Comma-separated rows of numbers. With `labeled`, the last column is a
/// non-negative integer class label. A first line that does not parse as
/// numbers is taken as a header and skipped; blank lines are ignored.
pub fn import_csv(text: &str, name: &str, labeled: bool) -> Result<Dataset> {
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut dim = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<Vec<f64>> = cells.iter().map(|c| c.parse().ok()).collect();
        let Some(mut row) = parsed else {
            if n == 0 {
                continue;
            }
            return Err(Error::format(format!("line {}: non-numeric cell", n + 1)));
        };
        if labeled {
            row.pop();
            let cell = cells[cells.len() - 1];
            let label: u32 = cell
                .parse()
                .map_err(|_| Error::format(format!("line {}: label `{cell}` is not a class index", n + 1)))?;
            labels.push(label);
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(format!("line {}: non-finite value", n + 1)));
        }
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::format(format!(
                    "line {}: {} features, expected {d}",
                    n + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        features.extend(row);
    }
    let dim = dim.ok_or_else(|| Error::format("no data rows"))?;
    if dim == 0 {
        return Err(Error::format("rows have no features"));
    }
    Dataset::new(name, dim, features, labeled.then_some(labels))
}

/// One row per example: the features, then the label when present.
pub fn dataset_to_csv(d: &Dataset) -> String {
    let mut out = String::new();
    for (i, row) in d.rows().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        if let Some(l) = d.labels() {
            out.push_str(&format!(",{}", l[i]));
        }
        out.push('\n');
    }
    out
}
