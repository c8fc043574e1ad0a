//! Shared framing: `MAGIC VERSION\n`, then `key value\n` lines, then
//! `end\n`, then a little-endian binary payload.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub(crate) struct Header {
    pub fields: Vec<(String, String)>,
}

impl Header {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.fields.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::format(format!("header field `{key}` missing")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| Error::format(format!("header field `{key}` has bad value `{v}`")))
    }

    /// Fields whose key starts with `prefix`, with the prefix removed.
    pub fn with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.fields
            .iter()
            .filter_map(move |(k, v)| k.strip_prefix(prefix).map(|k| (k, v.as_str())))
    }

    pub fn encode(&self, magic: &str, version: u32) -> Result<Vec<u8>> {
        let mut out = format!("{magic} {version}\n");
        for (k, v) in &self.fields {
            if k.is_empty() || k.contains([' ', '\n']) || v.contains('\n') {
                return Err(Error::format(format!("header field `{k}` cannot be encoded")));
            }
            out.push_str(&format!("{k} {v}\n"));
        }
        out.push_str("end\n");
        Ok(out.into_bytes())
    }

    /// Splits `bytes` into the header and the payload that follows it.
    pub fn decode<'a>(bytes: &'a [u8], magic: &'static str, version: u32) -> Result<(Header, &'a [u8])> {
        let mut rest = bytes;
        let mut next_line = || -> Result<&'a str> {
            let nl = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| Error::format("header is not terminated by `end`"))?;
            let line = std::str::from_utf8(&rest[..nl]).map_err(|_| Error::format("header is not UTF-8"))?;
            rest = &rest[nl + 1..];
            Ok(line)
        };
        let first = next_line()?;
        let (m, v) = first
            .split_once(' ')
            .ok_or_else(|| Error::format(format!("bad first line `{first}`")))?;
        if m != magic {
            return Err(Error::format(format!("expected a {magic} file, found `{m}`")));
        }
        let found: u32 = v.parse().map_err(|_| Error::format(format!("bad version `{v}`")))?;
        if found != version {
            return Err(Error::Version {
                kind: magic,
                found,
                expected: version,
            });
        }
        let mut header = Header::default();
        loop {
            let line = next_line()?;
            if line == "end" {
                break;
            }
            let (k, v) = line.split_once(' ').unwrap_or((line, ""));
            header.push(k, v);
        }
        Ok((header, rest))
    }
}

pub(crate) fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn put_u32s(out: &mut Vec<u8>, values: &[u32]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Sequential little-endian reader over a payload.
pub(crate) struct Payload<'a> {
    rest: &'a [u8],
}

impl<'a> Payload<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Payload { rest: bytes }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.rest.len() < n {
            return Err(Error::format(format!(
                "payload truncated: needed {n} more bytes, {} left",
                self.rest.len()
            )));
        }
        let (head, tail) = self.rest.split_at(n);
        self.rest = tail;
        Ok(head)
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::format("payload size overflows"))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }

    pub fn u32s(&mut self, n: usize) -> Result<Vec<u32>> {
        let bytes = self.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::format("payload size overflows"))?,
        )?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4-byte chunk")))
            .collect())
    }

    pub fn string(&mut self) -> Result<String> {
        let len = self.u32s(1)?[0] as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| Error::format("string is not UTF-8"))
    }

    pub fn finish(self) -> Result<()> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(Error::format(format!("{} unexpected trailing bytes", self.rest.len())))
        }
    }
}

pub(crate) fn put_string(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

/// Writes through a temporary sibling so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}
