use std::path::Path;

use super::header::{put_f64s, put_string, put_u32s, read_file, write_atomic, Header, Payload};
use crate::afv::{AdversarialFisherVector, FisherStats};
use crate::error::{Error, Result};

pub const AFV_MAGIC: &str = "AFV";
pub const AFV_VERSION: u32 = 1;
pub const STATS_MAGIC: &str = "AFVSTATS";
pub const STATS_VERSION: u32 = 1;

/// An exported batch of vectors from one model and one set of statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct AfvFile {
    pub model_id: String,
    /// Id of the checkpoint the model came from.
    pub checkpoint_id: String,
    pub stats_seed: Option<u64>,
    pub n_samples: usize,
    /// Variance floor the vectors were whitened with.
    pub epsilon: f64,
    pub dim: usize,
    pub ids: Vec<String>,
    /// `[count][dim]`.
    pub vectors: Vec<Vec<f64>>,
    pub labels: Option<Vec<u32>>,
}

impl AfvFile {
    pub fn new(
        checkpoint_id: impl Into<String>,
        stats: &FisherStats,
        afvs: Vec<AdversarialFisherVector>,
        labels: Option<Vec<u32>>,
    ) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != afvs.len() {
                return Err(Error::contract("one label per vector"));
            }
        }
        if let Some(v) = afvs
            .iter()
            .find(|v| v.model_id != stats.model_id || v.values.len() != stats.len())
        {
            return Err(Error::contract(format!(
                "vector `{}` does not belong to the statistics' model",
                v.source_id
            )));
        }
        let (ids, vectors) = afvs.into_iter().map(|v| (v.source_id, v.values)).unzip();
        Ok(AfvFile {
            model_id: stats.model_id.clone(),
            checkpoint_id: checkpoint_id.into(),
            stats_seed: stats.seed,
            n_samples: stats.n_samples,
            epsilon: stats.epsilon,
            dim: stats.len(),
            ids,
            vectors,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

fn seed_text(seed: Option<u64>) -> String {
    seed.map_or("none".into(), |s| s.to_string())
}

fn parse_seed(h: &Header, key: &str) -> Result<Option<u64>> {
    match h.get(key)? {
        "none" => Ok(None),
        _ => h.parse(key).map(Some),
    }
}

pub fn encode_afv_file(f: &AfvFile) -> Result<Vec<u8>> {
    if f.ids.len() != f.vectors.len() || f.vectors.iter().any(|v| v.len() != f.dim) {
        return Err(Error::contract("AFV export rows are inconsistent"));
    }
    let mut h = Header::default();
    h.push("model_id", &f.model_id);
    h.push("checkpoint_id", &f.checkpoint_id);
    h.push("stats_seed", seed_text(f.stats_seed));
    h.push("n_samples", f.n_samples);
    h.push("epsilon", format!("{:?}", f.epsilon));
    h.push("dim", f.dim);
    h.push("count", f.len());
    h.push("labels", u8::from(f.labels.is_some()));
    let mut out = h.encode(AFV_MAGIC, AFV_VERSION)?;
    for v in &f.vectors {
        put_f64s(&mut out, v);
    }
    if let Some(l) = &f.labels {
        put_u32s(&mut out, l);
    }
    for id in &f.ids {
        put_string(&mut out, id);
    }
    Ok(out)
}

pub fn decode_afv_file(bytes: &[u8]) -> Result<AfvFile> {
    let (h, payload) = Header::decode(bytes, AFV_MAGIC, AFV_VERSION)?;
    let dim: usize = h.parse("dim")?;
    let count: usize = h.parse("count")?;
    let labeled = h.get("labels")? == "1";
    let mut p = Payload::new(payload);
    let mut vectors = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        vectors.push(p.f64s(dim)?);
    }
    let labels = if labeled { Some(p.u32s(count)?) } else { None };
    let ids = (0..count).map(|_| p.string()).collect::<Result<_>>()?;
    p.finish()?;
    Ok(AfvFile {
        model_id: h.get("model_id")?.to_string(),
        checkpoint_id: h.get("checkpoint_id")?.to_string(),
        stats_seed: parse_seed(&h, "stats_seed")?,
        n_samples: h.parse("n_samples")?,
        epsilon: h.parse("epsilon")?,
        dim,
        ids,
        vectors,
        labels,
    })
}

pub fn save_afv_file(path: &Path, f: &AfvFile) -> Result<()> {
    write_atomic(path, &encode_afv_file(f)?)
}

pub fn load_afv_file(path: &Path) -> Result<AfvFile> {
    decode_afv_file(&read_file(path)?)
}

pub fn encode_stats(s: &FisherStats) -> Result<Vec<u8>> {
    if s.mean_grad.len() != s.diag_info.len() {
        return Err(Error::contract("mean and information lengths differ"));
    }
    let mut h = Header::default();
    h.push("model_id", &s.model_id);
    h.push("n_samples", s.n_samples);
    h.push("epsilon", format!("{:?}", s.epsilon));
    h.push("seed", seed_text(s.seed));
    h.push("len", s.len());
    let mut out = h.encode(STATS_MAGIC, STATS_VERSION)?;
    put_f64s(&mut out, &s.mean_grad);
    put_f64s(&mut out, &s.diag_info);
    Ok(out)
}

pub fn decode_stats(bytes: &[u8]) -> Result<FisherStats> {
    let (h, payload) = Header::decode(bytes, STATS_MAGIC, STATS_VERSION)?;
    let len: usize = h.parse("len")?;
    let mut p = Payload::new(payload);
    let mean_grad = p.f64s(len)?;
    let diag_info = p.f64s(len)?;
    p.finish()?;
    Ok(FisherStats {
        mean_grad,
        diag_info,
        n_samples: h.parse("n_samples")?,
        epsilon: h.parse("epsilon")?,
        model_id: h.get("model_id")?.to_string(),
        seed: parse_seed(&h, "seed")?,
    })
}

pub fn save_stats(path: &Path, s: &FisherStats) -> Result<()> {
    write_atomic(path, &encode_stats(s)?)
}

pub fn load_stats(path: &Path) -> Result<FisherStats> {
    decode_stats(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats() -> FisherStats {
        FisherStats {
            mean_grad: vec![0.1, -2.5e-300],
            diag_info: vec![1.0 / 3.0, 0.0],
            n_samples: 10,
            epsilon: 1e-8,
            model_id: "abc".into(),
            seed: Some(u64::MAX),
        }
    }

    #[test]
    fn stats_round_trip() {
        let s = stats();
        assert_eq!(decode_stats(&encode_stats(&s).unwrap()).unwrap(), s);
        let t = FisherStats { seed: None, ..s };
        assert_eq!(decode_stats(&encode_stats(&t).unwrap()).unwrap(), t);
    }

    #[test]
    fn afv_file_round_trip() {
        let s = stats();
        let v = |id: &str, a: f64| AdversarialFisherVector {
            values: vec![a, -a],
            source_id: id.into(),
            model_id: "abc".into(),
        };
        let f = AfvFile::new(
            "ckpt",
            &s,
            vec![v("0", 1.0), v("row 1", f64::MIN_POSITIVE)],
            Some(vec![3, 0]),
        )
        .unwrap();
        let back = decode_afv_file(&encode_afv_file(&f).unwrap()).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.stats_seed, Some(u64::MAX));

        let foreign = AdversarialFisherVector {
            model_id: "other".into(),
            ..v("x", 0.0)
        };
        assert!(AfvFile::new("ckpt", &s, vec![foreign], None).is_err());
    }
}
