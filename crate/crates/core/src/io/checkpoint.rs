//! Checkpoint file: everything in [`TrainState`], in the shared framing.
//!
//! Header fields: `iteration`, `generator` and `discriminator` model
//! descriptors, `spectral_norm`, `adam_g.step`, `adam_d.step`, one
//! `rng.<stream> <seed> <stream-id> <word-pos>` line per training stream and
//! one `config.<key> <value>` line per config key. The payload is the
//! generator, shadow generator and discriminator parameters, the
//! discriminator's spectral vectors, then the generator's and
//! discriminator's Adam first and second moments.

use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::header::{put_f64s, read_file, write_atomic, Header, Payload};
use crate::autodiff::{ParamLayout, ParamVector};
use crate::error::{Error, Result};
use crate::models::{DiscriminatorModel, GeneratorModel, MlpSpec, ShadowGenerator};
use crate::rng::{SeededRng, StreamState};
use crate::training::{AdamState, TrainConfig, TrainState};

pub const CHECKPOINT_MAGIC: &str = "AFVCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

const RNG_STREAMS: [&str; 4] = ["data", "latent", "noise", "stats"];

fn rng_text(r: &SeededRng) -> String {
    let s = r.state();
    format!("{} {} {}", s.seed, s.stream, s.word_pos)
}

fn parse_rng(h: &Header, name: &str) -> Result<SeededRng> {
    let key = format!("rng.{name}");
    let v = h.get(&key)?;
    let parts: Vec<&str> = v.split(' ').collect();
    let bad = || Error::format(format!("`{key}` must be `seed stream word-pos`, got `{v}`"));
    let [seed, stream, pos] = parts[..] else {
        return Err(bad());
    };
    Ok(SeededRng::restore(StreamState {
        seed: seed.parse().map_err(|_| bad())?,
        stream: stream.parse().map_err(|_| bad())?,
        word_pos: pos.parse().map_err(|_| bad())?,
    }))
}

pub fn encode_checkpoint(s: &TrainState) -> Result<Vec<u8>> {
    let mut h = Header::default();
    h.push("iteration", s.iteration);
    h.push("generator", s.generator.spec());
    h.push("discriminator", s.discriminator.spec());
    h.push("spectral_norm", s.discriminator.spectral_enabled());
    h.push("adam_g.step", s.adam_g.step);
    h.push("adam_d.step", s.adam_d.step);
    for (name, r) in RNG_STREAMS
        .iter()
        .zip([&s.rng_data, &s.rng_latent, &s.rng_noise, &s.rng_stats])
    {
        h.push(format!("rng.{name}"), rng_text(r));
    }
    for (k, v) in s.config.to_pairs() {
        h.push(format!("config.{k}"), v);
    }
    let mut out = h.encode(CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    put_f64s(&mut out, s.generator.params().values());
    put_f64s(&mut out, s.shadow.params().values());
    put_f64s(&mut out, s.discriminator.params().values());
    for u in s.discriminator.spectral_states() {
        put_f64s(&mut out, u);
    }
    for a in [&s.adam_g, &s.adam_d] {
        put_f64s(&mut out, a.m.values());
        put_f64s(&mut out, a.v.values());
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<TrainState> {
    let (h, payload) = Header::decode(bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    let config = TrainConfig::from_pairs(h.with_prefix("config."))?;
    let g_spec: MlpSpec = h.get("generator")?.parse()?;
    let d_spec: MlpSpec = h.get("discriminator")?.parse()?;
    let g_layout = Arc::new(g_spec.layout());
    let d_layout = Arc::new(d_spec.layout());
    let mut p = Payload::new(payload);
    let mut params = |layout: &Arc<ParamLayout>| -> Result<ParamVector> {
        let n = layout.len();
        ParamVector::new(Arc::clone(layout), p.f64s(n)?)
    };
    let g_params = params(&g_layout)?;
    let shadow_params = params(&g_layout)?;
    let d_params = params(&d_layout)?;
    let spectral = d_spec.widths()[..d_spec.n_layers()]
        .iter()
        .map(|&w| p.f64s(w))
        .collect::<Result<Vec<_>>>()?;
    let mut adam = |layout: &Arc<ParamLayout>, step: u64| -> Result<AdamState> {
        let n = layout.len();
        Ok(AdamState {
            m: ParamVector::new(Arc::clone(layout), p.f64s(n)?)?,
            v: ParamVector::new(Arc::clone(layout), p.f64s(n)?)?,
            step,
        })
    };
    let adam_g = adam(&g_layout, h.parse("adam_g.step")?)?;
    let adam_d = adam(&d_layout, h.parse("adam_d.step")?)?;
    p.finish()?;
    let generator = GeneratorModel::new(g_spec.clone(), g_params)?;
    let shadow = ShadowGenerator::new(GeneratorModel::new(g_spec, shadow_params)?, config.polyak_tau)?;
    let discriminator = DiscriminatorModel::new(d_spec, d_params, spectral, h.parse("spectral_norm")?)?;
    Ok(TrainState {
        iteration: h.parse("iteration")?,
        rng_data: parse_rng(&h, "data")?,
        rng_latent: parse_rng(&h, "latent")?,
        rng_noise: parse_rng(&h, "noise")?,
        rng_stats: parse_rng(&h, "stats")?,
        config,
        generator,
        shadow,
        discriminator,
        adam_g,
        adam_d,
    })
}

/// First 16 hex digits of the SHA-256 of a checkpoint's bytes.
pub fn checkpoint_id(bytes: &[u8]) -> String {
    Sha256::digest(bytes)[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes the checkpoint and returns its id.
pub fn save_checkpoint(path: &Path, s: &TrainState) -> Result<String> {
    let bytes = encode_checkpoint(s)?;
    write_atomic(path, &bytes)?;
    Ok(checkpoint_id(&bytes))
}

/// The state and the checkpoint's id.
pub fn load_checkpoint(path: &Path) -> Result<(TrainState, String)> {
    let bytes = read_file(path)?;
    Ok((decode_checkpoint(&bytes)?, checkpoint_id(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_dataset, DatasetKind};
    use crate::training::{MetricsLog, Trainer};

    fn config() -> TrainConfig {
        TrainConfig {
            iterations: 6,
            batch_size: 8,
            g_hidden: vec![8],
            d_hidden: vec![8, 4],
            fs_every: 3,
            fs_batch: 8,
            fs_samples: Some(16),
            gamma: 0.5,
            noise_enabled: true,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let data = gen_dataset(DatasetKind::TwoMoons, 40, 0.05, 1).unwrap();
        let state = Trainer::train(config(), &data, None).unwrap().state;
        let bytes = encode_checkpoint(&state).unwrap();
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back, state);
        assert_eq!(encode_checkpoint(&back).unwrap(), bytes);
    }

    #[test]
    fn resume_from_bytes_matches_uninterrupted_run() {
        let data = gen_dataset(DatasetKind::Rings, 40, 0.05, 2).unwrap();
        let full = Trainer::train(config(), &data, Some(&data)).unwrap();
        let mut t = Trainer::new(config(), &data, Some(&data)).unwrap();
        let mut log = MetricsLog::new();
        t.run_until(2, |r| log.push(r.clone()), |_| Ok(())).unwrap();
        let bytes = encode_checkpoint(t.state()).unwrap();
        let mut t = Trainer::resume(decode_checkpoint(&bytes).unwrap(), &data, Some(&data)).unwrap();
        t.run_until(6, |r| log.push(r.clone()), |_| Ok(())).unwrap();
        assert_eq!(log.to_jsonl(), full.metrics.to_jsonl());
        assert_eq!(t.into_state(), full.state);
    }

    #[test]
    fn version_mismatch_and_truncation_are_rejected() {
        let state = TrainState::init(config(), 2).unwrap();
        let bytes = encode_checkpoint(&state).unwrap();
        let mut newer = b"AFVCKPT 2".to_vec();
        newer.extend_from_slice(&bytes[9..]);
        assert!(matches!(
            decode_checkpoint(&newer),
            Err(Error::Version {
                found: 2,
                expected: 1,
                ..
            })
        ));
        assert!(decode_checkpoint(&bytes[..bytes.len() - 8]).is_err());
        assert_eq!(checkpoint_id(&bytes).len(), 16);
        assert_ne!(checkpoint_id(&bytes), checkpoint_id(&newer));
    }
}
