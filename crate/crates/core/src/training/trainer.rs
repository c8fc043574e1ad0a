//! The outer loop. Iteration `t` (numbered from 1) runs `d_steps_per_g`
//! discriminator steps on real batches drawn with replacement, then one
//! generator step, then records metrics. Every `fs_every` iterations it
//! also estimates fresh Fisher statistics and the Fisher Similarity of a
//! generated batch to the first `fs_batch` training and validation rows.

use super::adam::AdamState;
use super::config::TrainConfig;
use super::metrics::{MetricsLog, MetricsRecord};
use super::steps::{d_step, g_step, DStepStats};
use crate::afv::{fisher_stats_estimate, set_fisher_similarity, ExampleSampler};
use crate::autodiff::Tensor;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{DiscriminatorModel, GeneratorModel, ShadowGenerator};
use crate::rng::{SeededRng, Stream};

/// Everything a run needs to continue bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub config: TrainConfig,
    /// Completed iterations.
    pub iteration: u64,
    pub generator: GeneratorModel,
    pub shadow: ShadowGenerator,
    pub discriminator: DiscriminatorModel,
    pub adam_g: AdamState,
    pub adam_d: AdamState,
    pub rng_data: SeededRng,
    pub rng_latent: SeededRng,
    pub rng_noise: SeededRng,
    pub rng_stats: SeededRng,
}

impl TrainState {
    /// Fresh models for data of width `data_dim`. Parameters come from the
    /// init stream: generator first, then discriminator weights and
    /// spectral vectors. Ḡ starts as a copy of G.
    pub fn init(config: TrainConfig, data_dim: usize) -> Result<Self> {
        config.validate()?;
        let mut init = SeededRng::new(config.seed, Stream::Init);
        let generator = GeneratorModel::init(config.generator_spec(data_dim)?, &mut init);
        let discriminator =
            DiscriminatorModel::init(config.discriminator_spec(data_dim)?, config.spectral_norm, &mut init);
        let shadow = ShadowGenerator::new(generator.clone(), config.polyak_tau)?;
        Ok(TrainState {
            adam_g: AdamState::new(generator.params().layout().clone()),
            adam_d: AdamState::new(discriminator.params().layout().clone()),
            rng_data: SeededRng::new(config.seed, Stream::Data),
            rng_latent: SeededRng::new(config.seed, Stream::Latent),
            rng_noise: SeededRng::new(config.seed, Stream::Noise),
            rng_stats: SeededRng::new(config.seed, Stream::Stats),
            iteration: 0,
            generator,
            shadow,
            discriminator,
            config,
        })
    }

    pub fn data_dim(&self) -> usize {
        self.discriminator.input_dim()
    }
}

/// Result of [`Trainer::train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub metrics: MetricsLog,
}

/// A run over fixed training (and optional validation) data.
#[derive(Debug)]
pub struct Trainer<'a> {
    state: TrainState,
    train: &'a Dataset,
    monitor_train: Tensor,
    monitor_val: Option<Tensor>,
}

impl<'a> Trainer<'a> {
    pub fn new(config: TrainConfig, train: &'a Dataset, val: Option<&'a Dataset>) -> Result<Self> {
        let state = TrainState::init(config, train.dim())?;
        Self::resume(state, train, val)
    }

    /// Continues from a saved state; the data must be the run's original.
    pub fn resume(state: TrainState, train: &'a Dataset, val: Option<&'a Dataset>) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::contract("training set is empty"));
        }
        for (what, d) in std::iter::once(("training", train)).chain(val.map(|v| ("validation", v))) {
            if d.dim() != state.data_dim() {
                return Err(Error::contract(format!(
                    "{what} data has {} features, models expect {}",
                    d.dim(),
                    state.data_dim()
                )));
            }
        }
        let fs_batch = state.config.fs_batch;
        let monitor_val = match val {
            Some(v) if !v.is_empty() => Some(v.head(fs_batch)?),
            _ => None,
        };
        Ok(Trainer {
            monitor_train: train.head(fs_batch)?,
            monitor_val,
            state,
            train,
        })
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    fn real_batch(&mut self) -> Result<Tensor> {
        let n = self.train.len();
        let idx: Vec<usize> = (0..self.state.config.batch_size)
            .map(|_| self.state.rng_data.index(n))
            .collect();
        self.train.batch(&idx)
    }

    fn monitor(&mut self) -> Result<(Option<f64>, Option<f64>)> {
        let s = &mut self.state;
        let stats_seed = s.rng_stats.next_u64();
        let batch_seed = s.rng_stats.next_u64();
        let d = &s.discriminator;
        let stats = fisher_stats_estimate(
            d,
            &s.generator,
            s.config.fisher_samples(),
            s.config.fisher_epsilon,
            stats_seed,
        )?;
        let fake = s
            .generator
            .sample_examples(s.config.fs_batch, &mut SeededRng::from_seed(batch_seed))?;
        let temperature = s.config.fs_temperature / d.param_count() as f64;
        let train = set_fisher_similarity(d, &stats, &self.monitor_train, &fake, temperature)?;
        let val = self
            .monitor_val
            .as_ref()
            .map(|v| set_fisher_similarity(d, &stats, v, &fake, temperature))
            .transpose()?;
        Ok((Some(train), val))
    }

    /// Runs one outer iteration and returns its record.
    pub fn step(&mut self) -> Result<MetricsRecord> {
        let iteration = self.state.iteration + 1;
        let mut last = DStepStats {
            loss: 0.0,
            penalty: 0.0,
            mean_real: 0.0,
            mean_fake: 0.0,
        };
        for _ in 0..self.state.config.d_steps_per_g {
            let real = self.real_batch()?;
            let s = &mut self.state;
            last = d_step(
                &mut s.discriminator,
                &s.generator,
                &real,
                &s.config,
                &mut s.adam_d,
                &mut s.rng_latent,
                iteration,
            )?;
        }
        let s = &mut self.state;
        let g = g_step(
            &mut s.generator,
            &mut s.shadow,
            &s.discriminator,
            &s.config,
            &mut s.adam_g,
            &mut s.rng_latent,
            &mut s.rng_noise,
            iteration,
        )?;
        s.iteration = iteration;
        let every = s.config.fs_every;
        let (fs_train, fs_val) = if every > 0 && iteration.is_multiple_of(every) {
            self.monitor()?
        } else {
            (None, None)
        };
        Ok(MetricsRecord {
            iteration,
            d_loss: last.loss,
            g_loss: g.loss,
            mean_d_real: last.mean_real,
            mean_d_fake: last.mean_fake,
            delta_g: g.delta_g,
            fisher_similarity_train: fs_train,
            fisher_similarity_val: fs_val,
        })
    }

    /// Runs until `until` iterations are complete. `on_checkpoint` sees the
    /// state after every `checkpoint_every`-th iteration.
    pub fn run_until(
        &mut self,
        until: u64,
        mut on_record: impl FnMut(&MetricsRecord) -> Result<()>,
        mut on_checkpoint: impl FnMut(&TrainState) -> Result<()>,
    ) -> Result<()> {
        while self.state.iteration < until {
            let record = self.step()?;
            on_record(&record)?;
            let every = self.state.config.checkpoint_every;
            if every > 0 && record.iteration.is_multiple_of(every) {
                on_checkpoint(&self.state)?;
            }
        }
        Ok(())
    }

    /// A complete run of `config.iterations` iterations, in memory.
    pub fn train(config: TrainConfig, train: &Dataset, val: Option<&Dataset>) -> Result<TrainOutcome> {
        let mut trainer = Trainer::new(config, train, val)?;
        let mut metrics = MetricsLog::new();
        let until = trainer.state.config.iterations;
        trainer.run_until(until, |r| metrics.push(r.clone()), |_| Ok(()))?;
        Ok(TrainOutcome {
            state: trainer.into_state(),
            metrics,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_dataset, DatasetKind};

    fn small_config(iterations: u64) -> TrainConfig {
        TrainConfig {
            iterations,
            batch_size: 16,
            g_hidden: vec![16],
            d_hidden: vec![16],
            fs_every: 5,
            fs_batch: 16,
            fs_samples: Some(32),
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_iterations_is_initialization() {
        let data = gen_dataset(DatasetKind::TwoMoons, 64, 0.05, 1).unwrap();
        let out = Trainer::train(small_config(0), &data, None).unwrap();
        assert!(out.metrics.is_empty());
        assert_eq!(out.state, TrainState::init(small_config(0), 2).unwrap());
    }

    #[test]
    fn runs_are_deterministic_and_monitor_on_cadence() {
        let data = gen_dataset(DatasetKind::TwoMoons, 100, 0.05, 1).unwrap();
        let (tr, va) = data.split(0.8, 2).unwrap();
        let a = Trainer::train(small_config(12), &tr, Some(&va)).unwrap();
        let b = Trainer::train(small_config(12), &tr, Some(&va)).unwrap();
        assert_eq!(a.metrics.to_jsonl(), b.metrics.to_jsonl());
        assert_eq!(a.state, b.state);
        let recs = a.metrics.records();
        assert_eq!(recs.len(), 12);
        for r in recs {
            let due = r.iteration % 5 == 0;
            assert_eq!(r.fisher_similarity_val.is_some(), due);
            if let Some(s) = r.fisher_similarity_train {
                assert!(s > 0.0 && s <= 1.0);
            }
            assert!(r.delta_g >= 0.0);
        }
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let data = gen_dataset(DatasetKind::TwoMoons, 80, 0.05, 4).unwrap();
        let full = Trainer::train(small_config(10), &data, Some(&data)).unwrap();
        let mut t = Trainer::new(small_config(10), &data, Some(&data)).unwrap();
        let mut log = MetricsLog::new();
        t.run_until(4, |r| log.push(r.clone()), |_| Ok(())).unwrap();
        let saved = t.into_state();
        let mut t = Trainer::resume(saved, &data, Some(&data)).unwrap();
        t.run_until(10, |r| log.push(r.clone()), |_| Ok(())).unwrap();
        assert_eq!(log.to_jsonl(), full.metrics.to_jsonl());
        assert_eq!(t.into_state(), full.state);
    }

    #[test]
    fn checkpoint_hook_follows_cadence() {
        let data = gen_dataset(DatasetKind::Rings, 40, 0.05, 5).unwrap();
        let mut cfg = small_config(7);
        cfg.checkpoint_every = 3;
        let mut t = Trainer::new(cfg, &data, None).unwrap();
        let mut seen = Vec::new();
        t.run_until(
            7,
            |_| Ok(()),
            |s| {
                seen.push(s.iteration);
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(seen, vec![3, 6]);
    }

    #[test]
    fn rejects_mismatched_validation_width() {
        let data = gen_dataset(DatasetKind::Rings, 40, 0.05, 5).unwrap();
        let wide = Dataset::new("w", 3, vec![0.0; 6], None).unwrap();
        assert!(Trainer::new(small_config(1), &data, Some(&wide)).is_err());
    }
}
