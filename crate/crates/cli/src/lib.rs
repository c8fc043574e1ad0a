//! The `afv` command line. Every command is a function of its arguments
//! and seeds; reports go to the supplied writer, diagnostics to stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use afv_core::afv::{extract_afvs, fisher_distance, fisher_distance_squared, fisher_similarity, fisher_stats_estimate};
use afv_core::autodiff::Tensor;
use afv_core::data::{gen_dataset, split_indices, Dataset, DatasetKind};
use afv_core::eval::{class_distance_matrix, dpool_features, group_by_label, knn_query, svm_accuracy, SvmParams};
use afv_core::io::{
    dataset_to_csv, import_csv, load_afv_file, load_checkpoint, load_dataset, save_afv_file, save_checkpoint,
    save_dataset, save_stats, write_atomic, AfvFile,
};
use afv_core::oracle::oracle_suite;
use afv_core::training::{MetricsLog, MetricsWriter, TrainConfig, TrainState, Trainer};
use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "afv",
    version,
    about = "Energy-based GAN training and Adversarial Fisher Vectors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled dataset.
    GenDataset {
        /// two-moons, rings, gaussian-mixture-K or checkerboard.
        #[arg(long)]
        kind: DatasetKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the rows as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Convert a CSV file into the binary dataset format.
    ImportCsv {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// The last column is an integer class label.
        #[arg(long)]
        labeled: bool,
        #[arg(long)]
        name: Option<String>,
    },
    /// Split a dataset into shuffled training and validation parts.
    Split {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        val_out: PathBuf,
    },
    /// Train a GAN; writes checkpoints, metrics.jsonl and summary.json.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Validation data for Fisher Similarity monitoring.
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Continue from the latest checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Estimate Fisher statistics and export one vector per dataset row.
    ExtractAfv {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        stats_seed: u64,
        /// Generator samples for the statistics (default: the run's setting).
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Vectors go here; the statistics go to `<out>.stats`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fisher Distances between two vectors or between label classes.
    Distance {
        #[arg(long)]
        afv: PathBuf,
        /// Class distance matrix as CSV.
        #[arg(long, conflicts_with = "pair")]
        sets_by_label: bool,
        #[arg(long, num_args = 2, value_names = ["I", "J"])]
        pair: Option<Vec<usize>>,
        /// Similarity temperature (default: 10 / vector length).
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Nearest vectors to one row of an AFV file.
    Neighbors {
        #[arg(long)]
        afv: PathBuf,
        #[arg(long)]
        query: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    /// Linear SVM accuracy on a seeded train/test split.
    Classify {
        #[arg(long, value_enum, default_value_t = Features::Afv)]
        features: Features,
        /// AFV file (for `afv` features).
        #[arg(long)]
        afv: Option<PathBuf>,
        /// Labeled dataset (for `raw` and `dpool` features).
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Checkpoint whose discriminator gives `dpool` features.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 500)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
    },
    /// Plottable CSV series from a metrics log.
    Monitor {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare sampled Fisher quantities with closed-form oracles.
    OracleCheck {
        #[arg(long, default_value_t = 64)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Features {
    Afv,
    Raw,
    Dpool,
}

fn load_data(path: &Path) -> Result<Dataset> {
    load_dataset(path).with_context(|| format!("cannot read dataset {}", path.display()))
}

fn as_tensor(d: &Dataset) -> Result<Tensor> {
    Ok(Tensor::matrix(d.len(), d.dim(), d.features().to_vec())?)
}

fn checkpoint_path(dir: &Path, iteration: u64) -> PathBuf {
    dir.join("checkpoints").join(format!("iter-{iteration:08}.ckpt"))
}

/// The highest-iteration checkpoint in `out`.
fn latest_checkpoint(out: &Path) -> Result<PathBuf> {
    let mut found: Vec<PathBuf> = vec![out.join("final.ckpt")];
    if let Ok(entries) = fs::read_dir(out.join("checkpoints")) {
        for e in entries {
            found.push(e?.path());
        }
    }
    let mut best: Option<(u64, PathBuf)> = None;
    for p in found
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "ckpt") && p.is_file())
    {
        let (state, _) = load_checkpoint(&p).with_context(|| format!("cannot read {}", p.display()))?;
        if best.as_ref().is_none_or(|(i, _)| state.iteration > *i) {
            best = Some((state.iteration, p));
        }
    }
    best.map(|(_, p)| p)
        .with_context(|| format!("no checkpoint to resume in {}", out.display()))
}

/// Keys that may change between a run and its resumption.
const RESUMABLE_KEYS: [&str; 2] = ["iterations", "checkpoint_every"];

fn cmd_train(
    config: &Path,
    dataset: &Path,
    val: Option<&Path>,
    out: &Path,
    resume: bool,
    w: &mut dyn Write,
) -> Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("cannot read config {}", config.display()))?;
    let cfg = TrainConfig::parse(&text)?;
    let train = load_data(dataset)?;
    let val = val.map(load_data).transpose()?;
    fs::create_dir_all(out.join("checkpoints")).with_context(|| format!("cannot create {}", out.display()))?;

    let metrics_path = out.join("metrics.jsonl");
    let (state, mut metrics) = if resume {
        let path = latest_checkpoint(out)?;
        let (mut state, id) = load_checkpoint(&path)?;
        let saved = state.config.to_pairs();
        for ((k, a), (_, b)) in saved.iter().zip(cfg.to_pairs()) {
            if !RESUMABLE_KEYS.contains(k) && *a != b {
                bail!("config key `{k}` is {b} but the checkpoint was trained with {a}");
            }
        }
        state.config.iterations = cfg.iterations;
        state.config.checkpoint_every = cfg.checkpoint_every;
        writeln!(
            w,
            "resuming from {} (id {id}) at iteration {}",
            path.display(),
            state.iteration
        )?;
        let writer = MetricsWriter::append_through(&metrics_path, state.iteration)?;
        (state, writer)
    } else {
        (
            TrainState::init(cfg.clone(), train.dim())?,
            MetricsWriter::create(&metrics_path)?,
        )
    };
    write_atomic(&out.join("config.txt"), state.config.to_text().as_bytes())?;

    let until = state.config.iterations;
    let mut trainer = Trainer::resume(state, &train, val.as_ref())?;
    let mut last = None;
    trainer.run_until(
        until,
        |r| {
            last = Some(r.clone());
            metrics.write(r)
        },
        |s| save_checkpoint(&checkpoint_path(out, s.iteration), s).map(|_| ()),
    )?;
    let state = trainer.into_state();
    let id = save_checkpoint(&out.join("final.ckpt"), &state)?;
    let summary = serde_json::json!({
        "iterations": state.iteration,
        "checkpoint": "final.ckpt",
        "checkpoint_id": id,
        "train_rows": train.len(),
        "val_rows": val.as_ref().map(Dataset::len),
        "last_record": last,
    });
    write_atomic(&out.join("summary.json"), format!("{summary:#}\n").as_bytes())?;
    writeln!(w, "trained {} iterations; final checkpoint id {id}", state.iteration)?;
    Ok(())
}

fn cmd_extract(
    checkpoint: &Path,
    dataset: &Path,
    stats_seed: u64,
    n_samples: Option<usize>,
    epsilon: Option<f64>,
    out: &Path,
    w: &mut dyn Write,
) -> Result<()> {
    let (state, id) = load_checkpoint(checkpoint).with_context(|| format!("cannot read {}", checkpoint.display()))?;
    let data = load_data(dataset)?;
    ensure!(
        data.dim() == state.data_dim(),
        "dataset has {} features but the discriminator expects {}",
        data.dim(),
        state.data_dim()
    );
    let n = n_samples.unwrap_or_else(|| state.config.fisher_samples());
    let eps = epsilon.unwrap_or(state.config.fisher_epsilon);
    let d = &state.discriminator;
    let stats = fisher_stats_estimate(d, &state.generator, n, eps, stats_seed)?;
    let afvs = extract_afvs(d, &stats, &as_tensor(&data)?)?;
    let file = AfvFile::new(id.clone(), &stats, afvs, data.labels().map(<[u32]>::to_vec))?;
    let mut stats_path = out.as_os_str().to_owned();
    stats_path.push(".stats");
    save_stats(Path::new(&stats_path), &stats)?;
    save_afv_file(out, &file)?;
    writeln!(
        w,
        "wrote {} vectors of length {} from checkpoint {id}",
        file.len(),
        file.dim
    )?;
    Ok(())
}

fn cmd_distance(afv: &Path, sets: bool, pair: Option<&[usize]>, lambda: Option<f64>, w: &mut dyn Write) -> Result<()> {
    let f = load_afv_file(afv).with_context(|| format!("cannot read {}", afv.display()))?;
    let lambda = lambda.unwrap_or(10.0 / f.dim.max(1) as f64);
    if sets {
        let labels = f.labels.as_ref().context("the AFV file has no labels")?;
        let (classes, groups) = group_by_label(&f.vectors, labels)?;
        let m = class_distance_matrix(&classes, &groups)?;
        write!(w, "{}", m.to_csv())?;
        return Ok(());
    }
    let [i, j] = pair.context("pass --sets-by-label or --pair I J")? else {
        bail!("--pair takes two indices");
    };
    for &k in &[*i, *j] {
        ensure!(k < f.len(), "index {k} out of range for {} vectors", f.len());
    }
    let d2 = fisher_distance_squared(&f.vectors[*i], &f.vectors[*j])?;
    writeln!(w, "i,j,distance_squared,distance,similarity")?;
    writeln!(w, "{i},{j},{d2:?},{:?},{:?}", d2.sqrt(), fisher_similarity(d2, lambda)?)?;
    Ok(())
}

fn cmd_neighbors(afv: &Path, query: usize, k: usize, w: &mut dyn Write) -> Result<()> {
    let f = load_afv_file(afv).with_context(|| format!("cannot read {}", afv.display()))?;
    ensure!(query < f.len(), "query {query} out of range for {} vectors", f.len());
    let q = &f.vectors[query];
    writeln!(w, "rank,index,id,distance")?;
    for (rank, i) in knn_query(q, &f.vectors, k)?.into_iter().enumerate() {
        writeln!(
            w,
            "{},{i},{},{:?}",
            rank + 1,
            f.ids[i],
            fisher_distance(q, &f.vectors[i])?
        )?;
    }
    Ok(())
}

struct ClassifyArgs<'a> {
    features: Features,
    afv: Option<&'a Path>,
    dataset: Option<&'a Path>,
    checkpoint: Option<&'a Path>,
    train_fraction: f64,
    split_seed: u64,
    params: SvmParams,
}

fn cmd_classify(a: ClassifyArgs<'_>, w: &mut dyn Write) -> Result<()> {
    let (rows, labels) = match a.features {
        Features::Afv => {
            let path = a.afv.context("--afv is required for afv features")?;
            let f = load_afv_file(path).with_context(|| format!("cannot read {}", path.display()))?;
            let labels = f.labels.context("the AFV file has no labels")?;
            (f.vectors, labels)
        }
        Features::Raw | Features::Dpool => {
            let data = load_data(a.dataset.context("--dataset is required for raw and dpool features")?)?;
            let labels = data.labels().context("the dataset has no labels")?.to_vec();
            let rows = if a.features == Features::Raw {
                data.rows().map(<[f64]>::to_vec).collect()
            } else {
                let path = a.checkpoint.context("--checkpoint is required for dpool features")?;
                let (state, _) = load_checkpoint(path)?;
                dpool_features(&state.discriminator, &as_tensor(&data)?)?
            };
            (rows, labels)
        }
    };
    let (tr, te) = split_indices(rows.len(), a.train_fraction, a.split_seed)?;
    ensure!(!te.is_empty(), "the split leaves no test rows");
    let pick =
        |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<u32>) { idx.iter().map(|&i| (rows[i].clone(), labels[i])).unzip() };
    let (xtr, ytr) = pick(&tr);
    let (xte, yte) = pick(&te);
    let train_acc = svm_accuracy(&xtr, &ytr, &xtr, &ytr, &a.params)?;
    let test_acc = svm_accuracy(&xtr, &ytr, &xte, &yte, &a.params)?;
    let name = a.features.to_possible_value().expect("no skipped variants");
    writeln!(w, "features,dim,train_rows,test_rows,train_accuracy,test_accuracy")?;
    writeln!(
        w,
        "{},{},{},{},{train_acc:?},{test_acc:?}",
        name.get_name(),
        rows.first().map_or(0, Vec::len),
        tr.len(),
        te.len()
    )?;
    Ok(())
}

fn cmd_monitor(metrics: &Path, out: Option<&Path>, w: &mut dyn Write) -> Result<()> {
    let parsed = MetricsLog::read(metrics)?;
    if parsed.truncated_tail {
        eprintln!("warning: {} ends in a truncated record, ignored", metrics.display());
    }
    let csv = parsed.log.to_monitor_csv();
    match out {
        Some(p) => write_atomic(p, csv.as_bytes())?,
        None => write!(w, "{csv}")?,
    }
    Ok(())
}

fn cmd_oracle_check(replicates: usize, seed: u64, w: &mut dyn Write) -> Result<()> {
    let checks = oracle_suite(replicates, seed)?;
    writeln!(w, "check,value,threshold,result")?;
    for c in &checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        writeln!(w, "{},{:.6},{},{verdict}", c.name, c.value, c.threshold)?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    ensure!(failed == 0, "{failed} of {} oracle checks failed", checks.len());
    Ok(())
}

pub fn run(cli: Cli, w: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::GenDataset {
            kind,
            n,
            noise,
            seed,
            out,
            csv,
        } => {
            let d = gen_dataset(kind, n, noise, seed)?;
            save_dataset(&out, &d)?;
            if let Some(p) = csv {
                write_atomic(&p, dataset_to_csv(&d).as_bytes())?;
            }
            writeln!(w, "wrote {} rows of {kind} to {}", d.len(), out.display())?;
        }
        Command::ImportCsv {
            input,
            out,
            labeled,
            name,
        } => {
            let text = fs::read_to_string(&input).with_context(|| format!("cannot read {}", input.display()))?;
            let stem = input
                .file_stem()
                .map_or("csv".into(), |s| s.to_string_lossy().into_owned());
            let d = import_csv(&text, name.as_deref().unwrap_or(&stem), labeled)?;
            save_dataset(&out, &d)?;
            writeln!(w, "imported {} rows of dimension {}", d.len(), d.dim())?;
        }
        Command::Split {
            dataset,
            train_fraction,
            seed,
            train_out,
            val_out,
        } => {
            let d = load_data(&dataset)?;
            let (a, b) = d.split(train_fraction, seed)?;
            save_dataset(&train_out, &a)?;
            save_dataset(&val_out, &b)?;
            writeln!(w, "split {} rows into {} and {}", d.len(), a.len(), b.len())?;
        }
        Command::Train {
            config,
            dataset,
            val,
            out,
            resume,
        } => cmd_train(&config, &dataset, val.as_deref(), &out, resume, w)?,
        Command::ExtractAfv {
            checkpoint,
            dataset,
            stats_seed,
            n_samples,
            epsilon,
            out,
        } => cmd_extract(&checkpoint, &dataset, stats_seed, n_samples, epsilon, &out, w)?,
        Command::Distance {
            afv,
            sets_by_label,
            pair,
            lambda,
        } => cmd_distance(&afv, sets_by_label, pair.as_deref(), lambda, w)?,
        Command::Neighbors { afv, query, k } => cmd_neighbors(&afv, query, k, w)?,
        Command::Classify {
            features,
            afv,
            dataset,
            checkpoint,
            train_fraction,
            split_seed,
            c,
            epochs,
            lr,
        } => cmd_classify(
            ClassifyArgs {
                features,
                afv: afv.as_deref(),
                dataset: dataset.as_deref(),
                checkpoint: checkpoint.as_deref(),
                train_fraction,
                split_seed,
                params: SvmParams { c, epochs, lr },
            },
            w,
        )?,
        Command::Monitor { metrics, out } => cmd_monitor(&metrics, out.as_deref(), w)?,
        Command::OracleCheck { replicates, seed } => cmd_oracle_check(replicates, seed, w)?,
    }
    Ok(())
}
