use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use afv_core::io::{load_afv_file, load_checkpoint, load_dataset};
use afv_core::training::{MetricsLog, TrainConfig, TrainState};

fn afv(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afv"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = afv(args, dir);
    assert!(
        out.status.success(),
        "afv {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn moons(dir: &Path, n: &str) {
    ok(
        &[
            "gen-dataset",
            "--kind",
            "two-moons",
            "--n",
            n,
            "--seed",
            "3",
            "--out",
            "d.afvd",
        ],
        dir,
    );
}

fn config(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn gen_dataset_is_deterministic_and_balanced() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for out in ["a.afvd", "b.afvd"] {
        ok(
            &[
                "gen-dataset",
                "--kind",
                "gaussian-mixture-3",
                "--n",
                "300",
                "--seed",
                "9",
                "--out",
                out,
            ],
            p,
        );
    }
    assert_eq!(fs::read(p.join("a.afvd")).unwrap(), fs::read(p.join("b.afvd")).unwrap());
    let d = load_dataset(&p.join("a.afvd")).unwrap();
    for c in 0..3 {
        assert_eq!(d.labels().unwrap().iter().filter(|&&l| l == c).count(), 100);
    }
    let bad = afv(&["gen-dataset", "--kind", "spiral", "--n", "5", "--out", "x"], p);
    assert!(!bad.status.success());
}

#[test]
fn zero_iterations_writes_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    moons(p, "64");
    config(p, "c.txt", "iterations = 0\nseed = 4\n");
    ok(
        &["train", "--config", "c.txt", "--dataset", "d.afvd", "--out", "run"],
        p,
    );
    let (state, _) = load_checkpoint(&p.join("run/final.ckpt")).unwrap();
    let cfg = TrainConfig::parse("iterations = 0\nseed = 4\n").unwrap();
    assert_eq!(state, TrainState::init(cfg, 2).unwrap());
    assert!(MetricsLog::read(&p.join("run/metrics.jsonl")).unwrap().log.is_empty());
}

#[test]
fn malformed_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    moons(p, "64");
    config(p, "c.txt", "iterations = 5\nlearning_rate = 0.1\n");
    let out = afv(
        &["train", "--config", "c.txt", "--dataset", "d.afvd", "--out", "run"],
        p,
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
    let missing = afv(
        &["train", "--config", "nope.txt", "--dataset", "d.afvd", "--out", "run"],
        p,
    );
    assert!(!missing.status.success());
}

#[test]
fn default_run_logs_every_iteration_and_resume_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    moons(p, "500");
    ok(
        &[
            "split",
            "--dataset",
            "d.afvd",
            "--train-out",
            "tr.afvd",
            "--val-out",
            "va.afvd",
        ],
        p,
    );
    config(p, "full.txt", "iterations = 300\ncheckpoint_every = 100\n");
    ok(
        &[
            "train",
            "--config",
            "full.txt",
            "--dataset",
            "tr.afvd",
            "--val",
            "va.afvd",
            "--out",
            "full",
        ],
        p,
    );
    let full = fs::read_to_string(p.join("full/metrics.jsonl")).unwrap();
    let log = MetricsLog::parse(&full).unwrap().log;
    assert_eq!(log.len(), 300);
    assert_eq!(
        log.records()
            .iter()
            .filter(|r| r.fisher_similarity_val.is_some())
            .count(),
        3
    );
    assert!(p.join("full/checkpoints/iter-00000200.ckpt").is_file());

    config(p, "part.txt", "iterations = 150\ncheckpoint_every = 100\n");
    ok(
        &[
            "train",
            "--config",
            "part.txt",
            "--dataset",
            "tr.afvd",
            "--val",
            "va.afvd",
            "--out",
            "part",
        ],
        p,
    );
    // Resume from the iteration-150 final checkpoint; the records written
    // after it are not replayed twice.
    ok(
        &[
            "train",
            "--config",
            "full.txt",
            "--dataset",
            "tr.afvd",
            "--val",
            "va.afvd",
            "--out",
            "part",
            "--resume",
        ],
        p,
    );
    assert_eq!(fs::read_to_string(p.join("part/metrics.jsonl")).unwrap(), full);
    assert_eq!(
        fs::read(p.join("part/final.ckpt")).unwrap(),
        fs::read(p.join("full/final.ckpt")).unwrap()
    );

    config(p, "other.txt", "iterations = 400\nlr_g = 0.1\n");
    let out = afv(
        &[
            "train",
            "--config",
            "other.txt",
            "--dataset",
            "tr.afvd",
            "--out",
            "part",
            "--resume",
        ],
        p,
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("lr_g"));

    let csv = ok(&["monitor", "--metrics", "full/metrics.jsonl"], p);
    assert_eq!(csv.lines().count(), 301);
    assert!(csv.starts_with("iteration,fisher_similarity_val,"));
}

#[test]
fn extraction_distances_and_classification() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    moons(p, "200");
    config(
        p,
        "c.txt",
        "iterations = 100\nd_hidden = 16,16\ng_hidden = 16\nfs_every = 0\n",
    );
    ok(
        &["train", "--config", "c.txt", "--dataset", "d.afvd", "--out", "run"],
        p,
    );
    let report = ok(
        &[
            "extract-afv",
            "--checkpoint",
            "run/final.ckpt",
            "--dataset",
            "d.afvd",
            "--n-samples",
            "200",
            "--out",
            "v.afv",
        ],
        p,
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("run/summary.json")).unwrap()).unwrap();
    let id = summary["checkpoint_id"].as_str().unwrap();
    assert!(report.contains(id));
    let f = load_afv_file(&p.join("v.afv")).unwrap();
    assert_eq!(f.checkpoint_id, id);
    assert_eq!(f.len(), 200);
    assert!(p.join("v.afv.stats").is_file());

    let m = ok(&["distance", "--afv", "v.afv", "--sets-by-label"], p);
    let rows: Vec<&str> = m.lines().collect();
    assert_eq!(rows[0], "class,0,1");
    assert!(rows[1].starts_with("0,0,"));

    let pair = ok(&["distance", "--afv", "v.afv", "--pair", "4", "4"], p);
    assert_eq!(pair.lines().nth(1).unwrap(), "4,4,0.0,0.0,1.0");

    let nn = ok(&["neighbors", "--afv", "v.afv", "--query", "7", "--k", "3"], p);
    assert!(nn.lines().nth(1).unwrap().starts_with("1,7,7,0.0"));

    for args in [
        vec!["classify", "--features", "afv", "--afv", "v.afv"],
        vec!["classify", "--features", "raw", "--dataset", "d.afvd"],
        vec![
            "classify",
            "--features",
            "dpool",
            "--dataset",
            "d.afvd",
            "--checkpoint",
            "run/final.ckpt",
        ],
    ] {
        let out = ok(&args, p);
        let cells: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
        let acc: f64 = cells[5].parse().unwrap();
        assert!((0.0..=1.0).contains(&acc));
        assert_eq!(cells[3], "40");
    }

    fs::write(p.join("w.csv"), "1,2,3\n4,5,6\n").unwrap();
    ok(&["import-csv", "--input", "w.csv", "--out", "w.afvd"], p);
    let out = afv(
        &[
            "extract-afv",
            "--checkpoint",
            "run/final.ckpt",
            "--dataset",
            "w.afvd",
            "--out",
            "x.afv",
        ],
        p,
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("expects 2"));
}

#[test]
fn import_csv_round_trips_gen_output() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(
        &[
            "gen-dataset",
            "--kind",
            "rings",
            "--n",
            "50",
            "--out",
            "r.afvd",
            "--csv",
            "r.csv",
        ],
        p,
    );
    ok(
        &[
            "import-csv",
            "--input",
            "r.csv",
            "--out",
            "back.afvd",
            "--labeled",
            "--name",
            "rings",
        ],
        p,
    );
    assert_eq!(
        load_dataset(&p.join("r.afvd")).unwrap(),
        load_dataset(&p.join("back.afvd")).unwrap()
    );
}
