use backhaul_cli::{emit_plot_data, load_csv, run_experiment, ExperimentConfig, Format, RunOptions, Table};
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_backhaul"));
    cmd.args(args).env_remove("BACKHAUL_SEED").env_remove("RUST_LOG");
    if let Some(s) = env_seed {
        cmd.env("BACKHAUL_SEED", s);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn run(text: &str, jobs: Option<usize>) -> Table {
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    let opts = RunOptions {
        jobs,
        ..RunOptions::default()
    };
    run_experiment(&cfg, &opts).unwrap().table
}

fn csv_text(table: &Table) -> String {
    let mut buf = Vec::new();
    emit_plot_data(table, Format::Csv, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

const SPARSE: &str = r#"
experiment = "sparse_vs_k"
snr_db = [20.0]
inr_db = 15.0
stages = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
"#;

fn mean(table: &Table, scheme: &str, label: &str, k: usize) -> f64 {
    table
        .rows
        .iter()
        .find(|r| r.scheme == scheme && r.label == label && r.stages == k)
        .unwrap_or_else(|| panic!("no {scheme} {label} K={k}"))
        .mean
}

#[test]
fn sparse_run_has_five_curves() {
    let table = run(SPARSE, None);
    assert_eq!(table.rows.len(), 50);
    let mut curves: Vec<(String, String)> = table.rows.iter().map(|r| (r.scheme.clone(), r.label.clone())).collect();
    curves.dedup();
    curves.sort();
    curves.dedup();
    assert_eq!(curves.len(), 5);
    assert!(table.rows.iter().all(|r| r.sources.is_none() && r.trials == 1));
    for k in 1..=10 {
        assert!((mean(&table, "mr", "-", k) - 1.354186).abs() < 1e-5);
        assert!(mean(&table, "qmf", "optimal", k) >= mean(&table, "qmf", "stage_depth", k) - 1e-9);
    }
    assert!(csv_text(&table).contains("sparse_vs_k,20,inf,1,qmf,optimal,4.6087"));
}

#[test]
fn reruns_are_byte_identical() {
    let dense = r#"
        experiment = "dense_vs_k"
        snr_db = [20.0]
        sources = [3]
        stages = [1, 2]
        policies = ["wyner_ziv", "optimal"]
        trials = 24
        seed = 5
    "#;
    let a = csv_text(&run(dense, Some(1)));
    let b = csv_text(&run(dense, Some(4)));
    assert_eq!(a, b);
    let one = dense.replace("trials = 24", "trials = 1");
    assert_eq!(csv_text(&run(&one, None)), csv_text(&run(&one, None)));
    assert_ne!(a, csv_text(&run(&dense.replace("seed = 5", "seed = 6"), None)));
}

#[test]
fn receivers_run_satisfies_ordering() {
    let table = run(
        r#"
        experiment = "receivers_vs_k"
        snr_db = [30.0]
        sources = [4]
        stages = [1, 2, 3]
        trials = 500
        seed = 2
        include_mr = false
        "#,
        None,
    );
    for k in 1..=3 {
        let m: Vec<f64> = ["ml", "if", "mmse", "zf"].iter().map(|kind| mean(&table, "receiver", kind, k)).collect();
        assert!(m.windows(2).all(|w| w[0] >= w[1]), "K={k}: {m:?}");
    }
}

#[test]
fn stderr_shrinks_with_trials() {
    let cfg = |n: usize| {
        format!(
            "experiment = \"receivers_vs_k\"\nsnr_db = [10.0]\nsources = [2]\nstages = [1]\nreceivers = [\"mmse\"]\ninclude_mr = false\ntrials = {n}\nseed = 11\n"
        )
    };
    let n = 200;
    let small = run(&cfg(n), None).rows[0].stderr;
    let large = run(&cfg(4 * n), None).rows[0].stderr;
    // relative spread of a sample standard deviation is about 1 / sqrt(2 (n - 1))
    let spread = (1.0 / (2.0 * (n - 1) as f64) + 1.0 / (2.0 * (4 * n - 1) as f64)).sqrt();
    let ratio = small / large;
    assert!((ratio - 2.0).abs() <= 3.0 * 2.0 * spread, "ratio {ratio}, band {}", 6.0 * spread);
}

#[test]
fn routing_run_beats_mr() {
    let table = run(
        r#"
        experiment = "routing_vs_snr"
        snr_db = [10.0, 20.0]
        sources = [2]
        stages = [3]
        metrics = ["mimo_capacity", "interference_aware"]
        trials = 20
        seed = 3
        "#,
        None,
    );
    assert_eq!(table.rows.len(), 8);
    for db in [10.0, 20.0] {
        let at = |scheme: &str| table.rows.iter().find(|r| r.scheme == scheme && r.snr_db == db).unwrap().mean;
        assert!(at("qmf:mimo_capacity") > at("mr:mimo_capacity"));
    }
}

#[test]
fn binary_writes_csv_and_gnuplot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sparse.csv");
    let cfg = write_config(dir.path(), "sparse.toml", &format!("{SPARSE}output = {:?}\n", out.to_string_lossy()));
    let o = bin(&["--config", &cfg], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = load_csv(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 50);

    let stdout_cfg = write_config(dir.path(), "stdout.toml", SPARSE);
    let o = bin(&["--config", &stdout_cfg, "--format", "gnuplot-dat"], None);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.split("\n\n\n").count(), 5);
}

#[test]
fn binary_exit_codes_and_seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", "experiment = \"dense_vs_k\"\nsnr_db = []\nstages = [1]\n");
    let o = bin(&["--config", &bad], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("snr_db"));

    let missing = bin(&["--config", "/nonexistent.toml"], None);
    assert_eq!(missing.status.code(), Some(2));

    let good = write_config(
        dir.path(),
        "good.toml",
        "experiment = \"dense_vs_k\"\nsnr_db = [20.0]\nstages = [1]\nsources = [2]\ntrials = 2\nseed = 1\n",
    );
    let o = bin(&["--config", &good, "--format", "png"], None);
    assert_eq!(o.status.code(), Some(2));

    let seed_of = |o: &Output| {
        let t = load_csv(o.stdout.as_slice()).unwrap();
        t.rows[0].seed
    };
    assert_eq!(seed_of(&bin(&["--config", &good], None)), 1);
    assert_eq!(seed_of(&bin(&["--config", &good], Some("77"))), 77);
    assert_eq!(seed_of(&bin(&["--config", &good, "--seed", "9"], Some("77"))), 9);
    assert_eq!(bin(&["--config", &good], Some("x")).status.code(), Some(2));
}

#[test]
fn binary_dumps_and_verbose_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "dense.toml",
        "experiment = \"dense_vs_k\"\nsnr_db = [20.0]\nstages = [2]\nsources = [2]\ntrials = 3\npolicies = [\"wyner_ziv\"]\ninclude_mr = false\n",
    );
    let o = bin(&["--config", &cfg, "--dump-network", "--dump-schedule", "--verbose", "--jobs", "2"], None);
    assert_eq!(o.status.code(), Some(0));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("# network snr_db=20 L=2 K=2"));
    assert!(err.contains("# schedule L=2 K=2"));
    assert!(err.contains("1 | TX: "));
    assert!(err.contains("trial,seed,snr,L,K,scheme,policy_or_kind,stage,rate"));
    // three trials of one series with stages 0, 1 and 2
    let rows = err.lines().filter(|l| l.contains(",qmf,wyner_ziv,")).count();
    assert_eq!(rows, 9);

    let routing = write_config(
        dir.path(),
        "routing.toml",
        "experiment = \"routing_vs_l\"\nsnr_db = [20.0]\nstages = [2]\nsources = [2]\ntrials = 1\n",
    );
    let o = bin(&["--config", &routing, "--dump-network"], None);
    assert_eq!(o.status.code(), Some(0));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("path 1: S1 → R("), "{err}");
}
