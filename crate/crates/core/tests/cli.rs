use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use balancing_weights::balance::baseline_table;
use balancing_weights::cli::sha256_hex;
use balancing_weights::weights::read_weights_csv;
use balancing_weights::{data, IngestConfig, WeightScheme};
use serde_json::Value;

fn demo(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(file)
}

fn bw(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bw"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn with_demo<'a>(cmd: &'a str, data: &'a str, schema: &'a str) -> Vec<&'a str> {
    vec![cmd, "--data", data, "--schema", schema, "--out-dir", "out"]
}

fn json_file(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap()
}

#[test]
fn estimate_writes_report_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (d, s) = (demo("demo.csv"), demo("demo.toml"));
    let (d, s) = (d.to_str().unwrap(), s.to_str().unwrap());
    let mut args = with_demo("estimate", d, s);
    args.extend(["--scheme", "overlap", "--ci-level", "0.9"]);
    let out = bw(dir.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    let file = json_file(dir.path().join("out/estimate.json"));
    assert_eq!(stdout, file);
    let m = &file["manifest"];
    assert_eq!(m["command"], "estimate");
    assert_eq!(m["input_digest"], sha256_hex(&fs::read(d).unwrap()));
    assert_eq!(m["flags"]["variance"], "sandwich");
    assert_eq!(m["flags"]["contrast"], serde_json::json!([1, 0]));
    let est = &file["estimate"];
    assert_eq!(est["estimand_label"], "ATO");
    assert_eq!(est["ci"]["level"], 0.9);
    let (lo, hi, p) = (
        est["ci"]["lower"].as_f64().unwrap(),
        est["ci"]["upper"].as_f64().unwrap(),
        est["point"].as_f64().unwrap(),
    );
    assert!(lo < p && p < hi);
    assert!(file["balance"]["max_abs_weighted_smd"].as_f64().unwrap() < 1e-6);
}

#[test]
fn estimate_variants_run() {
    let dir = tempfile::tempdir().unwrap();
    let (d, s) = (demo("demo.csv"), demo("demo.toml"));
    let (d, s) = (d.to_str().unwrap(), s.to_str().unwrap());
    for extra in [
        vec!["--scheme", "iptw", "--augmented", "--variance", "bootstrap", "--bootstrap-reps", "200"],
        vec!["--scheme", "overlap", "--ps-adjusted", "--variance", "none"],
        vec!["--scheme", "trimmed:0.05", "--variance", "bootstrap", "--bootstrap-reps", "150"],
        vec!["--scheme", "entropy", "--contrast", "0", "1"],
    ] {
        let mut args = with_demo("estimate", d, s);
        args.extend(extra.iter().copied());
        let out = bw(dir.path(), &args);
        assert!(out.status.success(), "{extra:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn balance_runs_without_outcome_and_histogram_counts_add_up() {
    let dir = tempfile::tempdir().unwrap();
    // Strip the outcome column entirely.
    let text = fs::read_to_string(demo("demo.csv")).unwrap();
    let stripped: String = text
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n")
        .collect();
    fs::write(dir.path().join("design.csv"), stripped).unwrap();
    fs::write(
        dir.path().join("design.toml"),
        "treatment_col = \"treated\"\ncovariate_cols = [\"age\", \"severity\", \"site\"]\ncategorical_cols = [\"site\"]\n",
    )
    .unwrap();
    let out = bw(
        dir.path(),
        &["balance", "--data", "design.csv", "--schema", "design.toml", "--out-dir", "out", "--bins", "10"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let report = json_file(dir.path().join("out/balance.json"));
    assert_eq!(report["report"]["scheme"], "overlap");
    let hist = fs::read_to_string(dir.path().join("out/ps_histogram.csv")).unwrap();
    let mut counts = [0usize; 2];
    for line in hist.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        counts[f[2].parse::<usize>().unwrap()] += f[3].parse::<usize>().unwrap();
    }
    let z: Vec<usize> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert_eq!(counts[0], z.iter().filter(|&&v| v == 0).count());
    assert_eq!(counts[1], z.iter().filter(|&&v| v == 1).count());
    assert_eq!(hist.lines().count(), 1 + 10 * 2);
}

#[test]
fn baseline_table_regenerates_from_weights_file() {
    let dir = tempfile::tempdir().unwrap();
    let (d, s) = (demo("demo.csv"), demo("demo.toml"));
    let (d, s) = (d.to_str().unwrap(), s.to_str().unwrap());
    for (cmd, scheme) in [("weights", "matching"), ("balance", "matching")] {
        let mut args = with_demo(cmd, d, s);
        args.extend(["--scheme", scheme]);
        let out = bw(dir.path(), &args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let config = IngestConfig::from_path(s).unwrap();
    let design = data::ingest_design(d, &config).unwrap();
    let file = fs::File::open(dir.path().join("out/weights.csv")).unwrap();
    let w = read_weights_csv(file, &design, WeightScheme::Matching).unwrap();
    let regenerated = baseline_table(&design, Some(&w)).unwrap().to_csv_string().unwrap();
    let written = fs::read_to_string(dir.path().join("out/baseline.csv")).unwrap();
    assert_eq!(regenerated.as_bytes(), written.as_bytes());

    let summary = json_file(dir.path().join("out/weights_summary.json"));
    assert_eq!(summary["estimand"], "matching");
}

#[test]
fn simulate_writes_summary_and_replicates() {
    let dir = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/moderate_overlap.toml");
    let out = bw(
        dir.path(),
        &["simulate", "--config", config.to_str().unwrap(), "--reps", "100", "--out", "sim"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = json_file(dir.path().join("sim/simulation.json"));
    let analyses = summary["result"]["analyses"].as_array().unwrap();
    assert_eq!(analyses.len(), 3);
    assert_eq!(summary["manifest"]["flags"]["reps"], 100);
    let reps = fs::read_to_string(dir.path().join("sim/replicates.csv")).unwrap();
    assert_eq!(reps.lines().count(), 1 + 100 * 3);
}

fn error_of(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str::<Value>(text.trim()).unwrap()["error"].clone()
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let (d, s) = (demo("demo.csv"), demo("demo.toml"));
    let (d, s) = (d.to_str().unwrap(), s.to_str().unwrap());

    // Missing required flag: usage error.
    let out = bw(dir.path(), &["estimate", "--data", d, "--schema", s]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["code"], "usage");

    // Missing input file: I/O.
    let out = bw(dir.path(), &["estimate", "--data", "absent.csv", "--schema", s, "--scheme", "overlap"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(error_of(&out)["message"].as_str().unwrap().contains("absent.csv"));

    // Unknown schema key: validation, naming the key.
    fs::write(dir.path().join("bad.toml"), "treatment_col = \"treated\"\ncovariate_cols = [\"age\"]\nweights_col = \"w\"\n").unwrap();
    let out = bw(dir.path(), &["balance", "--data", d, "--schema", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_of(&out)["message"].as_str().unwrap().contains("weights_col"));

    // Missing value: ingestion error with row and column.
    fs::write(dir.path().join("gap.csv"), "x,z,y\n1.0,0,1\n,1,2\n0.5,1,3\n0.2,0,1\n0.9,1,0\n").unwrap();
    fs::write(dir.path().join("gap.toml"), "treatment_col = \"z\"\noutcome_col = \"y\"\ncovariate_cols = [\"x\"]\n").unwrap();
    let out = bw(dir.path(), &["estimate", "--data", "gap.csv", "--schema", "gap.toml", "--scheme", "overlap"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["code"], "ingestion");

    // Perfect separation: numerical.
    let rows: String = (0..20)
        .map(|i| format!("{},{},{}\n", i, usize::from(i >= 10), i % 3))
        .collect();
    fs::write(dir.path().join("sep.csv"), format!("x,z,y\n{rows}")).unwrap();
    fs::write(dir.path().join("sep.toml"), "treatment_col = \"z\"\noutcome_col = \"y\"\ncovariate_cols = [\"x\"]\n").unwrap();
    let out = bw(dir.path(), &["estimate", "--data", "sep.csv", "--schema", "sep.toml", "--scheme", "overlap"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_of(&out)["code"], "separation");

    // Binary-only scheme on three arms: validation.
    let rows: String = (0..30)
        .map(|i| format!("{},{},{}\n", (i * 7 % 11) as f64 / 3.0, i % 3, i % 2))
        .collect();
    fs::write(dir.path().join("three.csv"), format!("x,z,y\n{rows}")).unwrap();
    let out = bw(dir.path(), &["estimate", "--data", "three.csv", "--schema", "sep.toml", "--scheme", "iptw"]);
    assert_eq!(out.status.code(), Some(2));
    let out = bw(
        dir.path(),
        &["estimate", "--data", "three.csv", "--schema", "sep.toml", "--scheme", "generalized-overlap", "--contrast", "2", "0", "--variance", "bootstrap", "--bootstrap-reps", "100"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
