use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn faasim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faasim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_small_perf_cost(out: &Path, seed: &str, config: &Path) -> Output {
    faasim(&[
        "run",
        "--experiment",
        "perf-cost",
        "--profile",
        "gcp-like",
        "--workload",
        "graph-bfs-py",
        "--seed",
        seed,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

const SMALL: &str = r#"
[experiment.perf-cost]
memory = [512]
samples_target = 50
batch_size = 25
max_samples = 100
"#;

#[test]
fn same_manifest_gives_identical_records() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    fs::write(&config, SMALL).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run_small_perf_cost(&a, "9", &config).status.success());
    assert!(run_small_perf_cost(&b, "9", &config).status.success());
    let ra = fs::read(a.join("records.csv")).unwrap();
    assert_eq!(ra, fs::read(b.join("records.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("report.json")).unwrap(),
        fs::read(b.join("report.json")).unwrap()
    );
    let c = dir.path().join("c");
    assert!(run_small_perf_cost(&c, "10", &config).status.success());
    assert_ne!(ra, fs::read(c.join("records.csv")).unwrap());
}

#[test]
fn every_row_carries_manifest_hash() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    fs::write(&config, SMALL).unwrap();
    let out = dir.path().join("run");
    assert!(run_small_perf_cost(&out, "1", &config).status.success());
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    let hash = manifest["manifest_hash"].as_str().unwrap().to_string();
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["manifest_hash"], hash.as_str());
    assert_eq!(report["schema_version"], 1);
    let mut rows = csv::Reader::from_path(out.join("records.csv")).unwrap();
    let n = rows
        .records()
        .map(|r| {
            assert_eq!(&r.unwrap()[0], hash.as_str());
        })
        .count();
    assert!(n >= 100);

    assert!(faasim(&["report", "--input", out.to_str().unwrap()]).status.success());
    let mut whiskers = csv::Reader::from_path(out.join("whiskers.csv")).unwrap();
    let headers: Vec<String> = whiskers.headers().unwrap().iter().map(String::from).collect();
    for col in ["p2", "p25", "p50", "p75", "p98"] {
        assert!(headers.iter().any(|h| h == col), "missing {col}");
    }
    assert!(whiskers.records().all(|r| &r.unwrap()[0] == hash.as_str()));
    assert!(out.join("cold_warm_ratios.csv").exists());
    assert!(out.join("cost.csv").exists());
}

#[test]
fn hash_ignores_output_location() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    fs::write(&config, SMALL).unwrap();
    let read_hash = |p: &Path| {
        let v: serde_json::Value =
            serde_json::from_slice(&fs::read(p.join("manifest.json")).unwrap()).unwrap();
        v["manifest_hash"].as_str().unwrap().to_string()
    };
    let a = dir.path().join("x");
    let b = dir.path().join("y");
    run_small_perf_cost(&a, "4", &config);
    run_small_perf_cost(&b, "4", &config);
    assert_eq!(read_hash(&a), read_hash(&b));
}

#[test]
fn unknown_profile_exits_2_naming_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = faasim(&[
        "run",
        "--experiment",
        "eviction",
        "--profile",
        "no-such-cloud",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["key"], "no-such-cloud");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "[experiment.eviction]\nd_inti = [1]\n").unwrap();
    let out = faasim(&[
        "run",
        "--experiment",
        "eviction",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["key"], "experiment.eviction.d_inti");
}

#[test]
fn existing_output_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    fs::write(&config, SMALL).unwrap();
    let out = dir.path().join("run");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("keep.txt"), "x").unwrap();
    assert_eq!(run_small_perf_cost(&out, "1", &config).status.code(), Some(3));
    let forced = faasim(&[
        "run",
        "--experiment",
        "perf-cost",
        "--workload",
        "graph-bfs-py",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--force",
    ]);
    assert!(forced.status.success());
}

#[test]
fn experiment_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("fail.toml");
    fs::write(&config, "[simulator.faults]\nfailure_rate = 0.9\n[experiment.perf-cost]\nmemory = [512]\n").unwrap();
    let out = faasim(&[
        "run",
        "--experiment",
        "perf-cost",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "experiment-failed");
    assert!(err["partial_records"].as_u64().unwrap() > 0);
}

#[test]
fn report_on_empty_dir_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = faasim(&["report", "--input", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn report_refuses_mixed_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    fs::write(&config, SMALL).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_small_perf_cost(&a, "1", &config);
    run_small_perf_cost(&b, "2", &config);
    fs::copy(b.join("records.csv"), a.join("other.csv")).unwrap();
    let out = faasim(&["report", "--input", a.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
    assert!(!a.join("whiskers.csv").exists());
}

#[test]
fn eviction_report_matches_law() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("grid.toml");
    fs::write(
        &config,
        "[experiment.eviction]\nd_init = [4, 16]\ndelta_t = [1.0, 200.0, 400.0, 800.0, 1200.0, 1600.0]\nsleep_times = [1.0]\nmemory = [128]\ncode_sizes = [8000]\n",
    )
    .unwrap();
    let out = dir.path().join("ev");
    let run = faasim(&[
        "run",
        "--experiment",
        "eviction",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(faasim(&["report", "--input", out.to_str().unwrap()]).status.success());
    let mut rows = csv::Reader::from_path(out.join("eviction_survivors.csv")).unwrap();
    let headers = rows.headers().unwrap().clone();
    let warm = headers.iter().position(|h| h == "d_warm").unwrap();
    let pred = headers.iter().position(|h| h == "model_predicted").unwrap();
    let mut n = 0;
    for r in rows.records() {
        let r = r.unwrap();
        let w: f64 = r[warm].parse().unwrap();
        let p: f64 = r[pred].parse().unwrap();
        assert!((w - p).abs() < 1.0, "{w} vs {p}");
        n += 1;
    }
    assert_eq!(n, 12);
}

#[test]
fn invoc_overhead_run_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("io");
    let run = faasim(&["run", "--experiment", "invoc-overhead", "--out", out.to_str().unwrap(), "--trace"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(out.join("trace.jsonl").exists());
    assert!(faasim(&["report", "--input", out.to_str().unwrap()]).status.success());
    let mut fits = csv::Reader::from_path(out.join("invocation_overhead_fit.csv")).unwrap();
    let headers = fits.headers().unwrap().clone();
    let adj = headers.iter().position(|h| h == "adjusted_r_squared").unwrap();
    let first = fits.records().next().unwrap().unwrap();
    assert_eq!(&first[2], "warm");
    assert!(first[adj].parse::<f64>().unwrap() >= 0.99);
    assert!(out.join("invocation_overhead.csv").exists());
}

#[test]
fn parallel_replications_match_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("grid.toml");
    fs::write(
        &config,
        "[experiment.eviction]\nd_init = [8]\ndelta_t = [1.0, 400.0, 800.0, 1200.0]\nsleep_times = [1.0]\nmemory = [128]\ncode_sizes = [8000]\n",
    )
    .unwrap();
    let go = |name: &str, parallel: bool| {
        let out = dir.path().join(name);
        let mut args = vec![
            "run",
            "--experiment",
            "eviction",
            "--profile",
            "gcp-like",
            "--replications",
            "3",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ];
        if parallel {
            args.push("--parallel");
        }
        assert!(faasim(&args).status.success());
        fs::read(out.join("records.csv")).unwrap()
    };
    assert_eq!(go("seq", false), go("par", true));
}

#[test]
fn break_even_subcommand() {
    let out = faasim(&["break-even", "2.5:0.0116", "19.58:0.0116"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["requests_per_hour"], 4640);
    assert_eq!(v[1]["requests_per_hour"], 592);
    assert_eq!(faasim(&["break-even", "0:0.0116"]).status.code(), Some(2));
}
