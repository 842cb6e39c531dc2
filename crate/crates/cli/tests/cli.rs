use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_poolvcm");

const QUICK_CONFIG: &str = "n_iter = 60\nburn_in = 20\nthin = 2\nn_knots = 8\ngrid_points = 9\n";

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn scenario(protocol: &str, n: usize, c: usize, extra: &str) -> String {
    format!("model_set = \"M1\"\nn = {n}\nprotocol = \"{protocol}\"\npool_size = {c}\nn_clinics = 4\nreps = 2\n{extra}")
}

/// Every regular file under `dir` except manifests, keyed by relative path.
fn result_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if !p.file_name().unwrap().to_str().unwrap().contains("manifest") {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn simulate_it_gives_singletons_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(tmp.path(), "it.toml", &scenario("IT", 10, 1, ""));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["simulate", s(&sc), "--seed", "5", "--out", s(&a)]);
    ok(&["simulate", s(&sc), "--seed", "5", "--out", s(&b)]);
    let pools = fs::read_to_string(a.join("pools.csv")).unwrap();
    let rows: Vec<&str> = pools.lines().skip(1).collect();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| !r.split(',').nth(3).unwrap().contains(';')));
    assert_eq!(result_files(&a), result_files(&b));
    assert_eq!(manifest(&a)["status"], "complete");
    assert_eq!(manifest(&a)["seed"], 5);
}

#[test]
fn negative_dorfman_population_needs_two_pools() {
    let tmp = tempfile::tempdir().unwrap();
    let perfect = "se_master = 1.0\nsp_master = 1.0\nse_individual = 1.0\nsp_individual = 1.0\n";
    let sc = write(tmp.path(), "dt.toml", &scenario("DT", 10, 5, perfect));
    let mut checked = 0;
    for seed in 0..40 {
        let out = tmp.path().join(format!("s{seed}"));
        ok(&["simulate", s(&sc), "--seed", &seed.to_string(), "--out", s(&out)]);
        let truth = fs::read_to_string(out.join("truth.csv")).unwrap();
        let all_negative = truth.lines().skip(1).all(|l| l.ends_with(",0"));
        if all_negative {
            let pools = fs::read_to_string(out.join("pools.csv")).unwrap();
            assert_eq!(pools.lines().count() - 1, 2, "seed {seed}");
            checked += 1;
        }
    }
    assert!(checked > 0, "no all-negative population in 40 seeds");
}

#[test]
fn fit_writes_summaries_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(tmp.path(), "dt.toml", &scenario("DT", 80, 5, ""));
    let cfg = write(tmp.path(), "fit.toml", QUICK_CONFIG);
    let data = tmp.path().join("data");
    ok(&["simulate", s(&sc), "--out", s(&data)]);
    let (a, b) = (tmp.path().join("fa"), tmp.path().join("fb"));
    for out in [&a, &b] {
        ok(&["fit", s(&data), "--config", s(&cfg), "--seed", "11", "--out", s(out)]);
    }
    assert_eq!(result_files(&a), result_files(&b));
    let inc = fs::read_to_string(a.join("inclusion.csv")).unwrap();
    assert_eq!(inc.lines().count(), 1 + 6);
    let scalars = fs::read_to_string(a.join("scalars.csv")).unwrap();
    for p in ["sigma", "se1", "sp1", "se2", "sp2", "alpha_x1"] {
        assert!(scalars.lines().any(|l| l.starts_with(&format!("{p},"))), "{p} missing");
    }
    let m = manifest(&a);
    assert_eq!(m["status"], "complete");
    assert_eq!(m["seed"], 11);
    assert_eq!(m["config"], QUICK_CONFIG);
    assert_eq!(m["acceptance"][0].as_object().unwrap().len(), 7);

    // summaries rebuilt from the saved draws match the originals
    let c = tmp.path().join("fc");
    ok(&["summarize", s(&a), "--out", s(&c)]);
    for f in ["curves.csv", "inclusion.csv", "scalars.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(c.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn fit_rejects_malformed_pools_with_line_number() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    fs::create_dir(&data).unwrap();
    write(&data, "individuals.csv", "id,age,x1,clinic\n1,0.1,0.5,1\n2,0.2,1.5,1\n");
    write(&data, "pools.csv", "pool_id,assay_id,outcome,members\n1,1,0,1;2\n2,1,maybe,1\n");
    let out = run(&["fit", s(&data), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("pools.csv:3"), "{err}");
}

#[test]
fn fit_reports_validation_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    fs::create_dir(&data).unwrap();
    write(&data, "individuals.csv", "id,age,x1,clinic\n1,0.1,0.5,1\n2,0.2,1.5,1\n");
    write(&data, "pools.csv", "pool_id,assay_id,outcome,members\n1,1,0,1\n");
    let out = run(&["fit", s(&data), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("uncovered"));
}

#[test]
fn exit_codes_for_config_and_io_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.toml", "n_iter = 10\nburn_in = 20\n");
    let unknown = write(tmp.path(), "unknown.toml", "n_itr = 10\n");
    let sc = write(tmp.path(), "dt.toml", &scenario("DT", 20, 5, ""));
    let data = tmp.path().join("data");
    ok(&["simulate", s(&sc), "--out", s(&data)]);
    for cfg in [&bad, &unknown] {
        let out = run(&["fit", s(&data), "--config", s(cfg), "--out", s(&tmp.path().join("o"))]);
        assert_eq!(out.status.code(), Some(2));
    }
    let out = run(&["fit", s(&tmp.path().join("missing")), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3));
    let bad_sc = write(tmp.path(), "bad_sc.toml", "model_set = \"M1\"\nn = 10\nprotocol = \"DT\"\npool_size = 1\n");
    let out = run(&["simulate", s(&bad_sc), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn replicate_is_independent_of_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(tmp.path(), "dt.toml", &scenario("DT", 60, 5, ""));
    let cfg = write(tmp.path(), "fit.toml", QUICK_CONFIG);
    let (a, b) = (tmp.path().join("j1"), tmp.path().join("j3"));
    ok(&["replicate", s(&sc), "--config", s(&cfg), "--seed", "4", "--jobs", "1", "--out", s(&a)]);
    ok(&["replicate", s(&sc), "--config", s(&cfg), "--seed", "4", "--jobs", "3", "--out", s(&b)]);
    assert!(a.join("metrics.csv").is_file());
    assert!(a.join("rep_000").is_dir() && a.join("rep_001").is_dir());
    assert!(!a.join("rep_002").exists());
    assert_eq!(result_files(&a), result_files(&b));
    let m = manifest(&a);
    assert_eq!(m["status"], "complete");
    assert_eq!(m["failures"], 0);
    assert_eq!(m["completed"], 2);

    // metrics rebuilt from the per-rep results match
    let c = tmp.path().join("re");
    ok(&["summarize", s(&a), "--out", s(&c)]);
    assert_eq!(
        fs::read(a.join("metrics.csv")).unwrap(),
        fs::read(c.join("metrics.csv")).unwrap()
    );
}

#[test]
fn interrupted_replication_is_marked_incomplete() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = write(tmp.path(), "dt.toml", &scenario("DT", 400, 5, ""));
    let cfg = write(tmp.path(), "fit.toml", "n_iter = 1000000\nburn_in = 10\nn_knots = 10\n");
    let out = tmp.path().join("o");
    let mut child = Command::new(BIN)
        .args(["replicate", s(&sc), "--config", s(&cfg), "--out", s(&out)])
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let deadline = std::time::Instant::now() + std::time::Duration::from_secs(60);
    while !out.join("manifest.json").exists() {
        assert!(std::time::Instant::now() < deadline, "manifest never appeared");
        std::thread::sleep(std::time::Duration::from_millis(50));
    }
    std::thread::sleep(std::time::Duration::from_millis(500));
    let killed = Command::new("kill")
        .args(["-INT", &child.id().to_string()])
        .status()
        .unwrap();
    assert!(killed.success());
    let status = child.wait().unwrap();
    assert_eq!(status.code(), Some(130));
    let m = manifest(&out);
    assert_eq!(m["status"], "incomplete");
    assert_eq!(m["interrupted"].as_array().unwrap().len(), 2);
    assert!(out.join("metrics.csv").is_file());
}
