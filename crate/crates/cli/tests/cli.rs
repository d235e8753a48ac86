use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bundled() -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")).unwrap()
}

/// Bundled config with fewer Monte Carlo and sweep runs.
fn small_config(dir: &Path, edit: impl Fn(String) -> String) -> PathBuf {
    let text = bundled().replace("n_runs = 1000", "n_runs = 20").replace("n_runs = 200", "n_runs = 10");
    let p = dir.join("cfg.toml");
    std::fs::write(&p, edit(text)).unwrap();
    p
}

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdgs-sim"))
        .args(args)
        .env_remove(sdgs_core::config::SEED_ENV_VAR)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn file_digests(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn missing_config_is_a_config_error() {
    let o = sim(&["validate"]);
    assert_eq!(o.status.code(), Some(2));
    let o = sim(&["montecarlo", "--config", "/nonexistent/cfg.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_passes_on_bundled_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |t| t);
    let o = sim(&["validate", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.lines().all(|l| l.starts_with("PASS ")), "{out}");
    assert!(out.contains("regime (RegimeThresholds)"));
}

#[test]
fn nonpositive_threshold_fails_its_section() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |t| t.replace("tau_cp_s = 0.000001", "tau_cp_s = 0.0"));
    let o = sim(&["validate", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    assert!(out.contains("FAIL regime (RegimeThresholds)"), "{out}");
    assert!(out.contains("PASS orbit"));
}

#[test]
fn mislabelled_run_group_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |t| t.replacen("id = \"A1\"\nmode = \"EDGE_CONTROLLED\"", "id = \"A1\"\nmode = \"REFERENCE\"", 1));
    let o = sim(&["validate", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL campaign"), "{}", stdout(&o));
}

#[test]
fn config_from_stdin() {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_sdgs-sim"))
        .args(["validate", "--config", "-"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(bundled().as_bytes()).unwrap();
    assert_eq!(child.wait_with_output().unwrap().status.code(), Some(0));
}

#[test]
fn zero_sensitivity_draws_is_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |t| t);
    let out = dir.path().join("out");
    let o = sim(&["sensitivity", "--draws", "0", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("sensitivity.csv").exists());
}

#[test]
fn run_is_reproducible_across_seeds_and_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |t| t);
    let mut trees = Vec::new();
    for (name, jobs) in [("a", "1"), ("b", "1"), ("c", "2")] {
        let out = dir.path().join(name);
        let o = sim(&["run", "--config", s(&cfg), "--out", s(&out), "--seed-override", "7", "--jobs", jobs]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).contains("effective seed: 7"));
        assert!(stdout(&o).contains("goodput"));
        let tele = file_digests(&out.join("telemetry"));
        assert_eq!(tele.len(), 56);
        assert_eq!(file_digests(&out.join("report")).len(), 4);
        assert!(out.join("montecarlo.json").exists());
        trees.push(tele);
    }
    assert!(trees[0] == trees[1], "same seed, different telemetry");
    assert!(trees[0] == trees[2], "thread count changed telemetry");

    // Rebuilding from files reproduces the tables.
    let out = dir.path().join("a");
    let before = file_digests(&out.join("report"));
    std::fs::remove_dir_all(out.join("report")).unwrap();
    let o = sim(&["report", "--config", s(&cfg), "--out", s(&out), "--seed-override", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(before == file_digests(&out.join("report")));
}

#[test]
fn report_without_telemetry_fails_at_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |t| t);
    let o = sim(&["report", "--config", s(&cfg), "--out", s(&dir.path().join("empty"))]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn montecarlo_and_sweep_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), |t| t);
    let out = dir.path().join("out");

    let o = sim(&["montecarlo", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("montecarlo.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "metric,unit,p50,p95,p99,n_samples");
    assert_eq!(lines.len(), 5);

    let o = sim(&["sweep", "--config", s(&cfg), "--out", s(&out), "--format", "text"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let txt = std::fs::read_to_string(out.join("sweep.txt")).unwrap();
    assert_eq!(txt.lines().count(), 4);
    assert_eq!(txt, stdout(&o));
}
