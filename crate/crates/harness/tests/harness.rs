use std::path::Path;
use std::process::Command;

use rough_nls::records::{load_records, RECORDS_FILE, SUMMARY_FILE};
use rough_nls::{run, ExperimentConfig, ExperimentKind, HarnessError};

const EVOLVE: &str = r#"
seed = 11
samples = 3
[grid]
dim = 3
points = 16
half_width = 6.283185307179586
[partition]
dim = 3
s = -0.2
a = 1
n_max = 2
[solver]
dim = 3
dt = 0.01
t_final = 0.1
snapshot_stride = 5
n0 = 2.0
[data]
profile = "packet"
amplitude = 0.3
wavevector = [1.0, 0.0, 0.0]
"#;

fn config(text: &str, kind: ExperimentKind, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::from_toml(text).unwrap();
    c.output = Some(out.to_path_buf());
    c.resolve(kind).unwrap();
    c
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn zero_samples_give_empty_valid_summary() {
    let dir = tempfile::tempdir().unwrap();
    let text = EVOLVE.replace("samples = 3", "samples = 0");
    let out = run(&config(&text, ExperimentKind::Evolve, dir.path()), 2).unwrap();
    assert!(out.records.is_empty());
    assert!(out.summary.groups.is_empty());
    let json: serde_json::Value = serde_json::from_slice(&read(&dir.path().join(SUMMARY_FILE))).unwrap();
    assert_eq!(json["kind"], "evolve");
}

#[test]
fn evolve_records_carry_conservation_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&config(EVOLVE, ExperimentKind::Evolve, dir.path()), 2).unwrap();
    assert_eq!(out.records.len(), 3);
    for r in &out.records {
        assert_eq!(r.series["mass"].len(), 3);
        assert_eq!(r.series["energy"].len(), 3);
        for key in ["mass_ratio", "energy_ratio", "r_mass", "r_energy", "scatter_decreasing"] {
            assert!(r.metrics.contains_key(key), "missing {key}");
        }
    }
    let g = &out.summary.groups[0];
    assert_eq!(g.metrics["mass0"].count, 3);
}

#[test]
fn rerun_skips_everything_and_keeps_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(EVOLVE, ExperimentKind::Evolve, dir.path());
    let first = run(&cfg, 2).unwrap();
    let summary = read(&dir.path().join(SUMMARY_FILE));
    let log = read(&dir.path().join(RECORDS_FILE));
    let second = run(&cfg, 2).unwrap();
    assert_eq!((second.executed, second.skipped), (0, 3));
    assert_eq!(read(&dir.path().join(SUMMARY_FILE)), summary);
    assert_eq!(read(&dir.path().join(RECORDS_FILE)), log);
    assert_eq!(first.summary, second.summary);
}

#[test]
fn interrupted_run_resumes_without_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(EVOLVE, ExperimentKind::Evolve, dir.path());
    let full = run(&cfg, 1).unwrap();
    // Keep one complete record and half of the next, as after a crash.
    let log = String::from_utf8(read(&dir.path().join(RECORDS_FILE))).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    let partial = format!("{}\n{}", lines[0], &lines[1][..lines[1].len() / 2]);
    std::fs::write(dir.path().join(RECORDS_FILE), partial).unwrap();
    let resumed = run(&cfg, 1).unwrap();
    assert_eq!((resumed.executed, resumed.skipped), (2, 1));
    assert_eq!(resumed.records.len(), 3);
    for (a, b) in full.records.iter().zip(&resumed.records) {
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.metrics, b.metrics);
    }
    let seeds: Vec<u64> = load_records(dir.path()).unwrap().iter().map(|r| r.seed).collect();
    let mut unique = seeds.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(seeds.len(), unique.len());
}

#[test]
fn extending_samples_reuses_finished_seeds() {
    let dir = tempfile::tempdir().unwrap();
    run(&config(EVOLVE, ExperimentKind::Evolve, dir.path()), 2).unwrap();
    let more = EVOLVE.replace("samples = 3", "samples = 4");
    let out = run(&config(&more, ExperimentKind::Evolve, dir.path()), 2).unwrap();
    assert_eq!((out.executed, out.skipped), (1, 3));
}

#[test]
fn foreign_records_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    run(&config(EVOLVE, ExperimentKind::Evolve, dir.path()), 2).unwrap();
    let other = EVOLVE.replace("seed = 11", "seed = 12");
    let err = run(&config(&other, ExperimentKind::Evolve, dir.path()), 2).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn worker_count_does_not_change_metrics() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let one = run(&config(EVOLVE, ExperimentKind::Evolve, a.path()), 1).unwrap();
    let many = run(&config(EVOLVE, ExperimentKind::Evolve, b.path()), 6).unwrap();
    for (x, y) in one.records.iter().zip(&many.records) {
        assert_eq!(x.metrics.len(), y.metrics.len());
        for ((k, u), (_, v)) in x.metrics.iter().zip(&y.metrics) {
            assert_eq!(u.to_bits(), v.to_bits(), "{k}");
        }
        assert_eq!(x.series, y.series);
    }
}

fn sweep_text(axis: &str, values: &str) -> String {
    format!("{EVOLVE}\n[sweep]\nbase = \"evolve\"\naxis = \"{axis}\"\nvalues = {values}\n")
}

#[test]
fn single_value_sweep_matches_single_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sweep = run(&config(&sweep_text("solver.n0", "[4.0]"), ExperimentKind::Sweep, a.path()), 2).unwrap();
    let single_text = EVOLVE.replace("n0 = 2.0", "n0 = 4.0");
    let single = run(&config(&single_text, ExperimentKind::Evolve, b.path()), 2).unwrap();
    assert_eq!(sweep.records.len(), single.records.len());
    for (x, y) in sweep.records.iter().zip(&single.records) {
        assert_eq!(x.axis_value, Some(4.0));
        assert_eq!(x.seed, y.seed);
        assert_eq!(x.metrics, y.metrics);
    }
    assert_eq!(sweep.summary.groups[0].metrics, single.summary.groups[0].metrics);
}

#[test]
fn sweep_writes_long_table() {
    let dir = tempfile::tempdir().unwrap();
    let text = sweep_text("solver.n0", "[2.0, 4.0]").replace("samples = 3", "samples = 2");
    let out = run(&config(&text, ExperimentKind::Sweep, dir.path()), 2).unwrap();
    assert_eq!(out.summary.groups.len(), 2);
    let mut reader = csv::Reader::from_path(dir.path().join("records.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), ["axis_value", "seed", "metric", "value"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let per_record = out.records[0].metrics.len();
    assert_eq!(rows.len(), 4 * per_record);
    assert!(rows.iter().any(|r| &r[0] == "4"));
}

#[test]
fn unknown_sweep_axis_is_a_config_error() {
    let mut c = ExperimentConfig::from_toml(&sweep_text("solver.n_zero", "[1.0]")).unwrap();
    let err = c.resolve(ExperimentKind::Sweep).unwrap_err();
    assert!(matches!(err, HarnessError::Config(_)));
    // Non-dyadic N0 fails the per-value validation.
    let mut c = ExperimentConfig::from_toml(&sweep_text("solver.n0", "[4.0, 3.0]")).unwrap();
    let err = c.resolve(ExperimentKind::Sweep).unwrap_err();
    assert!(err.to_string().contains("solver.n0 = 3"), "{err}");
}

#[test]
fn linear_stats_rejects_nonlinear_norms() {
    let lin = format!("{EVOLVE}\n[linear]\nt_final = 0.2\nsnapshots = 3\nnorms = [\"Y3\", \"X3\"]\n");
    let mut c = ExperimentConfig::from_toml(&lin).unwrap();
    let err = c.resolve(ExperimentKind::LinearStats).unwrap_err();
    assert!(err.to_string().contains("X3"), "{err}");
}

#[test]
fn memory_guard_refuses_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let text = EVOLVE.replace("seed = 11", "seed = 11\nmemory_limit_mb = 0.01");
    let err = run(&config(&text, ExperimentKind::Evolve, dir.path()), 1).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    assert!(!dir.path().join(RECORDS_FILE).exists());
}

#[test]
fn blowup_guard_maps_to_numeric_abort() {
    let dir = tempfile::tempdir().unwrap();
    let text = EVOLVE
        .replace("n0 = 2.0", "n0 = 2.0\nblowup_factor = 1.0000001\nmu = -1.0")
        .replace("amplitude = 0.3", "amplitude = 3.0");
    let err = run(&config(&text, ExperimentKind::Evolve, dir.path()), 1).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
}

#[test]
fn other_kinds_produce_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&config(EVOLVE, ExperimentKind::PartitionReport, &dir.path().join("p")), 2).unwrap();
    let r = &out.records[0];
    assert_eq!(r.metrics["shell_count[1]"], r.metrics["formula_count[1]"] * 8.0);
    assert!(r.metrics["unity_deviation"] < 1e-10);
    assert!(r.metrics["orthogonality_ratio"] <= 1.0 + 1e-10);

    let lin = format!("{EVOLVE}\n[linear]\nt_final = 0.2\nsnapshots = 3\nnorms = [\"Y3\", \"Z3\"]\n");
    let out = run(&config(&lin, ExperimentKind::LinearStats, &dir.path().join("l")), 2).unwrap();
    let r = &out.records[0];
    assert_eq!(r.metrics["combined"], r.metrics["Y3"] + r.metrics["Z3"]);

    let out = run(&config(EVOLVE, ExperimentKind::MorawetzAudit, &dir.path().join("m")), 2).unwrap();
    assert!(out.summary.groups[0].ensemble["c_violations"] == 0.0);

    let twin = format!("{EVOLVE}\n[twin]\nalphas = [0.0, 0.01, 0.02]\n");
    let out = run(&config(&twin, ExperimentKind::TwinLadder, &dir.path().join("t")), 2).unwrap();
    assert_eq!(out.records[0].metrics["divergence[0]"], 0.0);
}

#[test]
fn trajectories_are_saved_and_reloadable() {
    let dir = tempfile::tempdir().unwrap();
    let text = EVOLVE.replace("samples = 3", "samples = 1\nsave_trajectories = true");
    let out = run(&config(&text, ExperimentKind::Evolve, dir.path()), 1).unwrap();
    let manifest = &out.records[0].artifacts[0];
    let traj = rough_nls::io::load_trajectory(manifest.parent().unwrap()).unwrap();
    assert_eq!(traj.len(), 3);
    assert_eq!(traj.provenance.seed, Some(out.records[0].seed));
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, EVOLVE.replace("samples = 3", "samples = 1")).unwrap();
    let bin = env!("CARGO_BIN_EXE_rough-nls");
    let status = Command::new(bin)
        .args(["evolve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .env("RNLS_WORKERS", "2")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.path().join("out").join(SUMMARY_FILE).exists());

    let status = Command::new(bin).args(["twin-ladder", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, EVOLVE.replace("dt = 0.01", "dt = 0.01\ndtt = 1")).unwrap();
    let status = Command::new(bin).args(["evolve", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let cases = [
        ("evolve.toml", ExperimentKind::Evolve),
        ("sweep-n0.toml", ExperimentKind::Sweep),
        ("linear-stats.toml", ExperimentKind::LinearStats),
        ("morawetz-4d.toml", ExperimentKind::MorawetzAudit),
        ("morawetz-4d.toml", ExperimentKind::TwinLadder),
        ("partition.toml", ExperimentKind::PartitionReport),
    ];
    for (file, kind) in cases {
        let mut c = ExperimentConfig::load(&dir.join(file)).unwrap();
        c.resolve(kind).unwrap_or_else(|e| panic!("{file}: {e}"));
    }
}
