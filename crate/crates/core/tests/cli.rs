use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aeromanip::cli::{cmd_compare, cmd_rank, cmd_run, RunManifest};
use aeromanip::control::ControlMode;
use aeromanip::sim::SimLog;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn hexa_path() -> PathBuf {
    root().join("configs/models/default_hexa.toml")
}

fn catalog(name: &str) -> PathBuf {
    root().join(format!("configs/scenarios/{name}.toml"))
}

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aeromanip")).args(args).output().expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// A catalog scenario shortened to `duration` seconds, written into `dir`.
fn short_copy(dir: &Path, name: &str, duration: f64) -> PathBuf {
    let text = fs::read_to_string(catalog(name)).unwrap();
    let text = text
        .lines()
        .map(|l| if l.starts_with("duration") { format!("duration = {duration}") } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_writes_csv_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let scen = short_copy(dir.path(), "p1", 0.5);
    let out = dir.path().join("out");
    let o = bin(&["run", "--model", arg(&hexa_path()), "--out", arg(&out), arg(&scen)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = fs::read_to_string(out.join("p1.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert_eq!(header, SimLog::new(6).header().join(","));
    assert!(header.starts_with("t,Px,Py,Pz,phi_deg,psi_deg,gamma_deg,meas_Px"));
    assert!(header.ends_with("resid_mz,f1_x,f1_y,f1_z,tau1_x,tau1_y,tau1_z"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 250);
    assert!(rows.iter().all(|r| r.split(',').count() == header.split(',').count()));
    assert!(!csv.contains("NaN"));

    let metrics = fs::read_to_string(out.join("p1.metrics")).unwrap();
    for key in ["scenario = p1", "mode = dc_pid", "seed = 1", "x.overshoot_pct = ", "gamma.rms_final = "] {
        assert!(metrics.contains(key), "missing `{key}`");
    }
    assert!(!out.join("p1.csv.tmp").exists());
}

#[test]
fn seed_and_mode_overrides_reach_the_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let scen = short_copy(dir.path(), "t1", 0.2);
    let mut m = RunManifest::new(hexa_path(), vec![scen], dir.path().join("out")).unwrap();
    m.seed = Some(77);
    m.mode = Some(ControlMode::PlainPid);
    assert!(cmd_run(&m).unwrap().success());
    let metrics = fs::read_to_string(dir.path().join("out/t1.metrics")).unwrap();
    assert!(metrics.contains("mode = plain_pid\nseed = 77\n"), "{metrics}");
}

#[test]
fn unknown_scenario_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(catalog("p1")).unwrap().replace("filter_tau = 0.04", "filter_tau = 0.04\nfiltr_gain = 2.0");
    let scen = dir.path().join("typo.toml");
    fs::write(&scen, text).unwrap();
    let o = bin(&["run", "--model", arg(&hexa_path()), "--out", arg(&dir.path().join("out")), arg(&scen)]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("filtr_gain"), "{err}");
    assert!(err.contains("typo.toml"), "{err}");
}

#[test]
fn missing_scenario_rejected_at_manifest() {
    let err = RunManifest::new(hexa_path(), vec![PathBuf::from("/nonexistent/x.toml")], "out".into()).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/x.toml"));
    assert!(RunManifest::new(hexa_path(), vec![], "out".into()).is_err());
}

#[test]
fn same_seed_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scen = short_copy(dir.path(), "h3", 0.4);
    let run = |sub: &str| {
        let m = RunManifest::new(hexa_path(), vec![scen.clone()], dir.path().join(sub)).unwrap();
        assert!(cmd_run(&m).unwrap().success());
        fs::read(dir.path().join(sub).join("h3.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn aborted_scenario_gives_exit_one_and_keeps_others() {
    let dir = tempfile::tempdir().unwrap();
    let good = short_copy(dir.path(), "p2", 0.2);
    // Joint 1 starts 5 degrees inside its limit and is driven through it.
    let text = fs::read_to_string(catalog("t1"))
        .unwrap()
        .replace("joints_deg = [-90.0, 0.0, -45.0, 0.0]", "joints_deg = [145.0, 0.0, -45.0, 0.0]")
        .replace("joint = 3", "joint = 1")
        .replace("amplitude = 0.5", "amplitude = 3.0");
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, text).unwrap();
    let out = dir.path().join("out");
    let o = bin(&["run", "--model", arg(&hexa_path()), "--out", arg(&out), "--jobs", "2", arg(&bad), arg(&good)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad: failed"));
    assert!(out.join("p2.csv").exists());
    assert!(!out.join("bad.csv").exists());
}

#[test]
fn compare_table_has_a_row_per_metric_and_mode() {
    let dir = tempfile::tempdir().unwrap();
    let scen = short_copy(dir.path(), "t1", 0.4);
    let cmp = cmd_compare(&hexa_path(), &scen, &[ControlMode::DcPid, ControlMode::PlainPid], None, Some(dir.path())).unwrap();
    let table = cmp.table();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 1 + 4 * 2);
    for metric in ["rms_final", "steady_error", "overshoot_pct", "settling_s"] {
        assert_eq!(lines.iter().filter(|l| l.starts_with(metric)).count(), 2);
    }
    assert!(dir.path().join("t1.dc_pid.csv").exists());
    assert!(dir.path().join("t1.plain_pid.csv").exists());

    let same = cmd_compare(&hexa_path(), &scen, &[ControlMode::PlainPid, ControlMode::PlainPid], None, None).unwrap();
    assert_eq!(same.metrics[0], same.metrics[1]);
    let table = same.table();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    for pair in rows.chunks(2) {
        assert_eq!(pair[0], pair[1]);
    }
}

#[test]
fn compare_subcommand_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let scen = short_copy(dir.path(), "t1", 0.2);
    let o = bin(&["compare", "--model", arg(&hexa_path()), "--modes", "dc_pid,plain_pid", arg(&scen)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("metric"));
    assert!(text.contains("rms_final      plain_pid"));
}

#[test]
fn rank_of_shipped_models() {
    let o = bin(&["rank", "--model", arg(&hexa_path())]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("rank = 6\n"));
    assert!(text.contains("fully_actuated = true"));
    assert_eq!(cmd_rank(&root().join("configs/models/flat_quad.toml")).unwrap().rank, 4);
}

#[test]
fn empty_rotor_list_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(root().join("configs/models/flat_quad.toml")).unwrap();
    let cut = text.find("[[rotors.rotor]]").unwrap();
    let path = dir.path().join("bare.toml");
    fs::write(&path, &text[..cut]).unwrap();
    assert!(cmd_rank(&path).is_err());
    let o = bin(&["rank", "--model", arg(&path)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rotor"));
}
