use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qbe::artifacts::{self, RunMeta, AUDITS, DIAGNOSTICS, RUN_META};
use qbe::scenario::{Scenario, SnapshotFile};

fn qbe(args: &[&str], extra: &[&Path]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_qbe"));
    c.args(args);
    for p in extra {
        c.arg(p);
    }
    c.output().unwrap()
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const TINY: &str = r#"
[params]
m = 0.5
g = 1.0
n_c = 1.0
[grid]
u_max = 3.4
nodes = 12
[initial]
kind = "shell"
a = 0.5
b = 1.5
height = 0.4
[controls]
h_max = 0.05
t_end = 0.3
"#;

#[test]
fn every_shipped_scenario_validates_clean() {
    for e in std::fs::read_dir(shipped("")).unwrap() {
        let p = e.unwrap().path();
        let o = qbe(&["validate", "--config"], &[&p]);
        let out = String::from_utf8_lossy(&o.stdout);
        assert!(o.status.success(), "{}: {}", p.display(), String::from_utf8_lossy(&o.stderr));
        assert!(!out.contains("warning"), "{}: {out}", p.display());
        assert!(out.contains("kappa1") && out.contains("gamma"));
    }
}

#[test]
fn config_errors_exit_nonzero_with_field() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.toml", &TINY.replace("n_c = 1.0", "n_c = 1.0\nkappa2 = 0.0"));
    let o = qbe(&["validate", "--config"], &[&bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kappa2"));

    let bad = write(tmp.path(), "typo.toml", &TINY.replace("[controls]", "[controls]\nhmax = 1.0"));
    let o = qbe(&["run", "--config"], &[&bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hmax"));
}

#[test]
fn validate_warns_on_mass_cap() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("{TINY}\n[feasible]\nc0 = 0.01\nc1 = 1.0\nc_nstar = 1e6\nenergy_rtol = 10.0\n");
    let p = write(tmp.path(), "s.toml", &cfg);
    let o = qbe(&["validate", "--config"], &[&p]);
    assert!(o.status.success());
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("warning: mass") && out.contains("exceeds feasible.c0"), "{out}");
}

#[test]
fn run_meta_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", TINY);
    let a = tmp.path().join("a");
    let o = Command::new(env!("CARGO_BIN_EXE_qbe"))
        .args(["run", "--seed", "4", "--refine", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&a)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta: RunMeta = serde_json::from_str(&std::fs::read_to_string(a.join(RUN_META)).unwrap()).unwrap();
    assert_eq!(meta.scenario.seed, 4);
    assert_eq!(meta.scenario.grid.nodes, 24);
    assert_eq!(meta.grid_nodes, 24);

    // re-emit the stored scenario as a JSON config and run it again
    let again = tmp.path().join("again.json");
    std::fs::write(&again, serde_json::to_string_pretty(&meta.scenario).unwrap()).unwrap();
    let s = Scenario::load(&again).unwrap();
    assert_eq!(s.hash().unwrap(), meta.config_hash);
    let o = qbe(&["run", "--config"], &[&again]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let b: RunMeta = serde_json::from_str(&std::fs::read_to_string(a.join(RUN_META)).unwrap()).unwrap();
    assert_eq!(b.config_hash, meta.config_hash);

    let snap: SnapshotFile =
        serde_json::from_str(&std::fs::read_to_string(artifacts::snapshot_path(&a, 0)).unwrap()).unwrap();
    assert_eq!(snap.nodes.len(), 24);
    assert_eq!(snap.params_hash, meta.params_hash);
}

#[test]
fn audit_recomputes_identical_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    let o = qbe(&["run", "--config"], &[&shipped("shell.toml"), Path::new("--out"), &out]);
    assert!(o.status.success());
    let before = std::fs::read(out.join(AUDITS)).unwrap();
    std::fs::remove_file(out.join(AUDITS)).unwrap();
    let o = qbe(&["audit", "--out"], &[&out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(out.join(AUDITS)).unwrap(), before);
}

#[test]
fn c22_only_keeps_mass_and_c12_only_does_not() {
    let tmp = tempfile::tempdir().unwrap();
    let mass = |name: &str| -> Vec<f64> {
        let out = tmp.path().join(name);
        let o = qbe(&["run", "--config"], &[&shipped(&format!("{name}.toml")), Path::new("--out"), &out]);
        assert!(o.status.success());
        artifacts::read_diagnostics(&out.join(DIAGNOSTICS)).unwrap().iter().map(|r| r.mass).collect()
    };
    let m22 = mass("c22_only");
    let m12 = mass("c12_only");
    let dev = |m: &[f64]| m.iter().map(|x| (x - m[0]).abs() / m[0]).fold(0.0, f64::max);
    assert!(dev(&m22) < 1e-12, "{}", dev(&m22));
    assert!(dev(&m12) > 1e-3, "{}", dev(&m12));
}

#[test]
fn equilibrium_rows_are_flat() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("eq");
    let o = qbe(&["run", "--config"], &[&shipped("equilibrium.toml"), Path::new("--out"), &out]);
    assert!(o.status.success());
    let rows = artifacts::read_diagnostics(&out.join(DIAGNOSTICS)).unwrap();
    for r in &rows {
        assert!((r.mass - rows[0].mass).abs() <= 1e-12 * rows[0].mass);
        assert!((r.entropy - rows[0].entropy).abs() <= 1e-12 * rows[0].entropy.abs());
    }
}

#[test]
fn step_limit_aborts_with_partial_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", &TINY.replace("t_end = 0.3", "t_end = 0.3\nmax_steps = 2"));
    let out = tmp.path().join("o");
    let o = qbe(&["run", "--config"], &[&cfg, Path::new("--out"), &out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("step limit"));
    let meta: RunMeta = serde_json::from_str(&std::fs::read_to_string(out.join(RUN_META)).unwrap()).unwrap();
    assert!(meta.summary.abort.is_some());
    assert_eq!(artifacts::read_diagnostics(&out.join(DIAGNOSTICS)).unwrap().len(), 3);
}
