//! Run artifacts: `run_meta.json`, `diagnostics.csv`, `snapshots/NNNN.json`,
//! `audits.json` and `certification.json`.
//!
//! Floats go through `serde_json` and `csv`, both of which print the shortest
//! representation that round-trips, so a rerun with the same scenario and
//! seed produces identical bytes.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::collision::{CollisionOperator, Which};
use crate::diagnostics::{h_theorem_audit, holder_probe, one_sided_lipschitz_probe, AuditReport};
use crate::error::{config_err, QbeError, Result};
use crate::grid::{in_feasible_set, FeasibleReport, RadialGrid};
use crate::integrator::{evolve, DiagnosticRow, Snapshot, TrajectoryRecord};
use crate::oracle::{certify, CertificationReport};
use crate::physics::PhysicalParams;
use crate::sampling::PairSampler;
use crate::scenario::{Scenario, SnapshotFile};

pub const RUN_META: &str = "run_meta.json";
pub const DIAGNOSTICS: &str = "diagnostics.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const AUDITS: &str = "audits.json";
pub const CERTIFICATION: &str = "certification.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub kappa1: f64,
    pub kappa2: f64,
    pub p0: f64,
    /// measured sup of K22 on the resonant slice
    pub gamma: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub u_floor: f64,
}

impl From<&PhysicalParams> for Derived {
    fn from(p: &PhysicalParams) -> Self {
        Derived {
            kappa1: p.kappa1,
            kappa2: p.kappa2,
            p0: p.p0,
            gamma: p.gamma_cap,
            lambda1: p.lambda1,
            lambda2: p.lambda2,
            u_floor: p.u_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub qbe: String,
    pub rustc_target: String,
}

impl Versions {
    pub fn current() -> Self {
        Versions {
            qbe: env!("CARGO_PKG_VERSION").to_string(),
            rustc_target: format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub records: usize,
    pub t_final: f64,
    pub clamp_total: f64,
    pub f_inf_max: f64,
    pub abort: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub params_hash: String,
    pub scenario: Scenario,
    pub derived: Derived,
    pub grid_nodes: usize,
    pub versions: Versions,
    pub summary: RunSummary,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub meta: RunMeta,
    pub record: TrajectoryRecord,
    pub audits: Option<AuditReport>,
}

impl RunOutcome {
    pub fn aborted(&self) -> bool {
        self.record.abort.is_some()
    }
}

/// Output directory: the scenario's, else `runs/<first 12 hash chars>`.
pub fn output_dir(s: &Scenario) -> Result<PathBuf> {
    Ok(match &s.output.dir {
        Some(d) => d.clone(),
        None => PathBuf::from("runs").join(&s.hash()?[..12]),
    })
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_at(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn io_at(path: &Path, e: std::io::Error) -> QbeError {
    QbeError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn csv_err(e: csv::Error) -> QbeError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => QbeError::Io(io),
        other => config_err(DIAGNOSTICS, format!("{other:?}")),
    }
}

pub fn write_diagnostics(path: &Path, rows: &[DiagnosticRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn snapshot_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(SNAPSHOT_DIR).join(format!("{index:04}.json"))
}

fn write_snapshots(dir: &Path, grid: &RadialGrid, snaps: &[Snapshot], params_hash: &str) -> Result<()> {
    fs::create_dir_all(dir.join(SNAPSHOT_DIR))?;
    for s in snaps {
        let file = SnapshotFile {
            index: s.index,
            time: s.t,
            nodes: grid.nodes.clone(),
            values: s.values.clone(),
            params_hash: params_hash.to_string(),
        };
        write_json(&snapshot_path(dir, s.index), &file)?;
    }
    Ok(())
}

/// Trajectory audits plus, when enabled, the Holder and one-sided Lipschitz
/// probes on the scenario's grid.
pub fn audit_record(
    scenario: &Scenario,
    op: &CollisionOperator,
    rec: &TrajectoryRecord,
    config_hash: &str,
) -> Result<AuditReport> {
    let grid = op.grid();
    let mut a = AuditReport::from_trajectory(rec, grid);
    if let Some(tol) = scenario.audits.tol_entropy {
        a.h_theorem = h_theorem_audit(rec, Some(tol));
    }
    if scenario.audits.probes {
        a.probes = run_probes(op, scenario.seed, scenario.audits.probe_pairs, scenario.audits.probe_n)?;
    }
    a.config_hash = Some(config_hash.to_string());
    a.seed = Some(scenario.seed);
    Ok(a)
}

/// Holder probes for C12 and both C22 parts, then the one-sided Lipschitz probe.
pub fn run_probes(op: &CollisionOperator, seed: u64, pairs: usize, n: f64) -> Result<Vec<crate::diagnostics::ProbeReport>> {
    let sampler = PairSampler::new(seed, op.grid().u_max);
    let mut out = Vec::new();
    for which in [Which::C12, Which::C22Quadratic, Which::C22Cubic] {
        out.push(holder_probe(op, &sampler, pairs, n, which)?);
    }
    out.push(one_sided_lipschitz_probe(op, &sampler, pairs, n)?);
    Ok(out)
}

/// Evolves the scenario and writes every artifact into `dir`. A runtime abort
/// still writes what was recorded; check [`RunOutcome::aborted`].
pub fn run(scenario: &Scenario, dir: &Path) -> Result<RunOutcome> {
    scenario.validate()?;
    let params = scenario.physical()?;
    let grid = scenario.build_grid(&params)?;
    let state0 = scenario.initial_state(&grid)?;
    let op = CollisionOperator::new(&params, grid.clone());
    let record = evolve(&op, &state0, &scenario.controls)?;

    let config_hash = scenario.hash()?;
    let params_hash = scenario.params_hash()?;
    fs::create_dir_all(dir).map_err(|e| io_at(dir, e))?;
    let meta = RunMeta {
        config_hash: config_hash.clone(),
        params_hash: params_hash.clone(),
        scenario: scenario.clone(),
        derived: Derived::from(&params),
        grid_nodes: grid.len(),
        versions: Versions::current(),
        summary: RunSummary {
            steps: record.steps,
            records: record.rows.len(),
            t_final: record.rows.last().map_or(0.0, |r| r.t),
            clamp_total: record.clamp_total,
            f_inf_max: record.f_inf_max,
            abort: record.abort.clone(),
        },
    };
    write_json(&dir.join(RUN_META), &meta)?;
    write_diagnostics(&dir.join(DIAGNOSTICS), &record.rows)?;
    if scenario.output.snapshots {
        write_snapshots(dir, &grid, &record.snapshots, &params_hash)?;
    }
    let audits = if scenario.audits.enabled {
        let a = audit_record(scenario, &op, &record, &config_hash)?;
        write_json(&dir.join(AUDITS), &a)?;
        Some(a)
    } else {
        None
    };
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        meta,
        record,
        audits,
    })
}

/// Rebuilds the trajectory from the files in `dir`.
pub fn load_run(dir: &Path) -> Result<(RunMeta, TrajectoryRecord)> {
    let meta: RunMeta = read_json(&dir.join(RUN_META))?;
    let rows = read_diagnostics(&dir.join(DIAGNOSTICS))?;
    let mut snapshots = Vec::new();
    if meta.scenario.output.snapshots {
        for i in 0..rows.len() {
            let p = snapshot_path(dir, i);
            let s: SnapshotFile = read_json(&p)?;
            if s.params_hash != meta.params_hash {
                return Err(config_err(
                    &p.display().to_string(),
                    "params_hash does not match run_meta.json",
                ));
            }
            snapshots.push(Snapshot {
                index: s.index,
                t: s.time,
                values: s.values,
            });
        }
    }
    let record = TrajectoryRecord {
        n_star: meta.scenario.controls.n_star,
        rows,
        snapshots,
        steps: meta.summary.steps,
        clamp_total: meta.summary.clamp_total,
        f_inf_max: meta.summary.f_inf_max,
        abort: meta.summary.abort.clone(),
    };
    Ok((meta, record))
}

/// Recomputes `audits.json` from stored artifacts.
pub fn audit_dir(dir: &Path) -> Result<AuditReport> {
    let (meta, record) = load_run(dir)?;
    if meta.scenario.hash()? != meta.config_hash {
        return Err(config_err(RUN_META, "stored scenario does not reproduce config_hash"));
    }
    let params = meta.scenario.physical()?;
    let grid: Arc<RadialGrid> = meta.scenario.build_grid(&params)?;
    let op = CollisionOperator::new(&params, grid);
    let a = audit_record(&meta.scenario, &op, &record, &meta.config_hash)?;
    write_json(&dir.join(AUDITS), &a)?;
    Ok(a)
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub config_hash: String,
    pub derived: Derived,
    pub grid_nodes: usize,
    pub e_max: f64,
    pub mass: f64,
    pub energy: f64,
    pub m_nstar: f64,
    pub feasible: Option<FeasibleReport>,
    pub warnings: Vec<String>,
}

/// Dry run: builds the grid and initial state and checks them without evolving.
pub fn validate(scenario: &Scenario) -> Result<ValidationReport> {
    scenario.validate()?;
    let params = scenario.physical()?;
    let grid = scenario.build_grid(&params)?;
    let f0 = scenario.initial_state(&grid)?;
    let mut warnings = Vec::new();
    let mass = crate::grid::moment(&f0, 0.0);
    let energy = crate::grid::moment(&f0, 1.0);
    let m_nstar = crate::grid::moment(&f0, scenario.controls.n_star);
    if !(mass.is_finite() && energy.is_finite() && m_nstar.is_finite()) {
        warnings.push("initial state has a non-finite moment".to_string());
    }
    if energy == 0.0 {
        warnings.push("initial state is zero on the grid".to_string());
    }
    // the initial state should have decayed by the grid cap
    let top = *f0.values.last().unwrap_or(&0.0);
    let peak = f0.max_value();
    if peak > 0.0 && top > 1e-6 * peak {
        warnings.push(format!(
            "initial state at u_max is {top:e}, {:e} of its peak; raise grid.u_max",
            top / peak
        ));
    }
    let feasible = scenario.feasible.as_ref().map(|spec| {
        let r = in_feasible_set(&f0, spec);
        if !r.mass_ok {
            warnings.push(format!("mass {} exceeds feasible.c0 = {}", r.mass, spec.c0));
        }
        if !r.energy_ok {
            warnings.push(format!(
                "energy {} deviates from feasible.c1 = {} by {:e} (rtol {:e})",
                r.energy, spec.c1, r.energy_rel_dev, spec.energy_rtol
            ));
        }
        if !r.moment_ok {
            warnings.push(format!(
                "moment of order {} is {}, above feasible.c_nstar = {}",
                spec.n_star, r.moment, spec.c_nstar
            ));
        }
        if !r.positive {
            warnings.push("initial state has negative or non-finite values".to_string());
        }
        r
    });
    if let Some(t) = scenario.controls.truncate_at {
        if t > grid.u_max {
            warnings.push(format!("controls.truncate_at = {t} lies above grid.u_max"));
        }
    }
    Ok(ValidationReport {
        config_hash: scenario.hash()?,
        derived: Derived::from(&params),
        grid_nodes: grid.len(),
        e_max: grid.e_max(),
        mass,
        energy,
        m_nstar,
        feasible,
        warnings,
    })
}

/// Runs the oracle certification and writes `certification.json` into `dir`.
pub fn certify_scenario(scenario: &Scenario, dir: &Path) -> Result<CertificationReport> {
    let params = scenario.physical()?;
    let spec = scenario.certify_spec(&params);
    let report = certify(&params, &spec)?;
    fs::create_dir_all(dir).map_err(|e| io_at(dir, e))?;
    write_json(&dir.join(CERTIFICATION), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
seed = 1
[params]
m = 0.5
g = 1.0
n_c = 1.0
[grid]
u_max = 3.4
nodes = 16
[initial]
kind = "gaussian"
amplitude = 0.6
center = 1.2
width = 0.4
[controls]
h_max = 0.05
t_end = 0.2
"#;

    #[test]
    fn run_writes_and_audit_rebuilds() {
        let dir = tempfile::tempdir().unwrap();
        let s = Scenario::from_toml_str(SMALL).unwrap();
        let out = run(&s, dir.path()).unwrap();
        assert!(!out.aborted());
        for f in [RUN_META, DIAGNOSTICS, AUDITS] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert!(snapshot_path(dir.path(), 0).exists());
        let rows = read_diagnostics(&dir.path().join(DIAGNOSTICS)).unwrap();
        assert_eq!(rows, out.record.rows);
        let before = fs::read(dir.path().join(AUDITS)).unwrap();
        let again = audit_dir(dir.path()).unwrap();
        assert_eq!(Some(again), out.audits);
        assert_eq!(fs::read(dir.path().join(AUDITS)).unwrap(), before);
    }

    #[test]
    fn header_uses_documented_names() {
        let dir = tempfile::tempdir().unwrap();
        let s = Scenario::from_toml_str(SMALL).unwrap();
        run(&s, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join(DIAGNOSTICS)).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(
            header,
            "step,t,mass,energy,entropy,m_2,m_3,m_nstar,h_used,min_f,energy_drift,\
             c22_mass_residual,mass_rate,dissipation,clamped_total"
        );
    }

    #[test]
    fn validate_flags_mass_cap() {
        let mut s = Scenario::from_toml_str(SMALL).unwrap();
        s.feasible = Some(crate::grid::FeasibleSetSpec {
            c0: 1e-3,
            c1: 1.0,
            n_star: 7.0,
            c_nstar: 1e9,
            energy_rtol: 10.0,
        });
        let r = validate(&s).unwrap();
        assert!(!r.feasible.as_ref().unwrap().mass_ok);
        assert!(r.warnings.iter().any(|w| w.contains("exceeds feasible.c0")), "{:?}", r.warnings);
    }
}
