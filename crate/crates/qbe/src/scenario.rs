//! Scenario files.
//!
//! A scenario is TOML (or JSON, chosen by the `.json` extension) with the
//! sections `params`, `grid`, `initial`, `controls` and optional `feasible`,
//! `audits`, `output` and `certify`. Unknown keys are rejected. The resolved
//! scenario, after command-line overrides, is hashed with SHA-256 over its
//! canonical JSON form; re-emitting it from `run_meta.json` reproduces the
//! hash.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{config_err, QbeError, Result};
use crate::grid::{DistributionState, FeasibleSetSpec, GridSpec, RadialGrid};
use crate::integrator::StepControls;
use crate::oracle::CertifySpec;
use crate::physics::{ParamInputs, PhysicalParams};
use crate::quadrature::Pchip;
use crate::sampling::random_mixture;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `amplitude exp(-((u - center) / width)^2)`
    Gaussian {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// `1 / (exp(c E) - 1)`
    BoseEinstein { c: f64 },
    /// `height` on `a <= u <= b`, zero elsewhere
    Shell { a: f64, b: f64, height: f64 },
    /// Snapshot JSON with `nodes` and `values`, interpolated in `u`. Relative
    /// paths are taken from the scenario file's directory.
    File { path: PathBuf },
    /// Gaussian mixture drawn from the scenario seed.
    Random,
}

fn default_true() -> bool {
    true
}
fn default_probe_pairs() -> usize {
    100
}
fn default_probe_n() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditToggles {
    #[serde(default = "default_true")]
    pub enabled: bool,
    /// Holder and one-sided Lipschitz probes on seeded pairs
    #[serde(default)]
    pub probes: bool,
    #[serde(default = "default_probe_pairs")]
    pub probe_pairs: usize,
    #[serde(default = "default_probe_n")]
    pub probe_n: f64,
    /// overrides the derived entropy tolerance
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_entropy: Option<f64>,
}

impl Default for AuditToggles {
    fn default() -> Self {
        AuditToggles {
            enabled: true,
            probes: false,
            probe_pairs: default_probe_pairs(),
            probe_n: default_probe_n(),
            tol_entropy: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// write `snapshots/NNNN.json` at each record
    #[serde(default = "default_true")]
    pub snapshots: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: None,
            snapshots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    pub params: ParamInputs,
    pub grid: GridSpec,
    pub initial: InitialCondition,
    pub controls: StepControls,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasible: Option<FeasibleSetSpec>,
    #[serde(default)]
    pub audits: AuditToggles,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertifySpec>,
}

/// Command-line overrides applied before hashing.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub refine: Option<usize>,
}

fn parse_err(path: &Path, e: impl std::fmt::Display) -> QbeError {
    QbeError::Config {
        field: path.display().to_string(),
        msg: e.to_string(),
    }
}

impl Scenario {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| config_err("scenario", e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| config_err("scenario", e.to_string()))
    }

    /// Reads and validates a scenario; `File` initial paths are made absolute.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut s = if is_json {
            serde_json::from_str(&text).map_err(|e| parse_err(path, e))?
        } else {
            toml::from_str::<Scenario>(&text).map_err(|e| parse_err(path, e))?
        };
        if let InitialCondition::File { path: p } = &mut s.initial {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                *p = base.join(&*p);
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(d) = &o.out {
            self.output.dir = Some(d.clone());
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(k) = o.refine {
            if k == 0 {
                return Err(config_err("refine", "must be >= 1"));
            }
            self.grid = self.grid.refined(k);
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        PhysicalParams::new(&self.params)?;
        self.grid.validate()?;
        self.controls.validate()?;
        if let Some(f) = &self.feasible {
            f.validate()?;
        }
        if self.audits.probe_n < 0.0 || !self.audits.probe_n.is_finite() {
            return Err(config_err("audits.probe_n", "must be finite and >= 0"));
        }
        if let Some(t) = self.audits.tol_entropy {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(config_err("audits.tol_entropy", "must be finite and >= 0"));
            }
        }
        match &self.initial {
            InitialCondition::Gaussian {
                amplitude, width, center,
            } => {
                if !(*amplitude >= 0.0 && *width > 0.0 && center.is_finite()) {
                    return Err(config_err(
                        "initial",
                        "gaussian needs amplitude >= 0, width > 0, finite center",
                    ));
                }
            }
            InitialCondition::BoseEinstein { c } => {
                if !(*c > 0.0 && c.is_finite()) {
                    return Err(config_err("initial.c", "must be positive"));
                }
            }
            InitialCondition::Shell { a, b, height } => {
                if !(*a >= 0.0 && b > a && *height >= 0.0 && height.is_finite()) {
                    return Err(config_err("initial", "shell needs 0 <= a < b and height >= 0"));
                }
                if *a >= self.grid.u_max {
                    return Err(config_err("initial.a", "shell lies above the grid cap"));
                }
            }
            InitialCondition::File { .. } | InitialCondition::Random => {}
        }
        Ok(())
    }

    /// Canonical JSON of the resolved scenario.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(self.canonical_json()?.as_bytes()))
    }

    pub fn params_hash(&self) -> Result<String> {
        Ok(sha256_hex(serde_json::to_string(&self.params)?.as_bytes()))
    }

    pub fn physical(&self) -> Result<PhysicalParams> {
        PhysicalParams::new(&self.params)
    }

    pub fn build_grid(&self, params: &PhysicalParams) -> Result<Arc<RadialGrid>> {
        Ok(Arc::new(RadialGrid::build(&self.grid, params)?))
    }

    pub fn initial_state(&self, grid: &Arc<RadialGrid>) -> Result<DistributionState> {
        let g = grid.clone();
        match &self.initial {
            InitialCondition::Gaussian {
                amplitude,
                center,
                width,
            } => DistributionState::from_fn(g, |u| amplitude * (-((u - center) / width).powi(2)).exp()),
            InitialCondition::BoseEinstein { c } => crate::grid::bose_einstein(*c, g),
            InitialCondition::Shell { a, b, height } => {
                DistributionState::from_fn(g, |u| if u >= *a && u <= *b { *height } else { 0.0 })
            }
            InitialCondition::File { path } => {
                let snap: SnapshotFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
                if snap.nodes.len() != snap.values.len() || snap.nodes.len() < 2 {
                    return Err(config_err("initial.path", "snapshot needs matching nodes and values"));
                }
                if grid.nodes == snap.nodes {
                    return DistributionState::new(g, snap.values);
                }
                let top = *snap.nodes.last().unwrap();
                let it = Pchip::new(snap.nodes, snap.values);
                DistributionState::from_fn(g, |u| if u > top { 0.0 } else { it.eval(u).max(0.0) })
            }
            InitialCondition::Random => {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed);
                random_mixture(&mut rng, grid.u_max).sample(g)
            }
        }
    }

    /// The certification settings, defaulting to 32 lattice cells aligned with
    /// the C22 cutoff when there is one.
    pub fn certify_spec(&self, params: &PhysicalParams) -> CertifySpec {
        if let Some(c) = &self.certify {
            return c.clone();
        }
        let grid = GridSpec::lattice_aligned(32, 4, params).unwrap_or_else(|| GridSpec::lattice(32, self.grid.u_max));
        let mut spec = CertifySpec::standard(grid.u_max);
        spec.grid = grid;
        spec
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// On-disk snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotFile {
    pub index: usize,
    pub time: f64,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub params_hash: String,
}
