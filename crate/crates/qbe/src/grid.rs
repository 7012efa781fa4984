//! Radial grids, distribution states, moments, norms, entropy and equilibria.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{config_err, domain, QbeError, Result};
use crate::physics::PhysicalParams;
use crate::quadrature::{geometric_edges, Pchip, UnitRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// Uniform lattice in energy; resonances land on nodes.
    #[default]
    Lattice,
    /// Composite Gauss-Legendre in momentum with interpolated partners.
    Quadrature,
}

fn default_nodes() -> usize {
    64
}
fn default_panels() -> usize {
    8
}
fn default_npp() -> usize {
    8
}
fn default_ratio() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub scheme: SchemeKind,
    pub u_max: f64,
    /// Lattice node count.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_panels")]
    pub panels: usize,
    #[serde(default = "default_npp")]
    pub nodes_per_panel: usize,
    /// Width ratio between consecutive panels (> 1 refines toward u = 0).
    #[serde(default = "default_ratio")]
    pub panel_ratio: f64,
}

impl GridSpec {
    pub fn lattice(nodes: usize, u_max: f64) -> Self {
        GridSpec {
            scheme: SchemeKind::Lattice,
            u_max,
            nodes,
            panels: default_panels(),
            nodes_per_panel: default_npp(),
            panel_ratio: default_ratio(),
        }
    }

    /// Lattice of `nodes` cells whose edge `cells_below + 1/2` sits at `E(p0)`,
    /// so the C22 cutoff falls between cells. `None` when `p0 = 0`.
    pub fn lattice_aligned(nodes: usize, cells_below: usize, params: &PhysicalParams) -> Option<Self> {
        if !(params.p0 > 0.0) || cells_below >= nodes {
            return None;
        }
        let delta = params.e(params.p0) / (cells_below as f64 + 0.5);
        Some(Self::lattice(nodes, params.e_inv((nodes as f64 + 0.5) * delta)))
    }

    pub fn quadrature(panels: usize, nodes_per_panel: usize, u_max: f64) -> Self {
        GridSpec {
            scheme: SchemeKind::Quadrature,
            u_max,
            nodes: default_nodes(),
            panels,
            nodes_per_panel,
            panel_ratio: default_ratio(),
        }
    }

    /// Multiply the resolution by `k`.
    pub fn refined(&self, k: usize) -> Self {
        let mut s = self.clone();
        match s.scheme {
            SchemeKind::Lattice => s.nodes *= k,
            SchemeKind::Quadrature => {
                s.panels *= k;
                s.panel_ratio = s.panel_ratio.powf(1.0 / k as f64);
            }
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.u_max.is_finite() && self.u_max > 0.0) {
            return Err(config_err("grid.u_max", "must be positive and finite"));
        }
        match self.scheme {
            SchemeKind::Lattice if self.nodes < 4 => {
                Err(config_err("grid.nodes", "need at least 4 nodes"))
            }
            SchemeKind::Quadrature if self.panels == 0 || self.nodes_per_panel == 0 => Err(
                config_err("grid.panels", "panels and nodes_per_panel must be positive"),
            ),
            SchemeKind::Quadrature if !(self.panel_ratio >= 1.0) => {
                Err(config_err("grid.panel_ratio", "must be >= 1"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridScheme {
    Lattice { delta: f64 },
    GaussLegendre { panels: usize, nodes_per_panel: usize, ratio: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub nodes: Vec<f64>,
    /// Weights for integrals in `du`.
    pub weights: Vec<f64>,
    pub u_max: f64,
    pub scheme: GridScheme,
    /// `E(u_i)`
    pub energies: Vec<f64>,
    /// `4 pi u_i^2 w_i`, the weights for integrals in `dp` over R^3.
    pub measure: Vec<f64>,
}

impl RadialGrid {
    pub fn build(spec: &GridSpec, params: &PhysicalParams) -> Result<Self> {
        spec.validate()?;
        let (nodes, weights, scheme) = match spec.scheme {
            SchemeKind::Lattice => {
                // node i sits at energy i * delta, cell [(i - 1/2) delta, (i + 1/2) delta]
                let n = spec.nodes;
                let delta = params.e(spec.u_max) / (n as f64 + 0.5);
                let nodes: Vec<f64> = (1..=n).map(|i| params.e_inv(i as f64 * delta)).collect();
                let weights = nodes.iter().map(|&u| delta / params.de(u)).collect();
                (nodes, weights, GridScheme::Lattice { delta })
            }
            SchemeKind::Quadrature => {
                let mut edges = geometric_edges(spec.u_max, spec.panels, spec.panel_ratio);
                // the C22 cutoff gets a panel edge of its own
                let p0 = params.p0;
                if p0 > 0.0 && p0 < spec.u_max && spec.panels > 1 {
                    let near = (1..spec.panels)
                        .min_by(|&i, &j| (edges[i] - p0).abs().total_cmp(&(edges[j] - p0).abs()))
                        .unwrap();
                    edges[near] = p0;
                }
                let rule = UnitRule::gauss(spec.nodes_per_panel);
                let mut nodes = Vec::new();
                let mut weights = Vec::new();
                for e in edges.windows(2) {
                    let len = e[1] - e[0];
                    for (x, w) in rule.x.iter().zip(&rule.w) {
                        nodes.push(e[0] + len * x);
                        weights.push(len * w);
                    }
                }
                (
                    nodes,
                    weights,
                    GridScheme::GaussLegendre {
                        panels: spec.panels,
                        nodes_per_panel: spec.nodes_per_panel,
                        ratio: spec.panel_ratio,
                    },
                )
            }
        };
        Ok(Self::from_parts(nodes, weights, spec.u_max, scheme, params))
    }

    fn from_parts(
        nodes: Vec<f64>,
        weights: Vec<f64>,
        u_max: f64,
        scheme: GridScheme,
        params: &PhysicalParams,
    ) -> Self {
        let energies = nodes.iter().map(|&u| params.e(u)).collect();
        let measure = nodes
            .iter()
            .zip(&weights)
            .map(|(&u, &w)| 4.0 * PI * u * u * w)
            .collect();
        RadialGrid {
            nodes,
            weights,
            u_max,
            scheme,
            energies,
            measure,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integral over R^3 of a radial function given by node values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.measure.iter().zip(values).map(|(m, v)| m * v).sum()
    }

    pub fn e_max(&self) -> f64 {
        *self.energies.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionState {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<f64>,
}

impl DistributionState {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return domain(format!(
                "state has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return domain(format!("value at node {i} is {} (need finite, >= 0)", values[i]));
        }
        Ok(DistributionState { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        DistributionState {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Samples a profile `f(u)` at the nodes.
    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes.iter().map(|&u| f(u)).collect();
        Self::new(grid, values)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn interpolant(&self) -> StateInterp {
        StateInterp {
            pchip: Pchip::new(self.grid.energies.clone(), self.values.clone()),
            u_max: self.grid.u_max,
        }
    }
}

/// Off-node evaluation of a state: monotone cubic in energy, clamped at 0,
/// zero beyond `u_max`.
#[derive(Debug, Clone)]
pub struct StateInterp {
    pchip: Pchip,
    u_max: f64,
}

impl StateInterp {
    #[inline]
    pub fn at_energy(&self, e: f64, u: f64) -> f64 {
        if u > self.u_max {
            return 0.0;
        }
        self.pchip.eval(e).max(0.0)
    }

    pub fn at(&self, u: f64, params: &PhysicalParams) -> f64 {
        self.at_energy(params.e(u), u)
    }
}

/// `m_k = int E^k f dp`.
pub fn moment(state: &DistributionState, k: f64) -> f64 {
    let g = &state.grid;
    g.measure
        .iter()
        .zip(&g.energies)
        .zip(&state.values)
        .map(|((m, e), f)| if k == 0.0 { m * f } else { m * e.powf(k) * f })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// weight `|p|^m`
    Momentum,
    /// weight `1 + E^(m/2)`
    Energy,
}

pub fn weighted_l1_norm(grid: &RadialGrid, values: &[f64], m: f64, kind: NormKind) -> f64 {
    grid.measure
        .iter()
        .zip(&grid.nodes)
        .zip(&grid.energies)
        .zip(values)
        .map(|(((w, u), e), f)| {
            let weight = match kind {
                NormKind::Momentum => {
                    if m == 0.0 {
                        1.0
                    } else {
                        u.powf(m)
                    }
                }
                NormKind::Energy => 1.0 + e.powf(0.5 * m),
            };
            w * weight * f.abs()
        })
        .sum()
}

/// `f ln f - (1 + f) ln(1 + f)`, zero at `f = 0`.
#[inline]
pub fn entropy_density(f: f64) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    f * f.ln() - (1.0 + f) * f.ln_1p()
}

pub fn entropy(state: &DistributionState) -> f64 {
    state
        .grid
        .measure
        .iter()
        .zip(&state.values)
        .map(|(m, &f)| m * entropy_density(f))
        .sum()
}

/// `ln(f / (1 + f))`, the entropy variable; floored for `f = 0`.
#[inline]
pub fn entropy_variable(f: f64) -> f64 {
    let f = f.max(f64::MIN_POSITIVE);
    f.ln() - f.ln_1p()
}

pub fn bose_einstein(c: f64, grid: Arc<RadialGrid>) -> Result<DistributionState> {
    if !(c > 0.0 && c.is_finite()) {
        return domain(format!("inverse energy scale must be positive, got {c}"));
    }
    let values = grid.energies.iter().map(|&e| 1.0 / (c * e).exp_m1()).collect();
    DistributionState::new(grid, values)
}

fn be_energy(c: f64, grid: &RadialGrid) -> f64 {
    grid.measure
        .iter()
        .zip(&grid.energies)
        .map(|(m, &e)| m * e / (c * e).exp_m1())
        .sum()
}

/// Inverse energy scale whose Bose-Einstein state has energy `target`.
pub fn fit_equilibrium_c(target: f64, grid: &RadialGrid) -> Result<f64> {
    if !(target > 0.0 && target.is_finite()) {
        return domain(format!("energy target must be positive, got {target}"));
    }
    let (c_min, c_max) = (1e-12, 1e12);
    let (hi_e, lo_e) = (be_energy(c_min, grid), be_energy(c_max, grid));
    if !(target < hi_e && target > lo_e) {
        return Err(QbeError::FitRange {
            target,
            lo: lo_e,
            hi: hi_e,
        });
    }
    // bisection in ln c; energy decreases in c
    let (mut a, mut b) = (c_min.ln(), c_max.ln());
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if be_energy(mid.exp(), grid) > target {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

fn default_energy_rtol() -> f64 {
    1e-6
}
fn default_n_star() -> f64 {
    7.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasibleSetSpec {
    pub c0: f64,
    pub c1: f64,
    #[serde(default = "default_n_star")]
    pub n_star: f64,
    pub c_nstar: f64,
    #[serde(default = "default_energy_rtol")]
    pub energy_rtol: f64,
}

impl FeasibleSetSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("feasible.c0", self.c0),
            ("feasible.c1", self.c1),
            ("feasible.n_star", self.n_star),
            ("feasible.c_nstar", self.c_nstar),
            ("feasible.energy_rtol", self.energy_rtol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(config_err(name, format!("must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleReport {
    pub positive: bool,
    pub mass_ok: bool,
    pub energy_ok: bool,
    pub moment_ok: bool,
    pub mass: f64,
    pub energy: f64,
    pub moment: f64,
    pub energy_rel_dev: f64,
}

impl FeasibleReport {
    pub fn ok(&self) -> bool {
        self.positive && self.mass_ok && self.energy_ok && self.moment_ok
    }
}

pub fn in_feasible_set(state: &DistributionState, spec: &FeasibleSetSpec) -> FeasibleReport {
    let mass = moment(state, 0.0);
    let energy = moment(state, 1.0);
    let mom = moment(state, spec.n_star);
    let dev = (energy - spec.c1).abs() / spec.c1.abs().max(f64::MIN_POSITIVE);
    FeasibleReport {
        positive: state.values.iter().all(|v| v.is_finite() && *v >= 0.0),
        mass_ok: mass <= spec.c0,
        energy_ok: dev <= spec.energy_rtol,
        moment_ok: mom <= spec.c_nstar,
        mass,
        energy,
        moment: mom,
        energy_rel_dev: dev,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::ParamInputs;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> PhysicalParams {
        PhysicalParams::new(&ParamInputs::default()).unwrap()
    }

    fn gl_grid() -> Arc<RadialGrid> {
        Arc::new(RadialGrid::build(&GridSpec::quadrature(8, 8, 4.0), &params()).unwrap())
    }

    fn lattice_grid() -> Arc<RadialGrid> {
        Arc::new(RadialGrid::build(&GridSpec::lattice(64, 4.0), &params()).unwrap())
    }

    #[test]
    fn gl_grid_invariants() {
        let g = gl_grid();
        assert!(g.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(g.nodes.iter().all(|&u| u > 0.0 && u < g.u_max));
        assert!(g.weights.iter().all(|&w| w > 0.0));
        let total: f64 = g.weights.iter().sum();
        assert!((total - 4.0).abs() < 1e-12);
    }

    #[test]
    fn lattice_grid_invariants() {
        let p = params();
        let g = lattice_grid();
        assert!(g.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(g.nodes.iter().all(|&u| u > 0.0 && u < g.u_max));
        let GridScheme::Lattice { delta } = g.scheme else {
            panic!()
        };
        for (i, e) in g.energies.iter().enumerate() {
            assert_relative_eq!(*e, (i + 1) as f64 * delta, max_relative = 1e-13);
        }
        // cell rule integrates du over [u(delta/2), u_max] to second order
        let total: f64 = g.weights.iter().sum();
        let exact = g.u_max - p.e_inv(0.5 * delta);
        assert!((total - exact).abs() < 1e-3 * exact);
    }

    #[test]
    fn aligned_lattice_puts_cutoff_on_an_edge() {
        let p = params();
        let s = GridSpec::lattice_aligned(32, 4, &p).unwrap();
        let g = RadialGrid::build(&s, &p).unwrap();
        let GridScheme::Lattice { delta } = g.scheme else {
            panic!()
        };
        assert_relative_eq!(p.e(p.p0), 4.5 * delta, max_relative = 1e-12);
        assert!(g.nodes[3] < p.p0 && g.nodes[4] > p.p0);
        let free = PhysicalParams::new(&ParamInputs {
            n_c: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert!(GridSpec::lattice_aligned(32, 4, &free).is_none());
    }

    #[test]
    fn moment_examples() {
        let g = gl_grid();
        assert_eq!(moment(&DistributionState::zeros(g.clone()), 3.0), 0.0);
        // indicator of a panel-aligned interval is integrated exactly
        let edges = geometric_edges(4.0, 8, 1.5);
        let (a, b) = (edges[3], edges[6]);
        let s = DistributionState::from_fn(g, |u| if u > a && u < b { 1.0 } else { 0.0 }).unwrap();
        assert_relative_eq!(
            moment(&s, 0.0),
            4.0 * PI / 3.0 * (b.powi(3) - a.powi(3)),
            max_relative = 1e-12
        );
    }

    #[test]
    fn holder_interpolation_of_moments() {
        let g = lattice_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let c = rng.gen_range(0.5..3.0);
            let w = rng.gen_range(0.2..1.0);
            let a = rng.gen_range(0.01..2.0);
            let s = DistributionState::from_fn(g.clone(), |u| a * (-((u - c) / w).powi(2)).exp())
                .unwrap();
            for (k, n) in [(1.0, 3.0), (2.0, 7.0), (0.5, 2.0)] {
                let lhs = moment(&s, k);
                let rhs = moment(&s, 0.0).powf((n - k) / n) * moment(&s, n).powf(k / n);
                assert!(lhs <= rhs * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn norm_examples() {
        let g = lattice_grid();
        let z = vec![0.0; g.len()];
        assert_eq!(weighted_l1_norm(&g, &z, 3.0, NormKind::Momentum), 0.0);
        let f: Vec<f64> = g.nodes.iter().map(|u| (-u * u).exp()).collect();
        let s = DistributionState::new(g.clone(), f.clone()).unwrap();
        let n4 = weighted_l1_norm(&g, &f, 4.0, NormKind::Energy);
        assert_relative_eq!(n4, moment(&s, 0.0) + moment(&s, 2.0), max_relative = 1e-13);
        let f2: Vec<f64> = f.iter().map(|v| 2.5 * v).collect();
        assert_relative_eq!(
            weighted_l1_norm(&g, &f2, 1.0, NormKind::Momentum),
            2.5 * weighted_l1_norm(&g, &f, 1.0, NormKind::Momentum),
            max_relative = 1e-14
        );
        let h: Vec<f64> = g.nodes.iter().map(|u| u.sin()).collect();
        let sum: Vec<f64> = f.iter().zip(&h).map(|(a, b)| a + b).collect();
        for kind in [NormKind::Momentum, NormKind::Energy] {
            assert!(
                weighted_l1_norm(&g, &sum, 2.0, kind)
                    <= weighted_l1_norm(&g, &f, 2.0, kind) + weighted_l1_norm(&g, &h, 2.0, kind)
            );
        }
    }

    #[test]
    fn entropy_examples() {
        let g = lattice_grid();
        assert_eq!(entropy(&DistributionState::zeros(g.clone())), 0.0);
        assert_relative_eq!(entropy_density(1.0), -2.0 * 2f64.ln());
    }

    #[test]
    fn bose_einstein_examples() {
        let g = lattice_grid();
        let e0 = g.energies[10];
        let s = bose_einstein(2f64.ln() / e0, g.clone()).unwrap();
        assert_relative_eq!(s.values[10], 1.0, max_relative = 1e-14);
        assert!(s.values.windows(2).all(|w| w[0] > w[1]));
        assert!(bose_einstein(0.0, g.clone()).is_err());
        assert!(bose_einstein(1e3, g.clone()).unwrap().values[63] < 1e-300);
        let mut prev = f64::INFINITY;
        for i in 1..50 {
            let e = moment(&bose_einstein(0.1 * i as f64, g.clone()).unwrap(), 1.0);
            assert!(e < prev);
            prev = e;
        }
    }

    #[test]
    fn fit_round_trip() {
        let g = lattice_grid();
        for c in [0.05, 0.7, 3.0, 20.0] {
            let e = moment(&bose_einstein(c, g.clone()).unwrap(), 1.0);
            let fit = fit_equilibrium_c(e, &g).unwrap();
            assert_relative_eq!(fit, c, max_relative = 1e-8);
            assert!(fit_equilibrium_c(2.0 * e, &g).unwrap() < fit);
        }
        assert!(fit_equilibrium_c(1e-9, &g).unwrap() > 5.0);
        assert!(fit_equilibrium_c(-1.0, &g).is_err());
    }

    #[test]
    fn bose_einstein_minimizes_entropy_at_fixed_energy() {
        let g = lattice_grid();
        let be = bose_einstein(1.0, g.clone()).unwrap();
        let target = moment(&be, 1.0);
        let s_be = entropy(&be);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let c = rng.gen_range(0.3..3.0);
            let w = rng.gen_range(0.2..2.0);
            let mut s = DistributionState::from_fn(g.clone(), |u| {
                (-((u - c) / w).powi(2)).exp() + 0.05
            })
            .unwrap();
            let scale = target / moment(&s, 1.0);
            s.values.iter_mut().for_each(|v| *v *= scale);
            assert!(entropy(&s) >= s_be);
        }
    }

    #[test]
    fn feasible_set_examples() {
        let g = lattice_grid();
        let spec = FeasibleSetSpec {
            c0: 1e6,
            c1: 2.0,
            n_star: 7.0,
            c_nstar: 1e12,
            energy_rtol: 1e-6,
        };
        let z = in_feasible_set(&DistributionState::zeros(g.clone()), &spec);
        assert!(z.positive && z.mass_ok && z.moment_ok && !z.energy_ok);
        let c = fit_equilibrium_c(2.0, &g).unwrap();
        let be = bose_einstein(c, g.clone()).unwrap();
        assert!(in_feasible_set(&be, &spec).ok());
        let mut twice = be.clone();
        twice.values.iter_mut().for_each(|v| *v *= 2.0);
        assert!(!in_feasible_set(&twice, &spec).energy_ok);
    }

    #[test]
    fn interpolant_clamps_and_vanishes_beyond_cap() {
        let p = params();
        let g = lattice_grid();
        let s = DistributionState::from_fn(g.clone(), |u| (-(u - 2.0).powi(2) * 20.0).exp()).unwrap();
        let it = s.interpolant();
        assert_eq!(it.at(g.u_max * 1.01, &p), 0.0);
        for i in 0..1000 {
            assert!(it.at(i as f64 * 0.004, &p) >= 0.0);
        }
        assert_relative_eq!(it.at(g.nodes[20], &p), s.values[20], max_relative = 1e-12);
    }

    #[test]
    fn rejects_negative_values() {
        let g = lattice_grid();
        let mut v = vec![0.0; g.len()];
        v[3] = -1e-3;
        assert!(DistributionState::new(g, v).is_err());
    }
}
