//! Audits of recorded trajectories and probes of operator regularity.
//!
//! Audits are pure functions of a [`TrajectoryRecord`]. Probes draw seeded
//! pairs of profiles and evaluate the operators on both members of a pair.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::collision::{CollisionOperator, Which};
use crate::error::Result;
use crate::grid::{
    bose_einstein, fit_equilibrium_c, weighted_l1_norm, DistributionState, NormKind, RadialGrid,
};
use crate::integrator::TrajectoryRecord;
use crate::sampling::PairSampler;

/// Relative round-off floor for entropy comparisons.
pub const ENTROPY_ROUNDOFF: f64 = 1e-13;
/// Factor between the conservation residual and the entropy tolerance.
pub const ENTROPY_TOL_FACTOR: f64 = 10.0;
/// Cumulative clamping allowed, relative to the largest value seen.
pub const CLAMP_RTOL: f64 = 1e-12;
/// Slack allowed on moments relative to their integrated caps.
pub const MOMENT_CAP_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub records: usize,
    pub max_energy_drift: f64,
    pub energy_drift: Vec<f64>,
    /// `int C12 dp` at each record; C22 contributes nothing to the mass
    pub mass_production: Vec<f64>,
    pub c22_mass_residuals: Vec<f64>,
    pub max_c22_mass_residual: f64,
    /// net momentum, zero for radial states
    pub momentum: f64,
}

pub fn conservation_audit(rec: &TrajectoryRecord) -> ConservationReport {
    let energy_drift: Vec<f64> = rec.rows.iter().map(|r| r.energy_drift).collect();
    let c22: Vec<f64> = rec.rows.iter().map(|r| r.c22_mass_residual).collect();
    ConservationReport {
        records: rec.rows.len(),
        max_energy_drift: energy_drift.iter().cloned().fold(0.0, f64::max),
        energy_drift,
        mass_production: rec.rows.iter().map(|r| r.mass_rate).collect(),
        max_c22_mass_residual: c22.iter().cloned().fold(0.0, f64::max),
        c22_mass_residuals: c22,
        momentum: 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyViolation {
    pub index: usize,
    pub t: f64,
    pub increase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HTheoremReport {
    pub tol_entropy: f64,
    pub max_increase: f64,
    pub violations: Vec<EntropyViolation>,
    pub dissipation: Vec<f64>,
    pub max_dissipation: f64,
    /// records whose dissipation exceeds `tol_entropy`
    pub positive_dissipation: usize,
    pub monotone: bool,
}

/// Ten times the run's energy drift, in units of the entropy scale, floored at
/// round-off.
pub fn default_tol_entropy(rec: &TrajectoryRecord) -> f64 {
    let drift = rec.rows.iter().map(|r| r.energy_drift).fold(0.0, f64::max);
    let scale = rec.rows.iter().map(|r| r.entropy.abs()).fold(0.0, f64::max);
    (ENTROPY_TOL_FACTOR * drift).max(ENTROPY_ROUNDOFF) * scale
}

pub fn h_theorem_audit(rec: &TrajectoryRecord, tol: Option<f64>) -> HTheoremReport {
    let tol = tol.unwrap_or_else(|| default_tol_entropy(rec));
    let mut violations = Vec::new();
    let mut max_increase = f64::NEG_INFINITY;
    for (i, w) in rec.rows.windows(2).enumerate() {
        let inc = w[1].entropy - w[0].entropy;
        max_increase = max_increase.max(inc);
        if inc > tol {
            violations.push(EntropyViolation {
                index: i + 1,
                t: w[1].t,
                increase: inc,
            });
        }
    }
    if rec.rows.len() < 2 {
        max_increase = 0.0;
    }
    let dissipation: Vec<f64> = rec.rows.iter().map(|r| r.dissipation).collect();
    let positive = dissipation.iter().filter(|d| **d > tol).count();
    HTheoremReport {
        tol_entropy: tol,
        max_increase,
        monotone: violations.is_empty() && positive == 0,
        violations,
        max_dissipation: dissipation.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        dissipation,
        positive_dissipation: positive,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationReport {
    /// fitted from the final energy
    pub c: f64,
    /// fitted from each record's energy
    pub c_series: Vec<f64>,
    /// `(max - min) / c` over the series
    pub c_spread: f64,
    /// `||f(t) - f_inf||_{L^1}` per record
    pub distance: Vec<f64>,
    pub final_below_initial: bool,
    /// distance non-increasing over the second half of the records
    pub monotone_tail: bool,
}

pub fn relaxation_audit(rec: &TrajectoryRecord, grid: &Arc<RadialGrid>) -> Result<RelaxationReport> {
    let last = rec.rows.last().map(|r| r.energy).unwrap_or(0.0);
    let c = fit_equilibrium_c(last, grid)?;
    let feq = bose_einstein(c, grid.clone())?;
    let c_series = rec
        .rows
        .iter()
        .map(|r| fit_equilibrium_c(r.energy, grid))
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) = c_series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let distance: Vec<f64> = rec
        .snapshots
        .iter()
        .map(|s| {
            let d: Vec<f64> = s.values.iter().zip(&feq.values).map(|(a, b)| a - b).collect();
            weighted_l1_norm(grid, &d, 0.0, NormKind::Momentum)
        })
        .collect();
    let half = distance.len() / 2;
    let monotone_tail = distance[half..]
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300);
    Ok(RelaxationReport {
        c,
        c_spread: (hi - lo) / c,
        c_series,
        final_below_initial: distance.len() < 2 || distance.last() < distance.first(),
        distance,
        monotone_tail,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassGrowthFit {
    /// smallest constant with `ln(1 + m0)` growing at most `c_hat t` between records
    pub c_hat: f64,
    /// least-squares fit of `dm0/dt = C (1 + m0)` on the record differences
    pub c_lsq: f64,
    /// RMS misfit of the least-squares model, in rate units
    pub residual: f64,
    /// `m0(t) <= (m0(0) + 1) e^{c_hat t} - 1` at every record
    pub bound_holds: bool,
    /// `max (m0(t) + 1) / ((m0(0) + 1) e^{c_hat t})`
    pub worst_ratio: f64,
    /// `max |m0(t) - m0(0)| / m0(0)`
    pub mass_variation: f64,
}

/// Fits the Gronwall constant of the mass and checks the bound it certifies.
/// Needs at least three records; fewer give a zero fit.
pub fn mass_growth_fit(rec: &TrajectoryRecord) -> MassGrowthFit {
    let rows = &rec.rows;
    let m0 = rows.first().map(|r| r.mass).unwrap_or(0.0);
    let mass_variation = if m0 > 0.0 {
        rows.iter().map(|r| (r.mass - m0).abs() / m0).fold(0.0, f64::max)
    } else {
        0.0
    };
    if rows.len() < 3 {
        return MassGrowthFit {
            c_hat: 0.0,
            c_lsq: 0.0,
            residual: 0.0,
            bound_holds: rows.len() < 2 || rows[1].mass <= m0,
            worst_ratio: 1.0,
            mass_variation,
        };
    }
    let mut c_hat: f64 = 0.0;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    let mut pts = Vec::with_capacity(rows.len());
    for w in rows.windows(2) {
        let dt = w[1].t - w[0].t;
        if dt <= 0.0 {
            continue;
        }
        c_hat = c_hat.max((w[1].mass.ln_1p() - w[0].mass.ln_1p()) / dt);
        let rate = (w[1].mass - w[0].mass) / dt;
        let x = 1.0 + w[0].mass;
        sxy += x * rate;
        sxx += x * x;
        pts.push((x, rate));
    }
    let c_lsq = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let residual = (pts
        .iter()
        .map(|(x, r)| (r - c_lsq * x).powi(2))
        .sum::<f64>()
        / pts.len().max(1) as f64)
        .sqrt();
    let worst_ratio = rows
        .iter()
        .map(|r| (r.mass + 1.0) / ((m0 + 1.0) * (c_hat * r.t).exp()))
        .fold(0.0, f64::max);
    MassGrowthFit {
        c_hat,
        c_lsq,
        residual,
        // the envelope construction makes this exact up to rounding in ln/exp
        bound_holds: worst_ratio <= 1.0 + 1e-12,
        worst_ratio,
        mass_variation,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentBound {
    pub order: f64,
    /// least-squares constant of `dm/dt = A (1 + m)`
    pub a_fit: f64,
    /// `max m(t) / cap(t)`
    pub max_ratio: f64,
    pub within_cap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentBoundReport {
    pub factor: f64,
    pub bounds: Vec<MomentBound>,
    pub ok: bool,
}

fn moment_bound(order: f64, ts: &[f64], ms: &[f64]) -> MomentBound {
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in 1..ts.len() {
        let dt = ts[i] - ts[i - 1];
        if dt <= 0.0 {
            continue;
        }
        let x = 1.0 + ms[i - 1];
        sxy += x * (ms[i] - ms[i - 1]) / dt;
        sxx += x * x;
    }
    let a = if sxx > 0.0 { (sxy / sxx).max(0.0) } else { 0.0 };
    let m0 = ms.first().cloned().unwrap_or(0.0);
    let max_ratio = ts
        .iter()
        .zip(ms)
        .map(|(t, m)| {
            let cap = (m0 + 1.0) * (a * t).exp() - 1.0;
            if cap > 0.0 {
                m / cap
            } else if *m > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    MomentBound {
        order,
        a_fit: a,
        max_ratio,
        within_cap: max_ratio <= MOMENT_CAP_FACTOR,
    }
}

/// Integrates the linear majorant `dm/dt = A (1 + m)` with `A` fitted by least
/// squares to the recorded moments of order 3 and `n*`, and compares.
pub fn moment_bound_audit(rec: &TrajectoryRecord) -> MomentBoundReport {
    let ts = rec.times();
    let m3: Vec<f64> = rec.rows.iter().map(|r| r.m3).collect();
    let mn: Vec<f64> = rec.rows.iter().map(|r| r.m_nstar).collect();
    let bounds = vec![moment_bound(3.0, &ts, &m3), moment_bound(rec.n_star, &ts, &mn)];
    MomentBoundReport {
        factor: MOMENT_CAP_FACTOR,
        ok: bounds.iter().all(|b| b.within_cap),
        bounds,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub min_f: f64,
    pub clamp_total: f64,
    pub f_inf_max: f64,
    pub clamp_relative: f64,
    pub ok: bool,
}

pub fn positivity_audit(rec: &TrajectoryRecord) -> PositivityReport {
    let min_f = rec.rows.iter().map(|r| r.min_f).fold(f64::INFINITY, f64::min);
    let rel = if rec.f_inf_max > 0.0 {
        rec.clamp_total / rec.f_inf_max
    } else {
        0.0
    };
    PositivityReport {
        min_f,
        clamp_total: rec.clamp_total,
        f_inf_max: rec.f_inf_max,
        clamp_relative: rel,
        ok: min_f >= 0.0 && rel <= CLAMP_RTOL,
    }
}

/// Extra weight order in the Holder denominator for each operator.
pub fn holder_shift(which: Which) -> f64 {
    match which {
        Which::C12 => 3.0,
        Which::C22Quadratic => 1.0,
        Which::C22Cubic => 0.0,
        // C22 and Q inherit the worst of their parts
        Which::C22 => 1.0,
        Which::Q => 3.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub probe: String,
    pub which: Which,
    pub n: f64,
    pub seed: u64,
    pub pairs: usize,
    /// pairs with `f = g` on the grid, excluded
    pub skipped: usize,
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
}

impl ProbeReport {
    pub fn finite(&self) -> bool {
        self.max_ratio.is_finite()
    }
}

fn sample_pairs(
    grid: &Arc<RadialGrid>,
    sampler: &PairSampler,
    count: usize,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    sampler
        .pairs(count)
        .iter()
        .map(|(f, g)| Ok((f.sample(grid.clone())?.values, g.sample(grid.clone())?.values)))
        .collect()
}

fn finish(
    probe: &str,
    which: Which,
    n: f64,
    sampler: &PairSampler,
    ratios: Vec<Option<f64>>,
) -> ProbeReport {
    let skipped = ratios.iter().filter(|r| r.is_none()).count();
    let ratios: Vec<f64> = ratios.into_iter().flatten().collect();
    ProbeReport {
        probe: probe.to_string(),
        which,
        n,
        seed: sampler.seed,
        pairs: ratios.len() + skipped,
        skipped,
        max_ratio: ratios.iter().cloned().fold(0.0, f64::max),
        ratios,
    }
}

/// `max ||C[f] - C[g]||_{L^1_n} / (||f - g||_{L^1_{n+s}} + ||f - g||_{L^1})`
/// with `s` from [`holder_shift`].
pub fn holder_probe(
    op: &CollisionOperator,
    sampler: &PairSampler,
    count: usize,
    n: f64,
    which: Which,
) -> Result<ProbeReport> {
    let grid = op.grid().clone();
    let pairs = sample_pairs(&grid, sampler, count)?;
    let shift = holder_shift(which);
    let ratios = pairs
        .par_iter()
        .map(|(f, g)| {
            let d: Vec<f64> = f.iter().zip(g).map(|(a, b)| a - b).collect();
            let den = weighted_l1_norm(&grid, &d, n + shift, NormKind::Momentum)
                + weighted_l1_norm(&grid, &d, 0.0, NormKind::Momentum);
            if den == 0.0 {
                return Ok(None);
            }
            let cf = op.rates(&DistributionState::new(grid.clone(), f.clone())?, which)?;
            let cg = op.rates(&DistributionState::new(grid.clone(), g.clone())?, which)?;
            let dc: Vec<f64> = cf.iter().zip(&cg).map(|(a, b)| a - b).collect();
            Ok(Some(weighted_l1_norm(&grid, &dc, n, NormKind::Momentum) / den))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish("holder", which, n, sampler, ratios))
}

/// `sign(x)` with `sign(0) = 0`.
#[inline]
fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `M0 = int (Q[f] - Q[g]) sign(f - g) (1 + E^n) dp` for one pair.
pub fn lipschitz_bracket(
    op: &CollisionOperator,
    f: &DistributionState,
    g: &DistributionState,
    n: f64,
) -> Result<f64> {
    let grid = op.grid();
    let qf = op.q_apply(f)?.q;
    let qg = op.q_apply(g)?.q;
    let vals: Vec<f64> = (0..grid.len())
        .map(|i| {
            (qf[i] - qg[i]) * sign0(f.values[i] - g.values[i]) * (1.0 + grid.energies[i].powf(n))
        })
        .collect();
    Ok(grid.integrate(&vals))
}

/// `max M0 / ||f - g||_{LL^1_{2n}}` over seeded pairs.
pub fn one_sided_lipschitz_probe(
    op: &CollisionOperator,
    sampler: &PairSampler,
    count: usize,
    n: f64,
) -> Result<ProbeReport> {
    let grid = op.grid().clone();
    let pairs = sample_pairs(&grid, sampler, count)?;
    let ratios = pairs
        .par_iter()
        .map(|(f, g)| {
            let d: Vec<f64> = f.iter().zip(g).map(|(a, b)| a - b).collect();
            let den = weighted_l1_norm(&grid, &d, 2.0 * n, NormKind::Energy);
            if den == 0.0 {
                return Ok(None);
            }
            let fs = DistributionState::new(grid.clone(), f.clone())?;
            let gs = DistributionState::new(grid.clone(), g.clone())?;
            Ok(Some(lipschitz_bracket(op, &fs, &gs, n)? / den))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish("one_sided_lipschitz", Which::Q, n, sampler, ratios))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub conservation: ConservationReport,
    pub h_theorem: HTheoremReport,
    pub relaxation: Option<RelaxationReport>,
    /// set when the equilibrium fit fails
    pub relaxation_error: Option<String>,
    pub mass_growth: MassGrowthFit,
    pub moments: MomentBoundReport,
    pub positivity: PositivityReport,
    pub probes: Vec<ProbeReport>,
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
}

impl AuditReport {
    /// Runs every trajectory audit; probes are appended by the caller.
    pub fn from_trajectory(rec: &TrajectoryRecord, grid: &Arc<RadialGrid>) -> Self {
        let (relaxation, relaxation_error) = match relaxation_audit(rec, grid) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        AuditReport {
            conservation: conservation_audit(rec),
            h_theorem: h_theorem_audit(rec, None),
            relaxation,
            relaxation_error,
            mass_growth: mass_growth_fit(rec),
            moments: moment_bound_audit(rec),
            positivity: positivity_audit(rec),
            probes: Vec::new(),
            config_hash: None,
            seed: None,
        }
    }
}
