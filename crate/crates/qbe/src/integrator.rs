//! Positivity-preserving forward Euler for `df/dt = Q[f]`.
//!
//! With the split `Q = gain - f Q^-` and `gain >= 0`, the update
//! `f + h Q = f (1 - h Q^-) + h gain` stays nonnegative whenever
//! `h Q^- <= 1`. Steps are taken at `h = min(h_max, theta / max Q^-)`.

use serde::{Deserialize, Serialize};

use crate::collision::{conservation_fix, CollisionOperator, CollisionRates};
use crate::error::{config_err, QbeError, Result};
use crate::grid::{entropy, entropy_variable, moment, DistributionState};

fn default_theta() -> f64 {
    0.5
}
fn default_record_every() -> usize {
    1
}
fn default_max_steps() -> usize {
    1_000_000
}
fn default_n_star() -> f64 {
    7.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepControls {
    pub h_max: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    pub t_end: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub conservation_fix: bool,
    /// Zero the state above this momentum before each step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncate_at: Option<f64>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Order of the high moment tracked in the diagnostics.
    #[serde(default = "default_n_star")]
    pub n_star: f64,
}

impl StepControls {
    pub fn new(h_max: f64, t_end: f64) -> Self {
        StepControls {
            h_max,
            theta: default_theta(),
            t_end,
            record_every: default_record_every(),
            conservation_fix: false,
            truncate_at: None,
            max_steps: default_max_steps(),
            n_star: default_n_star(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(config_err("controls.theta", "must lie in (0, 1)"));
        }
        if !(self.h_max > 0.0 && self.h_max.is_finite()) {
            return Err(config_err("controls.h_max", "must be positive"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(config_err("controls.t_end", "must be positive"));
        }
        if self.record_every == 0 {
            return Err(config_err("controls.record_every", "must be >= 1"));
        }
        if !(self.n_star > 0.0) {
            return Err(config_err("controls.n_star", "must be positive"));
        }
        Ok(())
    }
}

/// `1 / max Q^-` and the node attaining the max; infinite if `Q^- = 0`.
pub fn positivity_step_bound(rates: &CollisionRates) -> (f64, usize) {
    let (node, qm) = rates
        .q_minus
        .iter()
        .cloned()
        .enumerate()
        .fold((0, 0.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if qm > 0.0 {
        (1.0 / qm, node)
    } else {
        (f64::INFINITY, node)
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: DistributionState,
    pub h: f64,
    /// largest negative excursion removed by clamping in this step
    pub clamped: f64,
}

/// One Euler step of size `h` using precomputed rates.
pub fn euler_update(
    state: &DistributionState,
    rates: &CollisionRates,
    h: f64,
    fix: bool,
) -> (DistributionState, f64) {
    let mut q = rates.q.clone();
    if fix {
        conservation_fix(&state.grid, &state.values, &mut q);
    }
    let mut clamped: f64 = 0.0;
    let values = state
        .values
        .iter()
        .zip(&q)
        .map(|(f, r)| {
            let v = f + h * r;
            if v < 0.0 {
                clamped = clamped.max(-v);
                0.0
            } else {
                v
            }
        })
        .collect();
    (
        DistributionState {
            grid: state.grid.clone(),
            values,
        },
        clamped,
    )
}

fn pick_h(
    state: &DistributionState,
    rates: &CollisionRates,
    controls: &StepControls,
    remaining: f64,
) -> Result<f64> {
    let (h_plus, node) = positivity_step_bound(rates);
    let h = controls.h_max.min(controls.theta * h_plus).min(remaining);
    if !(h > 1e-14 * controls.t_end) && remaining > 1e-14 * controls.t_end {
        return Err(QbeError::StepUnderflow {
            h_plus,
            node,
            u: state.grid.nodes[node],
        });
    }
    Ok(h)
}

fn truncate(state: &mut DistributionState, r: Option<f64>) {
    if let Some(r) = r {
        for (v, u) in state.values.iter_mut().zip(&state.grid.nodes) {
            if *u > r {
                *v = 0.0;
            }
        }
    }
}

pub fn step(
    op: &CollisionOperator,
    state: &DistributionState,
    controls: &StepControls,
) -> Result<StepOutcome> {
    let mut s = state.clone();
    truncate(&mut s, controls.truncate_at);
    let rates = op.q_apply(&s)?;
    let h = pick_h(&s, &rates, controls, controls.t_end)?;
    let (state, clamped) = euler_update(&s, &rates, h, controls.conservation_fix);
    Ok(StepOutcome { state, h, clamped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub step: usize,
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub entropy: f64,
    #[serde(rename = "m_2")]
    pub m2: f64,
    #[serde(rename = "m_3")]
    pub m3: f64,
    pub m_nstar: f64,
    /// size of the step that produced this state (0 for the initial state)
    pub h_used: f64,
    pub min_f: f64,
    /// `|m1(t) - m1(0)| / m1(0)`
    pub energy_drift: f64,
    /// `|int C22 dp|` over the gross C22 rate `int (gain + f C22^-) dp`
    pub c22_mass_residual: f64,
    /// `int C12 dp`
    pub mass_rate: f64,
    /// `int Q ln(f / (1 + f)) dp`
    pub dissipation: f64,
    /// cumulative clamping
    pub clamped_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub index: usize,
    pub t: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub n_star: f64,
    pub rows: Vec<DiagnosticRow>,
    pub snapshots: Vec<Snapshot>,
    pub steps: usize,
    pub clamp_total: f64,
    pub f_inf_max: f64,
    pub abort: Option<String>,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn final_state_values(&self) -> Option<&[f64]> {
        self.snapshots.last().map(|s| s.values.as_slice())
    }
}

fn make_row(
    step: usize,
    t: f64,
    h: f64,
    state: &DistributionState,
    rates: &CollisionRates,
    e0: f64,
    n_star: f64,
    clamped_total: f64,
) -> DiagnosticRow {
    let g = &state.grid;
    let energy = moment(state, 1.0);
    let phi: Vec<f64> = state.values.iter().map(|&f| entropy_variable(f)).collect();
    let gross22: Vec<f64> = rates
        .c22_gain
        .iter()
        .zip(&rates.c22_loss)
        .zip(&state.values)
        .map(|((a, b), f)| a + f * b)
        .collect();
    let gross = g.integrate(&gross22);
    let m22 = g.integrate(&rates.c22);
    DiagnosticRow {
        step,
        t,
        mass: moment(state, 0.0),
        energy,
        entropy: entropy(state),
        m2: moment(state, 2.0),
        m3: moment(state, 3.0),
        m_nstar: moment(state, n_star),
        h_used: h,
        min_f: state.min_value(),
        energy_drift: if e0 > 0.0 { (energy - e0).abs() / e0 } else { 0.0 },
        c22_mass_residual: if gross > 0.0 { m22.abs() / gross } else { 0.0 },
        mass_rate: g.integrate(&rates.c12),
        dissipation: g.integrate(&rates.q.iter().zip(&phi).map(|(a, b)| a * b).collect::<Vec<_>>()),
        clamped_total,
    }
}

pub fn evolve(
    op: &CollisionOperator,
    state0: &DistributionState,
    controls: &StepControls,
) -> Result<TrajectoryRecord> {
    controls.validate()?;
    let mut state = state0.clone();
    truncate(&mut state, controls.truncate_at);
    let e0 = moment(&state, 1.0);
    let mut rec = TrajectoryRecord {
        n_star: controls.n_star,
        rows: Vec::new(),
        snapshots: Vec::new(),
        steps: 0,
        clamp_total: 0.0,
        f_inf_max: state.max_value(),
        abort: None,
    };
    let mut rates = op.q_apply(&state)?;
    let push = |rec: &mut TrajectoryRecord, step, t, h, st: &DistributionState, r: &CollisionRates| {
        let row = make_row(step, t, h, st, r, e0, controls.n_star, rec.clamp_total);
        rec.snapshots.push(Snapshot {
            index: rec.rows.len(),
            t,
            values: st.values.clone(),
        });
        rec.rows.push(row);
    };
    push(&mut rec, 0, 0.0, 0.0, &state, &rates);
    let mut t = 0.0;
    let mut n = 0;
    let t_tol = 1e-12 * controls.t_end;
    while controls.t_end - t > t_tol {
        if n >= controls.max_steps {
            rec.abort = Some(format!("step limit {} reached at t = {t}", controls.max_steps));
            break;
        }
        let h = match pick_h(&state, &rates, controls, controls.t_end - t) {
            Ok(h) => h,
            Err(e) => {
                rec.abort = Some(e.to_string());
                break;
            }
        };
        let (mut next, clamped) = euler_update(&state, &rates, h, controls.conservation_fix);
        truncate(&mut next, controls.truncate_at);
        rec.clamp_total += clamped;
        n += 1;
        t = if controls.t_end - (t + h) <= t_tol {
            controls.t_end
        } else {
            t + h
        };
        state = next;
        rec.f_inf_max = rec.f_inf_max.max(state.max_value());
        rates = match op.q_apply(&state) {
            Ok(r) => r,
            Err(e) => {
                rec.abort = Some(e.to_string());
                break;
            }
        };
        if n % controls.record_every == 0 || t >= controls.t_end {
            push(&mut rec, n, t, h, &state, &rates);
        }
    }
    rec.steps = n;
    Ok(rec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RichardsonReport {
    pub h: f64,
    pub horizon: f64,
    /// `||f_h - f_{h/2}||` and `||f_{h/2} - f_{h/4}||` in L1
    pub diffs: [f64; 2],
    /// `None` when the differences are at round-off
    pub order: Option<f64>,
}

/// Fixed-step Euler to `horizon`; errors if `h` would break the positivity bound.
pub fn evolve_fixed(
    op: &CollisionOperator,
    state0: &DistributionState,
    h: f64,
    steps: usize,
) -> Result<DistributionState> {
    let mut s = state0.clone();
    for _ in 0..steps {
        let rates = op.q_apply(&s)?;
        let (h_plus, node) = positivity_step_bound(&rates);
        if h >= h_plus {
            return Err(QbeError::StepUnderflow {
                h_plus,
                node,
                u: s.grid.nodes[node],
            });
        }
        s = euler_update(&s, &rates, h, false).0;
    }
    Ok(s)
}

pub fn richardson_order_check(
    op: &CollisionOperator,
    state0: &DistributionState,
    h: f64,
    steps: usize,
) -> Result<RichardsonReport> {
    let a = evolve_fixed(op, state0, h, steps)?;
    let b = evolve_fixed(op, state0, 0.5 * h, 2 * steps)?;
    let c = evolve_fixed(op, state0, 0.25 * h, 4 * steps)?;
    let g = &state0.grid;
    let dist = |x: &DistributionState, y: &DistributionState| {
        g.integrate(
            &x.values
                .iter()
                .zip(&y.values)
                .map(|(p, q)| (p - q).abs())
                .collect::<Vec<_>>(),
        )
    };
    let d1 = dist(&a, &b);
    let d2 = dist(&b, &c);
    let scale = g.integrate(&state0.values).max(f64::MIN_POSITIVE);
    let roundoff = 1e-13 * scale;
    let order = if d1 > roundoff && d2 > roundoff {
        Some((d1 / d2).log2())
    } else {
        None
    };
    Ok(RichardsonReport {
        h,
        horizon: h * steps as f64,
        diffs: [d1, d2],
        order,
    })
}
