//! Brute-force references for the collision operators and surface weights.
//!
//! Energy deltas are replaced by normalized Gaussians of width `eps` and the
//! remaining volume integrals are done by dense composite Gauss-Legendre
//! quadrature. Each inner rule is restricted to the window where the Gaussian
//! exceeds `exp(-WINDOW^2 / 2)`, so the cost does not grow as `eps` shrinks.
//! Three widths `eps, eps/2, eps/4` are combined by Richardson extrapolation
//! in `eps^2`.
//!
//! Every momentum is restricted to `[0, u_max]`, the same truncation the main
//! operators apply. Test profiles are evaluated as functions, never
//! interpolated from grid values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::collision::CollisionOperator;
use crate::error::{QbeError, Result};
use crate::grid::{DistributionState, GridSpec, RadialGrid};
use crate::manifolds::{
    h0, s0_weight_unchecked, s1_weight_unchecked, s2_weight, solve_q_gamma_s0,
};
use crate::physics::PhysicalParams;
use crate::quadrature::UnitRule;
use crate::sampling::Bump;

/// Half-width of the integration window, in units of `eps`.
pub const WINDOW: f64 = 8.0;
/// Relative tolerance for node-wise rate certification (of `max |reference|`).
pub const RATE_TOLERANCE: f64 = 0.02;
/// Relative tolerance for surface-weight certification.
pub const SURFACE_TOLERANCE: f64 = 0.01;
/// Scan resolution of [`q_gamma_reference`], relative to `|p|`.
pub const SCAN_STEP: f64 = 1e-5;

#[inline]
fn gauss_delta(x: f64, eps: f64) -> f64 {
    (-0.5 * (x / eps).powi(2)).exp() / ((2.0 * PI).sqrt() * eps)
}

/// Sorted, deduplicated panel edges on `[lo, hi]`: `panels` uniform panels plus
/// the interior `extra` points.
fn edges(lo: f64, hi: f64, panels: usize, extra: &[f64]) -> Vec<f64> {
    let mut e: Vec<f64> = (0..=panels)
        .map(|i| lo + (hi - lo) * i as f64 / panels as f64)
        .collect();
    e.extend(extra.iter().cloned().filter(|x| *x > lo && *x < hi));
    e.sort_by(f64::total_cmp);
    e.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * hi.abs().max(1.0));
    e
}

/// Dense-grid resolution of the references.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    /// uniform panels for each outer magnitude
    pub panels: usize,
    /// Gauss points per outer panel
    pub points: usize,
    /// Gauss points per window segment
    pub window_points: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution {
            panels: 200,
            points: 6,
            window_points: 24,
        }
    }
}

/// Partner magnitude window `[r_lo, r_hi]` such that `E(r)` lies within
/// `WINDOW eps` of `target`, clipped to `[a, b]`.
fn energy_window(
    p: &PhysicalParams,
    target: f64,
    eps: f64,
    a: f64,
    b: f64,
) -> Option<(f64, f64)> {
    let lo = p.e_inv((target - WINDOW * eps).max(0.0)).max(a);
    let hi = p.e_inv(target + WINDOW * eps).min(b);
    (hi > lo).then_some((lo, hi))
}

/// Smoothed C12 at `|p1| = p1` for a profile `f`.
pub fn c12_reference_eps<F>(
    f: &F,
    p1: f64,
    eps: f64,
    params: &PhysicalParams,
    u_max: f64,
    res: Resolution,
) -> f64
where
    F: Fn(f64) -> f64 + Sync,
{
    let p = params;
    let lam = p.lambda1 * p.n_c;
    if lam == 0.0 {
        return 0.0;
    }
    let outer = UnitRule::gauss(res.points);
    let inner = UnitRule::gauss(res.window_points);
    let f1 = f(p1);
    let e1 = p.e(p1);
    // cos(angle) from the partner magnitude r = |p1 - p2| (or |p2 - p1|)
    let cos_of = |u: f64, r: f64| ((p1 * p1 + u * u - r * r) / (2.0 * p1 * u)).clamp(-1.0, 1.0);
    let trunc = u_max;
    // decay p1 -> p2 + p3, p3 = p1 - p2
    let s0 = |u: f64| -> f64 {
        let eu = p.e(u);
        let fu = f(u);
        let Some((rlo, rhi)) = energy_window(p, e1 - eu, eps, (p1 - u).abs(), (p1 + u).min(trunc))
        else {
            return 0.0;
        };
        let (c_hi, c_lo) = (cos_of(u, rlo), cos_of(u, rhi));
        2.0 * PI
            * u
            * u
            * inner.integrate(c_lo, c_hi, |c| {
                let r = (p1 * p1 + u * u - 2.0 * p1 * u * c).max(0.0).sqrt();
                if r > trunc {
                    return 0.0;
                }
                let fr = f(r);
                p.k12(p1, u, r)
                    * gauss_delta(e1 - eu - p.e(r), eps)
                    * (fu * fr - f1 * (1.0 + fu + fr))
            })
    };
    // merger p1 + p3 -> p2, p3 = p2 - p1
    let s1 = |u: f64| -> f64 {
        let eu = p.e(u);
        let fu = f(u);
        let Some((rlo, rhi)) = energy_window(p, eu - e1, eps, (p1 - u).abs(), (p1 + u).min(trunc))
        else {
            return 0.0;
        };
        let (c_hi, c_lo) = (cos_of(u, rlo), cos_of(u, rhi));
        2.0 * PI
            * u
            * u
            * inner.integrate(c_lo, c_hi, |c| {
                let r = (p1 * p1 + u * u - 2.0 * p1 * u * c).max(0.0).sqrt();
                if r > trunc {
                    return 0.0;
                }
                let fr = f(r);
                p.k12(u, p1, r)
                    * gauss_delta(eu - e1 - p.e(r), eps)
                    * (fu * (1.0 + f1 + fr) - f1 * fr)
            })
    };
    let e = edges(0.0, u_max, res.panels, &[p1]);
    lam * (outer.integrate_panels(&e, s0) + 2.0 * outer.integrate_panels(&e, s1))
}

/// Smoothed C22 at `|p1| = p1` for a profile `f`, from the reduced radial form
/// with kernel `K22 min(p_i) p1 p2 p3 p4 / p1^2`.
pub fn c22_reference_eps<F>(
    f: &F,
    p1: f64,
    eps: f64,
    params: &PhysicalParams,
    u_max: f64,
    res: Resolution,
) -> f64
where
    F: Fn(f64) -> f64 + Sync,
{
    let p = params;
    if p.kappa3 == 0.0 || p1 < p.p0 || p1 > u_max {
        return 0.0;
    }
    let lo = p.p0;
    let outer = UnitRule::gauss(res.points);
    let inner = UnitRule::gauss(res.window_points);
    let f1 = f(p1);
    let e1 = p.e(p1);
    let (e_lo, e_hi) = (p.e(lo), p.e(u_max));
    let uv1 = p.uv(p1);
    let band = WINDOW * eps;
    let p4_integral = |u2: f64, f2: f64, uv2: (f64, f64), u3: f64| -> f64 {
        let f3 = f(u3);
        let uv3 = p.uv(u3);
        let target = e1 + p.e(u2) - p.e(u3);
        let Some((a, b)) = energy_window(p, target, eps, lo, u_max) else {
            return 0.0;
        };
        let cuts = [p1, u2, u3];
        let seg = edges(a, b, 1, &cuts);
        inner.integrate_panels(&seg, |u4| {
            let f4 = f(u4);
            let amp = crate::physics::a22(uv1, uv2, uv3, p.uv(u4));
            let m = p1.min(u2).min(u3).min(u4);
            amp * amp
                * m
                * u2
                * u3
                * u4
                * gauss_delta(target - p.e(u4), eps)
                * (f3 * f4 * (1.0 + f1 + f2) - f1 * f2 * (1.0 + f3 + f4))
        })
    };
    let p3_integral = |u2: f64| -> f64 {
        let f2 = f(u2);
        let uv2 = p.uv(u2);
        let base = e1 + p.e(u2);
        // where the p4 window meets the ends of [p0, u_max]
        let mut cuts = vec![p1, u2];
        for e4 in [e_lo, e_hi] {
            for s in [-band, 0.0, band] {
                let e3 = base - e4 + s;
                if e3 > 0.0 {
                    cuts.push(p.e_inv(e3));
                }
            }
        }
        let seg = edges(lo, u_max, res.panels / 4, &cuts);
        outer.integrate_panels(&seg, |u3| p4_integral(u2, f2, uv2, u3))
    };
    let seg = edges(lo, u_max, res.panels / 4, &[p1]);
    // collected before summing so the result does not depend on the thread count
    let parts: Vec<f64> = seg
        .par_windows(2)
        .map(|w| outer.integrate(w[0], w[1], p3_integral))
        .collect();
    let total: f64 = parts.iter().sum();
    p.kappa3 * total / p1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    S0,
    S1,
    S2,
}

/// Smoothed surface integral `int F(|w|, |partner|) G_eps(H(w)) dw`.
///
/// For `S0` and `S1`, `w` ranges over `|w| <= cap` with partner `|p - w|` and
/// `|p + w|`; for `S2`, `v` ranges over `|v| <= cap` with partner
/// `|v - p|`.
pub fn surface_reference_eps<F>(
    p_mag: f64,
    family: Family,
    test: &F,
    eps: f64,
    params: &PhysicalParams,
    cap: f64,
    res: Resolution,
) -> f64
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let p = params;
    let ep = p.e(p_mag);
    let outer = UnitRule::gauss(res.points);
    let inner = UnitRule::gauss(res.window_points);
    let pm = p_mag;
    // partner r(c) = sqrt(p^2 + u^2 + 2 s p u c) with s = -1 (S0, S2) or +1 (S1)
    let sgn = if family == Family::S1 { 1.0 } else { -1.0 };
    let cos_of = |u: f64, r: f64| (sgn * (r * r - pm * pm - u * u) / (2.0 * pm * u)).clamp(-1.0, 1.0);
    let shell = |u: f64| -> f64 {
        let eu = p.e(u);
        let (target, h): (f64, Box<dyn Fn(f64) -> f64>) = match family {
            Family::S0 => (ep - eu, Box::new(move |er: f64| er + eu - ep)),
            Family::S1 => (ep + eu, Box::new(move |er: f64| er - ep - eu)),
            Family::S2 => (eu - ep, Box::new(move |er: f64| eu - ep - er)),
        };
        let Some((rlo, rhi)) = energy_window(p, target, eps, (pm - u).abs(), pm + u) else {
            return 0.0;
        };
        let (c1, c2) = (cos_of(u, rlo), cos_of(u, rhi));
        let (c_lo, c_hi) = if c1 < c2 { (c1, c2) } else { (c2, c1) };
        2.0 * PI
            * u
            * u
            * inner.integrate(c_lo, c_hi, |c| {
                let r = (pm * pm + u * u + 2.0 * sgn * pm * u * c).max(0.0).sqrt();
                test(u, r) * gauss_delta(h(p.e(r)), eps)
            })
    };
    // S2 is not restricted to |v| > |p| here: the smoothed level sets cross
    // that sphere, and the Gaussian already confines the integrand
    outer.integrate_panels(&edges(0.0, cap, res.panels, &[pm]), shell)
}

/// The manifolds module's reduced one-dimensional integral of the same test
/// function, by composite Gauss-Legendre.
pub fn surface_reduced<F>(p_mag: f64, family: Family, test: &F, params: &PhysicalParams, cap: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    let p = params;
    let rule = UnitRule::gauss(16);
    let ep = p.e(p_mag);
    let val = match family {
        Family::S0 => {
            let top = p_mag.min(cap);
            rule.integrate_panels(&edges(0.0, top, 64, &[]), |u| {
                let r = p.e_inv(ep - p.e(u));
                s0_weight_unchecked(p_mag, u, p) * test(u, r)
            })
        }
        Family::S1 => rule.integrate_panels(&edges(0.0, cap, 64, &[]), |u| {
            let s = p.e_inv(ep + p.e(u));
            s1_weight_unchecked(p_mag, u, p) * test(u, s)
        }),
        Family::S2 => {
            if cap <= p_mag {
                return Ok(0.0);
            }
            let mut acc = 0.0;
            for e in edges(p_mag, cap, 64, &[]).windows(2) {
                for (x, w) in rule.x.iter().zip(&rule.w) {
                    let v = e[0] + (e[1] - e[0]) * x;
                    let u = p.e_inv(p.e(v) - ep);
                    acc += w * (e[1] - e[0]) * s2_weight(p_mag, v, p)? * test(v, u);
                }
            }
            acc
        }
    };
    Ok(val)
}

/// Values at `eps, eps/2, eps/4`, their `eps^2` extrapolation and the gap
/// between the two first-level extrapolants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolated {
    pub eps: [f64; 3],
    pub raw: [f64; 3],
    pub value: f64,
    pub residual: f64,
}

pub fn extrapolate(eps0: f64, mut eval: impl FnMut(f64) -> f64) -> Extrapolated {
    let eps = [eps0, 0.5 * eps0, 0.25 * eps0];
    let raw = [eval(eps[0]), eval(eps[1]), eval(eps[2])];
    let r1 = (4.0 * raw[1] - raw[0]) / 3.0;
    let r2 = (4.0 * raw[2] - raw[1]) / 3.0;
    Extrapolated {
        eps,
        raw,
        value: (16.0 * r2 - r1) / 15.0,
        residual: (r2 - r1).abs(),
    }
}

pub fn c12_reference<F>(f: &F, p1: f64, eps0: f64, params: &PhysicalParams, u_max: f64) -> Extrapolated
where
    F: Fn(f64) -> f64 + Sync,
{
    extrapolate(eps0, |e| c12_reference_eps(f, p1, e, params, u_max, Resolution::default()))
}

pub fn c22_reference<F>(f: &F, p1: f64, eps0: f64, params: &PhysicalParams, u_max: f64) -> Extrapolated
where
    F: Fn(f64) -> f64 + Sync,
{
    extrapolate(eps0, |e| c22_reference_eps(f, p1, e, params, u_max, Resolution::default()))
}

pub fn surface_area_reference<F>(
    p_mag: f64,
    family: Family,
    test: &F,
    eps0: f64,
    params: &PhysicalParams,
    cap: f64,
) -> Extrapolated
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    extrapolate(eps0, |e| {
        surface_reference_eps(p_mag, family, test, e, params, cap, Resolution::default())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QScan {
    pub q: f64,
    pub sign_changes: usize,
    /// scan resolution
    pub step: f64,
}

/// Root of `H0(gamma p + q e_perp) = 0` in `q` by a sign-change scan over
/// `(0, |p|)`. More or fewer than one sign change is a geometry violation.
pub fn q_gamma_reference(p_mag: f64, gamma: f64, params: &PhysicalParams) -> Result<QScan> {
    let n = (1.0 / SCAN_STEP).round() as usize;
    let step = p_mag / n as f64;
    let mut changes = 0;
    let mut root = f64::NAN;
    let mut prev = h0(p_mag, gamma, 0.0, params);
    for i in 1..=n {
        let q = i as f64 * step;
        let cur = h0(p_mag, gamma, q, params);
        if (prev < 0.0) != (cur < 0.0) {
            changes += 1;
            if changes == 1 {
                // linear interpolation inside the bracketing cell
                root = q - step * cur / (cur - prev);
            }
        }
        prev = cur;
    }
    if changes != 1 {
        return Err(QbeError::Root(format!(
            "geometry violation: {changes} sign changes of H0 at p = {p_mag}, gamma = {gamma}"
        )));
    }
    Ok(QScan {
        q: root,
        sign_changes: changes,
        step,
    })
}

/// Settings of a certification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySpec {
    /// grid on which `c12_apply` and `c22_apply` are checked
    pub grid: GridSpec,
    /// smoothing width relative to `E(|p1|)`
    #[serde(default = "default_eps_rel")]
    pub eps_rel: f64,
    /// Gaussian test states
    pub states: Vec<Bump>,
    /// momenta for the surface and root checks
    #[serde(default = "default_surface_momenta")]
    pub surface_momenta: Vec<f64>,
}

fn default_eps_rel() -> f64 {
    0.05
}

fn default_surface_momenta() -> Vec<f64> {
    vec![0.25, 1.0, 2.5]
}

impl CertifySpec {
    /// 32 lattice nodes on `[0, u_max]` and two Gaussian states.
    pub fn standard(u_max: f64) -> Self {
        CertifySpec {
            grid: GridSpec::lattice(32, u_max),
            eps_rel: default_eps_rel(),
            states: vec![
                Bump {
                    amplitude: 0.5,
                    center: 0.45 * u_max,
                    width: 0.12 * u_max,
                },
                Bump {
                    amplitude: 1.5,
                    center: 0.3 * u_max,
                    width: 0.2 * u_max,
                },
            ],
            surface_momenta: default_surface_momenta(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCertification {
    pub operator: String,
    pub state: Bump,
    pub nodes: Vec<f64>,
    pub main: Vec<f64>,
    pub reference: Vec<f64>,
    pub extrapolation_residual: Vec<f64>,
    /// `max |main - reference| / max |reference|`
    pub max_error: f64,
    /// `max residual / max |reference|`
    pub max_residual: f64,
    pub worst_node: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCertification {
    pub family: Family,
    pub p: f64,
    pub main: f64,
    pub reference: f64,
    pub extrapolation_residual: f64,
    pub rel_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QGammaCertification {
    pub p: f64,
    pub gamma: f64,
    pub bisection: f64,
    pub scan: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub rate_tolerance: f64,
    pub surface_tolerance: f64,
    pub rates: Vec<RateCertification>,
    pub surfaces: Vec<SurfaceCertification>,
    pub roots: Vec<QGammaCertification>,
    pub pass: bool,
}

fn certify_rates(
    name: &str,
    main: Vec<f64>,
    grid: &RadialGrid,
    state: Bump,
    reference: impl Fn(f64) -> Extrapolated + Sync,
) -> RateCertification {
    let refs: Vec<Extrapolated> = grid.nodes.par_iter().map(|&u| reference(u)).collect();
    let r: Vec<f64> = refs.iter().map(|x| x.value).collect();
    let scale = r.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let (worst_node, err) = main
        .iter()
        .zip(&r)
        .map(|(a, b)| (a - b).abs())
        .enumerate()
        .fold((0, 0.0), |acc, (i, e)| if e > acc.1 { (i, e) } else { acc });
    let max_error = if scale > 0.0 { err / scale } else { err };
    let res: Vec<f64> = refs.iter().map(|x| x.residual).collect();
    let max_res = res.iter().cloned().fold(0.0, f64::max);
    RateCertification {
        operator: name.to_string(),
        state,
        nodes: grid.nodes.clone(),
        main,
        reference: r,
        extrapolation_residual: res,
        max_error,
        max_residual: if scale > 0.0 { max_res / scale } else { max_res },
        worst_node,
        pass: max_error <= RATE_TOLERANCE,
    }
}

/// Energy range spanned by the family's level sets near `|p|`. For S0 this is
/// the depth `E(p) - 2 E(p/2)` of `H0` below zero, which vanishes like `p^3`
/// in the phonon regime; a wider Gaussian sees the whole sublevel set and the
/// extrapolation in `eps` stops converging.
pub fn smoothing_scale(p_mag: f64, family: Family, params: &PhysicalParams) -> f64 {
    let ep = params.e(p_mag);
    match family {
        Family::S0 => ep.min(ep - 2.0 * params.e(0.5 * p_mag)),
        Family::S1 | Family::S2 => ep,
    }
}

/// Bounded, smooth test integrand for the surface checks.
pub fn surface_test_function(u: f64, r: f64) -> f64 {
    (-(u * u + 0.5 * r * r) / 4.0).exp()
}

/// Node-wise rate checks on Gaussian states, surface-weight checks for all
/// three families, and root checks on `S0`.
pub fn certify(params: &PhysicalParams, spec: &CertifySpec) -> Result<CertificationReport> {
    let grid = Arc::new(RadialGrid::build(&spec.grid, params)?);
    let op = CollisionOperator::new(params, grid.clone());
    let u_max = grid.u_max;
    let mut rates = Vec::new();
    for &b in &spec.states {
        let prof = move |u: f64| {
            if u > u_max {
                0.0
            } else {
                b.amplitude * (-((u - b.center) / b.width).powi(2)).exp()
            }
        };
        let state = DistributionState::from_fn(grid.clone(), prof)?;
        let eps_of = |u: f64| spec.eps_rel * params.e(u);
        rates.push(certify_rates("c12", op.c12_apply(&state)?, &grid, b, |u| {
            c12_reference(&prof, u, eps_of(u), params, u_max)
        }));
        if params.kappa3 > 0.0 && params.p0 < u_max {
            rates.push(certify_rates("c22", op.c22_apply(&state)?, &grid, b, |u| {
                c22_reference(&prof, u, eps_of(u), params, u_max)
            }));
        }
    }
    let mut surfaces = Vec::new();
    let mut roots = Vec::new();
    for &pm in &spec.surface_momenta {
        let cap = 4.0 * pm.max(1.0);
        for fam in [Family::S0, Family::S1, Family::S2] {
            let main = surface_reduced(pm, fam, &surface_test_function, params, cap)?;
            let r = surface_area_reference(
                pm,
                fam,
                &surface_test_function,
                spec.eps_rel * smoothing_scale(pm, fam, params),
                params,
                cap,
            );
            let rel = (main - r.value).abs() / r.value.abs().max(f64::MIN_POSITIVE);
            surfaces.push(SurfaceCertification {
                family: fam,
                p: pm,
                main,
                reference: r.value,
                extrapolation_residual: r.residual,
                rel_error: rel,
                pass: rel <= SURFACE_TOLERANCE,
            });
        }
        for gamma in [0.1, 0.5, 0.9] {
            let bis = solve_q_gamma_s0(pm, gamma, params, None)?;
            let scan = q_gamma_reference(pm, gamma, params)?;
            roots.push(QGammaCertification {
                p: pm,
                gamma,
                bisection: bis,
                scan: scan.q,
                pass: (bis - scan.q).abs() <= scan.step,
            });
        }
    }
    let pass = rates.iter().all(|r| r.pass)
        && surfaces.iter().all(|s| s.pass)
        && roots.iter().all(|r| r.pass);
    Ok(CertificationReport {
        rate_tolerance: RATE_TOLERANCE,
        surface_tolerance: SURFACE_TOLERANCE,
        rates,
        surfaces,
        roots,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::ParamInputs;

    fn params() -> PhysicalParams {
        PhysicalParams::new(&ParamInputs::default()).unwrap()
    }

    #[test]
    fn zero_profile_gives_zero() {
        let p = params();
        let z = |_: f64| 0.0;
        // the loss term carries f1, so both vanish identically
        assert_eq!(c12_reference_eps(&z, 1.0, 0.1, &p, 3.0, Resolution::default()), 0.0);
        assert_eq!(c22_reference_eps(&z, 1.5, 0.1, &p, 3.0, Resolution::default()), 0.0);
    }

    #[test]
    fn surface_above_cap_is_zero() {
        let p = params();
        let f = |u: f64, _: f64| if u > 5.0 { 1.0 } else { 0.0 };
        let v = surface_reference_eps(1.0, Family::S1, &f, 0.05, &p, 4.0, Resolution::default());
        assert_eq!(v, 0.0);
    }

    #[test]
    fn surface_weights_match_reduced_integrals() {
        let p = params();
        for pm in [0.25_f64, 0.5, 2.0] {
            for fam in [Family::S0, Family::S1, Family::S2] {
                let cap = 4.0 * pm.max(1.0);
                let main = surface_reduced(pm, fam, &surface_test_function, &p, cap).unwrap();
                let r = surface_area_reference(pm, fam, &surface_test_function, 0.05 * smoothing_scale(pm, fam, &p), &p, cap);
                let rel = (main - r.value).abs() / r.value.abs();
                assert!(rel < SURFACE_TOLERANCE, "{fam:?} p = {pm}: {main} vs {r:?}");
            }
        }
    }

    #[test]
    fn scan_matches_bisection() {
        let p = params();
        for gamma in [0.05, 0.5, 0.95] {
            let s = q_gamma_reference(1.3, gamma, &p).unwrap();
            assert_eq!(s.sign_changes, 1);
            let b = solve_q_gamma_s0(1.3, gamma, &p, None).unwrap();
            assert!((s.q - b).abs() <= s.step);
        }
    }

    #[test]
    fn extrapolation_is_exact_for_quartic_error() {
        let x = extrapolate(0.1, |e| 2.0 + 3.0 * e * e - 7.0 * e.powi(4));
        assert!((x.value - 2.0).abs() < 1e-14);
    }
}
