//! Resonance manifolds.
//!
//! For a momentum `p` the three energy surfaces are
//!
//! * `S0 = { w : E(p - w) + E(w) = E(p) }`
//! * `S1 = { w : E(p + w) = E(p) + E(w) }`
//! * `S2 = p + S1 = { v : E(v) = E(p) + E(v - p) }`
//!
//! Radial integrands only depend on `|w|` and the partner magnitude, so the
//! surface integrals reduce to one-dimensional integrals in `u = |w|`. Writing
//! the volume element in bipolar coordinates, `d^3w = 2 pi u r / |p| du dr`,
//! and resolving the energy delta in `r` gives
//!
//! ```text
//! int_{S0} F dsigma / |grad H0| = int_0^|p| F(u, r(u)) 2 pi u r / (|p| E'(r)) du
//! ```
//!
//! and the same form for S1 with the partner `s(u) = |p + w|`.

use std::f64::consts::PI;

use crate::error::{domain, QbeError, Result};
use crate::physics::PhysicalParams;

/// A point `W = gamma p + q e_perp` on a manifold, described by magnitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldPoint {
    pub gamma: f64,
    pub q: f64,
    /// `|W|`
    pub u: f64,
    /// `|p - W|` on S0, `|p + W|` on S1
    pub partner: f64,
}

/// `E(|p - w|) + E(|w|) - E(|p|)` for `w = gamma p + q e_perp`.
pub fn h0(p_mag: f64, gamma: f64, q: f64, params: &PhysicalParams) -> f64 {
    let u = (gamma * gamma * p_mag * p_mag + q * q).sqrt();
    let r = ((1.0 - gamma).powi(2) * p_mag * p_mag + q * q).sqrt();
    params.e(r) + params.e(u) - params.e(p_mag)
}

/// `E(|p + w|) - E(|p|) - E(|w|)` for `w = gamma p + q e_perp`.
pub fn h1(p_mag: f64, gamma: f64, q: f64, params: &PhysicalParams) -> f64 {
    let u = (gamma * gamma * p_mag * p_mag + q * q).sqrt();
    let s = ((1.0 + gamma).powi(2) * p_mag * p_mag + q * q).sqrt();
    params.e(s) - params.e(p_mag) - params.e(u)
}

pub const ROOT_MAX_ITER: usize = 200;

/// Transverse coordinate of the unique S0 point above `gamma p`, by bisection.
/// `tol` bounds the residual (`None` means `1e-12 E(p)`); the bracket is also
/// shrunk to `1e-13` relative width, since the residual flattens as `q -> 0`.
pub fn solve_q_gamma_s0(
    p_mag: f64,
    gamma: f64,
    params: &PhysicalParams,
    tol: Option<f64>,
) -> Result<f64> {
    if !(p_mag > 0.0 && p_mag.is_finite()) {
        return domain(format!("p_mag must be positive, got {p_mag}"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return domain(format!("gamma must lie in (0, 1), got {gamma}"));
    }
    let tol = tol.unwrap_or(1e-12 * params.e(p_mag));
    let (mut lo, mut hi) = (0.0, p_mag);
    let (f_lo, f_hi) = (h0(p_mag, gamma, lo, params), h0(p_mag, gamma, hi, params));
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(QbeError::Root(format!(
            "no bracket on (0, p): H(0) = {f_lo}, H(p) = {f_hi}"
        )));
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..ROOT_MAX_ITER {
        mid = 0.5 * (lo + hi);
        let f = h0(p_mag, gamma, mid, params);
        if f == 0.0 || (f.abs() <= tol && hi - lo <= 1e-13 * mid) {
            return Ok(mid);
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

pub fn s0_point(p_mag: f64, gamma: f64, params: &PhysicalParams) -> Result<ManifoldPoint> {
    let q = solve_q_gamma_s0(p_mag, gamma, params, None)?;
    Ok(ManifoldPoint {
        gamma,
        q,
        u: (gamma * gamma * p_mag * p_mag + q * q).sqrt(),
        partner: ((1.0 - gamma).powi(2) * p_mag * p_mag + q * q).sqrt(),
    })
}

/// `x / E'(x)`, finite at `x = 0` in both dispersion regimes.
#[inline]
pub fn u_over_de(x: f64, params: &PhysicalParams) -> f64 {
    let (k1, k2) = (params.kappa1, params.kappa2);
    if k1 == 0.0 {
        return 1.0 / (2.0 * k2.sqrt());
    }
    let x2 = x * x;
    x * (k1 + k2 * x2).sqrt() / (k1 + 2.0 * k2 * x2)
}

pub fn s0_partner(p_mag: f64, u: f64, params: &PhysicalParams) -> Result<f64> {
    if !(u > 0.0 && u < p_mag) {
        return domain(format!("u = {u} outside (0, {p_mag})"));
    }
    Ok(params.e_inv(params.e(p_mag) - params.e(u)))
}

/// Surface weight per unit `du` on S0, angle-integrated.
#[inline]
pub fn s0_weight_unchecked(p_mag: f64, u: f64, params: &PhysicalParams) -> f64 {
    let r = params.e_inv(params.e(p_mag) - params.e(u));
    2.0 * PI * u * u_over_de(r, params) / p_mag
}

pub fn s0_weight(p_mag: f64, u: f64, params: &PhysicalParams) -> Result<f64> {
    s0_partner(p_mag, u, params)?;
    Ok(s0_weight_unchecked(p_mag, u, params))
}

pub fn s1_partner(p_mag: f64, u: f64, params: &PhysicalParams) -> Result<f64> {
    if !(p_mag > 0.0 && u > 0.0) {
        return domain(format!("need p_mag > 0 and u > 0, got ({p_mag}, {u})"));
    }
    Ok(params.e_inv(params.e(p_mag) + params.e(u)))
}

#[inline]
pub fn s1_weight_unchecked(p_mag: f64, u: f64, params: &PhysicalParams) -> f64 {
    let s = params.e_inv(params.e(p_mag) + params.e(u));
    2.0 * PI * u * u_over_de(s, params) / p_mag
}

pub fn s1_weight(p_mag: f64, u: f64, params: &PhysicalParams) -> Result<f64> {
    s1_partner(p_mag, u, params)?;
    Ok(s1_weight_unchecked(p_mag, u, params))
}

/// Magnitude `|v - p|` for a point `v` of S2 with `|v| = v_mag`.
pub fn s2_partner(p_mag: f64, v_mag: f64, params: &PhysicalParams) -> Result<f64> {
    if !(p_mag > 0.0 && v_mag > p_mag) {
        return domain(format!("need v_mag > p_mag > 0, got ({p_mag}, {v_mag})"));
    }
    Ok(params.e_inv(params.e(v_mag) - params.e(p_mag)))
}

/// Surface weight per unit `d|v|` on S2, parametrized by `|v| > |p|`.
pub fn s2_weight(p_mag: f64, v_mag: f64, params: &PhysicalParams) -> Result<f64> {
    let u = s2_partner(p_mag, v_mag, params)?;
    Ok(2.0 * PI * v_mag * u_over_de(u, params) / p_mag)
}

/// Upper end of the longitudinal range on S1.
pub fn gamma_max_s1(p_mag: f64, params: &PhysicalParams) -> Result<f64> {
    if !(p_mag > 0.0) {
        return domain(format!("p_mag must be positive, got {p_mag}"));
    }
    let (k1, k2) = (params.kappa1, params.kappa2);
    let p2 = p_mag * p_mag;
    Ok(0.5 * k1 / (k2 * p2 + 2.0 * k2.sqrt() * (k1 * p2 + k2 * p2 * p2).sqrt()))
}

/// Closed form of `q_{1/2}^2`: the positive root of
/// `4 k2 x^2 + (4 k1 + 2 k2 p^2) x - (3/4) k2 p^4 = 0`.
pub fn q_half_squared(p_mag: f64, params: &PhysicalParams) -> f64 {
    let (k1, k2) = (params.kappa1, params.kappa2);
    let p2 = p_mag * p_mag;
    let a = 4.0 * k2;
    let b = 4.0 * k1 + 2.0 * k2 * p2;
    let c = -0.75 * k2 * p2 * p2;
    // stable positive root for c < 0
    2.0 * (-c) / (b + (b * b - 4.0 * a * c).sqrt())
}
