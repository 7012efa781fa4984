//! Physical constants, the Bogoliubov dispersion law and the transition kernels.
//!
//! Units are reduced (hbar = 1). The dispersion is
//! `E(u) = sqrt(k1 u^2 + k2 u^4)` with `k1 = g n_c / m` and `k2 = 1 / (4 m^2)`.
//!
//! Bogoliubov coefficients are carried as a rapidity `t` with `u_p = cosh t`
//! and `v_p = sinh t`, where `tanh 2t = g n_c / (p^2/2m + g n_c)`. In terms of
//! the dispersion constants this is `t = ln(1 + k1/(k2 p^2)) / 4`, which stays
//! finite to evaluate at every p > 0 and keeps `u^2 - v^2 = 1` exact.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{config_err, domain, Result};

fn default_kappa3() -> f64 {
    1.0
}

fn default_u_floor_rel() -> f64 {
    1e-10
}

/// User-facing parameter inputs. Derived constants are filled in by
/// [`PhysicalParams::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamInputs {
    pub m: f64,
    pub g: f64,
    pub n_c: f64,
    /// Defaults to `2 g^2 / (2 pi)^2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    /// Defaults to `2 g^2 / (2 pi)^5`. Recorded only; the C22 prefactor is `kappa3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
    #[serde(default = "default_kappa3")]
    pub kappa3: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa2: Option<f64>,
    /// Small-momentum clamp for K12, relative to the crossover scale.
    #[serde(default = "default_u_floor_rel")]
    pub u_floor_rel: f64,
}

impl Default for ParamInputs {
    fn default() -> Self {
        ParamInputs {
            m: 0.5,
            g: 1.0,
            n_c: 1.0,
            lambda1: None,
            lambda2: None,
            kappa3: 1.0,
            kappa1: None,
            kappa2: None,
            u_floor_rel: default_u_floor_rel(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub m: f64,
    pub g: f64,
    pub n_c: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub kappa3: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub p0: f64,
    /// Measured bound on K22 over the resonant slice.
    pub gamma_cap: f64,
    pub u_floor: f64,
}

/// Value of dE/du plus a flag for the `k1 = 0, u = 0` corner where the
/// derivative vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDerivative {
    pub value: f64,
    pub degenerate: bool,
}

fn check_field(name: &str, v: f64, allow_zero: bool) -> Result<()> {
    if !v.is_finite() {
        return Err(config_err(name, format!("must be finite, got {v}")));
    }
    if v < 0.0 || (!allow_zero && v == 0.0) {
        let rel = if allow_zero { ">= 0" } else { "> 0" };
        return Err(config_err(name, format!("must be {rel}, got {v}")));
    }
    Ok(())
}

impl PhysicalParams {
    pub fn new(inp: &ParamInputs) -> Result<Self> {
        check_field("m", inp.m, false)?;
        check_field("g", inp.g, true)?;
        check_field("n_c", inp.n_c, true)?;
        check_field("kappa3", inp.kappa3, true)?;
        check_field("u_floor_rel", inp.u_floor_rel, false)?;
        let two_pi = 2.0 * PI;
        let lambda1 = inp.lambda1.unwrap_or(2.0 * inp.g * inp.g / two_pi.powi(2));
        let lambda2 = inp.lambda2.unwrap_or(2.0 * inp.g * inp.g / two_pi.powi(5));
        check_field("lambda1", lambda1, true)?;
        check_field("lambda2", lambda2, true)?;
        let kappa1 = inp.kappa1.unwrap_or(inp.g * inp.n_c / inp.m);
        let kappa2 = inp.kappa2.unwrap_or(1.0 / (4.0 * inp.m * inp.m));
        check_field("kappa1", kappa1, true)?;
        check_field("kappa2", kappa2, true)?;
        if kappa2 == 0.0 {
            return Err(config_err(
                "kappa2",
                "kappa2 = 0 (pure phonon dispersion) is not supported",
            ));
        }
        let p0 = 2.0 * inp.m * inp.n_c * inp.g;
        let scale = if kappa1 > 0.0 {
            (kappa1 / kappa2).sqrt()
        } else {
            1.0
        };
        let mut p = PhysicalParams {
            m: inp.m,
            g: inp.g,
            n_c: inp.n_c,
            lambda1,
            lambda2,
            kappa3: inp.kappa3,
            kappa1,
            kappa2,
            p0,
            gamma_cap: 1.0,
            u_floor: inp.u_floor_rel * scale,
        };
        p.gamma_cap = measure_gamma(&p);
        Ok(p)
    }

    /// E(u). No domain checks; see [`energy`] for the checked form.
    #[inline]
    pub fn e(&self, u: f64) -> f64 {
        let u2 = u * u;
        (u2 * (self.kappa1 + self.kappa2 * u2)).sqrt()
    }

    /// dE/du, with the value 0 at the degenerate corner.
    #[inline]
    pub fn de(&self, u: f64) -> f64 {
        let u2 = u * u;
        let s = (self.kappa1 + self.kappa2 * u2).sqrt();
        if s == 0.0 {
            return 0.0;
        }
        (self.kappa1 + 2.0 * self.kappa2 * u2) / s
    }

    /// Inverse of E on [0, inf).
    #[inline]
    pub fn e_inv(&self, e: f64) -> f64 {
        if e <= 0.0 {
            return 0.0;
        }
        // u^2 = 2 e^2 / (k1 + sqrt(k1^2 + 4 k2 e^2)), free of cancellation
        let d = (self.kappa1 * self.kappa1 + 4.0 * self.kappa2 * e * e).sqrt();
        (2.0 * e * e / (self.kappa1 + d)).sqrt()
    }

    /// Bogoliubov rapidity at momentum `u`, clamped at `u_floor`.
    #[inline]
    pub fn rapidity(&self, u: f64) -> f64 {
        if self.kappa1 == 0.0 {
            return 0.0;
        }
        let u = u.max(self.u_floor);
        0.25 * (self.kappa1 / (self.kappa2 * u * u)).ln_1p()
    }

    /// `(u_p, v_p)` at momentum `u`, clamped at `u_floor`.
    #[inline]
    pub fn uv(&self, u: f64) -> (f64, f64) {
        let t = self.rapidity(u);
        (t.cosh(), t.sinh())
    }

    pub fn k12(&self, u1: f64, u2: f64, u3: f64) -> f64 {
        k12_from_rapidities(self.rapidity(u1), self.rapidity(u2), self.rapidity(u3))
    }

    pub fn k22(&self, u1: f64, u2: f64, u3: f64, u4: f64) -> f64 {
        if u1 < self.p0 || u2 < self.p0 || u3 < self.p0 || u4 < self.p0 {
            return 0.0;
        }
        a22(self.uv(u1), self.uv(u2), self.uv(u3), self.uv(u4)).powi(2)
    }
}

/// A12 from rapidities. The three-term form used here equals
/// `(u3-v3)(u1u2+v1v2) + (u2-v2)(u1u3+v1v3) - (u1-v1)(u2v3+v2u3)`
/// but avoids the cancellation between the last two terms when one momentum is
/// small. Arguments 2 and 3 are ordered first, so the result is exactly
/// symmetric in them.
#[inline]
pub fn a12_from_rapidities(t1: f64, t2: f64, t3: f64) -> f64 {
    let (t2, t3) = if t2 <= t3 { (t2, t3) } else { (t3, t2) };
    (-t3).exp() * (t1 + t2).cosh() + t3.exp() * (t1 - t2).sinh() + (-(t1 + t2 + t3)).exp()
}

#[inline]
pub fn k12_from_rapidities(t1: f64, t2: f64, t3: f64) -> f64 {
    a12_from_rapidities(t1, t2, t3).powi(2)
}

#[inline]
pub fn a22(p1: (f64, f64), p2: (f64, f64), p3: (f64, f64), p4: (f64, f64)) -> f64 {
    let (u1, v1) = p1;
    let (u2, v2) = p2;
    let (u3, v3) = p3;
    let (u4, v4) = p4;
    u1 * u2 * u3 * u4
        + u1 * v2 * u3 * v4
        + u1 * v2 * v3 * u4
        + v1 * u2 * u3 * v4
        + v1 * u2 * v3 * u4
        + v1 * v2 * v3 * v4
}

/// Dense scan of K22 over `[p0, 20 p0]^3`, with the fourth momentum fixed by
/// energy resonance.
fn measure_gamma(p: &PhysicalParams) -> f64 {
    if p.p0 <= 0.0 || p.kappa1 == 0.0 {
        // free limit: u = 1, v = 0 everywhere
        return 1.0;
    }
    let n = 40;
    let lo = p.p0;
    let hi = 20.0 * p.p0;
    let pts: Vec<f64> = (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect();
    let e_hi = p.e(hi);
    let mut best: f64 = 0.0;
    for &a in &pts {
        for &b in &pts {
            for &c in &pts {
                let e4 = p.e(a) + p.e(b) - p.e(c);
                if e4 <= 0.0 || e4 > e_hi {
                    continue;
                }
                let d = p.e_inv(e4).max(lo);
                best = best.max(p.k22(a, b, c, d));
            }
        }
    }
    best
}

fn check_u(u: f64) -> Result<()> {
    if !u.is_finite() || u < 0.0 {
        return domain(format!("momentum must be finite and >= 0, got {u}"));
    }
    Ok(())
}

pub fn energy(u: f64, p: &PhysicalParams) -> Result<f64> {
    check_u(u)?;
    Ok(p.e(u))
}

pub fn energy_derivative(u: f64, p: &PhysicalParams) -> Result<EnergyDerivative> {
    check_u(u)?;
    Ok(EnergyDerivative {
        value: p.de(u),
        degenerate: p.kappa1 == 0.0 && u == 0.0,
    })
}

pub fn inverse_energy(e: f64, p: &PhysicalParams) -> Result<f64> {
    if !e.is_finite() || e < 0.0 {
        return domain(format!("energy must be finite and >= 0, got {e}"));
    }
    if p.kappa1 == 0.0 && p.kappa2 == 0.0 {
        return domain("dispersion is identically zero");
    }
    Ok(p.e_inv(e))
}

pub fn bogoliubov_uv(u: f64, p: &PhysicalParams) -> Result<(f64, f64)> {
    check_u(u)?;
    if u == 0.0 {
        return domain("Bogoliubov coefficients are singular at u = 0");
    }
    Ok(p.uv(u))
}

pub fn k12(u1: f64, u2: f64, u3: f64, p: &PhysicalParams) -> Result<f64> {
    check_u(u1)?;
    check_u(u2)?;
    check_u(u3)?;
    Ok(p.k12(u1, u2, u3))
}

pub fn k22(u1: f64, u2: f64, u3: f64, u4: f64, p: &PhysicalParams) -> Result<f64> {
    for u in [u1, u2, u3, u4] {
        check_u(u)?;
    }
    Ok(p.k22(u1, u2, u3, u4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> PhysicalParams {
        PhysicalParams::new(&ParamInputs {
            kappa1: Some(1.0),
            kappa2: Some(1.0),
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn energy_examples() {
        let p = unit();
        assert_eq!(energy(0.0, &p).unwrap(), 0.0);
        assert_relative_eq!(energy(1.0, &p).unwrap(), 2f64.sqrt(), max_relative = 1e-15);
        assert!(energy(-1.0, &p).is_err());
        assert!(energy(f64::NAN, &p).is_err());
    }

    #[test]
    fn derivative_examples() {
        let p = unit();
        assert_relative_eq!(p.de(0.0), 1.0);
        assert_relative_eq!(p.de(1.0), 3.0 / 2f64.sqrt(), max_relative = 1e-15);
        let free = PhysicalParams::new(&ParamInputs {
            n_c: 0.0,
            ..Default::default()
        })
        .unwrap();
        let d = energy_derivative(0.0, &free).unwrap();
        assert_eq!(d.value, 0.0);
        assert!(d.degenerate);
    }

    #[test]
    fn derivative_matches_centered_difference() {
        let p = unit();
        for i in 1..200 {
            let u = i as f64 * 0.05;
            let h = 1e-4;
            let fd = (p.e(u + h) - p.e(u - h)) / (2.0 * h);
            assert!((p.de(u) - fd).abs() < 1e-6 * (1.0 + u * u), "u = {u}");
        }
    }

    #[test]
    fn inverse_examples() {
        let p = unit();
        assert_eq!(inverse_energy(0.0, &p).unwrap(), 0.0);
        assert_relative_eq!(inverse_energy(2f64.sqrt(), &p).unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn bogoliubov_examples() {
        let free = PhysicalParams::new(&ParamInputs {
            n_c: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(bogoliubov_uv(0.7, &free).unwrap(), (1.0, 0.0));
        assert!(bogoliubov_uv(0.0, &free).is_err());

        // m = 1, g n_c = 1
        let p = PhysicalParams::new(&ParamInputs {
            m: 1.0,
            g: 1.0,
            n_c: 1.0,
            ..Default::default()
        })
        .unwrap();
        assert_relative_eq!(p.kappa1, 1.0);
        assert_relative_eq!(p.kappa2, 0.25);
        let e = 1.25f64.sqrt();
        let (u, v) = bogoliubov_uv(1.0, &p).unwrap();
        assert_relative_eq!(u * u, (0.5 + 1.0 + e) / (2.0 * e), max_relative = 1e-14);
        assert_relative_eq!(u * u - v * v, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn kappa2_zero_rejected() {
        let r = PhysicalParams::new(&ParamInputs {
            kappa2: Some(0.0),
            ..Default::default()
        });
        assert!(r.is_err());
    }

    #[test]
    fn derived_constants() {
        let inp = ParamInputs {
            m: 0.7,
            g: 1.3,
            n_c: 0.4,
            ..Default::default()
        };
        let p = PhysicalParams::new(&inp).unwrap();
        assert_eq!(p.kappa1, 1.3 * 0.4 / 0.7);
        assert_eq!(p.kappa2, 1.0 / (4.0 * 0.7 * 0.7));
        assert_eq!(p.p0, 2.0 * 0.7 * 0.4 * 1.3);
        assert_relative_eq!(p.lambda1, 2.0 * 1.69 / (2.0 * PI).powi(2));
    }

    fn a12_direct(p: &PhysicalParams, a: f64, b: f64, c: f64) -> f64 {
        let (u1, v1) = bogoliubov_uv(a, p).unwrap();
        let (u2, v2) = bogoliubov_uv(b, p).unwrap();
        let (u3, v3) = bogoliubov_uv(c, p).unwrap();
        (u3 - v3) * (u1 * u2 + v1 * v2) + (u2 - v2) * (u1 * u3 + v1 * v3)
            - (u1 - v1) * (u2 * v3 + v2 * u3)
    }

    #[test]
    fn k12_matches_direct_formula_on_resonant_triples() {
        let p = unit();
        for i in 1..30 {
            let p1 = 0.1 * i as f64;
            for j in 1..10 {
                let u = p1 * j as f64 / 10.0;
                let r = p.e_inv(p.e(p1) - p.e(u));
                let direct = a12_direct(&p, p1, u, r).powi(2);
                assert_relative_eq!(p.k12(p1, u, r), direct, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn k12_free_limit_and_symmetry() {
        let free = PhysicalParams::new(&ParamInputs {
            n_c: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert_relative_eq!(free.k12(1.0, 0.3, 2.0), 4.0);
        let p = unit();
        for (a, b, c) in [(1.0, 0.2, 0.9), (3.0, 1.5, 0.01), (0.5, 0.4, 0.3)] {
            assert_eq!(p.k12(a, b, c), p.k12(a, c, b));
        }
        // zero arguments hit the clamp, not NaN
        assert!(p.k12(1.0, 0.0, 1.0).is_finite());
    }

    #[test]
    fn k22_cutoff_free_limit_and_symmetries() {
        let p = PhysicalParams::new(&ParamInputs::default()).unwrap();
        assert!(p.p0 > 0.0);
        assert_eq!(p.k22(0.5 * p.p0, 2.0, 2.0, 2.0), 0.0);
        let free = PhysicalParams::new(&ParamInputs {
            n_c: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(free.k22(0.1, 0.2, 0.3, 0.4), 1.0);
        let (a, b, c, d) = (1.1, 1.7, 2.3, 0.9);
        let k = p.k22(a, b, c, d);
        assert_relative_eq!(k, p.k22(b, a, c, d), max_relative = 1e-14);
        assert_relative_eq!(k, p.k22(a, b, d, c), max_relative = 1e-14);
        assert_relative_eq!(k, p.k22(c, d, a, b), max_relative = 1e-14);
    }

    #[test]
    fn gamma_cap_bounds_sampled_k22() {
        let p = PhysicalParams::new(&ParamInputs::default()).unwrap();
        assert_relative_eq!(p.gamma_cap, p.k22(p.p0, p.p0, p.p0, p.p0), max_relative = 1e-12);
        for i in 0..50 {
            for j in 0..50 {
                let a = p.p0 * (1.0 + 0.3 * i as f64);
                let b = p.p0 * (1.0 + 0.3 * j as f64);
                let e4 = p.e(a) + p.e(b) - p.e(p.p0 * 1.5);
                let d = p.e_inv(e4);
                assert!(p.k22(a, b, 1.5 * p.p0, d) <= p.gamma_cap * (1.0 + 1e-12));
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn energy_round_trip(u in 0.0f64..50.0, k1 in 0.0f64..4.0, k2 in 0.01f64..4.0) {
                let p = PhysicalParams::new(&ParamInputs { kappa1: Some(k1), kappa2: Some(k2), ..Default::default() }).unwrap();
                let back = p.e_inv(p.e(u));
                prop_assert!((back - u).abs() <= 1e-12 * u.max(1e-300));
            }

            #[test]
            fn energy_strictly_increasing(a in 0.0f64..20.0, d in 1e-6f64..5.0) {
                let p = unit();
                prop_assert!(p.e(a + d) > p.e(a));
            }

            #[test]
            fn uv_identity(u in 1e-6f64..100.0) {
                let p = unit();
                let (a, b) = bogoliubov_uv(u, &p).unwrap();
                prop_assert!(a >= 1.0 && b >= 0.0);
                prop_assert!(((a * a - b * b) - 1.0).abs() <= 1e-12 * a * a);
            }
        }
    }
}
