//! Collision operators C12 and C22, their gain/loss splits, Q = C12 + C22 and
//! the weak-form functional.
//!
//! Two discretizations share one interface.
//!
//! * `Lattice`: nodes at energies `i * delta`. Every resonance among nodes is
//!   an exact lattice relation (`i = j + k` for C12, `i + j = k + l` for
//!   C22), so the discrete collision measure is symmetric and the discrete
//!   operator conserves energy (and mass for C22), has Bose-Einstein states as
//!   exact fixed points and dissipates entropy, all to round-off. Events with
//!   any participant above the grid top are dropped, which is the symmetric
//!   truncation of the kernels to `|p_i| <= u_max`.
//! * `Quadrature`: Gauss-Legendre grid in momentum; C12 uses a Gauss rule per
//!   output node on the reduced surface integrals and C22 a tensor sum over
//!   `(|p2|, |p3|)` grid nodes with `|p4|` from energy resonance. Partner values
//!   come from the monotone interpolant in energy.
//!
//! Rates are per unit of `dp` on R^3; the angular factor of the output measure
//! lives in the grid's `measure`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{domain, QbeError, Result};
use crate::grid::{DistributionState, GridScheme, RadialGrid, StateInterp};
use crate::manifolds::{s0_weight_unchecked, s1_weight_unchecked, u_over_de};
use crate::physics::{k12_from_rapidities, PhysicalParams};
use crate::quadrature::UnitRule;

/// Gauss points per C12 sub-integral on the quadrature scheme.
pub const C12_GAUSS_POINTS: usize = 64;
/// Points per segment for the third momentum of the quadrature C22.
pub const C22_GAUSS_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    C12,
    C22,
    /// quadratic part of C22: `f3 f4 - f1 f2`
    C22Quadratic,
    /// cubic part of C22: `f3 f4 (f1 + f2) - f1 f2 (f3 + f4)`
    C22Cubic,
    Q,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionRates {
    pub c12: Vec<f64>,
    pub c22: Vec<f64>,
    pub q: Vec<f64>,
    pub q_minus: Vec<f64>,
    /// gain part of Q
    pub gain: Vec<f64>,
    pub c12_gain: Vec<f64>,
    pub c12_loss: Vec<f64>,
    pub c22_gain: Vec<f64>,
    pub c22_loss: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
struct C12Node {
    rate: f64,
    gain: f64,
    loss: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct C22Node {
    rate: f64,
    gain: f64,
    loss: f64,
    quad: f64,
    cubic: f64,
}

impl C22Node {
    #[inline]
    fn add(&mut self, w: f64, f1: f64, f2: f64, f3: f64, f4: f64) {
        let a = f3 * f4;
        let b = f1 * f2;
        self.quad += w * (a - b);
        self.cubic += w * (a * (f1 + f2) - b * (f3 + f4));
        self.rate += w * (a * (1.0 + f1 + f2) - b * (1.0 + f3 + f4));
        self.gain += w * (1.0 + f1) * (1.0 + f2) * a;
        self.loss += w * f2 * (1.0 + f3) * (1.0 + f4);
    }

    fn scaled(self, s: f64) -> Self {
        C22Node {
            rate: self.rate * s,
            gain: self.gain * s,
            loss: self.loss * s,
            quad: self.quad * s,
            cubic: self.cubic * s,
        }
    }
}

#[derive(Debug, Clone)]
struct Lattice {
    /// `E'_i / u_i^2`
    scale: Vec<f64>,
    uv: Vec<(f64, f64)>,
    u: Vec<f64>,
    /// cutoff fraction of each energy cell times `u_i / E'_i`
    alpha: Vec<f64>,
    chi: Vec<f64>,
    /// C12 triple weights, `tau[s (s - 1) / 2 + b]` for the event
    /// `s -> (b, s - b - 1)`.
    tau: Vec<f64>,
    c22_pref: f64,
}

#[derive(Debug, Clone, Copy)]
struct PartnerPt {
    w: f64,
    u: f64,
    eu: f64,
    r: f64,
    er: f64,
}

#[derive(Debug, Clone, Copy)]
struct C22Pt {
    j: u32,
    w: f64,
    e3: f64,
    u3: f64,
    e4: f64,
    u4: f64,
}

#[derive(Debug, Clone)]
struct Quad {
    s0: Vec<Vec<PartnerPt>>,
    s1: Vec<Vec<PartnerPt>>,
    c22: Vec<Vec<C22Pt>>,
}

#[derive(Debug, Clone)]
enum Kind {
    Lattice(Lattice),
    Quadrature(Quad),
}

/// Precomputed collision tables for one parameter set and grid.
#[derive(Debug, Clone)]
pub struct CollisionOperator {
    params: PhysicalParams,
    grid: Arc<RadialGrid>,
    kind: Kind,
}

#[inline]
fn tri(s: usize) -> usize {
    s * (s.saturating_sub(1)) / 2
}

impl CollisionOperator {
    pub fn new(params: &PhysicalParams, grid: Arc<RadialGrid>) -> Self {
        let kind = match grid.scheme {
            GridScheme::Lattice { delta } => Kind::Lattice(build_lattice(params, &grid, delta)),
            GridScheme::GaussLegendre { .. } => Kind::Quadrature(build_quad(params, &grid)),
        };
        CollisionOperator {
            params: params.clone(),
            grid,
            kind,
        }
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    fn check_state(&self, state: &DistributionState) -> Result<()> {
        if state.grid.len() != self.grid.len() || state.grid.u_max != self.grid.u_max {
            return domain("state lives on a different grid than the operator");
        }
        Ok(())
    }

    fn c12_nodes(&self, state: &DistributionState) -> Result<Vec<C12Node>> {
        self.check_state(state)?;
        let f = &state.values;
        let n = f.len();
        if self.params.lambda1 * self.params.n_c == 0.0 {
            return Ok(vec![C12Node::default(); n]);
        }
        let out: Vec<C12Node> = match &self.kind {
            Kind::Lattice(l) => (0..n)
                .into_par_iter()
                .map(|a| lattice_c12_node(l, f, a))
                .collect(),
            Kind::Quadrature(q) => {
                let interp = state.interpolant();
                (0..n)
                    .into_par_iter()
                    .map(|a| quad_c12_node(q, &interp, f[a], a))
                    .collect()
            }
        };
        check_finite(out.iter().map(|x| x.rate + x.gain + x.loss), "c12")?;
        Ok(out)
    }

    fn c22_nodes(&self, state: &DistributionState) -> Result<Vec<C22Node>> {
        self.check_state(state)?;
        let f = &state.values;
        let n = f.len();
        if self.params.kappa3 == 0.0 {
            return Ok(vec![C22Node::default(); n]);
        }
        let out: Vec<C22Node> = match &self.kind {
            Kind::Lattice(l) => (0..n)
                .into_par_iter()
                .map(|a| lattice_c22_node(l, f, a))
                .collect(),
            Kind::Quadrature(q) => {
                let interp = state.interpolant();
                (0..n)
                    .into_par_iter()
                    .map(|a| quad_c22_node(q, &interp, f, a))
                    .collect()
            }
        };
        check_finite(out.iter().map(|x| x.rate + x.gain + x.loss + x.cubic), "c22")?;
        Ok(out)
    }

    pub fn c12_apply(&self, state: &DistributionState) -> Result<Vec<f64>> {
        Ok(self.c12_nodes(state)?.iter().map(|x| x.rate).collect())
    }

    /// `(gain, C12^-)` with `C12 = gain - f C12^-`.
    pub fn c12_split(&self, state: &DistributionState) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok(self.c12_nodes(state)?.iter().map(|x| (x.gain, x.loss)).unzip())
    }

    pub fn c22_apply(&self, state: &DistributionState) -> Result<Vec<f64>> {
        Ok(self.c22_nodes(state)?.iter().map(|x| x.rate).collect())
    }

    /// `(gain, C22^-)` with gain `(1+f1)(1+f2) f3 f4` and loss frequency
    /// `f2 (1+f3)(1+f4)`.
    pub fn c22_split(&self, state: &DistributionState) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok(self.c22_nodes(state)?.iter().map(|x| (x.gain, x.loss)).unzip())
    }

    /// Quadratic and cubic parts of C22.
    pub fn c22_parts(&self, state: &DistributionState) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok(self.c22_nodes(state)?.iter().map(|x| (x.quad, x.cubic)).unzip())
    }

    pub fn q_apply(&self, state: &DistributionState) -> Result<CollisionRates> {
        let a = self.c12_nodes(state)?;
        let b = self.c22_nodes(state)?;
        let n = a.len();
        let mut r = CollisionRates {
            c12: Vec::with_capacity(n),
            c22: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            q_minus: Vec::with_capacity(n),
            gain: Vec::with_capacity(n),
            c12_gain: Vec::with_capacity(n),
            c12_loss: Vec::with_capacity(n),
            c22_gain: Vec::with_capacity(n),
            c22_loss: Vec::with_capacity(n),
        };
        for (x, y) in a.iter().zip(&b) {
            r.c12_gain.push(x.gain);
            r.c12_loss.push(x.loss);
            r.c22_gain.push(y.gain);
            r.c22_loss.push(y.loss);
            r.c12.push(x.rate);
            r.c22.push(y.rate);
            r.q.push(x.rate + y.rate);
            r.q_minus.push(x.loss + y.loss);
            r.gain.push(x.gain + y.gain);
        }
        Ok(r)
    }

    pub fn rates(&self, state: &DistributionState, which: Which) -> Result<Vec<f64>> {
        match which {
            Which::C12 => self.c12_apply(state),
            Which::C22 => self.c22_apply(state),
            Which::C22Quadratic => Ok(self.c22_parts(state)?.0),
            Which::C22Cubic => Ok(self.c22_parts(state)?.1),
            Which::Q => Ok(self.q_apply(state)?.q),
        }
    }

    /// `int C[f] phi dp`.
    pub fn weak_form(&self, state: &DistributionState, phi: &[f64], which: Which) -> Result<f64> {
        if phi.len() != state.values.len() {
            return domain("test function has the wrong length");
        }
        if let Some(i) = phi.iter().position(|v| !v.is_finite()) {
            return domain(format!("test function is not finite at node {i}"));
        }
        let c = self.rates(state, which)?;
        Ok(self.grid.integrate(&c.iter().zip(phi).map(|(a, b)| a * b).collect::<Vec<_>>()))
    }
}

fn check_finite(vals: impl Iterator<Item = f64>, part: &'static str) -> Result<()> {
    for (node, v) in vals.enumerate() {
        if !v.is_finite() {
            return Err(QbeError::NonFinite { node, part });
        }
    }
    Ok(())
}

/// Fraction of the energy cell `[e - d/2, e + d/2]` above `e_cut`.
fn cell_fraction(e: f64, d: f64, e_cut: f64) -> f64 {
    ((e + 0.5 * d - e_cut) / d).clamp(0.0, 1.0)
}

fn build_lattice(p: &PhysicalParams, g: &RadialGrid, delta: f64) -> Lattice {
    let n = g.len();
    let u = g.nodes.clone();
    let ue: Vec<f64> = u.iter().map(|&x| u_over_de(x, p)).collect();
    let scale: Vec<f64> = u.iter().map(|&x| p.de(x) / (x * x)).collect();
    let uv: Vec<(f64, f64)> = u.iter().map(|&x| p.uv(x)).collect();
    let rap: Vec<f64> = u.iter().map(|&x| p.rapidity(x)).collect();
    let e_cut = if p.p0 > 0.0 { p.e(p.p0) } else { 0.0 };
    let chi: Vec<f64> = g
        .energies
        .iter()
        .map(|&e| if e_cut > 0.0 { cell_fraction(e, delta, e_cut) } else { 1.0 })
        .collect();
    let alpha = chi.iter().zip(&ue).map(|(c, x)| c * x).collect();
    let pref = 2.0 * PI * delta * p.lambda1 * p.n_c;
    let mut tau = vec![0.0; tri(n)];
    for s in 1..n {
        for b in 0..s {
            let c = s - b - 1;
            tau[tri(s) + b] =
                pref * ue[s] * ue[b] * ue[c] * k12_from_rapidities(rap[s], rap[b], rap[c]);
        }
    }
    Lattice {
        scale,
        uv,
        u,
        alpha,
        chi,
        tau,
        c22_pref: p.kappa3 * delta * delta,
    }
}

#[inline]
fn lattice_c12_node(l: &Lattice, f: &[f64], a: usize) -> C12Node {
    let n = f.len();
    let fa = f[a];
    let mut out = C12Node::default();
    // a -> (b, c)
    let base = tri(a);
    for b in 0..a {
        let c = a - b - 1;
        let t = l.tau[base + b];
        let (fb, fc) = (f[b], f[c]);
        out.rate += t * (fb * fc - fa * (fb + fc + 1.0));
        out.gain += t * fb * fc;
        out.loss += t * (fb + fc + 1.0);
    }
    // (a, k) -> s
    for k in 0..n.saturating_sub(a + 1) {
        let s = a + k + 1;
        if s >= n {
            break;
        }
        let t = 2.0 * l.tau[tri(s) + a];
        let (fs, fk) = (f[s], f[k]);
        out.rate += t * (fs * (fa + fk + 1.0) - fa * fk);
        out.gain += t * fs * (fa + fk + 1.0);
        out.loss += t * fk;
    }
    let s = l.scale[a];
    C12Node {
        rate: out.rate * s,
        gain: out.gain * s,
        loss: out.loss * s,
    }
}

#[inline]
fn lattice_c22_node(l: &Lattice, f: &[f64], a: usize) -> C22Node {
    let n = f.len();
    let mut out = C22Node::default();
    if l.chi[a] == 0.0 {
        return out;
    }
    let (ua, va) = l.uv[a];
    for j in 0..n {
        if l.chi[j] == 0.0 {
            continue;
        }
        let (uj, vj) = l.uv[j];
        let s12 = ua * uj;
        let t12 = va * vj;
        let m12 = ua * vj + va * uj;
        let aj = l.alpha[a] * l.alpha[j];
        let lo_aj = a.min(j);
        let kmin = (a + j + 1).saturating_sub(n);
        let kmax = a + j;
        for k in kmin..=kmax.min(n - 1) {
            let li = a + j - k;
            if l.chi[k] == 0.0 || l.chi[li] == 0.0 {
                continue;
            }
            let (uk, vk) = l.uv[k];
            let (ul, vl) = l.uv[li];
            let amp = s12 * uk * ul + t12 * vk * vl + m12 * (uk * vl + vk * ul);
            let umin = l.u[lo_aj.min(k).min(li)];
            let w = aj * l.alpha[k] * l.alpha[li] * amp * amp * umin;
            out.add(w, f[a], f[j], f[k], f[li]);
        }
    }
    out.scaled(l.c22_pref * l.scale[a])
}

fn build_quad(p: &PhysicalParams, g: &RadialGrid) -> Quad {
    let rule = UnitRule::gauss(C12_GAUSS_POINTS);
    let n = g.len();
    let lam = p.lambda1 * p.n_c;
    let e_top = p.e(g.u_max);
    let mut s0 = Vec::with_capacity(n);
    let mut s1 = Vec::with_capacity(n);
    for a in 0..n {
        let pm = g.nodes[a];
        let ep = g.energies[a];
        let ta = p.rapidity(pm);
        let mut v0 = Vec::with_capacity(rule.x.len());
        for (x, w) in rule.x.iter().zip(&rule.w) {
            let u = pm * x;
            let eu = p.e(u);
            let er = ep - eu;
            let r = p.e_inv(er);
            let k = k12_from_rapidities(ta, p.rapidity(u), p.rapidity(r));
            v0.push(PartnerPt {
                w: lam * w * pm * s0_weight_unchecked(pm, u, p) * k,
                u,
                eu,
                r,
                er,
            });
        }
        s0.push(v0);
        let mut v1 = Vec::with_capacity(rule.x.len());
        if e_top > ep {
            let cap = p.e_inv(e_top - ep);
            for (x, w) in rule.x.iter().zip(&rule.w) {
                let u = cap * x;
                let eu = p.e(u);
                let es = ep + eu;
                let s = p.e_inv(es);
                let k = k12_from_rapidities(p.rapidity(s), ta, p.rapidity(u));
                v1.push(PartnerPt {
                    w: 2.0 * lam * w * cap * s1_weight_unchecked(pm, u, p) * k,
                    u,
                    eu,
                    r: s,
                    er: es,
                });
            }
        }
        s1.push(v1);
    }
    // p3 is integrated on the exact resonant interval, split where the
    // smallest momentum changes, so the p0 cutoffs never fall inside a panel.
    let sub = UnitRule::gauss(C22_GAUSS_POINTS);
    let e_floor = p.e(p.p0);
    let mut c22 = Vec::with_capacity(n);
    for a in 0..n {
        let mut pts = Vec::new();
        let ua = g.nodes[a];
        let ea = g.energies[a];
        if ua >= p.p0 && p.kappa3 > 0.0 {
            for j in 0..n {
                let uj = g.nodes[j];
                if uj < p.p0 {
                    continue;
                }
                let tot = ea + g.energies[j];
                let lo = p.e_inv((tot - e_top).max(e_floor));
                let hi = p.e_inv((tot - e_floor).min(e_top));
                if !(hi > lo) {
                    continue;
                }
                let mut cuts = vec![lo, hi, ua, uj, p.e_inv(0.5 * tot)];
                cuts.retain(|&c| c >= lo && c <= hi);
                cuts.sort_by(f64::total_cmp);
                cuts.dedup();
                for seg in cuts.windows(2) {
                    let len = seg[1] - seg[0];
                    if len <= 0.0 {
                        continue;
                    }
                    for (x, wx) in sub.x.iter().zip(&sub.w) {
                        let uk = seg[0] + len * x;
                        let ek = p.e(uk);
                        let e4 = tot - ek;
                        if e4 <= 0.0 {
                            continue;
                        }
                        let u4 = p.e_inv(e4);
                        let kern = p.k22(ua, uj, uk, u4);
                        let umin = ua.min(uj).min(uk).min(u4);
                        let w = p.kappa3 * g.weights[j] * len * wx * kern * umin * uj * uk
                            * u_over_de(u4, p)
                            / ua;
                        pts.push(C22Pt {
                            j: j as u32,
                            w,
                            e3: ek,
                            u3: uk,
                            e4,
                            u4,
                        });
                    }
                }
            }
        }
        c22.push(pts);
    }
    Quad { s0, s1, c22 }
}

#[inline]
fn quad_c12_node(q: &Quad, it: &StateInterp, fa: f64, a: usize) -> C12Node {
    let mut out = C12Node::default();
    for pt in &q.s0[a] {
        let fu = it.at_energy(pt.eu, pt.u);
        let fr = it.at_energy(pt.er, pt.r);
        out.rate += pt.w * (fu * fr - fa * (fu + fr + 1.0));
        out.gain += pt.w * fu * fr;
        out.loss += pt.w * (fu + fr + 1.0);
    }
    for pt in &q.s1[a] {
        let fu = it.at_energy(pt.eu, pt.u);
        let fs = it.at_energy(pt.er, pt.r);
        out.rate += pt.w * (fs * (fa + fu + 1.0) - fa * fu);
        out.gain += pt.w * fs * (fa + fu + 1.0);
        out.loss += pt.w * fu;
    }
    out
}

#[inline]
fn quad_c22_node(q: &Quad, it: &StateInterp, f: &[f64], a: usize) -> C22Node {
    let mut out = C22Node::default();
    for pt in &q.c22[a] {
        let f3 = it.at_energy(pt.e3, pt.u3);
        let f4 = it.at_energy(pt.e4, pt.u4);
        out.add(pt.w, f[a], f[pt.j as usize], f3, f4);
    }
    out
}

/// Removes the energy production of a rate vector by subtracting a multiple
/// of `E f`, which keeps the correction proportional to the state.
pub fn conservation_fix(grid: &RadialGrid, f: &[f64], q: &mut [f64]) {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..q.len() {
        let m = grid.measure[i] * grid.energies[i];
        num += m * q[i];
        den += m * grid.energies[i] * f[i];
    }
    if den > 0.0 {
        let a = num / den;
        for i in 0..q.len() {
            q[i] -= a * grid.energies[i] * f[i];
        }
    }
}

pub fn c12_apply(state: &DistributionState, params: &PhysicalParams) -> Result<Vec<f64>> {
    CollisionOperator::new(params, state.grid.clone()).c12_apply(state)
}

pub fn c22_apply(state: &DistributionState, params: &PhysicalParams) -> Result<Vec<f64>> {
    CollisionOperator::new(params, state.grid.clone()).c22_apply(state)
}

pub fn q_apply(state: &DistributionState, params: &PhysicalParams) -> Result<CollisionRates> {
    CollisionOperator::new(params, state.grid.clone()).q_apply(state)
}

#[cfg(test)]
mod tests;
