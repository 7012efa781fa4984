//! Gauss-Legendre rules and monotone cubic interpolation.

use gauss_quad::legendre::GaussLegendre;
use std::num::NonZeroUsize;

/// Gauss-Legendre nodes and weights mapped to [0, 1], nodes ascending.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let n = NonZeroUsize::new(n).expect("rule needs at least one node");
    let mut pairs: Vec<(f64, f64)> = GaussLegendre::new(n)
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// A fixed rule on [0, 1] that can be mapped onto any interval.
#[derive(Debug, Clone)]
pub struct UnitRule {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

impl UnitRule {
    pub fn gauss(n: usize) -> Self {
        let (x, w) = gauss_legendre_unit(n);
        UnitRule { x, w }
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let len = b - a;
        let mut acc = 0.0;
        for (x, w) in self.x.iter().zip(&self.w) {
            acc += w * f(a + len * x);
        }
        acc * len
    }

    /// Composite rule over the given panel edges.
    pub fn integrate_panels(&self, edges: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
        edges
            .windows(2)
            .map(|e| self.integrate(e[0], e[1], &mut f))
            .sum()
    }
}

/// Geometric panel edges on [0, top]: the first panel is `[0, top * r^(k-1) ...]`
/// with each panel `ratio` times wider than the previous one.
pub fn geometric_edges(top: f64, panels: usize, ratio: f64) -> Vec<f64> {
    let mut widths: Vec<f64> = (0..panels).map(|k| ratio.powi(k as i32)).collect();
    let total: f64 = widths.iter().sum();
    for w in &mut widths {
        *w *= top / total;
    }
    let mut edges = Vec::with_capacity(panels + 1);
    let mut acc = 0.0;
    edges.push(0.0);
    for w in widths {
        acc += w;
        edges.push(acc);
    }
    edges[panels] = top;
    edges
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch-Carlson slopes).
/// Evaluation outside the data range holds the end value.
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len());
        assert!(!x.is_empty());
        let n = x.len();
        let mut d = vec![0.0; n];
        if n >= 2 {
            let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
            let m: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
            if n == 2 {
                d[0] = m[0];
                d[1] = m[0];
            } else {
                for k in 1..n - 1 {
                    if m[k - 1] * m[k] <= 0.0 {
                        d[k] = 0.0;
                    } else {
                        let w1 = 2.0 * h[k] + h[k - 1];
                        let w2 = h[k] + 2.0 * h[k - 1];
                        d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
                    }
                }
                d[0] = end_slope(h[0], h[1], m[0], m[1]);
                d[n - 1] = end_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
            }
        }
        Pchip { x, y, d }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let k = self.x.partition_point(|&v| v <= t) - 1;
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let r = UnitRule::gauss(8);
        let v = r.integrate(1.0, 3.0, |x| x.powi(15));
        let exact = (3f64.powi(16) - 1.0) / 16.0;
        assert!((v - exact).abs() < 1e-12 * exact);
        assert!(r.x.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn geometric_edges_cover_interval() {
        let e = geometric_edges(5.0, 8, 1.6);
        assert_eq!(e.len(), 9);
        assert_eq!(e[0], 0.0);
        assert_eq!(e[8], 5.0);
        for k in 1..7 {
            let r = (e[k + 1] - e[k]) / (e[k] - e[k - 1]);
            assert!((r - 1.6).abs() < 1e-12);
        }
    }

    #[test]
    fn pchip_reproduces_data_and_is_monotone() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.7).collect();
        let y: Vec<f64> = x.iter().map(|v| (-v).exp()).collect();
        let p = Pchip::new(x.clone(), y.clone());
        for (a, b) in x.iter().zip(&y) {
            assert!((p.eval(*a) - b).abs() < 1e-15);
        }
        let mut prev = f64::INFINITY;
        for i in 0..1000 {
            let v = p.eval(i as f64 * 0.0063);
            assert!(v <= prev + 1e-15);
            assert!(v > 0.0);
            prev = v;
        }
    }

    #[test]
    fn pchip_does_not_overshoot_steps() {
        let x: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let y = vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0];
        let p = Pchip::new(x, y);
        for i in 0..700 {
            let v = p.eval(i as f64 * 0.01);
            assert!((-1e-15..=1.0 + 1e-15).contains(&v));
        }
    }

    #[test]
    fn pchip_accuracy_on_smooth_data() {
        let x: Vec<f64> = (0..41).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| (-(v - 2.0).powi(2)).exp()).collect();
        let p = Pchip::new(x, y);
        let err = (0..400)
            .map(|i| {
                let t = i as f64 * 0.01;
                (p.eval(t) - (-(t - 2.0f64).powi(2)).exp()).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 2e-3, "{err}");
    }
}
