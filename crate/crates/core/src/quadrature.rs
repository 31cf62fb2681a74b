//! Tensor-product Gauss-Legendre quadrature over rectangles with panel
//! refinement. Cluster integrands are smooth, so a modest fixed order per
//! panel plus bisection-style refinement converges quickly.

use crate::error::{Error, Result};
use crate::geom::{Rect, Vec2};

/// Nodes and weights on [-1, 1] computed by Newton iteration on the
/// Legendre polynomial; standard construction, accurate to ~1e-15.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 2);
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_and_deriv(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integral of `f` over [a, b].
    pub fn integrate_1d(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Integral of `f` over a rectangle (tensor product rule).
    pub fn integrate_rect(&self, rect: &Rect, f: &mut impl FnMut(Vec2) -> f64) -> f64 {
        let hx = 0.5 * (rect.max.x - rect.min.x);
        let hy = 0.5 * (rect.max.y - rect.min.y);
        let mx = 0.5 * (rect.max.x + rect.min.x);
        let my = 0.5 * (rect.max.y + rect.min.y);
        let mut sum = 0.0;
        for (&xi, &wx) in self.nodes.iter().zip(self.weights.iter()) {
            let x = mx + hx * xi;
            let mut row = 0.0;
            for (&yi, &wy) in self.nodes.iter().zip(self.weights.iter()) {
                row += wy * f(Vec2::new(x, my + hy * yi));
            }
            sum += wx * row;
        }
        sum * hx * hy
    }
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Adaptively integrates `f` over a rectangle by doubling the panel grid
/// until successive estimates agree to `rel_tol` (relative) or the
/// refinement cap is hit.
pub fn integrate_rect_adaptive(
    rect: &Rect,
    rel_tol: f64,
    f: &mut impl FnMut(Vec2) -> f64,
) -> Result<f64> {
    const MAX_LEVEL: u32 = 7;
    let rule = GaussLegendre::new(16);
    let mut prev = panels(&rule, rect, 1, f);
    let mut achieved = f64::INFINITY;
    for level in 1..=MAX_LEVEL {
        let cur = panels(&rule, rect, 1 << level, f);
        let scale = cur.abs().max(prev.abs()).max(1e-300);
        achieved = (cur - prev).abs() / scale;
        if achieved <= rel_tol {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::QuadratureDiverged { achieved })
}

fn panels(rule: &GaussLegendre, rect: &Rect, per_axis: usize, f: &mut impl FnMut(Vec2) -> f64) -> f64 {
    let dx = (rect.max.x - rect.min.x) / per_axis as f64;
    let dy = (rect.max.y - rect.min.y) / per_axis as f64;
    let mut total = 0.0;
    for i in 0..per_axis {
        for j in 0..per_axis {
            let min = Vec2::new(rect.min.x + i as f64 * dx, rect.min.y + j as f64 * dy);
            let panel = Rect::new(min, Vec2::new(min.x + dx, min.y + dy));
            total += rule.integrate_rect(&panel, f);
        }
    }
    total
}

/// Adaptive 1D integration used for the turning-spread integral.
pub fn integrate_1d_adaptive(
    a: f64,
    b: f64,
    rel_tol: f64,
    f: impl Fn(f64) -> f64,
) -> Result<f64> {
    const MAX_LEVEL: u32 = 16;
    let rule = GaussLegendre::new(16);
    let segment = |k: usize, n: usize| {
        let w = (b - a) / n as f64;
        (a + k as f64 * w, a + (k + 1) as f64 * w)
    };
    let mut prev: f64 = (0..1)
        .map(|k| {
            let (lo, hi) = segment(k, 1);
            rule.integrate_1d(lo, hi, &f)
        })
        .sum();
    let mut achieved = f64::INFINITY;
    for level in 1..=MAX_LEVEL {
        let n = 1usize << level;
        let cur: f64 = (0..n)
            .map(|k| {
                let (lo, hi) = segment(k, n);
                rule.integrate_1d(lo, hi, &f)
            })
            .sum();
        let scale = cur.abs().max(prev.abs()).max(1e-300);
        achieved = (cur - prev).abs() / scale;
        if achieved <= rel_tol {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::QuadratureDiverged { achieved })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_polynomials() {
        let rule = GaussLegendre::new(8);
        let v = rule.integrate_1d(0.0, 1.0, |x| x * x);
        assert!((v - 1.0 / 3.0).abs() < 1e-14);
        let v = rule.integrate_1d(-2.0, 3.0, |x| x.powi(7) - x);
        // antiderivative x^8/8 - x^2/2
        let exact = (3.0f64.powi(8) / 8.0 - 4.5) - ((-2.0f64).powi(8) / 8.0 - 2.0);
        assert!((v - exact).abs() < 1e-11);
    }

    #[test]
    fn rect_area_and_smooth_integrand() {
        let rule = GaussLegendre::new(12);
        let r = Rect::new(Vec2::new(0.0, 0.0), Vec2::new(2.0, 3.0));
        let area = rule.integrate_rect(&r, &mut |_| 1.0);
        assert!((area - 6.0).abs() < 1e-12);
        // integral of x*y over [0,2]x[0,3] = (2^2/2)(3^2/2) = 9
        let v = rule.integrate_rect(&r, &mut |p| p.x * p.y);
        assert!((v - 9.0).abs() < 1e-11);
    }

    #[test]
    fn adaptive_converges_on_peaked_function() {
        let r = Rect::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0));
        let v = integrate_rect_adaptive(&r, 1e-10, &mut |p| {
            (-50.0 * ((p.x - 0.3).powi(2) + (p.y - 0.7).powi(2))).exp()
        })
        .unwrap();
        // Reference via fine fixed grid.
        let rule = GaussLegendre::new(32);
        let reference = panels(&rule, &r, 16, &mut |p: Vec2| {
            (-50.0 * ((p.x - 0.3).powi(2) + (p.y - 0.7).powi(2))).exp()
        });
        assert!((v - reference).abs() / reference < 1e-9);
    }
}
