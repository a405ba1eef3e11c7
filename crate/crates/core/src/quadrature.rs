//! Composite Gauss-Legendre panels in `u = ln r`.
//!
//! Each panel carries Lagrange differentiation and cumulative-integration
//! matrices on its nodes, so sampled radial functions can be differentiated
//! and integrated to high order without leaving the grid.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[n - 1 - i] = z;
        w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn barycentric_weights(x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|j| 1.0 / (0..x.len()).filter(|&k| k != j).map(|k| x[j] - x[k]).product::<f64>())
        .collect()
}

fn lagrange_at(x: &[f64], bw: &[f64], t: f64) -> Vec<f64> {
    if let Some(k) = x.iter().position(|&xk| xk == t) {
        let mut out = vec![0.0; x.len()];
        out[k] = 1.0;
        return out;
    }
    let terms: Vec<f64> = x.iter().zip(bw).map(|(&xk, &b)| b / (t - xk)).collect();
    let total: f64 = terms.iter().sum();
    terms.iter().map(|v| v / total).collect()
}

/// Geometry of a panel grid; two sampled functions are compatible iff equal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    pub u_min: f64,
    pub u_max: f64,
    pub panels: usize,
    pub order: usize,
}

/// Lower end of the logarithmic grid used by the operator layer.
pub const U_MIN: f64 = -30.0;
/// Default panel width in `u`.
pub const PANEL_WIDTH: f64 = 0.125;
/// Default nodes per panel.
pub const PANEL_ORDER: usize = 16;

/// Composite quadrature grid in `u = ln r`.
#[derive(Debug, Clone)]
pub struct PanelGrid<T> {
    spec: PanelSpec,
    u: Vec<T>,
    r: Vec<T>,
    // Weights for the integral over u.
    w: Vec<T>,
    half_width: T,
    diff: Vec<T>,
    cum: Vec<T>,
}

impl<T: Real> PanelGrid<T> {
    pub fn new(spec: PanelSpec) -> Self {
        let n = spec.order;
        let (x, wx) = gauss_legendre(n);
        let bw = barycentric_weights(&x);
        let hw = (spec.u_max - spec.u_min) / spec.panels as f64 / 2.0;

        let mut diff = vec![0.0; n * n];
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let d = bw[j] / bw[i] / (x[i] - x[j]);
                    diff[i * n + j] = d;
                    diag -= d;
                }
            }
            diff[i * n + i] = diag;
        }

        let mut cum = vec![0.0; n * n];
        for i in 0..n {
            let half = (x[i] + 1.0) / 2.0;
            for k in 0..n {
                let t = -1.0 + half * (x[k] + 1.0);
                let l = lagrange_at(&x, &bw, t);
                for j in 0..n {
                    cum[i * n + j] += half * wx[k] * l[j];
                }
            }
        }

        let mut u = Vec::with_capacity(n * spec.panels);
        let mut w = Vec::with_capacity(n * spec.panels);
        for p in 0..spec.panels {
            let mid = spec.u_min + (2 * p + 1) as f64 * hw;
            for k in 0..n {
                u.push(T::lit(mid + hw * x[k]));
                w.push(T::lit(hw * wx[k]));
            }
        }
        let r = u.iter().map(|v| v.exp()).collect();
        Self {
            spec,
            u,
            r,
            w,
            half_width: T::lit(hw),
            diff: diff.into_iter().map(T::lit).collect(),
            cum: cum.into_iter().map(T::lit).collect(),
        }
    }

    /// Default grid on `[e^{-30}, r_max]`.
    pub fn for_radius(r_max: f64) -> Self {
        Self::spanning(U_MIN, r_max.ln())
    }

    /// Grid on `[u_min, u_max]` with the default panel width and order.
    pub fn spanning(u_min: f64, u_max: f64) -> Self {
        let panels = ((u_max - u_min) / PANEL_WIDTH).ceil().max(1.0) as usize;
        Self::new(PanelSpec { u_min, u_max, panels, order: PANEL_ORDER })
    }

    /// Same span with panel widths halved.
    pub fn refined(&self) -> Self {
        Self::new(PanelSpec { panels: 2 * self.spec.panels, ..self.spec })
    }

    pub fn spec(&self) -> PanelSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn radii(&self) -> &[T] {
        &self.r
    }

    pub fn log_radii(&self) -> &[T] {
        &self.u
    }

    /// Quadrature weights for integrals in `u`.
    pub fn log_weights(&self) -> &[T] {
        &self.w
    }

    /// `int v du`.
    pub fn integrate_du(&self, v: &[T]) -> T {
        self.w.iter().zip(v).map(|(&w, &x)| w * x).sum()
    }

    /// `int v dr`.
    pub fn integrate_dr(&self, v: &[T]) -> T {
        self.w.iter().zip(v).zip(&self.r).map(|((&w, &x), &r)| w * x * r).sum()
    }

    /// `dv/du` by per-panel Lagrange differentiation.
    pub fn derivative_du(&self, v: &[T]) -> Vec<T> {
        let n = self.spec.order;
        let mut out = vec![T::zero(); v.len()];
        for p in 0..self.spec.panels {
            let base = p * n;
            for i in 0..n {
                let mut acc = T::zero();
                for j in 0..n {
                    acc += self.diff[i * n + j] * v[base + j];
                }
                out[base + i] = acc / self.half_width;
            }
        }
        out
    }

    /// `dv/dr`.
    pub fn derivative_dr(&self, v: &[T]) -> Vec<T> {
        self.derivative_du(v).iter().zip(&self.r).map(|(&d, &r)| d / r).collect()
    }

    /// `int_{u_min}^{u_i} v du` at every node.
    pub fn cumulative_du(&self, v: &[T]) -> Vec<T> {
        let n = self.spec.order;
        let mut out = vec![T::zero(); v.len()];
        let mut offset = T::zero();
        for p in 0..self.spec.panels {
            let base = p * n;
            for i in 0..n {
                let mut acc = T::zero();
                for j in 0..n {
                    acc += self.cum[i * n + j] * v[base + j];
                }
                out[base + i] = offset + acc * self.half_width;
            }
            offset += (0..n).map(|k| self.w[base + k] * v[base + k]).sum::<T>();
        }
        out
    }

    /// `int_{r_min}^{r_i} v dr` at every node.
    pub fn cumulative_dr(&self, v: &[T]) -> Vec<T> {
        let vr: Vec<T> = v.iter().zip(&self.r).map(|(&x, &r)| x * r).collect();
        self.cumulative_du(&vr)
    }
}

/// Cumulative integrals `int_{x_0}^{x_i} v` on uniform nodes of spacing `h`.
///
/// Even and odd indices each follow a Simpson chain; the first interval uses
/// the three-point rule, so the result is exact for quadratics.
pub fn simpson_prefix<T: Real>(h: T, v: &[T]) -> Vec<T> {
    let n = v.len();
    let mut out = vec![T::zero(); n];
    if n < 3 {
        if n == 2 {
            out[1] = h * T::lit(0.5) * (v[0] + v[1]);
        }
        return out;
    }
    out[1] = h / T::lit(12.0) * (T::lit(5.0) * v[0] + T::lit(8.0) * v[1] - v[2]);
    let third = h / T::lit(3.0);
    for i in 2..n {
        out[i] = out[i - 2] + third * (v[i - 2] + T::lit(4.0) * v[i - 1] + v[i]);
    }
    out
}

#[cfg(test)]
mod tests {
    #[test]
    fn simpson_prefix_is_exact_for_quadratics() {
        let h = 0.1f64;
        let v: Vec<f64> = (0..11).map(|i| { let x = i as f64 * h; 1.0 + x - 2.0 * x * x }).collect();
        let m = super::simpson_prefix(h, &v);
        for (i, mi) in m.iter().enumerate().skip(1) {
            let x = i as f64 * h;
            let exact = x + x * x / 2.0 - 2.0 * x * x * x / 3.0;
            assert!((mi - exact).abs() < 1e-14, "{i}");
        }
    }

    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn derivative_and_cumulative_are_spectral() {
        let g: PanelGrid<f64> = PanelGrid::spanning(-5.0, 2.0);
        let v: Vec<f64> = g.radii().iter().map(|r| (-r * r).exp() * r.powi(3)).collect();
        let dv = g.derivative_dr(&v);
        for (i, &r) in g.radii().iter().enumerate() {
            let exact = (3.0 * r * r - 2.0 * r.powi(4)) * (-r * r).exp();
            assert!((dv[i] - exact).abs() < 1e-11);
        }
        let c = g.cumulative_dr(&v);
        let r_min = (-5f64).exp();
        let prim = |r: f64| -0.5 * (r * r + 1.0) * (-r * r).exp();
        for (i, &r) in g.radii().iter().enumerate() {
            assert!((c[i] - (prim(r) - prim(r_min))).abs() < 1e-13);
        }
    }
}
