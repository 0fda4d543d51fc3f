//! Quadrature rules: the periodic trapezoid rule with pole subtraction for
//! nearly singular kernel rows, and the graded mesh for time integrals.
//!
//! A kernel row has the form `u -> N(u) / (cosh a2(u) - cos u)` with
//! `a2(u)` a small real perturbation of a line through the origin. Its only
//! nearby singularities are the two complex-conjugate zeros of the
//! denominator, `a2(p) = -+ i p`. When these come within a few grid steps of
//! the real axis, the trapezoid sum is corrected by the exact error
//! `R * C(p)` of the rule on the simple pole `R / (u - p)`, with
//! `C(p) = 2 pi i q / (1 - q)`, `q = exp(2 pi i p / h)`.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Which kernel component multiplies the row numerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    /// `-sinh(a2) / (4 pi D)`
    First,
    /// `sin(u) / (4 pi D)`
    Second,
}

/// Local quartic model of a kernel row around `u = 0`.
///
/// `a2(u) = tau + a[0] u + a[1] u^2 + a[2] u^3 + a[3] u^4` and the
/// numerator factor `n(u) = n[0] + n[1] u + n[2] u^2 + n[3] u^3`.
#[derive(Debug, Clone, Copy)]
pub struct RowModel {
    pub tau: f64,
    pub a: [f64; 4],
    pub n: [f64; 4],
}

impl RowModel {
    /// Model of `a2(u) = tau + f(c) - f(c - u)` and `n(u) = n0 + s * f'(c - u)`
    /// from the derivatives `d = [f', f'', f''', f'''']` of a row at `c`.
    pub fn from_shift(tau: f64, d: [f64; 4], n0: f64, s: f64) -> Self {
        Self {
            tau,
            a: [d[0], -d[1] / 2.0, d[2] / 6.0, -d[3] / 24.0],
            n: [n0 + s * d[0], -s * d[1], s * d[2] / 2.0, -s * d[3] / 6.0],
        }
    }

    fn a2(&self, u: Complex64) -> (Complex64, Complex64) {
        let [a1, a2, a3, a4] = self.a;
        let v = self.tau + u * (a1 + u * (a2 + u * (a3 + u * a4)));
        let dv = a1 + u * (2.0 * a2 + u * (3.0 * a3 + u * 4.0 * a4));
        (v, dv)
    }

    fn numer(&self, u: Complex64) -> Complex64 {
        let [n0, n1, n2, n3] = self.n;
        n0 + u * (n1 + u * (n2 + u * n3))
    }

    /// The zero of `cosh a2(u) - cos u` on the branch `a2(u) = sigma i u`.
    fn pole(&self, sigma: f64) -> Option<Complex64> {
        let si = Complex64::new(0.0, sigma);
        let mut p = self.tau / (si - self.a[0]);
        for _ in 0..30 {
            let (v, dv) = self.a2(p);
            let step = (v - si * p) / (dv - si);
            p -= step;
            if step.norm() <= 1e-15 * p.norm().max(1e-300) {
                return Some(p);
            }
        }
        let (v, _) = self.a2(p);
        ((v - si * p).norm() < 1e-12 * self.tau.abs().max(1e-300)).then_some(p)
    }

    fn residue(&self, p: Complex64, sigma: f64, comp: Component) -> Complex64 {
        let si = Complex64::new(0.0, sigma);
        let (_, dv) = self.a2(p);
        let base = self.numer(p) / (4.0 * PI * (1.0 + si * dv));
        match comp {
            Component::Second => base,
            Component::First => -si * base,
        }
    }

    /// Amount to subtract from the trapezoid sum `h * sum phi(u_m)` over
    /// nodes `u_m = m h`; zero when the poles are far from the real axis.
    pub fn pole_correction(&self, h: f64, comp: Component) -> f64 {
        if self.tau == 0.0 {
            return 0.0;
        }
        let sigma = -self.tau.signum();
        let guess = self.tau / (Complex64::new(0.0, sigma) - self.a[0]);
        if guess.im.abs() > 7.0 * h {
            return 0.0;
        }
        let Some(p) = self.pole(sigma) else {
            static WARNED: std::sync::Once = std::sync::Once::new();
            WARNED.call_once(|| log::warn!("pole refinement failed (first at tau = {:e}); the correction is skipped", self.tau));
            log::debug!("pole refinement failed for tau = {:e}", self.tau);
            return 0.0;
        };
        if p.im <= 0.0 {
            return 0.0;
        }
        let q = (Complex64::new(0.0, 2.0 * PI / h) * p).exp();
        let c = Complex64::new(0.0, 2.0 * PI) * q / (1.0 - q);
        2.0 * (self.residue(p, sigma, comp) * c).re
    }

    /// Jump of the row integral across `tau = 0`, value at `tau -> 0-`
    /// minus value at `tau -> 0+`.
    pub fn jump(&self, comp: Component) -> f64 {
        let g = self.a[0];
        let n0 = self.n[0];
        match comp {
            Component::First => n0 / (1.0 + g * g),
            Component::Second => n0 * g / (1.0 + g * g),
        }
    }

    /// Value to assign to the node `u = 0` when `tau = 0`. The symmetric rule
    /// with this node value converges to the principal value at second order
    /// (the finite part of the expansion `A/u + B + O(u)`).
    pub fn finite_part(&self, comp: Component) -> f64 {
        let g = self.a[0];
        let c = self.a[1];
        let (m0, m1) = (self.n[0], self.n[1]);
        let w = 1.0 + g * g;
        match comp {
            Component::First => -(c * m0 * (1.0 - g * g) / w + g * m1) / (2.0 * PI * w),
            Component::Second => (m1 - 2.0 * g * c * m0 / w) / (2.0 * PI * w),
        }
    }
}

/// Trapezoid weights for `n` uniform nodes on `[a, b]`.
pub fn trapezoid_weights(n: usize, a: f64, b: f64) -> Vec<f64> {
    let h = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
        .collect()
}

/// Graded mesh `s_j = t (j/m)^p` on `[0, t]` with weights of Simpson's rule
/// in the graded variable, so `sum w_j F(s_j)` approximates `int_0^t F ds`.
pub fn graded_mesh(t: f64, m: usize, p: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 2 && m.is_multiple_of(2), "graded mesh needs an even number of panels");
    let du = 1.0 / m as f64;
    let mut nodes = Vec::with_capacity(m + 1);
    let mut weights = Vec::with_capacity(m + 1);
    for j in 0..=m {
        let u = j as f64 * du;
        let simpson = if j == 0 || j == m {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        nodes.push(t * u.powf(p));
        weights.push(simpson * du / 3.0 * p * t * u.powf(p - 1.0));
    }
    (nodes, weights)
}

/// `t^{-(1+alpha)} * sum_j w_j F_j` for scalar samples on a graded mesh.
pub fn time_weighted_average(samples: &[f64], weights: &[f64], t: f64, alpha: f64) -> f64 {
    let s: f64 = samples.iter().zip(weights).map(|(f, w)| f * w).sum();
    s / t.powf(1.0 + alpha)
}

/// Lagrange weights of a 4-point stencil (or fewer near the ends) on a
/// uniform grid `x_i = x0 + i h`, `i = 0..n`.
pub fn lagrange_stencil(x: f64, x0: f64, h: f64, n: usize) -> (usize, Vec<f64>) {
    let width = n.min(4);
    let s = (x - x0) / h;
    let base = (s.floor() as i64 - 1).clamp(0, (n - width) as i64) as usize;
    let weights = (0..width)
        .map(|i| {
            (0..width)
                .filter(|&k| k != i)
                .map(|k| (s - (base + k) as f64) / (i as f64 - k as f64))
                .product()
        })
        .collect();
    (base, weights)
}

/// Fourth-order first derivative along a uniform grid, one-sided near the ends.
pub fn fd_derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 5, "need at least five nodes");
    let v = values;
    (0..n)
        .map(|i| {
            let d = if i >= 2 && i + 2 < n {
                v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]
            } else if i < 2 {
                let o = i;
                // forward five-point stencil anchored at node 0
                let c: [[f64; 5]; 2] = [
                    [-25.0, 48.0, -36.0, 16.0, -3.0],
                    [-3.0, -10.0, 18.0, -6.0, 1.0],
                ];
                (0..5).map(|k| c[o][k] * v[k]).sum()
            } else {
                let o = n - 1 - i;
                let c: [[f64; 5]; 2] = [
                    [25.0, -48.0, 36.0, -16.0, 3.0],
                    [3.0, 10.0, -18.0, 6.0, -1.0],
                ];
                (0..5).map(|k| c[o][k] * v[n - 1 - k]).sum()
            };
            d / (12.0 * h)
        })
        .collect()
}
