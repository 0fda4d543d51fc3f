//! Fourier helpers for real periodic functions on `[0, 2pi)`.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn forward_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

fn inverse_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Coefficients `c_k`, `k = -K..=K`, of a real trigonometric polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    /// From coefficients ordered `k = -K..=K`.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        assert!(coeffs.len() % 2 == 1, "coefficient vector must have odd length");
        Self { coeffs }
    }

    pub fn zero(max_k: usize) -> Self {
        Self {
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * max_k + 1],
        }
    }

    /// Interpolate samples at `y_m = 2 pi m / n`. The Nyquist mode is dropped.
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        forward_plan(n).process(&mut buf);
        let max_k = (n - 1) / 2;
        let scale = 1.0 / n as f64;
        let coeffs = (-(max_k as i64)..=max_k as i64)
            .map(|k| buf[k.rem_euclid(n as i64) as usize] * scale)
            .collect();
        Self { coeffs }
    }

    pub fn max_k(&self) -> usize {
        (self.coeffs.len() - 1) / 2
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        let m = self.max_k() as i64;
        if k.abs() > m {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + m) as usize]
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let m = self.max_k() as i64;
        self.coeffs.iter().enumerate().map(move |(i, &c)| (i as i64 - m, c))
    }

    pub fn derivative(&self, d: u32) -> Self {
        let coeffs = self
            .modes()
            .map(|(k, c)| c * Complex64::new(0.0, k as f64).powu(d))
            .collect();
        Self { coeffs }
    }

    /// Drop modes above `max_k`.
    pub fn truncated(&self, max_k: usize) -> Self {
        if max_k >= self.max_k() {
            return self.clone();
        }
        let m = max_k as i64;
        Self {
            coeffs: (-m..=m).map(|k| self.coeff(k)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Sum of two spectra, widened to the larger truncation.
    pub fn add(&self, other: &Spectrum) -> Self {
        let m = self.max_k().max(other.max_k()) as i64;
        Self {
            coeffs: (-m..=m).map(|k| self.coeff(k) + other.coeff(k)).collect(),
        }
    }

    pub fn eval(&self, y: Complex64) -> Complex64 {
        let e = (Complex64::i() * y).exp();
        let einv = 1.0 / e;
        let m = self.max_k();
        let mut acc = self.coeffs[m];
        let (mut pos, mut neg) = (e, einv);
        for k in 1..=m {
            acc += self.coeffs[m + k] * pos + self.coeffs[m - k] * neg;
            pos *= e;
            neg *= einv;
        }
        acc
    }

    pub fn eval_real(&self, y: f64) -> f64 {
        self.eval(Complex64::new(y, 0.0)).re
    }

    /// Values at `offset + 2 pi m / n` for `m = 0..n`; needs `n > 2 max_k`.
    pub fn sample(&self, n: usize, offset: f64) -> Vec<f64> {
        self.sample_complex(n, offset).into_iter().map(|c| c.re).collect()
    }

    pub fn sample_complex(&self, n: usize, offset: f64) -> Vec<Complex64> {
        assert!(n > 2 * self.max_k(), "grid of {n} points cannot carry {} modes", self.max_k());
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (k, c) in self.modes() {
            let shift = if offset == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, k as f64 * offset)
            };
            buf[k.rem_euclid(n as i64) as usize] += c * shift;
        }
        inverse_plan(n).process(&mut buf);
        buf
    }

    /// Conjugate symmetry defect `max |c_{-k} - conj(c_k)|`.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.max_k() as i64;
        (0..=m)
            .map(|k| (self.coeff(-k) - self.coeff(k).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm_bound(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }
}

/// Grid spacing of an `n`-point periodic grid.
pub fn periodic_step(n: usize) -> f64 {
    2.0 * PI / n as f64
}
