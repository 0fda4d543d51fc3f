//! Initial interface, its normal velocity and the vortex-sheet velocity.

use crate::error::{Error, Result};
use crate::kernel::eval_kernel;
use crate::quadrature::{Component, RowModel};
use crate::spectral::{periodic_step, Spectrum};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt::Write as _;

const STRIP_CAP: f64 = 1.0;

/// The initial interface `x2 = gamma0(x1)` as a truncated Fourier series.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticGraph {
    spectrum: Spectrum,
    pub rho0: f64,
}

/// Largest strip radius (capped at 1) with `8 sum |k c_k| sinh(|k| r) < 1`.
pub fn estimate_strip_radius(coeffs: &Spectrum) -> f64 {
    let bound = |r: f64| -> f64 {
        8.0 * coeffs
            .modes()
            .map(|(k, c)| (k as f64).abs() * c.norm() * ((k as f64).abs() * r).sinh())
            .sum::<f64>()
    };
    if bound(STRIP_CAP) < 1.0 {
        return STRIP_CAP;
    }
    let (mut lo, mut hi) = (0.0, STRIP_CAP);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if bound(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

impl AnalyticGraph {
    /// From coefficients `c_k`, `k = -N..=N`. Rejects data that is not real.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len().is_multiple_of(2) {
            return Err(Error::Invalid("coefficient list must cover k = -N..=N".into()));
        }
        let spectrum = Spectrum::from_coeffs(coeffs);
        let scale = spectrum.sup_norm_bound().max(1.0);
        if spectrum.symmetry_defect() > 1e-14 * scale {
            return Err(Error::Invalid(
                "coefficients violate conjugate symmetry c_{-k} = conj(c_k)".into(),
            ));
        }
        let rho0 = estimate_strip_radius(&spectrum);
        Ok(Self { spectrum, rho0 })
    }

    pub fn flat() -> Self {
        Self::from_coeffs(vec![Complex64::new(0.0, 0.0)]).unwrap()
    }

    /// `amplitude * cos(wavenumber * y1)`.
    pub fn cosine(amplitude: f64, wavenumber: usize) -> Self {
        let n = wavenumber;
        let mut c = vec![Complex64::new(0.0, 0.0); 2 * n + 1];
        c[0] += 0.5 * amplitude;
        c[2 * n] += 0.5 * amplitude;
        Self::from_coeffs(c).unwrap()
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn is_flat(&self) -> bool {
        self.spectrum.modes().all(|(k, c)| k == 0 || c.norm() == 0.0)
    }

    /// `sum (ik)^d c_k e^{ik y1}` for `|Im y1| <= rho0`.
    pub fn eval(&self, y1: Complex64, d: u32) -> Result<Complex64> {
        if y1.im.abs() > self.rho0 {
            return Err(Error::StripViolation {
                im: y1.im.abs(),
                rho0: self.rho0,
            });
        }
        Ok(self.spectrum.derivative(d).eval(y1))
    }

    pub fn eval_real(&self, y1: f64, d: u32) -> f64 {
        self.spectrum.derivative(d).eval_real(y1)
    }

    pub fn max_abs(&self) -> f64 {
        self.spectrum.sup_norm_bound()
    }

    /// One `k re im` line per coefficient.
    pub fn to_text(&self) -> String {
        coeffs_to_text(&self.spectrum)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_coeffs(coeffs_from_text(text)?)
    }
}

pub(crate) fn coeffs_to_text(s: &Spectrum) -> String {
    let mut out = String::new();
    for (k, c) in s.modes() {
        writeln!(out, "{k} {:.16e} {:.16e}", c.re, c.im).unwrap();
    }
    out
}

pub(crate) fn coeffs_from_text(text: &str) -> Result<Vec<Complex64>> {
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Error::Parse(format!("line {}: expected `k re im`", lineno + 1));
        let mut it = line.split_whitespace();
        let k: i64 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let re: f64 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let im: f64 = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        entries.push((k, Complex64::new(re, im)));
    }
    let n = entries.iter().map(|(k, _)| k.abs()).max().unwrap_or(0);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); (2 * n + 1) as usize];
    for (k, c) in entries {
        coeffs[(k + n) as usize] = c;
    }
    Ok(coeffs)
}

/// Normal velocity `s0` of the initial interface.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalVelocity {
    spectrum: Spectrum,
}

impl NormalVelocity {
    pub fn zero() -> Self {
        Self {
            spectrum: Spectrum::zero(0),
        }
    }

    pub fn from_spectrum(spectrum: Spectrum) -> Self {
        Self { spectrum }
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn eval(&self, y1: f64) -> f64 {
        self.spectrum.eval_real(y1)
    }

    pub fn to_text(&self) -> String {
        coeffs_to_text(&self.spectrum)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Ok(Self {
            spectrum: Spectrum::from_coeffs(coeffs_from_text(text)?),
        })
    }
}

/// `s0` sampled at `y_i = 2 pi i / n`.
pub fn s0_samples(gamma: &AnalyticGraph, n: usize) -> Vec<f64> {
    if gamma.is_flat() {
        return vec![0.0; n];
    }
    let g0 = gamma.spectrum.sample(n, 0.0);
    let g1 = gamma.spectrum.derivative(1).sample(n, 0.0);
    let g2 = gamma.spectrum.derivative(2).sample(n, 0.0);
    let h = periodic_step(n);
    let sines: Vec<f64> = (0..n).map(|m| (m as f64 * h).sin()).collect();
    let cosines: Vec<f64> = (0..n).map(|m| (m as f64 * h).cos()).collect();
    (0..n)
        .map(|i| {
            // removable limit of K2(dX0) d(gamma') at z1 = 0
            let mut sum = g2[i] / (2.0 * PI * (1.0 + g1[i] * g1[i]));
            for m in 1..n {
                let j = (i + n - m) % n;
                let a2 = g0[i] - g0[j];
                let d = a2.cosh() - cosines[m];
                sum += sines[m] * (g1[i] - g1[j]) / (4.0 * PI * d);
            }
            -2.0 * h * sum
        })
        .collect()
}

/// Normal velocity on the `n_quad`-point grid, projected to `n_quad/4` modes.
pub fn compute_s0(gamma: &AnalyticGraph, n_quad: usize) -> Result<NormalVelocity> {
    if n_quad < 16 {
        return Err(Error::Invalid(format!("n_quad = {n_quad} must be at least 16")));
    }
    let coarse = s0_samples(gamma, n_quad);
    let fine = s0_samples(gamma, 2 * n_quad);
    let gap = coarse
        .iter()
        .zip(fine.iter().step_by(2))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if gap > 1e-8 {
        log::warn!("s0 quadrature with {n_quad} nodes is unresolved (self-convergence gap {gap:e})");
    }
    let full = Spectrum::from_samples(&coarse);
    let keep = n_quad / 4;
    let coeffs = (-(keep as i64)..=keep as i64).map(|k| full.coeff(k)).collect();
    Ok(NormalVelocity {
        spectrum: Spectrum::from_coeffs(coeffs),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SheetMode {
    OffInterface,
    LimitAbove,
    LimitBelow,
}

/// Velocity induced by the vortex sheet `2 gamma0'` on the initial interface,
/// with an `n`-node rule in `z1`.
pub fn initial_velocity(gamma: &AnalyticGraph, x: [f64; 2], mode: SheetMode, n: usize) -> Result<[f64; 2]> {
    if gamma.is_flat() {
        return Ok([0.0, 0.0]);
    }
    let [x1, x2] = x;
    let h = periodic_step(n);
    let d: Vec<f64> = (0..=4).map(|k| gamma.eval_real(x1, k)).collect();
    let tau = match mode {
        SheetMode::OffInterface => x2 - d[0],
        _ => {
            if (x2 - d[0]).abs() > 1e-9 {
                return Err(Error::Invalid("limit modes need a point on the interface".into()));
            }
            0.0
        }
    };
    if mode == SheetMode::OffInterface {
        if tau == 0.0 {
            return Err(Error::Invalid("off-interface mode evaluated on the interface".into()));
        }
        if tau.abs() < 1e-3 * h {
            log::warn!("point is {tau:e} from the interface; quadrature accuracy degrades");
        }
    }
    let model = RowModel::from_shift(tau, [d[1], d[2], d[3], d[4]], 0.0, 2.0);
    // samples at x1 + j h; node u_m = m h sits at index (n - m) % n
    let heights = gamma.spectrum.sample(n, x1);
    let slopes = gamma.spectrum.derivative(1).sample(n, x1);
    let mut v = [0.0, 0.0];
    for m in 0..n {
        let u = m as f64 * h;
        let j = (n - m) % n;
        let strength = 2.0 * slopes[j];
        if m == 0 && tau == 0.0 {
            v[0] += model.finite_part(Component::First);
            v[1] += model.finite_part(Component::Second);
            continue;
        }
        let k = eval_kernel(u, x2 - heights[j])?;
        v[0] += k[0] * strength;
        v[1] += k[1] * strength;
    }
    v[0] *= h;
    v[1] *= h;
    match mode {
        SheetMode::OffInterface => {
            v[0] -= model.pole_correction(h, Component::First);
            v[1] -= model.pole_correction(h, Component::Second);
        }
        SheetMode::LimitAbove | SheetMode::LimitBelow => {
            let sign = if mode == SheetMode::LimitAbove { -0.5 } else { 0.5 };
            v[0] += sign * model.jump(Component::First);
            v[1] += sign * model.jump(Component::Second);
        }
    }
    Ok(v)
}
