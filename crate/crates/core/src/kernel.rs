//! Periodic Biot-Savart kernel on the strip `T x R` and its Green's function.
//!
//! `G(z) = log(cosh z2 - cos z1) / 4pi` and
//! `K(z) = (-sinh z2, sin z1) / (4pi (cosh z2 - cos z1))`.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

const INV_4PI: f64 = 0.25 / PI;

/// Canonical representative of an angle in `[-pi, pi)`.
pub fn canonical_angle(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2pi
    if r >= PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// A point `(a1, a2)` with `a1` on the torus and `a2` possibly complex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripPoint {
    a1: f64,
    pub a2: Complex64,
}

impl StripPoint {
    pub fn new(a1: f64, a2: Complex64) -> Self {
        Self {
            a1: canonical_angle(a1),
            a2,
        }
    }

    pub fn real(a1: f64, a2: f64) -> Self {
        Self::new(a1, Complex64::new(a2, 0.0))
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }
}

/// `|a|_* = sqrt(a1^2 + |a2|^2)`.
pub fn star_norm(a: &StripPoint) -> f64 {
    (a.a1 * a.a1 + a.a2.norm_sqr()).sqrt()
}

fn denominator(z1: f64, z2: f64) -> Result<f64> {
    let z1 = canonical_angle(z1);
    if z1 == 0.0 && z2 == 0.0 {
        return Err(Error::SingularPoint);
    }
    // cosh z2 - cos z1 = 2 sinh^2(z2/2) + 2 sin^2(z1/2), free of cancellation
    let s2 = (0.5 * z2).sinh();
    let s1 = (0.5 * z1).sin();
    Ok(2.0 * (s2 * s2 + s1 * s1))
}

pub fn eval_green(z1: f64, z2: f64) -> Result<f64> {
    Ok(INV_4PI * denominator(z1, z2)?.ln())
}

pub fn eval_kernel(z1: f64, z2: f64) -> Result<[f64; 2]> {
    let d = denominator(z1, z2)?;
    Ok([-INV_4PI * z2.sinh() / d, INV_4PI * z1.sin() / d])
}

/// `j`-th derivative in `a2` of the second kernel component, `j <= 2`.
pub fn eval_k2_complex(a: &StripPoint, j: u8) -> Result<Complex64> {
    let (a1, a2) = (a.a1, a.a2);
    let s1 = (0.5 * a2).sinh();
    let s0 = (0.5 * a1).sin();
    let d = 2.0 * (s1 * s1 + s0 * s0);
    if d.norm() == 0.0 {
        return Err(Error::KernelDomain);
    }
    let sin1 = a1.sin();
    match j {
        0 => Ok(INV_4PI * sin1 / d),
        1 => Ok(-INV_4PI * sin1 * a2.sinh() / (d * d)),
        2 => {
            let sh = a2.sinh();
            Ok(-INV_4PI * sin1 * (a2.cosh() / (d * d) - 2.0 * sh * sh / (d * d * d)))
        }
        _ => Err(Error::Invalid(format!("derivative order {j} not supported"))),
    }
}

/// Cone `U^kappa`: `|Im a2| < kappa (|a1| + |Re a2|)` and `|Im a2| < pi/2`.
pub fn cone_membership(a: &StripPoint, kappa: f64) -> bool {
    let im = a.a2.im.abs();
    im < kappa * (a.a1.abs() + a.a2.re.abs()) && im < 0.5 * PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn star_norm_examples() {
        assert_relative_eq!(star_norm(&StripPoint::new(0.6, Complex64::new(0.0, 0.8))), 1.0);
        assert_eq!(star_norm(&StripPoint::real(0.0, 0.0)), 0.0);
        assert_relative_eq!(star_norm(&StripPoint::real(1.5 * PI, 0.0)), 0.5 * PI, epsilon = 1e-15);
    }

    #[test]
    fn canonical_range() {
        assert_eq!(canonical_angle(PI), -PI);
        assert_relative_eq!(canonical_angle(1.5 * PI), -0.5 * PI, epsilon = 1e-15);
        assert_relative_eq!(canonical_angle(-2.5 * PI), -0.5 * PI, epsilon = 1e-15);
    }

    #[test]
    fn green_examples() {
        assert_relative_eq!(eval_green(PI, 0.0).unwrap(), 2f64.ln() / (4.0 * PI), epsilon = 1e-15);
        assert!(eval_green(0.5 * PI, 0.0).unwrap().abs() < 1e-16);
        let approx = ((0.02f64) / 2.0).ln() / (4.0 * PI);
        let g = eval_green(0.1, 0.1).unwrap();
        assert!(((g - approx) / approx).abs() < 0.01);
        assert!(matches!(eval_green(0.0, 0.0), Err(Error::SingularPoint)));
        assert!(matches!(eval_green(2.0 * PI, 0.0), Err(Error::SingularPoint)));
    }

    #[test]
    fn kernel_examples() {
        let k = eval_kernel(0.5 * PI, 0.0).unwrap();
        assert!(k[0].abs() < 1e-17);
        assert_relative_eq!(k[1], 1.0 / (4.0 * PI), epsilon = 1e-15);
        assert_eq!(eval_kernel(0.0, 0.7).unwrap()[1], 0.0);
        let a = eval_kernel(-0.7, -0.3).unwrap()[1];
        let b = eval_kernel(0.7, 0.3).unwrap()[1];
        let c = eval_kernel(0.7, -0.3).unwrap()[1];
        assert_eq!(a, -b);
        assert_eq!(c, b);
    }

    #[test]
    fn k2_complex_examples() {
        let v = eval_k2_complex(&StripPoint::real(0.5 * PI, 0.0), 0).unwrap();
        assert_relative_eq!(v.re, 1.0 / (4.0 * PI), epsilon = 1e-15);
        let d = eval_k2_complex(&StripPoint::real(PI, 0.0), 1).unwrap();
        assert!(d.norm() < 1e-15);
        assert!(eval_k2_complex(&StripPoint::real(0.0, 0.0), 0).is_err());
    }

    #[test]
    fn k2_derivatives_match_finite_differences() {
        let a2 = Complex64::new(0.2, 0.05);
        let h = 1e-3;
        for j in 1..=2u8 {
            let f = |s: f64| eval_k2_complex(&StripPoint::new(0.5, a2 + s), j - 1).unwrap();
            let fd = (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h);
            let exact = eval_k2_complex(&StripPoint::new(0.5, a2), j).unwrap();
            assert!((fd - exact).norm() < 1e-8 * exact.norm().max(1.0), "j={j}");
        }
    }

    #[test]
    fn k2_complex_matches_real_kernel() {
        for &(z1, z2) in &[(0.3, -0.2), (-2.0, 1.5), (3.0, 0.01)] {
            let c = eval_k2_complex(&StripPoint::real(z1, z2), 0).unwrap();
            assert_relative_eq!(c.re, eval_kernel(z1, z2).unwrap()[1], max_relative = 1e-14);
            assert_eq!(c.im, 0.0);
        }
    }

    #[test]
    fn cone_examples() {
        assert!(cone_membership(&StripPoint::new(1.0, Complex64::new(0.2, 0.1)), 0.375));
        assert!(!cone_membership(&StripPoint::new(0.0, Complex64::new(0.0, 0.1)), 0.375));
        assert!(!cone_membership(&StripPoint::new(0.5, Complex64::new(0.0, 2.0)), 0.375));
    }
}
