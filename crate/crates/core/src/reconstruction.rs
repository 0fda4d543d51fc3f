//! Eulerian density, velocity and flux recovered from the level-set field.
//!
//! Inside the mixing zone `rho(t, X_t(y)) = y2 / 2` with
//! `X_t(y) = (y1, t y2 + f(t, y))`; outside it the phases are pure.

use crate::error::{Error, Result};
use crate::levelset::{interpolate_column, y2_nodes, AnsatzField, Y2_HALF_WIDTH};
use crate::quadrature::{trapezoid_weights, Component, RowModel};
use crate::spectral::periodic_step;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Periodic-in-`x1`, cell-centred-in-`x2` sampling grid on `T x [-L, L]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n1: usize,
    pub n2: usize,
    pub half_height: f64,
    /// `x1` of the first column.
    pub x1_offset: f64,
}

impl Grid {
    /// Cell centres of an `n1 x n2` finite-volume grid.
    pub fn cell_centred(n1: usize, n2: usize, half_height: f64) -> Self {
        Self {
            n1,
            n2,
            half_height,
            x1_offset: 0.5 * periodic_step(n1),
        }
    }

    pub fn dx1(&self) -> f64 {
        periodic_step(self.n1)
    }

    pub fn dx2(&self) -> f64 {
        2.0 * self.half_height / self.n2 as f64
    }

    pub fn x1(&self, i: usize) -> f64 {
        self.x1_offset + i as f64 * self.dx1()
    }

    pub fn x2(&self, j: usize) -> f64 {
        -self.half_height + (j as f64 + 0.5) * self.dx2()
    }

    pub fn cell_area(&self) -> f64 {
        self.dx1() * self.dx2()
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major index: `x2` row `j`, `x1` column `i`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n1 + i
    }
}

/// Default strip half-height for interface data of size `amp` up to time `horizon`.
pub fn default_half_height(amp: f64, horizon: f64) -> f64 {
    (2.0 * amp + 2.0 * horizon + 1.0).max(4.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub grid: Grid,
    pub time: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityField {
    pub grid: Grid,
    pub time: f64,
    pub values: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxField {
    pub grid: Grid,
    pub time: f64,
    pub mu: f64,
    pub values: Vec<[f64; 2]>,
}

impl DensityField {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }
}

/// `m = rho v - mu (1 - rho^2) e2`.
pub fn flux_m(rho: f64, v: [f64; 2], mu: f64) -> [f64; 2] {
    [rho * v[0], rho * v[1] - mu * (1.0 - rho * rho)]
}

impl FluxField {
    pub fn assemble(rho: &DensityField, v: &VelocityField, mu: f64) -> Self {
        let values = rho
            .values
            .iter()
            .zip(&v.values)
            .map(|(&r, &u)| flux_m(r, u, mu))
            .collect();
        Self {
            grid: rho.grid.clone(),
            time: rho.time,
            mu,
            values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preimage {
    Inside(f64),
    Above,
    Below,
}

/// `y2 -> t y2 + f(t, x1, y2)` along one column, interpolated between nodes.
#[derive(Debug, Clone)]
pub struct Column {
    pub t: f64,
    pub f: Vec<f64>,
    pub slope: Vec<f64>,
}

impl Column {
    pub fn map(&self, y2: f64) -> (f64, f64) {
        let (v, d) = interpolate_column(&self.f, y2);
        (self.t * y2 + v, self.t + d)
    }

    pub fn bottom(&self) -> f64 {
        -Y2_HALF_WIDTH * self.t + self.f[0]
    }

    pub fn top(&self) -> f64 {
        Y2_HALF_WIDTH * self.t + self.f[self.f.len() - 1]
    }

    /// Bisection to `1e-12` followed by two Newton steps.
    pub fn invert(&self, x2: f64) -> Result<Preimage> {
        if x2 > self.top() {
            return Ok(Preimage::Above);
        }
        if x2 < self.bottom() {
            return Ok(Preimage::Below);
        }
        let (mut lo, mut hi) = (-Y2_HALF_WIDTH, Y2_HALF_WIDTH);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if self.map(mid).0 < x2 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut y = 0.5 * (lo + hi);
        for _ in 0..2 {
            let (v, d) = self.map(y);
            if !(d > 0.0) {
                return Err(Error::MonotonicityViolation { t: self.t, min_slope: d });
            }
            y = (y - (v - x2) / d).clamp(-Y2_HALF_WIDTH, Y2_HALF_WIDTH);
        }
        Ok(Preimage::Inside(y))
    }
}

/// Evaluates the Eulerian fields of an ansatz.
#[derive(Debug, Clone)]
pub struct Reconstructor {
    pub ansatz: AnsatzField,
    /// Quadrature nodes in `z1` for the velocity.
    pub quad_points: usize,
}

/// Column data for the velocity rule at a fixed `x1`.
struct VelocityColumn {
    x1: f64,
    t: f64,
    y2: Vec<f64>,
    column: Column,
    /// Derivatives `d1^k f` at `x1`, `k = 1..=4`, per row.
    derivs: Vec<[f64; 4]>,
    exp_pos: Vec<Vec<f64>>,
    exp_neg: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
    sines: Vec<f64>,
    cosines: Vec<f64>,
    weights: Vec<f64>,
}

impl Reconstructor {
    pub fn new(ansatz: AnsatzField, quad_points: usize) -> Self {
        Self { ansatz, quad_points }
    }

    pub fn column(&self, t: f64, x1: f64) -> Column {
        let eta = self.ansatz.eta.at(t);
        let scale = 0.5 * t.powf(1.0 + self.ansatz.alpha());
        let base = self.ansatz.gamma.spectrum().eval_real(x1) + t * self.ansatz.s0.eval(x1);
        let base_slope = self.ansatz.gamma.spectrum().derivative(1).eval_real(x1) + t * self.ansatz.s0.spectrum().derivative(1).eval_real(x1);
        Column {
            t,
            f: eta.iter().map(|e| base + scale * e.eval_real(x1)).collect(),
            slope: eta.iter().map(|e| base_slope + scale * e.derivative(1).eval_real(x1)).collect(),
        }
    }

    pub fn invert_transform(&self, t: f64, x1: f64, x2: f64) -> Result<Preimage> {
        if !(t > 0.0) {
            return Err(Error::Invalid("inversion needs t > 0".into()));
        }
        self.column(t, x1).invert(x2)
    }

    pub fn density_at(&self, t: f64, x: [f64; 2]) -> Result<f64> {
        Ok(match self.invert_transform(t, x[0], x[1])? {
            Preimage::Inside(y2) => 0.5 * y2,
            Preimage::Above => 1.0,
            Preimage::Below => -1.0,
        })
    }

    pub fn density_field(&self, t: f64, grid: &Grid) -> Result<DensityField> {
        if !(t > 0.0) {
            return Err(Error::Invalid("density needs t > 0".into()));
        }
        let mut values = vec![0.0; grid.len()];
        for i in 0..grid.n1 {
            let col = self.column(t, grid.x1(i));
            for j in 0..grid.n2 {
                values[grid.index(i, j)] = match col.invert(grid.x2(j))? {
                    Preimage::Inside(y2) => 0.5 * y2,
                    Preimage::Above => 1.0,
                    Preimage::Below => -1.0,
                };
            }
        }
        Ok(DensityField {
            grid: grid.clone(),
            time: t,
            values,
        })
    }

    fn velocity_column(&self, t: f64, x1: f64) -> VelocityColumn {
        let n = self.quad_points;
        let h = periodic_step(n);
        let snap = self.ansatz.snapshot(t, n, x1);
        let derivs = snap
            .rows
            .iter()
            .map(|r| [1, 2, 3, 4].map(|k| r.derivative(k).eval_real(x1)))
            .collect();
        let exp_pos: Vec<Vec<f64>> = snap.f.iter().map(|r| r.iter().map(|v| v.exp()).collect()).collect();
        let exp_neg = exp_pos.iter().map(|r| r.iter().map(|v| 1.0 / v).collect()).collect();
        let column = Column {
            t,
            f: snap.f.iter().map(|r| r[0]).collect(),
            slope: snap.d1[0].iter().map(|r| r[0]).collect(),
        };
        VelocityColumn {
            x1,
            t,
            y2: snap.y2.clone(),
            column,
            derivs,
            exp_pos,
            exp_neg,
            slopes: snap.d1[0].clone(),
            sines: (0..n).map(|m| (m as f64 * h).sin()).collect(),
            cosines: (0..n).map(|m| (m as f64 * h).cos()).collect(),
            weights: trapezoid_weights(snap.y2.len(), -Y2_HALF_WIDTH, Y2_HALF_WIDTH),
        }
    }

    pub fn velocity_at(&self, t: f64, x: [f64; 2]) -> Result<[f64; 2]> {
        if !(t > 0.0) {
            return Err(Error::Invalid("velocity needs t > 0".into()));
        }
        let col = self.velocity_column(t, x[0]);
        col.velocity(x[1])
    }

    pub fn velocity_field(&self, t: f64, grid: &Grid) -> Result<VelocityField> {
        if !(t > 0.0) {
            return Err(Error::Invalid("velocity needs t > 0".into()));
        }
        let mut values = vec![[0.0; 2]; grid.len()];
        for i in 0..grid.n1 {
            let col = self.velocity_column(t, grid.x1(i));
            for j in 0..grid.n2 {
                values[grid.index(i, j)] = col.velocity(grid.x2(j))?;
            }
        }
        Ok(VelocityField {
            grid: grid.clone(),
            time: t,
            values,
        })
    }

    /// `gamma_t(x1, h) = 2 h t + f(t, x1, 2h)` for each level `h` and each `x1`.
    pub fn level_curves(&self, t: f64, levels: &[f64], x1: &[f64]) -> Vec<Vec<f64>> {
        let cols: Vec<Column> = x1.iter().map(|&x| self.column(t, x)).collect();
        levels
            .iter()
            .map(|&h| {
                cols.iter()
                    .map(|c| 2.0 * h * t + interpolate_column(&c.f, 2.0 * h).0)
                    .collect()
            })
            .collect()
    }
}

/// Column nodes closer than this to `X_t^{-1}(x)` are treated as passing through `x`.
const NODE_SNAP: f64 = 1e-9;

impl VelocityColumn {
    fn velocity(&self, x2: f64) -> Result<[f64; 2]> {
        let n = self.sines.len();
        let h = periodic_step(n);
        let n2 = self.y2.len();
        let h2 = self.y2[1] - self.y2[0];
        let inv4pi = 0.25 / PI;
        let pre = self.column.invert(x2)?;
        let snapped = match pre {
            Preimage::Inside(z) => {
                let j = ((z + Y2_HALF_WIDTH) / h2).round() as usize;
                ((z - self.y2[j]).abs() < NODE_SNAP).then_some(j)
            }
            _ => None,
        };
        let mut total = [0.0; 2];
        for j in 0..n2 {
            let base = x2 - self.t * self.y2[j];
            let (ep, en) = (base.exp(), (-base).exp());
            let (rp, rn, slopes) = (&self.exp_neg[j], &self.exp_pos[j], &self.slopes[j]);
            let mut sum = [0.0; 2];
            for m in 1..n {
                let src = n - m;
                let e_plus = ep * rp[src];
                let e_minus = en * rn[src];
                let d = 0.5 * (e_plus + e_minus) - self.cosines[m];
                let s = slopes[src] / d;
                sum[0] -= 0.5 * (e_plus - e_minus) * s;
                sum[1] += self.sines[m] * s;
            }
            let mut row = [sum[0] * inv4pi * h, sum[1] * inv4pi * h];
            let tau = base - self.column.f[j];
            let model = RowModel::from_shift(tau, self.derivs[j], 0.0, 1.0);
            if snapped == Some(j) {
                let model = RowModel { tau: 0.0, ..model };
                row[0] += h * model.finite_part(Component::First);
                row[1] += h * model.finite_part(Component::Second);
            } else {
                let m0 = self.slopes[j][0];
                let d = 2.0 * (0.5 * tau).sinh().powi(2);
                row[0] -= h * inv4pi * tau.sinh() * m0 / d;
                row[0] -= model.pole_correction(h, Component::First);
                row[1] -= model.pole_correction(h, Component::Second);
            }
            total[0] += self.weights[j] * row[0];
            total[1] += self.weights[j] * row[1];
        }
        // the row integral jumps where the row passes through x
        if let Preimage::Inside(z) = pre {
            let (g, _) = interpolate_column(&self.column.slope, z);
            let jump = [g / (1.0 + g * g), g * g / (1.0 + g * g)];
            let defect = match snapped {
                Some(0) => -0.25 * h2,
                Some(j) if j == n2 - 1 => 0.25 * h2,
                Some(_) => 0.0,
                None => {
                    let cell = (((z + Y2_HALF_WIDTH) / h2).floor() as usize).min(n2 - 2);
                    0.5 * h2 - (self.y2[cell + 1] - z)
                }
            };
            total[0] -= jump[0] * defect;
            total[1] -= jump[1] * defect;
        }
        let _ = self.x1;
        Ok([0.5 * total[0], 0.5 * total[1]])
    }
}

/// Nodes of the level-set `y2` grid used by the ansatz.
pub fn ansatz_nodes(ansatz: &AnsatzField) -> Vec<f64> {
    y2_nodes(ansatz.eta.n2())
}
