//! Level-set fixed point for the correction field `eta`.
//!
//! The interface family is `f(t, y) = gamma0(y1) + t s0(y1) + t^{1+alpha} eta(t, y) / 2`
//! on `y in T x [-2, 2]`, and `eta` solves
//! `eta(t) = t^{-(1+alpha)} int_0^t F_s(eta_s) ds` with
//! `F_t(eta)(y) = -int K2(dX_t) d(d1 f_t) - K2(dX_0) d(gamma0') dz`.

use crate::error::{Error, Result};
use crate::initial_data::{coeffs_from_text, coeffs_to_text, compute_s0, AnalyticGraph, NormalVelocity};
use crate::quadrature::{fd_derivative, graded_mesh, lagrange_stencil, trapezoid_weights, Component, RowModel};
use crate::spectral::{periodic_step, Spectrum};
use std::f64::consts::PI;
use std::fmt::Write as _;

pub const Y2_HALF_WIDTH: f64 = 2.0;

/// Nodes `-2..=2` of the `y2` grid.
pub fn y2_nodes(n2: usize) -> Vec<f64> {
    let h = 2.0 * Y2_HALF_WIDTH / (n2 - 1) as f64;
    (0..n2).map(|j| -Y2_HALF_WIDTH + j as f64 * h).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub alpha: f64,
    /// Fourier modes of `eta` in `y1`; `eta` is collocated on `2 * modes` points.
    pub modes: usize,
    /// Quadrature nodes in `z1`, a multiple of `2 * modes`.
    pub quad_points: usize,
    /// Nodes in `y2`, including both ends.
    pub n2: usize,
    pub horizon: f64,
    pub time_nodes: usize,
    pub time_ratio: f64,
    /// Panels of the graded mesh in each time integral (even).
    pub sub_nodes: usize,
    pub grading: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub s0_quad: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            modes: 64,
            quad_points: 256,
            n2: 33,
            horizon: 0.05,
            time_nodes: 10,
            time_ratio: 0.7,
            sub_nodes: 32,
            grading: 2.0,
            tol: 1e-10,
            max_iters: 40,
            s0_quad: 512,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha out of (0,1)");
        }
        if self.modes < 2 || !self.modes.is_power_of_two() {
            return bad("modes must be a power of two");
        }
        if !self.quad_points.is_multiple_of(2 * self.modes) || !self.quad_points.is_power_of_two() {
            return bad("quad_points must be a power-of-two multiple of 2 * modes");
        }
        if self.n2 < 5 || self.n2.is_multiple_of(2) {
            return bad("n2 must be odd and at least 5");
        }
        if !(self.horizon > 0.0) {
            return bad("horizon must be positive");
        }
        if self.time_nodes < 1 || !(self.time_ratio > 0.0 && self.time_ratio < 1.0) {
            return bad("time grid needs at least one node and a ratio in (0,1)");
        }
        if self.sub_nodes < 2 || self.sub_nodes % 2 == 1 || self.grading < 1.0 {
            return bad("sub_nodes must be even and grading at least 1");
        }
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return bad("tol and max_iters must be positive");
        }
        if self.s0_quad < 4 * self.modes {
            return bad("s0_quad must be at least 4 * modes");
        }
        Ok(())
    }

    /// `t_0 = 0` and `t_i = T r^{M-i}`.
    pub fn time_grid(&self) -> Vec<f64> {
        let m = self.time_nodes;
        std::iter::once(0.0)
            .chain((1..=m).map(|i| self.horizon * self.time_ratio.powi((m - i) as i32)))
            .collect()
    }
}

/// `eta` at the stored times, one spectrum per `y2` node.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaTrajectory {
    pub alpha: f64,
    pub times: Vec<f64>,
    pub rows: Vec<Vec<Spectrum>>,
    pub converged: bool,
}

impl EtaTrajectory {
    pub fn zeros(alpha: f64, times: Vec<f64>, n2: usize, max_k: usize) -> Self {
        let rows = times.iter().map(|_| vec![Spectrum::zero(max_k); n2]).collect();
        Self {
            alpha,
            times,
            rows,
            converged: false,
        }
    }

    pub fn n2(&self) -> usize {
        self.rows[0].len()
    }

    pub fn max_k(&self) -> usize {
        self.rows[0][0].max_k()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Linear interpolation in `t`; zero at `t = 0`, constant past the horizon.
    pub fn at(&self, t: f64) -> Vec<Spectrum> {
        let times = &self.times;
        if t <= 0.0 {
            return vec![Spectrum::zero(self.max_k()); self.n2()];
        }
        let last = times.len() - 1;
        if t >= times[last] {
            return self.rows[last].clone();
        }
        let l = times.partition_point(|&s| s <= t) - 1;
        let w = (t - times[l]) / (times[l + 1] - times[l]);
        self.rows[l]
            .iter()
            .zip(&self.rows[l + 1])
            .map(|(a, b)| a.scaled(1.0 - w).add(&b.scaled(w)))
            .collect()
    }

    /// Values on the collocation grid at stored time `i`.
    pub fn values(&self, i: usize) -> Vec<Vec<f64>> {
        let n = 2 * (self.max_k() + 1);
        self.rows[i].iter().map(|s| s.sample(n, 0.0)).collect()
    }

    /// `sup|eta| + sup|d1 eta| + sup|d2 eta|` at stored time `i`.
    pub fn ball_norm(&self, i: usize) -> f64 {
        ball_norm(&self.rows[i])
    }

    /// Plain-text dump: a header, then per time a `t` line followed by
    /// `j k re im` lines for every `y2` node `j`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "alpha {:.16e}", self.alpha).unwrap();
        writeln!(out, "converged {}", self.converged).unwrap();
        writeln!(out, "n2 {}", self.n2()).unwrap();
        writeln!(out, "max_k {}", self.max_k()).unwrap();
        for (t, rows) in self.times.iter().zip(&self.rows) {
            writeln!(out, "t {:.16e}", t).unwrap();
            for (j, row) in rows.iter().enumerate() {
                for line in coeffs_to_text(row).lines() {
                    writeln!(out, "{j} {line}").unwrap();
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let mut header = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("missing `{key}`")))?;
            line.strip_prefix(key)
                .map(|v| v.trim().to_string())
                .ok_or_else(|| Error::Parse(format!("expected `{key}`, found `{line}`")))
        };
        let num = |s: String| s.parse::<f64>().map_err(|e| Error::Parse(e.to_string()));
        let alpha = num(header("alpha")?)?;
        let converged = header("converged")? == "true";
        let n2: usize = header("n2")?.parse().map_err(|_| Error::Parse("n2".into()))?;
        let _max_k: usize = header("max_k")?.parse().map_err(|_| Error::Parse("max_k".into()))?;
        let mut times = Vec::new();
        let mut rows: Vec<Vec<Spectrum>> = Vec::new();
        let mut pending: Vec<String> = vec![String::new(); n2];
        let flush = |pending: &mut Vec<String>, rows: &mut Vec<Vec<Spectrum>>| -> Result<()> {
            let r = pending
                .iter()
                .map(|t| coeffs_from_text(t).map(Spectrum::from_coeffs))
                .collect::<Result<Vec<_>>>()?;
            rows.push(r);
            pending.iter_mut().for_each(String::clear);
            Ok(())
        };
        for line in lines {
            if let Some(t) = line.strip_prefix("t ") {
                if !times.is_empty() {
                    flush(&mut pending, &mut rows)?;
                }
                times.push(num(t.trim().to_string())?);
            } else {
                let (j, rest) = line
                    .split_once(' ')
                    .ok_or_else(|| Error::Parse(format!("bad line `{line}`")))?;
                let j: usize = j.parse().map_err(|_| Error::Parse(format!("bad node `{j}`")))?;
                if j >= n2 {
                    return Err(Error::Parse(format!("node {j} out of range")));
                }
                pending[j].push_str(rest);
                pending[j].push('\n');
            }
        }
        if !times.is_empty() {
            flush(&mut pending, &mut rows)?;
        }
        if times.is_empty() {
            return Err(Error::Parse("checkpoint holds no time slices".into()));
        }
        Ok(Self {
            alpha,
            times,
            rows,
            converged,
        })
    }
}

fn ball_norm(rows: &[Spectrum]) -> f64 {
    let n = 2 * (rows[0].max_k() + 1);
    let n2 = rows.len();
    let h2 = 2.0 * Y2_HALF_WIDTH / (n2 - 1) as f64;
    let vals: Vec<Vec<f64>> = rows.iter().map(|s| s.sample(n, 0.0)).collect();
    let d1 = rows
        .iter()
        .flat_map(|s| s.derivative(1).sample(n, 0.0))
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let sup = vals.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut d2 = 0.0f64;
    for i in 0..n {
        let col: Vec<f64> = vals.iter().map(|r| r[i]).collect();
        d2 = fd_derivative(&col, h2).iter().fold(d2, |m, v| m.max(v.abs()));
    }
    sup + d1 + d2
}

/// `f = gamma0 + t s0 + t^{1+alpha} eta / 2` with the data that fixes it.
#[derive(Debug, Clone)]
pub struct AnsatzField {
    pub gamma: AnalyticGraph,
    pub s0: NormalVelocity,
    pub eta: EtaTrajectory,
}

/// `f(t, .)` and its derivatives sampled on `offset + 2 pi m / n` times the `y2` nodes.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub n: usize,
    pub offset: f64,
    pub y2: Vec<f64>,
    /// Row spectra of `f` itself, for evaluation off the grid.
    pub rows: Vec<Spectrum>,
    pub f: Vec<Vec<f64>>,
    /// `d1^k f` for `k = 1..=4`.
    pub d1: [Vec<Vec<f64>>; 4],
    /// `d2 f` by fourth-order differences.
    pub d2: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn build(gamma: &AnalyticGraph, s0: &NormalVelocity, alpha: f64, eta: &[Spectrum], t: f64, n: usize, offset: f64) -> Self {
        let n2 = eta.len();
        let keep = (n - 1) / 2;
        let base = gamma.spectrum().add(&s0.spectrum().scaled(t)).truncated(keep);
        let scale = 0.5 * t.powf(1.0 + alpha);
        let rows: Vec<Spectrum> = eta.iter().map(|e| base.add(&e.scaled(scale)).truncated(keep)).collect();
        let f: Vec<Vec<f64>> = rows.iter().map(|r| r.sample(n, offset)).collect();
        let d1 = [1, 2, 3, 4].map(|k| rows.iter().map(|r| r.derivative(k).sample(n, offset)).collect::<Vec<_>>());
        let y2 = y2_nodes(n2);
        let h2 = y2[1] - y2[0];
        let mut d2 = vec![vec![0.0; n]; n2];
        if scale > 0.0 {
            for i in 0..n {
                let col: Vec<f64> = f.iter().map(|r| r[i]).collect();
                for (j, v) in fd_derivative(&col, h2).into_iter().enumerate() {
                    d2[j][i] = v;
                }
            }
        }
        Self {
            t,
            n,
            offset,
            y2,
            rows,
            f,
            d1,
            d2,
        }
    }

    pub fn n2(&self) -> usize {
        self.y2.len()
    }

    /// `min (t + d2 f)` over the grid.
    pub fn min_slope(&self) -> f64 {
        self.d2.iter().flatten().fold(f64::INFINITY, |m, v| m.min(self.t + v))
    }

    pub fn check_monotone(&self) -> Result<()> {
        if self.t > 0.0 {
            let s = self.min_slope();
            if !(s > 0.0) {
                return Err(Error::MonotonicityViolation { t: self.t, min_slope: s });
            }
        }
        Ok(())
    }

    /// `f(t, x1, y2_j)` for every node `j`.
    pub fn column_at(&self, x1: f64) -> Vec<f64> {
        self.rows.iter().map(|r| r.eval_real(x1)).collect()
    }

    /// `d1 f(t, x1, y2_j)` for every node `j`.
    pub fn slope_column_at(&self, x1: f64) -> Vec<f64> {
        self.rows.iter().map(|r| r.derivative(1).eval_real(x1)).collect()
    }
}

impl AnsatzField {
    pub fn new(gamma: AnalyticGraph, s0: NormalVelocity, eta: EtaTrajectory) -> Self {
        Self { gamma, s0, eta }
    }

    /// The flat ansatz `f = 0` on the given grid shape.
    pub fn alpha(&self) -> f64 {
        self.eta.alpha
    }

    pub fn snapshot(&self, t: f64, n: usize, offset: f64) -> Snapshot {
        Snapshot::build(&self.gamma, &self.s0, self.eta.alpha, &self.eta.at(t), t, n, offset)
    }

    /// `f(t, .)` with `d1 f` and `d2 f` on the collocation grid.
    pub fn assemble_f(&self, t: f64) -> Snapshot {
        self.snapshot(t, 2 * (self.eta.max_k() + 1), 0.0)
    }
}

/// Bookkeeping gathered while evaluating the operator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OperatorStats {
    /// `max t|y2 - z2| / |dX|_*` over the node `z1 = y1`.
    pub nondegeneracy: f64,
    /// Largest integrand value met by the rule.
    pub max_integrand: f64,
}

impl OperatorStats {
    fn merge(&mut self, o: &OperatorStats) {
        self.nondegeneracy = self.nondegeneracy.max(o.nondegeneracy);
        self.max_integrand = self.max_integrand.max(o.max_integrand);
    }
}

/// Evaluates `F_t` for fixed interface data on a fixed grid.
#[derive(Debug, Clone)]
pub struct Operator {
    gamma: AnalyticGraph,
    s0: NormalVelocity,
    alpha: f64,
    n_targets: usize,
    n_quad: usize,
    n2: usize,
    sines: Vec<f64>,
    cosines: Vec<f64>,
    z2_weights: Vec<f64>,
    /// `2 s0` on the target grid.
    twice_s0: Vec<f64>,
    flat: bool,
}

/// Largest ratio `t|y2 - z2| / |dX|_*` tolerated before the transformed
/// difference is considered degenerate.
const NONDEGENERACY_LIMIT: f64 = 1e6;

impl Operator {
    pub fn new(gamma: &AnalyticGraph, s0: &NormalVelocity, alpha: f64, modes: usize, n_quad: usize, n2: usize) -> Self {
        let n_targets = 2 * modes;
        let h = periodic_step(n_quad);
        let twice_s0 = s0.spectrum().truncated(modes - 1).scaled(2.0).sample(n_targets, 0.0);
        Self {
            gamma: gamma.clone(),
            s0: s0.clone(),
            alpha,
            n_targets,
            n_quad,
            n2,
            sines: (0..n_quad).map(|m| (m as f64 * h).sin()).collect(),
            cosines: (0..n_quad).map(|m| (m as f64 * h).cos()).collect(),
            z2_weights: trapezoid_weights(n2, -Y2_HALF_WIDTH, Y2_HALF_WIDTH),
            twice_s0,
            flat: gamma.is_flat(),
        }
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    /// `F_t(eta)` on the collocation grid, one row per `y2` node.
    pub fn eval(&self, eta: &[Spectrum], t: f64) -> Result<(Vec<Vec<f64>>, OperatorStats)> {
        let zero = || vec![vec![0.0; self.n_targets]; self.n2];
        if t == 0.0 {
            return Ok((zero(), OperatorStats::default()));
        }
        let snap = Snapshot::build(&self.gamma, &self.s0, self.alpha, eta, t, self.n_quad, 0.0);
        snap.check_monotone()?;
        // d(d1 f) vanishes identically when d1 f does
        if self.flat && snap.d1[0].iter().flatten().all(|&v| v == 0.0) {
            return Ok((zero(), OperatorStats::default()));
        }
        self.eval_snapshot(&snap)
    }

    fn eval_snapshot(&self, snap: &Snapshot) -> Result<(Vec<Vec<f64>>, OperatorStats)> {
        let (n, n2, t) = (self.n_quad, self.n2, snap.t);
        let h = periodic_step(n);
        let stride = n / self.n_targets;
        let inv4pi = 0.25 / PI;
        let exp_pos: Vec<Vec<f64>> = snap.f.iter().map(|r| r.iter().map(|v| v.exp()).collect()).collect();
        let exp_neg: Vec<Vec<f64>> = exp_pos.iter().map(|r| r.iter().map(|v| 1.0 / v).collect()).collect();
        let mut out = vec![vec![0.0; self.n_targets]; n2];
        let mut stats = OperatorStats::default();
        for i2 in 0..n2 {
            for it in 0..self.n_targets {
                let iq = it * stride;
                let ft = snap.f[i2][iq];
                let slope_t = snap.d1[0][i2][iq];
                let mut local = OperatorStats::default();
                let mut total = 0.0;
                for j2 in 0..n2 {
                    let shift = t * (snap.y2[i2] - snap.y2[j2]) + ft;
                    let (ep, en) = (shift.exp(), (-shift).exp());
                    let (rp, rn, slopes) = (&exp_neg[j2], &exp_pos[j2], &snap.d1[0][j2]);
                    let mut sum = 0.0;
                    let mut peak = 0.0f64;
                    let mut term = |m: usize, src: usize| {
                        let cosh = 0.5 * (ep * rp[src] + en * rn[src]);
                        let v = self.sines[m] * (slope_t - slopes[src]) / (cosh - self.cosines[m]);
                        peak = peak.max(v.abs());
                        sum += v;
                    };
                    for m in 1..=iq {
                        term(m, iq - m);
                    }
                    for m in iq + 1..n {
                        term(m, iq + n - m);
                    }
                    let mut row = sum * inv4pi * h;
                    local.max_integrand = local.max_integrand.max(peak * inv4pi);
                    let tau = shift - snap.f[j2][iq];
                    let d = [snap.d1[0][j2][iq], snap.d1[1][j2][iq], snap.d1[2][j2][iq], snap.d1[3][j2][iq]];
                    let model = RowModel::from_shift(tau, d, slope_t, -1.0);
                    if j2 == i2 {
                        let node = model.finite_part(Component::Second);
                        local.max_integrand = local.max_integrand.max(node.abs());
                        row += h * node;
                    } else {
                        if tau == 0.0 {
                            return Err(Error::ConeViolation { t });
                        }
                        let ratio = t * (snap.y2[i2] - snap.y2[j2]).abs() / tau.abs();
                        local.nondegeneracy = local.nondegeneracy.max(ratio);
                        row -= model.pole_correction(h, Component::Second);
                    }
                    total += self.z2_weights[j2] * row;
                }
                if local.nondegeneracy > NONDEGENERACY_LIMIT {
                    return Err(Error::ConeViolation { t });
                }
                stats.merge(&local);
                // the t = 0 term integrates to -2 s0
                out[i2][it] = -total - self.twice_s0[it];
            }
        }
        Ok((out, stats))
    }
}

/// Per-iterate record of the Picard iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceReport {
    pub lambdas: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub nondegeneracy: f64,
    pub max_integrand: f64,
    pub message: String,
}

impl ConvergenceReport {
    /// Successive ratios `lambda_{k+1} / lambda_k`.
    pub fn ratios(&self) -> Vec<f64> {
        self.lambdas.windows(2).map(|w| w[1] / w[0]).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "converged: {}", self.converged).unwrap();
        writeln!(out, "iterations: {}", self.iterations).unwrap();
        writeln!(out, "residual: {:.16e}", self.residual).unwrap();
        let l: Vec<String> = self.lambdas.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "lambdas: {}", l.join(" ")).unwrap();
        writeln!(out, "nondegeneracy: {:.16e}", self.nondegeneracy).unwrap();
        writeln!(out, "max_integrand: {:.16e}", self.max_integrand).unwrap();
        writeln!(out, "message: {}", self.message).unwrap();
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = ConvergenceReport::default();
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}")));
        for line in text.lines() {
            let Some((key, value)) = line.split_once(':') else { continue };
            match key.trim() {
                "converged" => r.converged = value.trim() == "true",
                "iterations" => r.iterations = value.trim().parse().map_err(|_| Error::Parse("iterations".into()))?,
                "residual" => r.residual = num(value)?,
                "lambdas" => r.lambdas = value.split_whitespace().map(num).collect::<Result<_>>()?,
                "nondegeneracy" => r.nondegeneracy = num(value)?,
                "max_integrand" => r.max_integrand = num(value)?,
                "message" => r.message = value.trim().to_string(),
                _ => {}
            }
        }
        Ok(r)
    }
}

/// Weighted Picard iteration for `eta`. The report stays available after a failure.
pub struct LevelSetSolver {
    pub config: SolverConfig,
    pub gamma: AnalyticGraph,
    pub s0: NormalVelocity,
    operator: Operator,
    report: ConvergenceReport,
}

impl LevelSetSolver {
    pub fn new(gamma: &AnalyticGraph, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let s0 = compute_s0(gamma, config.s0_quad)?;
        let operator = Operator::new(gamma, &s0, config.alpha, config.modes, config.quad_points, config.n2);
        Ok(Self {
            config,
            gamma: gamma.clone(),
            s0,
            operator,
            report: ConvergenceReport::default(),
        })
    }

    pub fn report(&self) -> &ConvergenceReport {
        &self.report
    }

    pub fn operator(&self) -> &Operator {
        &self.operator
    }

    /// One application of the fixed-point map to a whole trajectory.
    pub fn apply(&self, eta: &EtaTrajectory) -> Result<(EtaTrajectory, OperatorStats)> {
        let c = &self.config;
        let mut next = EtaTrajectory::zeros(c.alpha, eta.times.clone(), c.n2, eta.max_k());
        let mut stats = OperatorStats::default();
        for (i, &t) in eta.times.iter().enumerate().skip(1) {
            let (nodes, weights) = graded_mesh(t, c.sub_nodes, c.grading);
            let mut acc = vec![vec![0.0; self.operator.n_targets()]; c.n2];
            for (&s, &w) in nodes.iter().zip(&weights).skip(1) {
                let (vals, st) = self.operator.eval(&eta.at(s), s)?;
                stats.merge(&st);
                for (a, v) in acc.iter_mut().zip(&vals) {
                    for (x, y) in a.iter_mut().zip(v) {
                        *x += w * y;
                    }
                }
            }
            let scale = t.powf(-(1.0 + c.alpha));
            next.rows[i] = acc
                .iter()
                .map(|row| {
                    let scaled: Vec<f64> = row.iter().map(|v| v * scale).collect();
                    Spectrum::from_samples(&scaled)
                })
                .collect();
        }
        Ok((next, stats))
    }

    pub fn run(&mut self) -> Result<EtaTrajectory> {
        let c = self.config.clone();
        let times = c.time_grid();
        let mut eta = EtaTrajectory::zeros(c.alpha, times, c.n2, c.modes - 1);
        self.report = ConvergenceReport::default();
        let fail = |report: &mut ConvergenceReport, e: Error| {
            report.message = e.to_string();
            Err(e)
        };
        loop {
            let (next, stats) = match self.apply(&eta) {
                Ok(v) => v,
                Err(e) => return fail(&mut self.report, e),
            };
            self.report.iterations += 1;
            self.report.nondegeneracy = self.report.nondegeneracy.max(stats.nondegeneracy);
            self.report.max_integrand = self.report.max_integrand.max(stats.max_integrand);
            for i in 1..next.times.len() {
                let norm = next.ball_norm(i);
                if norm >= 1.0 {
                    let e = Error::Divergence {
                        iteration: self.report.iterations,
                        norm,
                    };
                    return fail(&mut self.report, e);
                }
            }
            let lambda = sup_distance(&eta, &next);
            self.report.lambdas.push(lambda);
            eta = next;
            let ratios = self.report.ratios();
            let contracting = ratios.len() >= 2 && ratios[ratios.len() - 2..].iter().all(|&r| r <= 0.9);
            if lambda == 0.0 || (lambda <= c.tol && contracting) {
                break;
            }
            if self.report.iterations >= c.max_iters {
                let e = Error::Stagnation {
                    iterations: self.report.iterations,
                    last: lambda,
                };
                return fail(&mut self.report, e);
            }
        }
        let residual = if self.report.lambdas.last() == Some(&0.0) {
            0.0
        } else {
            match self.apply(&eta) {
                Ok((again, _)) => sup_distance(&eta, &again),
                Err(e) => return fail(&mut self.report, e),
            }
        };
        self.report.residual = residual;
        self.report.converged = true;
        self.report.message = "converged".into();
        eta.converged = true;
        Ok(eta)
    }

    pub fn ansatz(&self, eta: EtaTrajectory) -> AnsatzField {
        AnsatzField::new(self.gamma.clone(), self.s0.clone(), eta)
    }
}

/// Sup-norm distance between two trajectories on the collocation grid.
pub fn sup_distance(a: &EtaTrajectory, b: &EtaTrajectory) -> f64 {
    let mut d = 0.0f64;
    for i in 0..a.times.len() {
        for (ra, rb) in a.values(i).iter().zip(&b.values(i)) {
            for (x, y) in ra.iter().zip(rb) {
                d = d.max((x - y).abs());
            }
        }
    }
    d
}

/// Solve for `eta` and wrap the result as an ansatz field.
pub fn solve_eta(gamma: &AnalyticGraph, config: SolverConfig) -> Result<(AnsatzField, ConvergenceReport)> {
    let mut solver = LevelSetSolver::new(gamma, config)?;
    let eta = solver.run()?;
    Ok((solver.ansatz(eta), solver.report.clone()))
}

/// Cubic interpolation of a column sampled at the `y2` nodes.
pub fn interpolate_column(column: &[f64], y2: f64) -> (f64, f64) {
    let n2 = column.len();
    let h = 2.0 * Y2_HALF_WIDTH / (n2 - 1) as f64;
    let (base, w) = lagrange_stencil(y2, -Y2_HALF_WIDTH, h, n2);
    let value = w.iter().enumerate().map(|(i, wi)| wi * column[base + i]).sum();
    // derivative of the same interpolant
    let s = (y2 + Y2_HALF_WIDTH) / h;
    let width = w.len();
    let mut deriv = 0.0;
    for i in 0..width {
        let mut di = 0.0;
        for k in 0..width {
            if k == i {
                continue;
            }
            let mut p = 1.0 / (i as f64 - k as f64);
            for l in 0..width {
                if l != i && l != k {
                    p *= (s - (base + l) as f64) / (i as f64 - l as f64);
                }
            }
            di += p;
        }
        deriv += di * column[base + i];
    }
    (value, deriv / h)
}
