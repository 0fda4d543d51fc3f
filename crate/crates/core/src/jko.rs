//! Relaxed minimizing movements for the flat problem in one dimension.
//!
//! Each step minimizes
//! `W(theta_k, theta)/2 + W(1 - theta_k, 1 - theta)/2 - h int theta y dy`
//! over cell averages in `[0, 1]` of fixed mass, where `W` is the squared
//! quadratic Wasserstein distance.

use crate::error::{Error, Result};

/// Half-width of the default domain.
pub const DEFAULT_HALF_WIDTH: f64 = 3.0;
const MASS_TOL: f64 = 1e-10;

/// Cell averages on a uniform grid over `[-half_width, half_width]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta1D {
    pub values: Vec<f64>,
    pub half_width: f64,
}

impl Theta1D {
    pub fn new(values: Vec<f64>, half_width: f64) -> Result<Self> {
        if values.is_empty() || !(half_width > 0.0) {
            return Err(Error::Invalid("empty grid".into()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Invalid("cell values must lie in [0,1]".into()));
        }
        Ok(Self { values, half_width })
    }

    /// `1` below `y = 0`, `0` above.
    pub fn step(n: usize, half_width: f64) -> Self {
        let mut out = Self {
            values: vec![0.0; n],
            half_width,
        };
        for i in 0..n {
            out.values[i] = if out.y(i) < 0.0 { 1.0 } else { 0.0 };
        }
        out
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dy(&self) -> f64 {
        2.0 * self.half_width / self.len() as f64
    }

    pub fn edge(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dy()
    }

    pub fn y(&self, i: usize) -> f64 {
        self.edge(i) + 0.5 * self.dy()
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dy()
    }

    pub fn complement(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| 1.0 - v).collect(),
            half_width: self.half_width,
        }
    }

    pub fn is_monotone_decreasing(&self, tol: f64) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0] + tol)
    }

    pub fn l1_distance(&self, f: impl Fn(f64) -> f64) -> f64 {
        (0..self.len()).map(|i| (self.values[i] - f(self.y(i))).abs()).sum::<f64>() * self.dy()
    }
}

/// Piecewise-linear quantile function of a piecewise-constant density.
#[derive(Debug, Clone)]
struct Quantile {
    /// Cumulative mass at the start of each positive-mass cell, plus the total.
    s: Vec<f64>,
    /// Left edge of each positive-mass cell, plus the right edge of the last.
    y_start: Vec<f64>,
    y_end: Vec<f64>,
}

impl Quantile {
    fn new(theta: &Theta1D) -> Self {
        let dy = theta.dy();
        let (mut s, mut y_start, mut y_end) = (Vec::new(), Vec::new(), Vec::new());
        let mut acc = 0.0;
        for (i, &v) in theta.values.iter().enumerate() {
            let next = acc + v * dy;
            // cells too light to register in the cumulative mass carry none
            if next > acc {
                s.push(acc);
                y_start.push(theta.edge(i));
                y_end.push(theta.edge(i + 1));
                acc = next;
            }
        }
        s.push(acc);
        Self { s, y_start, y_end }
    }

    fn total(&self) -> f64 {
        *self.s.last().unwrap()
    }

    fn segments(&self) -> usize {
        self.y_start.len()
    }
}

/// Squared Wasserstein distance `int_0^m |Qa - Qb|^2 ds` between two
/// piecewise-constant densities of equal mass.
pub fn w2_distance_1d(a: &Theta1D, b: &Theta1D) -> Result<f64> {
    let (qa, qb) = (Quantile::new(a), Quantile::new(b));
    let (ma, mb) = (qa.total(), qb.total());
    if (ma - mb).abs() > MASS_TOL {
        return Err(Error::MassMismatch(ma, mb));
    }
    if ma == 0.0 {
        return Ok(0.0);
    }
    let mut breaks: Vec<f64> = qa.s.iter().chain(&qb.s).map(|&s| s.min(ma)).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        let ds = s1 - s0;
        if ds <= 0.0 {
            continue;
        }
        // both quantiles are linear on the open interval; evaluate just inside
        let eps = 1e-12 * ds;
        let d0 = at_start(&qa, s0, eps) - at_start(&qb, s0, eps);
        let d1 = at_end(&qa, s1, eps) - at_end(&qb, s1, eps);
        total += ds * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
    }
    Ok(total)
}

/// Limit of the quantile from the right at `s`.
fn at_start(q: &Quantile, s: f64, eps: f64) -> f64 {
    let k = q.s[..q.segments()].partition_point(|&b| b <= s + eps).saturating_sub(1);
    let width = q.s[k + 1] - q.s[k];
    let u = ((s - q.s[k]) / width).clamp(0.0, 1.0);
    q.y_start[k] + u * (q.y_end[k] - q.y_start[k])
}

/// Limit of the quantile from the left at `s`.
fn at_end(q: &Quantile, s: f64, eps: f64) -> f64 {
    let k = q.s[..q.segments()].partition_point(|&b| b < s - eps).saturating_sub(1);
    let width = q.s[k + 1] - q.s[k];
    let u = ((s - q.s[k]) / width).clamp(0.0, 1.0);
    q.y_start[k] + u * (q.y_end[k] - q.y_start[k])
}

/// Cell averages of the potential `a` with `a' = y - T(y)`, where `T` pushes
/// `theta` onto `target` and `a` vanishes at the left end.
pub fn potential_cell_averages(theta: &Theta1D, target: &Theta1D) -> Vec<f64> {
    let q = Quantile::new(target);
    let dy = theta.dy();
    let mut out = Vec::with_capacity(theta.len());
    let mut a = 0.0;
    let mut cum = 0.0;
    for (i, &v) in theta.values.iter().enumerate() {
        let left = theta.edge(i);
        // pieces of the cell on which T is linear
        let mut cuts = vec![left];
        if v > 0.0 {
            let s1 = cum + v * dy;
            for &b in &q.s {
                if b > cum && b < s1 {
                    cuts.push(left + (b - cum) / v);
                }
            }
        }
        cuts.push(left + dy);
        let map = |y: f64, inside: f64| {
            let s = if v > 0.0 { cum + v * (y - left) } else { cum };
            let s_probe = if v > 0.0 { cum + v * (inside - left) } else { cum };
            // evaluate on the piece containing `inside`
            let k = q.s[..q.segments().max(1)].partition_point(|&b| b <= s_probe).saturating_sub(1);
            if q.segments() == 0 {
                return 0.0;
            }
            let width = q.s[k + 1] - q.s[k];
            let u = (s - q.s[k]) / width;
            q.y_start[k] + u.clamp(0.0, 1.0) * (q.y_end[k] - q.y_start[k])
        };
        let mut integral = 0.0;
        for w in cuts.windows(2) {
            let (y0, y1) = (w[0], w[1]);
            let d = y1 - y0;
            if d <= 0.0 {
                continue;
            }
            let mid = 0.5 * (y0 + y1);
            let g0 = y0 - map(y0, mid);
            let g1 = y1 - map(y1, mid);
            integral += a * d + g0 * d * d / 2.0 + (g1 - g0) * d * d / 6.0;
            a += 0.5 * (g0 + g1) * d;
        }
        out.push(integral / dy);
        cum += v * dy;
    }
    out
}

/// Inner optimizer settings.
#[derive(Debug, Clone, PartialEq)]
pub struct JkoConfig {
    pub max_iters: usize,
    /// Stop once the projected gradient, in potential units, falls below
    /// `stationarity * h`.
    pub stationarity: f64,
    /// Cells at each end held at their initial values.
    pub pinned: usize,
}

impl Default for JkoConfig {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            stationarity: 1e-5,
            pinned: 1,
        }
    }
}

/// Summary of one minimizing-movement step.
#[derive(Debug, Clone, PartialEq)]
pub struct JkoStepReport {
    pub h: f64,
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Cell averages of the potentials of the two transport terms.
    pub potential: Vec<f64>,
    pub complement_potential: Vec<f64>,
    /// Spread of `a - abar - h y` over cells strictly inside `(0, 1)`.
    pub euler_lagrange_residual: f64,
    pub monotone: bool,
}

fn first_moment(theta: &Theta1D) -> f64 {
    (0..theta.len()).map(|i| theta.values[i] * theta.y(i)).sum::<f64>() * theta.dy()
}

/// Value of the minimizing-movement objective at `theta` for the step from
/// `previous` with size `h`.
pub fn jko_objective(previous: &Theta1D, theta: &Theta1D, h: f64) -> Result<f64> {
    Ok(0.5 * w2_distance_1d(previous, theta)?
        + 0.5 * w2_distance_1d(&previous.complement(), &theta.complement())?
        - h * first_moment(theta))
}

struct Objective<'a> {
    previous: &'a Theta1D,
    previous_complement: Theta1D,
    h: f64,
}

impl Objective<'_> {
    fn value(&self, theta: &Theta1D) -> Result<f64> {
        Ok(0.5 * w2_distance_1d(self.previous, theta)?
            + 0.5 * w2_distance_1d(&self.previous_complement, &theta.complement())?
            - self.h * first_moment(theta))
    }

    /// `(a, abar, gradient)` with `gradient_i = dy (a_i - abar_i - h y_i)`.
    fn gradient(&self, theta: &Theta1D) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let a = potential_cell_averages(theta, self.previous);
        let abar = potential_cell_averages(&theta.complement(), &self.previous_complement);
        let dy = theta.dy();
        let g = (0..theta.len())
            .map(|i| dy * (a[i] - abar[i] - self.h * theta.y(i)))
            .collect();
        (a, abar, g)
    }
}

/// Euclidean projection onto `{0 <= x <= 1, sum x = target}` by bisection on
/// the shift.
fn project(z: &[f64], target: f64) -> Vec<f64> {
    project_with_shift(z, target).0
}

/// Projection together with the shift `lam` in `x = clamp(z - lam, 0, 1)`.
fn project_with_shift(z: &[f64], target: f64) -> (Vec<f64>, f64) {
    let total = |lam: f64| z.iter().map(|v| (v - lam).clamp(0.0, 1.0)).sum::<f64>();
    let lo0 = z.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let hi0 = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-17 * (1.0 + hi.abs()) {
            break;
        }
    }
    let shift = 0.5 * (lo + hi);
    let mut x: Vec<f64> = z.iter().map(|v| (v - shift).clamp(0.0, 1.0)).collect();
    // put the remaining rounding defect on the freest interior cell
    let defect = target - x.iter().sum::<f64>();
    if let Some(k) = (0..x.len())
        .filter(|&k| x[k] > 0.0 && x[k] < 1.0)
        .min_by(|&a, &b| (x[a] - 0.5).abs().total_cmp(&(x[b] - 0.5).abs()))
    {
        x[k] = (x[k] + defect).clamp(0.0, 1.0);
    }
    (x, shift)
}

fn euler_lagrange_spread(theta: &Theta1D, a: &[f64], abar: &[f64], h: f64, pinned: usize) -> f64 {
    let free = (pinned..theta.len() - pinned).filter(|&i| theta.values[i] > 1e-9 && theta.values[i] < 1.0 - 1e-9);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in free {
        let r = a[i] - abar[i] - h * theta.y(i);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    if hi < lo {
        0.0
    } else {
        0.5 * (hi - lo)
    }
}

/// Objective values remembered by the nonmonotone line search.
const NONMONOTONE_MEMORY: usize = 10;

/// One minimizing-movement step of size `h` by spectral projected gradient
/// descent.
pub fn jko_step(previous: &Theta1D, h: f64, config: &JkoConfig) -> Result<(Theta1D, JkoStepReport)> {
    if !(h >= 0.0) {
        return Err(Error::Invalid("step size must be nonnegative".into()));
    }
    let n = previous.len();
    let pinned = config.pinned.min(n / 2);
    let free = pinned..n - pinned;
    let objective = Objective {
        previous,
        previous_complement: previous.complement(),
        h,
    };
    let dy = previous.dy();
    let free_target: f64 = previous.values[free.clone()].iter().sum();

    let mut theta = previous.clone();
    let mut value = objective.value(&theta)?;
    let initial_objective = value;
    let (mut a, mut abar, mut grad) = objective.gradient(&theta);
    let gmax = grad[free.clone()].iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let (step_min, step_max) = (1e-12, 1e12);
    let mut step = if gmax > 0.0 { (0.1 / gmax).clamp(step_min, step_max) } else { 1.0 };
    let mut history = vec![value];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iters {
        // stationarity: unit projected-gradient step in potential units
        let z: Vec<f64> = free.clone().map(|i| theta.values[i] - grad[i] / dy).collect();
        let (target, shift) = project_with_shift(&z, free_target);
        let gap = free.clone().zip(&target).map(|(i, v)| (theta.values[i] - v).abs()).fold(0.0, f64::max);
        if gap <= config.stationarity * h {
            converged = true;
            break;
        }
        iterations += 1;
        // the multiplier removes the constant part the mass constraint ignores
        let centred: Vec<f64> = free.clone().map(|i| grad[i] + dy * shift).collect();
        let z: Vec<f64> = free.clone().zip(&centred).map(|(i, g)| theta.values[i] - step * g).collect();
        let trial = project(&z, free_target);
        let dir: Vec<f64> = free.clone().zip(&trial).map(|(i, x)| x - theta.values[i]).collect();
        let slope: f64 = centred.iter().zip(&dir).map(|(g, d)| g * d).sum();
        if !(slope < 0.0) {
            break;
        }
        let reference = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let slack = 8.0 * f64::EPSILON * (value.abs() + 1.0);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut cand = theta.clone();
            for (k, i) in free.clone().enumerate() {
                cand.values[i] = (theta.values[i] + t * dir[k]).clamp(0.0, 1.0);
            }
            let v = objective.value(&cand)?;
            if v <= reference + 1e-4 * t * slope + slack {
                accepted = Some((cand, v));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, v)) = accepted else { break };
        let (na, nabar, ngrad) = objective.gradient(&cand);
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in free.clone() {
            let s = cand.values[i] - theta.values[i];
            ss += s * s;
            sy += s * (ngrad[i] - grad[i]);
        }
        step = if sy > 0.0 { (ss / sy).clamp(step_min, step_max) } else { step_max.min(step * 10.0) };
        theta = cand;
        value = v;
        a = na;
        abar = nabar;
        grad = ngrad;
        history.push(value);
        if history.len() > NONMONOTONE_MEMORY {
            history.remove(0);
        }
    }
    if !converged {
        log::warn!("minimizing movement did not converge in {iterations} iterations");
    }
    let monotone = theta.is_monotone_decreasing(1e-12);
    if !monotone && previous.is_monotone_decreasing(1e-12) {
        log::warn!("minimizing movement lost monotonicity; h is large against the cell size");
    }
    let report = JkoStepReport {
        h,
        objective: value,
        initial_objective,
        iterations,
        converged,
        euler_lagrange_residual: euler_lagrange_spread(&theta, &a, &abar, h, pinned),
        potential: a,
        complement_potential: abar,
        monotone,
    };
    Ok((theta, report))
}

/// Repeated steps from `theta0`.
pub fn run_jko(theta0: &Theta1D, h: f64, steps: usize, config: &JkoConfig) -> Result<(Vec<Theta1D>, Vec<JkoStepReport>)> {
    let mut states = vec![theta0.clone()];
    let mut reports = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (next, report) = jko_step(states.last().unwrap(), h, config)?;
        states.push(next);
        reports.push(report);
    }
    Ok((states, reports))
}

/// Entropy solution of `d_t theta + d_y(theta(1 - theta)) = 0` from step data.
pub fn burgers_exact(t: f64, y: f64) -> f64 {
    ((1.0 - y / t) / 2.0).clamp(0.0, 1.0)
}
