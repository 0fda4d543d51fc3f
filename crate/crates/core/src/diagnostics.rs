//! Balances and identities checked on exported Eulerian grids.

use crate::reconstruction::{DensityField, FluxField, Grid, VelocityField};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Midpoint sum of `(rho - rho0) x2` over the grid.
pub fn relative_potential_energy(rho: &DensityField, rho0: impl Fn(f64, f64) -> f64) -> f64 {
    check_boundary_rows(rho);
    let g = &rho.grid;
    let mut sum = 0.0;
    for j in 0..g.n2 {
        let x2 = g.x2(j);
        for i in 0..g.n1 {
            sum += (rho.at(i, j) - rho0(g.x1(i), x2)) * x2;
        }
    }
    sum * g.cell_area()
}

/// Midpoint sum of `rho - rho0`.
pub fn mass_error(rho: &DensityField, rho0: impl Fn(f64, f64) -> f64) -> f64 {
    let g = &rho.grid;
    let mut sum = 0.0;
    for j in 0..g.n2 {
        for i in 0..g.n1 {
            sum += rho.at(i, j) - rho0(g.x1(i), g.x2(j));
        }
    }
    sum * g.cell_area()
}

/// Largest deviation of the top and bottom rows from the pure phases.
pub fn boundary_contamination(rho: &DensityField) -> f64 {
    let g = &rho.grid;
    (0..g.n1)
        .map(|i| (rho.at(i, 0) + 1.0).abs().max((rho.at(i, g.n2 - 1) - 1.0).abs()))
        .fold(0.0, f64::max)
}

fn check_boundary_rows(rho: &DensityField) {
    let c = boundary_contamination(rho);
    if c > 1e-6 {
        log::warn!("density differs from the pure phases by {c:e} on the boundary rows");
    }
}

/// Midpoint sum of `(rho - rho0) x2` against a reference field on the same grid.
pub fn relative_potential_energy_field(rho: &DensityField, rho0: &DensityField) -> f64 {
    check_boundary_rows(rho);
    let g = &rho.grid;
    let mut sum = 0.0;
    for j in 0..g.n2 {
        for i in 0..g.n1 {
            sum += (rho.at(i, j) - rho0.at(i, j)) * g.x2(j);
        }
    }
    sum * g.cell_area()
}

/// Midpoint sum of `rho - rho0` against a reference field on the same grid.
pub fn mass_error_field(rho: &DensityField, rho0: &DensityField) -> f64 {
    let diff: f64 = rho.values.iter().zip(&rho0.values).map(|(a, b)| a - b).sum();
    diff * rho.grid.cell_area()
}

/// `int m2 dx`.
pub fn vertical_flux_integral(m: &FluxField) -> f64 {
    m.values.iter().map(|v| v[1]).sum::<f64>() * m.grid.cell_area()
}

/// `d/dt E_rel` by differences (centred inside, one-sided at the ends)
/// next to `int m2` at each node.
pub fn dissipation_identity(times: &[f64], e_rel: &[f64], fluxes: &[FluxField]) -> (Vec<f64>, Vec<f64>) {
    assert!(times.len() >= 3, "need at least three time nodes");
    let n = times.len();
    let lhs = (0..n)
        .map(|k| {
            let (a, b) = if k == 0 {
                (0, 1)
            } else if k == n - 1 {
                (n - 2, n - 1)
            } else {
                (k - 1, k + 1)
            };
            (e_rel[b] - e_rel[a]) / (times[b] - times[a])
        })
        .collect();
    let rhs = fluxes.iter().map(vertical_flux_integral).collect();
    (lhs, rhs)
}

/// Convex entropy `eta` with its flux `Q(r) = int_0^r 2 eta'(s) s ds`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Entropy {
    Identity,
    Square,
    Kruzhkov(f64),
}

impl Entropy {
    /// The default suite: `s`, `s^2` and `|s - c|` for `c` in `{-0.5, 0, 0.3}`.
    pub fn suite() -> Vec<Entropy> {
        vec![
            Entropy::Identity,
            Entropy::Square,
            Entropy::Kruzhkov(-0.5),
            Entropy::Kruzhkov(0.0),
            Entropy::Kruzhkov(0.3),
        ]
    }

    pub fn name(&self) -> String {
        match self {
            Entropy::Identity => "s".into(),
            Entropy::Square => "s^2".into(),
            Entropy::Kruzhkov(c) if *c == 0.0 => "|s|".into(),
            Entropy::Kruzhkov(c) if *c < 0.0 => format!("|s+{}|", -c),
            Entropy::Kruzhkov(c) => format!("|s-{c}|"),
        }
    }

    pub fn eta(&self, s: f64) -> f64 {
        match *self {
            Entropy::Identity => s,
            Entropy::Square => s * s,
            Entropy::Kruzhkov(c) => (s - c).abs(),
        }
    }

    pub fn flux(&self, r: f64) -> f64 {
        match *self {
            Entropy::Identity => r * r,
            Entropy::Square => 4.0 * r * r * r / 3.0,
            Entropy::Kruzhkov(c) => sign(r - c) * (r * r - c * c) - sign(c) * c * c,
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Pointwise residual of `d_t eta(rho) + div(eta(rho) v + Q(rho) e2)` at the
/// middle of three equally spaced snapshots, by centred differences.
pub fn entropy_residual_field(
    entropy: Entropy,
    before: &DensityField,
    now: &DensityField,
    after: &DensityField,
    v: &VelocityField,
) -> Vec<f64> {
    let g = &now.grid;
    let dt = after.time - before.time;
    let (n1, n2) = (g.n1, g.n2);
    let mut out = vec![0.0; g.len()];
    let flux1 = |i: usize, j: usize| entropy.eta(now.at(i, j)) * v.values[g.index(i, j)][0];
    let flux2 = |i: usize, j: usize| {
        let r = now.at(i, j);
        entropy.eta(r) * v.values[g.index(i, j)][1] + entropy.flux(r)
    };
    for j in 1..n2 - 1 {
        for i in 0..n1 {
            let (ip, im) = ((i + 1) % n1, (i + n1 - 1) % n1);
            let dt_term = (entropy.eta(after.at(i, j)) - entropy.eta(before.at(i, j))) / dt;
            let d1 = (flux1(ip, j) - flux1(im, j)) / (2.0 * g.dx1());
            let d2 = (flux2(i, j + 1) - flux2(i, j - 1)) / (2.0 * g.dx2());
            out[g.index(i, j)] = dt_term + d1 + d2;
        }
    }
    out
}

/// `L1` norm of the entropy residual over the interior rows.
pub fn entropy_residual(
    entropy: Entropy,
    before: &DensityField,
    now: &DensityField,
    after: &DensityField,
    v: &VelocityField,
) -> f64 {
    entropy_residual_field(entropy, before, now, after, v)
        .iter()
        .map(|r| r.abs())
        .sum::<f64>()
        * now.grid.cell_area()
}

/// `max |2(m - rho v) + (1 - rho^2) e2| - (1 - rho^2)`.
pub fn hull_check(rho: &DensityField, v: &VelocityField, m: &FluxField) -> f64 {
    rho.values
        .iter()
        .zip(&v.values)
        .zip(&m.values)
        .map(|((&r, u), mm)| {
            let w = 1.0 - r * r;
            let a = 2.0 * (mm[0] - r * u[0]);
            let b = 2.0 * (mm[1] - r * u[1]) + w;
            a.hypot(b) - w
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Closed-form flat solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatSample {
    pub rho: f64,
    pub v2: f64,
    pub m2: f64,
    pub e_rel: f64,
    pub de_dt: f64,
}

pub fn flat_oracle(t: f64, x2: f64) -> FlatSample {
    let rho = (x2 / (2.0 * t)).clamp(-1.0, 1.0);
    FlatSample {
        rho,
        v2: 0.0,
        m2: -(1.0 - rho * rho),
        e_rel: -8.0 * PI * t * t / 3.0,
        de_dt: -16.0 * PI * t / 3.0,
    }
}

/// Least-squares slope of `log r` against `log t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionFit {
    pub slope: Option<f64>,
    pub exact_zero: bool,
}

pub fn expansion_check(times: &[f64], remainders: &[f64]) -> ExpansionFit {
    if remainders.iter().all(|&r| r == 0.0) {
        return ExpansionFit {
            slope: None,
            exact_zero: true,
        };
    }
    ExpansionFit {
        slope: Some(log_log_slope(times, remainders)),
        exact_zero: false,
    }
}

pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&a, &b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Largest difference quotient of `rho` between neighbouring samples.
pub fn lipschitz_constant(rho: &DensityField) -> f64 {
    let g = &rho.grid;
    let mut best = 0.0f64;
    for j in 0..g.n2 {
        for i in 0..g.n1 {
            let r = rho.at(i, j);
            best = best.max((rho.at((i + 1) % g.n1, j) - r).abs() / g.dx1());
            if j + 1 < g.n2 {
                best = best.max((rho.at(i, j + 1) - r).abs() / g.dx2());
            }
        }
    }
    best
}

/// Largest `|v(x) - v(x')| / (|x - x'| |log |x - x'||)` over neighbouring samples.
pub fn log_lipschitz_modulus(v: &VelocityField) -> f64 {
    let g = &v.grid;
    let q = |a: [f64; 2], b: [f64; 2], d: f64| (a[0] - b[0]).hypot(a[1] - b[1]) / (d * d.ln().abs());
    let mut best = 0.0f64;
    for j in 0..g.n2 {
        for i in 0..g.n1 {
            let a = v.values[g.index(i, j)];
            best = best.max(q(a, v.values[g.index((i + 1) % g.n1, j)], g.dx1()));
            if j + 1 < g.n2 {
                best = best.max(q(a, v.values[g.index(i, j + 1)], g.dx2()));
            }
        }
    }
    best
}

/// `L1` norm of `d_t rho + v . grad rho + 2 rho d2 rho` over cells strictly
/// inside the mixing zone, by centred differences.
pub fn transport_residual(before: &DensityField, now: &DensityField, after: &DensityField, v: &VelocityField) -> f64 {
    let g = &now.grid;
    let dt = after.time - before.time;
    let mut sum = 0.0;
    for j in 1..g.n2 - 1 {
        for i in 0..g.n1 {
            let (ip, im) = ((i + 1) % g.n1, (i + g.n1 - 1) % g.n1);
            let stencil = [now.at(i, j), now.at(ip, j), now.at(im, j), now.at(i, j + 1), now.at(i, j - 1)];
            if stencil.iter().any(|r| r.abs() >= 1.0) {
                continue;
            }
            let r = stencil[0];
            let d1 = (stencil[1] - stencil[2]) / (2.0 * g.dx1());
            let d2 = (stencil[3] - stencil[4]) / (2.0 * g.dx2());
            let u = v.values[g.index(i, j)];
            let res = (after.at(i, j) - before.at(i, j)) / dt + u[0] * d1 + u[1] * d2 + 2.0 * r * d2;
            sum += res.abs();
        }
    }
    sum * g.cell_area()
}

/// Discrete divergence and curl defect (`curl v + d1 rho`) in the `L1` norm,
/// by centred differences on interior rows.
pub fn velocity_defects(rho: &DensityField, v: &VelocityField) -> (f64, f64) {
    let g: &Grid = &v.grid;
    let (mut div, mut curl) = (0.0, 0.0);
    for j in 1..g.n2 - 1 {
        for i in 0..g.n1 {
            let (ip, im) = ((i + 1) % g.n1, (i + g.n1 - 1) % g.n1);
            let at = |a: usize, b: usize| v.values[g.index(a, b)];
            let d1v1 = (at(ip, j)[0] - at(im, j)[0]) / (2.0 * g.dx1());
            let d2v2 = (at(i, j + 1)[1] - at(i, j - 1)[1]) / (2.0 * g.dx2());
            let d1v2 = (at(ip, j)[1] - at(im, j)[1]) / (2.0 * g.dx1());
            let d2v1 = (at(i, j + 1)[0] - at(i, j - 1)[0]) / (2.0 * g.dx2());
            let d1r = (rho.at(ip, j) - rho.at(im, j)) / (2.0 * g.dx1());
            div += (d1v1 + d2v2).abs();
            curl += (d1v2 - d2v1 + d1r).abs();
        }
    }
    (div * g.cell_area(), curl * g.cell_area())
}

/// Gap between two density fields on the same grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityGap {
    pub time: f64,
    pub l1: f64,
    pub linf: f64,
    /// Area where the reference density lies strictly inside `(-1, 1)`.
    pub mixing_area: f64,
}

impl DensityGap {
    /// `l1` relative to the mixing-zone area; the plain `l1` when the zone is empty.
    pub fn relative_l1(&self) -> f64 {
        if self.mixing_area > 0.0 {
            self.l1 / self.mixing_area
        } else {
            self.l1
        }
    }
}

/// L1 and sup gaps of `other` against `reference`.
pub fn density_gap(reference: &DensityField, other: &DensityField) -> DensityGap {
    assert_eq!(reference.grid, other.grid, "fields live on different grids");
    let area = reference.grid.cell_area();
    let (mut l1, mut linf) = (0.0, 0.0f64);
    for (a, b) in reference.values.iter().zip(&other.values) {
        l1 += (a - b).abs();
        linf = linf.max((a - b).abs());
    }
    let mixed = reference.values.iter().filter(|r| r.abs() < 1.0).count();
    DensityGap {
        time: reference.time,
        l1: l1 * area,
        linf,
        mixing_area: mixed as f64 * area,
    }
}

/// Diagnostics gathered at one time node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub mass_error: f64,
    pub e_rel: f64,
    pub dissipation_lhs: f64,
    pub dissipation_rhs: f64,
    pub entropy_residual: BTreeMap<String, f64>,
    pub hull_violation_max: f64,
}

impl DiagnosticsRecord {
    pub fn is_finite(&self) -> bool {
        [self.time, self.mass_error, self.e_rel, self.dissipation_lhs, self.dissipation_rhs, self.hull_violation_max]
            .iter()
            .chain(self.entropy_residual.values())
            .all(|v| v.is_finite())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "time: {:.16e}", self.time).unwrap();
        writeln!(out, "mass_error: {:.16e}", self.mass_error).unwrap();
        writeln!(out, "e_rel: {:.16e}", self.e_rel).unwrap();
        writeln!(out, "dissipation_lhs: {:.16e}", self.dissipation_lhs).unwrap();
        writeln!(out, "dissipation_rhs: {:.16e}", self.dissipation_rhs).unwrap();
        for (k, v) in &self.entropy_residual {
            writeln!(out, "entropy_residual[{k}]: {v:.16e}").unwrap();
        }
        writeln!(out, "hull_violation_max: {:.16e}", self.hull_violation_max).unwrap();
        out
    }
}

/// One CSV table with a row per record.
pub fn records_to_csv(records: &[DiagnosticsRecord]) -> String {
    let names: Vec<String> = records
        .first()
        .map(|r| r.entropy_residual.keys().cloned().collect())
        .unwrap_or_default();
    let mut out = String::from("time,mass_error,e_rel,dissipation_lhs,dissipation_rhs,hull_violation_max");
    for n in &names {
        write!(out, ",entropy[{n}]").unwrap();
    }
    out.push('\n');
    for r in records {
        write!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.time, r.mass_error, r.e_rel, r.dissipation_lhs, r.dissipation_rhs, r.hull_violation_max
        )
        .unwrap();
        for n in &names {
            write!(out, ",{:.16e}", r.entropy_residual.get(n).copied().unwrap_or(f64::NAN)).unwrap();
        }
        out.push('\n');
    }
    out
}
