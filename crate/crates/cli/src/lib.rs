//! Orchestration behind the `macroipm` command.
//!
//! Every subcommand reads a validated [`RunConfig`], writes its artifacts to
//! the configured output directory and stamps each with the config hash.

use macroipm::config::RunConfig;
use macroipm::diagnostics::{
    density_gap, dissipation_identity, entropy_residual, hull_check, mass_error, records_to_csv,
    relative_potential_energy, DiagnosticsRecord, Entropy,
};
use macroipm::export::{
    curves_to_csv, export_field, import_field, jko_reports_to_csv, jko_trajectory_to_csv, read_artifact,
    artifact_hash, Format, GridField,
};
use macroipm::fv;
use macroipm::initial_data::{compute_s0, AnalyticGraph};
use macroipm::jko::{burgers_exact, run_jko, Theta1D};
use macroipm::levelset::{AnsatzField, EtaTrajectory, LevelSetSolver};
use macroipm::reconstruction::{DensityField, FluxField, Reconstructor, VelocityField};
use macroipm::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_MISSING_ARTIFACT: i32 = 4;

pub const ETA_CHECKPOINT: &str = "eta.txt";
pub const CONVERGENCE_REPORT: &str = "convergence.txt";
pub const FIELDS_MANIFEST: &str = "fields.json";
pub const FV_MANIFEST: &str = "fv_fields.json";
pub const FV_DIAGNOSTICS: &str = "fv_diagnostics.csv";
pub const FV_SUMMARY: &str = "fv_summary.txt";
pub const JKO_TRAJECTORY: &str = "jko_trajectory.csv";
pub const JKO_REPORTS: &str = "jko_reports.csv";
pub const JKO_SUMMARY: &str = "jko_summary.txt";
pub const DIAGNOSTICS_CSV: &str = "diagnostics.csv";
pub const DIAGNOSTICS_TEXT: &str = "diagnostics.txt";
pub const COMPARE_TABLE: &str = "compare.csv";

/// Heights `h` of the exported level curves.
pub const CURVE_LEVELS: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SolveLevelset,
    Reconstruct,
    FvRun,
    JkoFlat,
    Diagnose,
    Compare,
}

/// Exit status for a failed command.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_) | Error::Parse(_) | Error::Invalid(_) | Error::CflTooLarge(_) => EXIT_VALIDATION,
        Error::Divergence { .. }
        | Error::Stagnation { .. }
        | Error::MonotonicityViolation { .. }
        | Error::ConeViolation { .. }
        | Error::MaximumPrinciple { .. }
        | Error::BoundaryContamination => EXIT_DIVERGENCE,
        Error::MissingArtifact(_) => EXIT_MISSING_ARTIFACT,
        _ => EXIT_FAILURE,
    }
}

/// Files written at each output time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldEntry {
    pub time: f64,
    pub density: PathBuf,
    pub velocity: PathBuf,
    pub flux: Option<PathBuf>,
    pub curves: Option<PathBuf>,
}

/// Output times and the files holding each snapshot, relative to the output
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub entries: Vec<FieldEntry>,
}

/// Run one subcommand; returns a short summary for the terminal.
pub fn run_command(command: Command, config: &RunConfig) -> Result<String> {
    std::fs::create_dir_all(&config.output_dir)?;
    match command {
        Command::SolveLevelset => solve_levelset(config),
        Command::Reconstruct => reconstruct(config),
        Command::FvRun => fv_run(config),
        Command::JkoFlat => jko_flat(config),
        Command::Diagnose => diagnose(config),
        Command::Compare => compare(config),
    }
}

fn stamped(hash: &str, body: &str) -> String {
    format!("# config_hash: {hash}\n{body}")
}

fn write(config: &RunConfig, name: &str, text: &str) -> Result<PathBuf> {
    let path = config.output_dir.join(name);
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Read an artifact and make sure the current configuration produced it.
fn read_matching(config: &RunConfig, name: &str) -> Result<String> {
    let path = config.output_dir.join(name);
    let text = read_artifact(&path)?;
    check_hash(config, &path, &text)?;
    Ok(text)
}

fn check_hash(config: &RunConfig, path: &Path, text: &str) -> Result<()> {
    match artifact_hash(text) {
        Some(h) if h == config.hash() => Ok(()),
        _ => Err(Error::MissingArtifact(format!(
            "{} was produced by a different configuration",
            path.display()
        ))),
    }
}

fn solve_levelset(config: &RunConfig) -> Result<String> {
    let hash = config.hash();
    let gamma = config.graph()?;
    let mut solver = LevelSetSolver::new(&gamma, config.solver_config())?;
    let outcome = solver.run();
    // the report is written whether or not the iteration converged
    write(config, CONVERGENCE_REPORT, &stamped(&hash, &solver.report().to_text()))?;
    let eta = outcome?;
    write(config, ETA_CHECKPOINT, &stamped(&hash, &eta.to_text()))?;
    let report = solver.report();
    Ok(format!(
        "level-set iteration converged in {} iterations (residual {:.3e})",
        report.iterations, report.residual
    ))
}

fn load_ansatz(config: &RunConfig, gamma: &AnalyticGraph) -> Result<AnsatzField> {
    let eta = EtaTrajectory::from_text(&read_matching(config, ETA_CHECKPOINT)?)?;
    let s0 = compute_s0(gamma, config.solver.s0_quad)?;
    Ok(AnsatzField::new(gamma.clone(), s0, eta))
}

fn field_name(stem: &str, k: usize, format: Format) -> String {
    format!("{stem}_{k}.{}", format.extension())
}

fn reconstruct(config: &RunConfig) -> Result<String> {
    let hash = config.hash();
    let gamma = config.graph()?;
    let reconstructor = Reconstructor::new(load_ansatz(config, &gamma)?, config.reconstruction.quad_points);
    let grid = config.reconstruction_grid();
    let x1: Vec<f64> = (0..grid.n1).map(|i| grid.x1(i)).collect();
    let format = config.export_format;
    let mut entries = Vec::new();
    for (k, &t) in config.output_times().iter().enumerate() {
        let rho = reconstructor.density_field(t, &grid)?;
        let v = reconstructor.velocity_field(t, &grid)?;
        let m = FluxField::assemble(&rho, &v, config.mu);
        let curves = reconstructor.level_curves(t, &CURVE_LEVELS, &x1);
        let entry = FieldEntry {
            time: t,
            density: field_name("density", k, format).into(),
            velocity: field_name("velocity", k, format).into(),
            flux: Some(field_name("flux", k, format).into()),
            curves: Some(format!("curves_{k}.csv").into()),
        };
        let dir = &config.output_dir;
        export_field(&rho, &dir.join(&entry.density), format, &hash)?;
        export_field(&v, &dir.join(&entry.velocity), format, &hash)?;
        export_field(&m, &dir.join(entry.flux.as_ref().unwrap()), format, &hash)?;
        std::fs::write(
            dir.join(entry.curves.as_ref().unwrap()),
            curves_to_csv(&x1, &CURVE_LEVELS, &curves, t, &hash),
        )?;
        entries.push(entry);
    }
    write_manifest(config, FIELDS_MANIFEST, entries)
}

fn write_manifest(config: &RunConfig, name: &str, entries: Vec<FieldEntry>) -> Result<String> {
    let count = entries.len();
    let manifest = Manifest {
        config_hash: config.hash(),
        entries,
    };
    write(config, name, &serde_json::to_string_pretty(&manifest).expect("manifest encodes"))?;
    Ok(format!("wrote {count} snapshots to {}", config.output_dir.display()))
}

fn read_manifest(config: &RunConfig, name: &str) -> Result<Manifest> {
    let text = read_matching(config, name)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{name}: {e}")))
}

fn import_matching<F: GridField>(config: &RunConfig, name: &Path) -> Result<F> {
    let path = config.output_dir.join(name);
    check_hash(config, &path, &read_artifact(&path)?)?;
    import_field(&path)
}

fn fv_run(config: &RunConfig) -> Result<String> {
    let hash = config.hash();
    let gamma = config.graph()?;
    let trajectory = fv::run(&gamma, &config.output_times(), config.fv_config())?;
    let format = config.export_format;
    let mut entries = Vec::new();
    for (k, (rho, v)) in trajectory.densities.iter().zip(&trajectory.velocities).enumerate() {
        let entry = FieldEntry {
            time: rho.time,
            density: field_name("fv_density", k, format).into(),
            velocity: field_name("fv_velocity", k, format).into(),
            flux: None,
            curves: None,
        };
        export_field(rho, &config.output_dir.join(&entry.density), format, &hash)?;
        export_field(v, &config.output_dir.join(&entry.velocity), format, &hash)?;
        entries.push(entry);
    }
    write(config, FV_DIAGNOSTICS, &stamped(&hash, &records_to_csv(&trajectory.records)))?;
    let mut summary = String::new();
    writeln!(summary, "steps: {}", trajectory.steps).unwrap();
    writeln!(summary, "initial_mass: {:.16e}", trajectory.initial_mass).unwrap();
    writeln!(summary, "max_mass_drift: {:.16e}", trajectory.max_mass_drift).unwrap();
    writeln!(summary, "max_entropy_production: {:.16e}", trajectory.max_entropy_production).unwrap();
    write(config, FV_SUMMARY, &stamped(&hash, &summary))?;
    write_manifest(config, FV_MANIFEST, entries)?;
    Ok(format!(
        "finite volumes: {} steps, mass drift {:.3e}, entropy production {:.3e}",
        trajectory.steps, trajectory.max_mass_drift, trajectory.max_entropy_production
    ))
}

fn jko_flat(config: &RunConfig) -> Result<String> {
    let hash = config.hash();
    let j = &config.jko;
    let theta0 = Theta1D::step(j.cells, j.half_width);
    let (states, reports) = run_jko(&theta0, j.h, j.steps, &config.jko_config())?;
    write(config, JKO_TRAJECTORY, &jko_trajectory_to_csv(&states, j.h, &hash))?;
    write(config, JKO_REPORTS, &jko_reports_to_csv(&reports, &hash))?;
    let t = j.h * j.steps as f64;
    let gap = states.last().expect("initial state").l1_distance(|y| burgers_exact(t, y));
    let residual = reports.iter().map(|r| r.euler_lagrange_residual / j.h).fold(0.0, f64::max);
    let converged = reports.iter().all(|r| r.converged);
    let monotone = reports.iter().all(|r| r.monotone);
    let mut summary = String::new();
    writeln!(summary, "time: {t:.16e}").unwrap();
    writeln!(summary, "l1_gap: {gap:.16e}").unwrap();
    writeln!(summary, "max_euler_lagrange_over_h: {residual:.16e}").unwrap();
    writeln!(summary, "all_converged: {converged}").unwrap();
    writeln!(summary, "all_monotone: {monotone}").unwrap();
    write(config, JKO_SUMMARY, &stamped(&hash, &summary))?;
    Ok(format!("minimizing movements to t = {t}: L1 gap {gap:.4e}, converged {converged}"))
}

fn diagnose(config: &RunConfig) -> Result<String> {
    let hash = config.hash();
    let gamma = config.graph()?;
    let manifest = read_manifest(config, FIELDS_MANIFEST)?;
    let mut rho = Vec::new();
    let mut v = Vec::new();
    let mut m = Vec::new();
    for entry in &manifest.entries {
        rho.push(import_matching::<DensityField>(config, &entry.density)?);
        v.push(import_matching::<VelocityField>(config, &entry.velocity)?);
        let flux = entry
            .flux
            .as_ref()
            .ok_or_else(|| Error::MissingArtifact("flux field".into()))?;
        m.push(import_matching::<FluxField>(config, flux)?);
    }
    let initial = |x1: f64, x2: f64| if x2 > gamma.eval_real(x1, 0) { 1.0 } else { -1.0 };
    let times: Vec<f64> = rho.iter().map(|r| r.time).collect();
    let e_rel: Vec<f64> = rho.iter().map(|r| relative_potential_energy(r, initial)).collect();
    let (lhs, rhs) = if times.len() >= 3 {
        dissipation_identity(&times, &e_rel, &m)
    } else {
        (vec![f64::NAN; times.len()], vec![f64::NAN; times.len()])
    };
    let mut records = Vec::new();
    for k in 0..times.len() {
        let mut record = DiagnosticsRecord {
            time: times[k],
            mass_error: mass_error(&rho[k], initial),
            e_rel: e_rel[k],
            dissipation_lhs: lhs[k],
            dissipation_rhs: rhs[k],
            hull_violation_max: hull_check(&rho[k], &v[k], &m[k]),
            ..Default::default()
        };
        for entropy in Entropy::suite() {
            let value = if k > 0 && k + 1 < times.len() {
                entropy_residual(entropy, &rho[k - 1], &rho[k], &rho[k + 1], &v[k])
            } else {
                f64::NAN
            };
            record.entropy_residual.insert(entropy.name(), value);
        }
        records.push(record);
    }
    write(config, DIAGNOSTICS_CSV, &stamped(&hash, &records_to_csv(&records)))?;
    let text: String = records.iter().map(|r| r.to_text() + "\n").collect();
    write(config, DIAGNOSTICS_TEXT, &stamped(&hash, &text))?;
    let hull = records.iter().map(|r| r.hull_violation_max).fold(f64::NEG_INFINITY, f64::max);
    if hull > config.tolerances.hull {
        log::warn!("hull constraint violated by {hull:e}");
    }
    Ok(format!("diagnostics at {} times, max hull violation {hull:.3e}", records.len()))
}

fn compare(config: &RunConfig) -> Result<String> {
    let hash = config.hash();
    let gamma = config.graph()?;
    let manifest = read_manifest(config, FV_MANIFEST)?;
    let reconstructor = Reconstructor::new(load_ansatz(config, &gamma)?, config.reconstruction.quad_points);
    let tolerance = config.tolerances.compare_l1;
    let mut table = String::from("time,l1,linf,mixing_area,relative_l1,tolerance,within_tolerance\n");
    let mut worst = 0.0f64;
    for entry in &manifest.entries {
        let finite_volume: DensityField = import_matching(config, &entry.density)?;
        let level_set = reconstructor.density_field(finite_volume.time, &finite_volume.grid)?;
        let gap = density_gap(&level_set, &finite_volume);
        let relative = gap.relative_l1();
        worst = worst.max(relative);
        writeln!(
            table,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            gap.time,
            gap.l1,
            gap.linf,
            gap.mixing_area,
            relative,
            tolerance,
            relative <= tolerance
        )
        .unwrap();
    }
    write(config, COMPARE_TABLE, &stamped(&hash, &table))?;
    if worst > tolerance {
        log::warn!("relative L1 gap {worst:.4} exceeds the tolerance {tolerance}");
    }
    Ok(format!("largest relative L1 gap {worst:.4e} (tolerance {tolerance})"))
}
