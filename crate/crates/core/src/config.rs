//! Declarative run configuration in TOML.

use crate::error::{Error, Result};
use crate::export::Format;
use crate::fv::FvConfig;
use crate::initial_data::AnalyticGraph;
use crate::jko::{JkoConfig, DEFAULT_HALF_WIDTH};
use crate::levelset::SolverConfig;
use crate::reconstruction::default_half_height;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Initial interface: a preset name (`"flat"`, `"cos(amplitude, wavenumber)"`)
/// or a list of `[k, re, im]` Fourier coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InterfaceSpec {
    Preset(String),
    Coefficients(Vec<[f64; 3]>),
}

impl Default for InterfaceSpec {
    fn default() -> Self {
        Self::Preset("flat".into())
    }
}

impl InterfaceSpec {
    pub fn graph(&self) -> Result<AnalyticGraph> {
        match self {
            Self::Preset(name) => parse_preset(name),
            Self::Coefficients(entries) => {
                let mut n = 0i64;
                for e in entries {
                    if e[0].fract() != 0.0 {
                        return Err(Error::Config(format!("interface: wavenumber {} is not an integer", e[0])));
                    }
                    n = n.max(e[0].abs() as i64);
                }
                let mut coeffs = vec![Complex64::new(0.0, 0.0); (2 * n + 1) as usize];
                for e in entries {
                    coeffs[(e[0] as i64 + n) as usize] += Complex64::new(e[1], e[2]);
                }
                AnalyticGraph::from_coeffs(coeffs).map_err(|e| Error::Config(format!("interface: {e}")))
            }
        }
    }
}

fn parse_preset(name: &str) -> Result<AnalyticGraph> {
    let name = name.trim();
    if name == "flat" {
        return Ok(AnalyticGraph::flat());
    }
    let bad = || Error::Config(format!("interface: unknown preset `{name}`"));
    let args = name
        .strip_prefix("cos(")
        .and_then(|rest| rest.strip_suffix(')'))
        .ok_or_else(bad)?;
    let (amplitude, wavenumber) = args.split_once(',').ok_or_else(bad)?;
    let amplitude: f64 = amplitude.trim().parse().map_err(|_| bad())?;
    let wavenumber: usize = wavenumber.trim().parse().map_err(|_| bad())?;
    if !amplitude.is_finite() || wavenumber == 0 {
        return Err(Error::Config("interface: cos needs a finite amplitude and a positive wavenumber".into()));
    }
    Ok(AnalyticGraph::cosine(amplitude, wavenumber))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub modes: usize,
    pub quad_points: usize,
    pub n2: usize,
    pub time_nodes: usize,
    pub time_ratio: f64,
    pub sub_nodes: usize,
    pub grading: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub s0_quad: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            modes: 16,
            quad_points: 32,
            n2: 17,
            time_nodes: 14,
            time_ratio: 0.7,
            sub_nodes: 32,
            grading: 2.0,
            tol: 1e-10,
            max_iters: 40,
            s0_quad: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionSection {
    pub n1: usize,
    pub n2: usize,
    /// Strip half-height; derived from the data and horizon when absent.
    pub half_height: Option<f64>,
    pub quad_points: usize,
}

impl Default for ReconstructionSection {
    fn default() -> Self {
        Self {
            n1: 128,
            n2: 128,
            half_height: None,
            quad_points: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FvSection {
    pub n1: usize,
    pub n2: usize,
    /// Strip half-height; derived from the data and horizon when absent.
    pub half_height: Option<f64>,
    pub cfl: f64,
    pub entropy_constants: Vec<f64>,
}

impl Default for FvSection {
    fn default() -> Self {
        let fv = FvConfig::default();
        Self {
            n1: 256,
            n2: 256,
            half_height: None,
            cfl: fv.cfl,
            entropy_constants: fv.entropy_constants,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JkoSection {
    pub cells: usize,
    pub half_width: f64,
    pub h: f64,
    pub steps: usize,
    pub max_iters: usize,
    pub stationarity: f64,
    pub pinned: usize,
}

impl Default for JkoSection {
    fn default() -> Self {
        let inner = JkoConfig::default();
        Self {
            cells: 128,
            half_width: DEFAULT_HALF_WIDTH,
            h: 0.02,
            steps: 25,
            max_iters: inner.max_iters,
            stationarity: inner.stationarity,
            pinned: inner.pinned,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Allowed L1 gap between level-set and finite-volume densities, as a
    /// fraction of the mixing-zone area.
    pub compare_l1: f64,
    /// Allowed hull-constraint violation.
    pub hull: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            compare_l1: 0.1,
            hull: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub interface: InterfaceSpec,
    pub alpha: f64,
    pub mu: f64,
    pub horizon: f64,
    /// Output times; four equally spaced times up to the horizon when empty.
    pub output_times: Vec<f64>,
    pub output_dir: PathBuf,
    /// Format of exported fields.
    pub export_format: Format,
    pub solver: SolverSection,
    pub reconstruction: ReconstructionSection,
    pub fv: FvSection,
    pub jko: JkoSection,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            interface: InterfaceSpec::default(),
            alpha: 0.5,
            mu: 1.0,
            horizon: 0.1,
            output_times: Vec::new(),
            output_dir: PathBuf::from("out"),
            export_format: Format::Csv,
            solver: SolverSection::default(),
            reconstruction: ReconstructionSection::default(),
            fv: FvSection::default(),
            jko: JkoSection::default(),
            tolerances: Tolerances::default(),
        }
    }
}

fn invalid(message: impl Into<String>) -> Result<()> {
    Err(Error::Config(message.into()))
}

impl RunConfig {
    /// Parse, apply `key=value` overrides and validate.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.interface.graph()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return invalid("alpha out of (0,1)");
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return invalid("mu out of (0,1]");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return invalid("horizon must be positive");
        }
        if self.output_times.iter().any(|&t| !(t > 0.0 && t <= self.horizon)) {
            return invalid("output_times must lie in (0, horizon]");
        }
        if self.output_times.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("output_times must be increasing");
        }
        self.solver_config().validate()?;
        let r = &self.reconstruction;
        for (name, n1, n2, half_height) in [
            ("reconstruction", r.n1, r.n2, r.half_height),
            ("fv", self.fv.n1, self.fv.n2, self.fv.half_height),
        ] {
            if n1 < 4 || !n1.is_power_of_two() {
                return invalid(format!("{name}.n1 must be a power of two"));
            }
            if n2 < 2 * crate::fv::GUARD_ROWS + 2 {
                return invalid(format!("{name}.n2 too small"));
            }
            if half_height.is_some_and(|l| !(l > 0.0)) {
                return invalid(format!("{name}.half_height must be positive"));
            }
        }
        if self.reconstruction.quad_points < 4 {
            return invalid("reconstruction.quad_points must be at least 4");
        }
        self.fv_config().validate()?;
        let j = &self.jko;
        if j.cells < 2 * j.pinned + 2 {
            return invalid("jko.cells too small");
        }
        if !(j.half_width > 0.0) {
            return invalid("jko.half_width must be positive");
        }
        if !(j.h > 0.0) || j.steps == 0 {
            return invalid("jko.h and jko.steps must be positive");
        }
        if !(j.stationarity > 0.0) || j.max_iters == 0 {
            return invalid("jko.stationarity and jko.max_iters must be positive");
        }
        if !(self.tolerances.compare_l1 > 0.0) || !(self.tolerances.hull >= 0.0) {
            return invalid("tolerances must be positive");
        }
        Ok(())
    }

    pub fn graph(&self) -> Result<AnalyticGraph> {
        self.interface.graph()
    }

    pub fn output_times(&self) -> Vec<f64> {
        if self.output_times.is_empty() {
            (1..=4).map(|k| self.horizon * k as f64 / 4.0).collect()
        } else {
            self.output_times.clone()
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            alpha: self.alpha,
            modes: s.modes,
            quad_points: s.quad_points,
            n2: s.n2,
            horizon: self.horizon,
            time_nodes: s.time_nodes,
            time_ratio: s.time_ratio,
            sub_nodes: s.sub_nodes,
            grading: s.grading,
            tol: s.tol,
            max_iters: s.max_iters,
            s0_quad: s.s0_quad,
        }
    }

    fn half_height(&self, configured: Option<f64>) -> f64 {
        configured.unwrap_or_else(|| {
            let amp = self.graph().map(|g| g.max_abs()).unwrap_or(0.0);
            default_half_height(amp, self.horizon)
        })
    }

    pub fn reconstruction_grid(&self) -> crate::reconstruction::Grid {
        let r = &self.reconstruction;
        crate::reconstruction::Grid::cell_centred(r.n1, r.n2, self.half_height(r.half_height))
    }

    pub fn fv_config(&self) -> FvConfig {
        let fv = &self.fv;
        FvConfig {
            n1: fv.n1,
            n2: fv.n2,
            half_height: self.half_height(fv.half_height),
            cfl: self.fv.cfl,
            mu: self.mu,
            entropy_constants: self.fv.entropy_constants.clone(),
        }
    }

    pub fn jko_config(&self) -> JkoConfig {
        JkoConfig {
            max_iters: self.jko.max_iters,
            stationarity: self.jko.stationarity,
            pinned: self.jko.pinned,
        }
    }

    /// Canonical TOML text of the full configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical text, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
    }
}

/// Read and validate a configuration file.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::from_toml(&text, overrides)
}

/// Set a dotted `key=value` in the table. The value is read as TOML and
/// falls back to a plain string.
fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
    let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let path: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = path.split_last().expect("split yields one item");
    let mut node = table;
    for part in parents {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{part}` is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_is_defaulted() {
        let c = RunConfig::from_toml("interface = \"flat\"\n", &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.alpha, 0.5);
        assert_eq!(c.mu, 1.0);
    }

    #[test]
    fn alpha_is_checked() {
        let err = RunConfig::from_toml("alpha = 1.5\n", &[]).unwrap_err();
        assert!(err.to_string().contains("alpha out of (0,1)"), "{err}");
    }

    #[test]
    fn broken_symmetry_is_rejected() {
        let text = "interface = [[1, 0.1, 0.0], [-1, 0.2, 0.0]]\n";
        let err = RunConfig::from_toml(text, &[]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("conjugate symmetry"));
    }

    #[test]
    fn coefficients_and_presets_agree() {
        let list = RunConfig::from_toml("interface = [[1, 0.05, 0.0], [-1, 0.05, 0.0]]\n", &[]).unwrap();
        let preset = RunConfig::from_toml("interface = \"cos(0.1, 1)\"\n", &[]).unwrap();
        assert_eq!(list.graph().unwrap(), preset.graph().unwrap());
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let c = RunConfig::from_toml("", &["fv.cfl=0.3".into(), "interface=cos(0.1, 2)".into()]).unwrap();
        assert_eq!(c.fv.cfl, 0.3);
        assert_eq!(c.interface, InterfaceSpec::Preset("cos(0.1, 2)".into()));
        let err = RunConfig::from_toml("", &["fv.cfl=0.9".into()]).unwrap_err();
        assert!(matches!(err, Error::CflTooLarge(_)), "{err}");
    }

    #[test]
    fn parse_errors_carry_line() {
        let err = RunConfig::from_toml("alpha = 0.5\nmu = = 1\n", &[]).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("alpah = 0.4\n", &[]).is_err());
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.mu = 0.9;
        assert_ne!(a.hash(), b.hash());
        let again = RunConfig::from_toml(&a.to_toml(), &[]).unwrap();
        assert_eq!(again.hash(), a.hash());
    }
}
