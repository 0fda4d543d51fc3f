//! Field, curve and trajectory export in CSV and JSON.
//!
//! CSV files open with `# key: value` metadata lines followed by a header
//! row. Numbers are written with 17 significant digits so that re-reading
//! reproduces every sample bit for bit.

use crate::error::{Error, Result};
use crate::jko::{JkoStepReport, Theta1D};
use crate::reconstruction::{DensityField, FluxField, Grid, VelocityField};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Invalid(format!("unknown format `{other}`"))),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }

    /// Format implied by a file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        path.extension()
            .and_then(|e| e.to_str())
            .ok_or_else(|| Error::Invalid(format!("{} has no extension", path.display())))?
            .parse()
    }
}

/// Gridded samples that can be written and read back.
pub trait GridField: Sized {
    const KIND: &'static str;
    /// Value columns after `x1,x2`.
    const COLUMNS: &'static [&'static str];

    fn grid(&self) -> &Grid;
    fn time(&self) -> f64;
    /// Extra scalar metadata.
    fn metadata(&self) -> Vec<(&'static str, f64)> {
        Vec::new()
    }
    fn sample(&self, k: usize) -> Vec<f64>;
    fn from_samples(grid: Grid, time: f64, metadata: &BTreeMap<String, f64>, samples: Vec<Vec<f64>>) -> Result<Self>;
}

impl GridField for DensityField {
    const KIND: &'static str = "density";
    const COLUMNS: &'static [&'static str] = &["rho"];

    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn time(&self) -> f64 {
        self.time
    }

    fn sample(&self, k: usize) -> Vec<f64> {
        vec![self.values[k]]
    }

    fn from_samples(grid: Grid, time: f64, _: &BTreeMap<String, f64>, samples: Vec<Vec<f64>>) -> Result<Self> {
        Ok(Self {
            grid,
            time,
            values: samples.into_iter().map(|s| s[0]).collect(),
        })
    }
}

impl GridField for VelocityField {
    const KIND: &'static str = "velocity";
    const COLUMNS: &'static [&'static str] = &["v1", "v2"];

    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn time(&self) -> f64 {
        self.time
    }

    fn sample(&self, k: usize) -> Vec<f64> {
        self.values[k].to_vec()
    }

    fn from_samples(grid: Grid, time: f64, _: &BTreeMap<String, f64>, samples: Vec<Vec<f64>>) -> Result<Self> {
        Ok(Self {
            grid,
            time,
            values: samples.into_iter().map(|s| [s[0], s[1]]).collect(),
        })
    }
}

impl GridField for FluxField {
    const KIND: &'static str = "flux";
    const COLUMNS: &'static [&'static str] = &["m1", "m2"];

    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn time(&self) -> f64 {
        self.time
    }

    fn metadata(&self) -> Vec<(&'static str, f64)> {
        vec![("mu", self.mu)]
    }

    fn sample(&self, k: usize) -> Vec<f64> {
        self.values[k].to_vec()
    }

    fn from_samples(grid: Grid, time: f64, metadata: &BTreeMap<String, f64>, samples: Vec<Vec<f64>>) -> Result<Self> {
        let mu = *metadata.get("mu").ok_or_else(|| Error::Parse("flux field without mu".into()))?;
        Ok(Self {
            grid,
            time,
            mu,
            values: samples.into_iter().map(|s| [s[0], s[1]]).collect(),
        })
    }
}

fn number(v: f64) -> String {
    format!("{v:.16e}")
}

fn header_lines(out: &mut String, entries: &[(&str, String)]) {
    for (k, v) in entries {
        writeln!(out, "# {k}: {v}").unwrap();
    }
}

/// CSV text of a field: metadata lines, header `x1,x2,<columns>`, one row
/// per sample in row-major order.
pub fn field_to_csv<F: GridField>(field: &F, config_hash: &str) -> String {
    let g = field.grid();
    let mut out = String::new();
    let mut meta = vec![
        ("kind", F::KIND.to_string()),
        ("config_hash", config_hash.to_string()),
        ("time", number(field.time())),
        ("n1", g.n1.to_string()),
        ("n2", g.n2.to_string()),
        ("half_height", number(g.half_height)),
        ("x1_offset", number(g.x1_offset)),
    ];
    for (k, v) in field.metadata() {
        meta.push((k, number(v)));
    }
    header_lines(&mut out, &meta);
    writeln!(out, "x1,x2,{}", F::COLUMNS.join(",")).unwrap();
    for j in 0..g.n2 {
        for i in 0..g.n1 {
            let row: Vec<String> = field.sample(g.index(i, j)).into_iter().map(number).collect();
            writeln!(out, "{},{},{}", number(g.x1(i)), number(g.x2(j)), row.join(",")).unwrap();
        }
    }
    out
}

/// Metadata lines and data rows of a CSV artifact.
fn split_csv(text: &str) -> (BTreeMap<String, String>, Vec<&str>) {
    let mut meta = BTreeMap::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once(':') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        } else if !line.trim().is_empty() {
            rows.push(line);
        }
    }
    (meta, rows)
}

fn parse_number(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("not a number: `{s}`")))
}

pub fn field_from_csv<F: GridField>(text: &str) -> Result<F> {
    let (meta, rows) = split_csv(text);
    let get = |k: &str| meta.get(k).ok_or_else(|| Error::Parse(format!("missing `{k}` metadata")));
    if get("kind")? != F::KIND {
        return Err(Error::Parse(format!("expected a {} field", F::KIND)));
    }
    let count = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| Error::Parse(format!("bad `{k}`"))) };
    let grid = Grid {
        n1: count("n1")?,
        n2: count("n2")?,
        half_height: parse_number(get("half_height")?)?,
        x1_offset: parse_number(get("x1_offset")?)?,
    };
    let time = parse_number(get("time")?)?;
    let mut extra = BTreeMap::new();
    for (k, v) in &meta {
        if let Ok(x) = v.parse::<f64>() {
            extra.insert(k.clone(), x);
        }
    }
    let (header, body) = rows.split_first().ok_or_else(|| Error::Parse("empty field file".into()))?;
    let expected = format!("x1,x2,{}", F::COLUMNS.join(","));
    if header.trim() != expected {
        return Err(Error::Parse(format!("header `{header}` does not match `{expected}`")));
    }
    if body.len() != grid.len() {
        return Err(Error::Parse(format!("expected {} rows, found {}", grid.len(), body.len())));
    }
    let samples = body
        .iter()
        .map(|line| line.split(',').skip(2).map(parse_number).collect::<Result<Vec<f64>>>())
        .collect::<Result<Vec<_>>>()?;
    if samples.iter().any(|s| s.len() != F::COLUMNS.len()) {
        return Err(Error::Parse("row with the wrong number of columns".into()));
    }
    F::from_samples(grid, time, &extra, samples)
}

pub fn field_to_json<F: GridField>(field: &F, config_hash: &str) -> Value {
    let g = field.grid();
    let columns: Vec<Vec<f64>> = (0..F::COLUMNS.len())
        .map(|c| (0..g.len()).map(|k| field.sample(k)[c]).collect())
        .collect();
    let mut values = serde_json::Map::new();
    for (name, col) in F::COLUMNS.iter().zip(columns) {
        values.insert(name.to_string(), json!(col));
    }
    let mut meta = serde_json::Map::new();
    for (k, v) in field.metadata() {
        meta.insert(k.to_string(), json!(v));
    }
    json!({
        "kind": F::KIND,
        "config_hash": config_hash,
        "time": field.time(),
        "grid": g,
        "metadata": meta,
        "values": values,
    })
}

pub fn field_from_json<F: GridField>(value: &Value) -> Result<F> {
    let bad = |m: &str| Error::Parse(format!("field json: {m}"));
    if value["kind"] != F::KIND {
        return Err(bad("wrong kind"));
    }
    let grid: Grid = serde_json::from_value(value["grid"].clone()).map_err(|e| bad(&e.to_string()))?;
    let time = value["time"].as_f64().ok_or_else(|| bad("time"))?;
    let meta: BTreeMap<String, f64> =
        serde_json::from_value(value["metadata"].clone()).map_err(|e| bad(&e.to_string()))?;
    let mut columns = Vec::new();
    for name in F::COLUMNS {
        let col: Vec<f64> = serde_json::from_value(value["values"][*name].clone()).map_err(|e| bad(&e.to_string()))?;
        if col.len() != grid.len() {
            return Err(bad("column length"));
        }
        columns.push(col);
    }
    let samples = (0..grid.len()).map(|k| columns.iter().map(|c| c[k]).collect()).collect();
    F::from_samples(grid, time, &meta, samples)
}

/// Write a field; I/O errors pass through unchanged.
pub fn export_field<F: GridField>(field: &F, path: &Path, format: Format, config_hash: &str) -> Result<()> {
    let text = match format {
        Format::Csv => field_to_csv(field, config_hash),
        Format::Json => serde_json::to_string_pretty(&field_to_json(field, config_hash)).expect("json encodes"),
    };
    std::fs::write(path, text)?;
    Ok(())
}

pub fn import_field<F: GridField>(path: &Path) -> Result<F> {
    let text = read_artifact(path)?;
    match Format::from_path(path)? {
        Format::Csv => field_from_csv(&text),
        Format::Json => {
            let value: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
            field_from_json(&value)
        }
    }
}

/// Read a file produced by an earlier stage.
pub fn read_artifact(path: &Path) -> Result<String> {
    match std::fs::read_to_string(path) {
        Ok(text) => Ok(text),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingArtifact(path.display().to_string())),
        Err(e) => Err(e.into()),
    }
}

/// Level curves as CSV rows `x1,h,gamma`.
pub fn curves_to_csv(x1: &[f64], levels: &[f64], curves: &[Vec<f64>], time: f64, config_hash: &str) -> String {
    let mut out = String::new();
    header_lines(
        &mut out,
        &[("kind", "curves".into()), ("config_hash", config_hash.into()), ("time", number(time))],
    );
    writeln!(out, "x1,h,gamma").unwrap();
    for (h, curve) in levels.iter().zip(curves) {
        for (x, g) in x1.iter().zip(curve) {
            writeln!(out, "{},{},{}", number(*x), number(*h), number(*g)).unwrap();
        }
    }
    out
}

/// Minimizing-movement profiles as CSV rows `step,time,y,theta`.
pub fn jko_trajectory_to_csv(states: &[Theta1D], h: f64, config_hash: &str) -> String {
    let mut out = String::new();
    header_lines(&mut out, &[("kind", "jko_trajectory".into()), ("config_hash", config_hash.into()), ("h", number(h))]);
    writeln!(out, "step,time,y,theta").unwrap();
    for (k, state) in states.iter().enumerate() {
        for (i, v) in state.values.iter().enumerate() {
            writeln!(out, "{k},{},{},{}", number(k as f64 * h), number(state.y(i)), number(*v)).unwrap();
        }
    }
    out
}

/// One row per minimizing-movement step.
pub fn jko_reports_to_csv(reports: &[JkoStepReport], config_hash: &str) -> String {
    let mut out = String::new();
    header_lines(&mut out, &[("kind", "jko_reports".into()), ("config_hash", config_hash.into())]);
    writeln!(out, "step,h,objective,initial_objective,iterations,converged,euler_lagrange_residual,monotone").unwrap();
    for (k, r) in reports.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            k + 1,
            number(r.h),
            number(r.objective),
            number(r.initial_objective),
            r.iterations,
            r.converged,
            number(r.euler_lagrange_residual),
            r.monotone
        )
        .unwrap();
    }
    out
}

/// `# config_hash` of a CSV artifact or `config_hash` of a JSON one.
pub fn artifact_hash(text: &str) -> Option<String> {
    if let Ok(value) = serde_json::from_str::<Value>(text) {
        return value["config_hash"].as_str().map(str::to_string);
    }
    split_csv(text).0.get("config_hash").cloned()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_density() -> DensityField {
        let grid = Grid::cell_centred(8, 6, 1.5);
        let values = (0..grid.len()).map(|k| ((k as f64) * 0.7311).sin() / 3.0).collect();
        DensityField { grid, time: 0.1, values }
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let rho = sample_density();
        let back: DensityField = field_from_csv(&field_to_csv(&rho, "abc")).unwrap();
        assert_eq!(back, rho);
    }

    #[test]
    fn json_round_trip_is_bitwise() {
        let grid = Grid::cell_centred(4, 10, 2.0);
        let values = (0..grid.len()).map(|k| [k as f64 / 7.0, -(k as f64).sqrt()]).collect();
        let m = FluxField { grid, time: 1.0 / 3.0, mu: 0.9, values };
        let back: FluxField = field_from_json(&field_to_json(&m, "h")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn json_carries_grid_metadata() {
        let v = field_to_json(&sample_density(), "abc");
        assert_eq!(v["grid"]["half_height"], 1.5);
        assert_eq!(v["grid"]["n1"], 8);
        assert_eq!(v["grid"]["n2"], 6);
        assert_eq!(v["time"], 0.1);
        assert_eq!(artifact_hash(&v.to_string()).as_deref(), Some("abc"));
    }

    #[test]
    fn csv_header_schema() {
        let text = field_to_csv(&sample_density(), "abc");
        assert!(text.lines().any(|l| l == "x1,x2,rho"));
        assert_eq!(artifact_hash(&text).as_deref(), Some("abc"));
        let grid = Grid::cell_centred(4, 4, 1.0);
        let v = VelocityField { grid, time: 0.0, values: vec![[0.0; 2]; 16] };
        assert!(field_to_csv(&v, "").lines().any(|l| l == "x1,x2,v1,v2"));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let text = field_to_csv(&sample_density(), "abc");
        assert!(field_from_csv::<VelocityField>(&text).is_err());
    }

    #[test]
    fn missing_file_is_a_missing_artifact() {
        let err = read_artifact(Path::new("/nonexistent/field.csv")).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact(_)));
    }
}
