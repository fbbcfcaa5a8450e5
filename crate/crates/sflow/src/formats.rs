//! On-disk formats: matrices, operators, path files, configs and the CSV
//! grids written by scans.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sflow_core::flow::{Interpolation, Operator, OperatorPath, PathKind};
use sflow_core::geodesic::{GeodesicRecord, IndexRecord};
use sflow_core::scan::{ParameterChart, ScanResult};
use sflow_core::{SignCompactOperator, SymmetricMatrix};

use crate::error::{CliError, Result};

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })
}

/// `{"dim": N, "entries": [[...], ...]}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub dim: usize,
    pub entries: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<SymmetricMatrix> {
        if self.entries.len() != self.dim || self.entries.iter().any(|r| r.len() != self.dim) {
            return Err(config(format!("matrix rows do not match dim = {}", self.dim)));
        }
        Ok(SymmetricMatrix::from_rows(&self.entries)?)
    }
}

impl From<&SymmetricMatrix> for MatrixJson {
    fn from(m: &SymmetricMatrix) -> Self {
        Self { dim: m.dim(), entries: m.rows() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignCompactJson {
    pub j_window: Vec<i8>,
    pub k_window: Vec<Vec<f64>>,
    pub tail_plus: bool,
    pub tail_minus: bool,
}

impl SignCompactJson {
    pub fn to_operator(&self) -> Result<SignCompactOperator> {
        let n = self.j_window.len();
        if self.k_window.len() != n || self.k_window.iter().any(|r| r.len() != n) {
            return Err(config("k_window must be square with the size of j_window"));
        }
        let k = SymmetricMatrix::from_rows(&self.k_window)?;
        Ok(SignCompactOperator::new(self.j_window.clone(), k, self.tail_plus, self.tail_minus)?)
    }
}

impl From<&SignCompactOperator> for SignCompactJson {
    fn from(s: &SignCompactOperator) -> Self {
        Self {
            j_window: s.j_window().to_vec(),
            k_window: s.k_window().rows(),
            tail_plus: s.tail_plus(),
            tail_minus: s.tail_minus(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorJson {
    Dense(MatrixJson),
    SignCompact(SignCompactJson),
}

impl OperatorJson {
    pub fn to_operator(&self) -> Result<Operator> {
        Ok(match self {
            OperatorJson::Dense(m) => Operator::Dense(m.to_matrix()?),
            OperatorJson::SignCompact(s) => Operator::SignCompact(s.to_operator()?),
        })
    }
}

impl From<&Operator> for OperatorJson {
    fn from(op: &Operator) -> Self {
        match op {
            Operator::Dense(m) => OperatorJson::Dense(m.into()),
            Operator::SignCompact(s) => OperatorJson::SignCompact(s.into()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindJson {
    Dense,
    SignCompact,
}

impl From<KindJson> for PathKind {
    fn from(k: KindJson) -> Self {
        match k {
            KindJson::Dense => PathKind::Dense,
            KindJson::SignCompact => PathKind::SignCompact,
        }
    }
}

impl From<PathKind> for KindJson {
    fn from(k: PathKind) -> Self {
        match k {
            PathKind::Dense => KindJson::Dense,
            PathKind::SignCompact => KindJson::SignCompact,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationJson {
    #[default]
    Linear,
    CubicSpline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleJson {
    pub t: f64,
    pub operator: OperatorJson,
}

/// `{"kind": ..., "samples": [{"t": ..., "operator": ...}], "interpolation": "linear"}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathFile {
    pub kind: KindJson,
    pub samples: Vec<SampleJson>,
    #[serde(default)]
    pub interpolation: InterpolationJson,
}

impl PathFile {
    pub fn to_path(&self, gap: f64) -> Result<OperatorPath> {
        let mut samples = Vec::with_capacity(self.samples.len());
        for s in &self.samples {
            let op = s.operator.to_operator()?;
            if PathKind::from(self.kind) != op.kind() {
                return Err(config(format!("sample at t = {} does not have the declared kind", s.t)));
            }
            samples.push((s.t, op));
        }
        let interpolation = match self.interpolation {
            InterpolationJson::Linear => Interpolation::Linear,
            InterpolationJson::CubicSpline => Interpolation::CubicSpline,
        };
        Ok(OperatorPath::from_samples(samples, interpolation, gap)?)
    }

    /// Samples `path` at `n + 1` uniform points.
    pub fn from_path(path: &OperatorPath, n: usize, interpolation: InterpolationJson) -> Result<Self> {
        let samples = (0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                Ok(SampleJson { t, operator: (&path.sample(t)?).into() })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind: path.kind().into(), samples, interpolation })
    }
}

/// Matrix CSV: a `dim=N` line followed by `N` comma-separated rows.
pub fn matrix_to_csv(m: &SymmetricMatrix) -> String {
    let mut s = format!("dim={}\n", m.dim());
    for i in 0..m.dim() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn matrix_from_csv(text: &str) -> Result<SymmetricMatrix> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| config("empty matrix file"))?;
    let dim: usize = header
        .strip_prefix("dim=")
        .and_then(|d| d.trim().parse().ok())
        .ok_or_else(|| config("matrix CSV must start with `dim=N`"))?;
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| config(format!("bad matrix entry `{v}`: {e}"))))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixJson { dim, entries: rows }.to_matrix()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    #[default]
    Fast,
    Confirm,
}

/// `{"family", "bounds", "resolution", "identify", "basepoint", "mode"}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub family: String,
    pub bounds: Vec<[f64; 2]>,
    pub resolution: Vec<usize>,
    #[serde(default)]
    pub identify: Vec<bool>,
    pub basepoint: Vec<f64>,
    #[serde(default)]
    pub mode: ScanMode,
}

impl ScanConfig {
    pub fn chart(&self) -> Result<ParameterChart> {
        let d = self.bounds.len();
        let identify = if self.identify.is_empty() { vec![false; d] } else { self.identify.clone() };
        Ok(ParameterChart::new(self.bounds.iter().map(|b| (b[0], b[1])).collect(), self.resolution.clone(), identify)?)
    }
}

fn default_mesh() -> usize {
    200
}

/// `{"geometry", "lambda", "p", "v", "mesh"}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicConfig {
    pub geometry: String,
    #[serde(default)]
    pub lambda: Vec<f64>,
    pub p: Vec<f64>,
    pub v: Vec<f64>,
    #[serde(default = "default_mesh")]
    pub mesh: usize,
}

/// `t, x0.., v0..` per sample.
pub fn geodesic_csv(rec: &GeodesicRecord) -> String {
    let m = rec.dim;
    let mut s = String::from("t");
    for i in 0..m {
        let _ = write!(s, ",x{i}");
    }
    for i in 0..m {
        let _ = write!(s, ",v{i}");
    }
    s.push('\n');
    for i in 0..rec.samples() {
        let _ = write!(s, "{:e}", rec.times[i]);
        for v in rec.positions[i][..m].iter().chain(&rec.velocities[i][..m]) {
            let _ = write!(s, ",{v:e}");
        }
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjugateJson {
    pub t: f64,
    pub multiplicity: usize,
    pub sign_contribution: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingJson {
    pub t: f64,
    pub direction: i32,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexJson {
    pub conjugate_instants: Vec<ConjugateJson>,
    pub morse_index: Option<i64>,
    pub spectral_index: Option<i64>,
    pub fem_mesh: usize,
    pub degenerate: bool,
    pub s0: f64,
    pub crossings: Vec<CrossingJson>,
    pub mesh_stable: Option<bool>,
    pub energy_drift: f64,
}

impl IndexJson {
    pub fn new(r: &IndexRecord, rec: &GeodesicRecord) -> Self {
        Self {
            conjugate_instants: r
                .conjugate_instants
                .iter()
                .map(|c| ConjugateJson { t: c.t, multiplicity: c.multiplicity, sign_contribution: c.sign_contribution })
                .collect(),
            morse_index: r.morse_index,
            spectral_index: r.spectral_index,
            fem_mesh: r.fem_mesh,
            degenerate: r.degenerate,
            s0: r.s0,
            crossings: r
                .crossings
                .iter()
                .map(|c| CrossingJson { t: c.t, direction: c.direction, multiplicity: c.multiplicity })
                .collect(),
            mesh_stable: r.mesh_stable,
            energy_drift: rec.energy_drift,
        }
    }
}

/// Header naming the node coordinates, then one row per node in flat order.
fn grid_csv<T: std::fmt::Display>(chart: &ParameterChart, name: &str, values: impl Iterator<Item = T>) -> String {
    let d = chart.dim();
    let mut s = String::new();
    for a in 0..d {
        let _ = write!(s, "i{a},");
    }
    for a in 0..d {
        let _ = write!(s, "x{a},");
    }
    s.push_str(name);
    s.push('\n');
    for (k, v) in values.enumerate() {
        for i in chart.multi_index(k) {
            let _ = write!(s, "{i},");
        }
        for x in chart.point(k) {
            let _ = write!(s, "{x:e},");
        }
        let _ = writeln!(s, "{v}");
    }
    s
}

pub fn degeneracy_csv(chart: &ParameterChart, r: &ScanResult) -> String {
    grid_csv(chart, "margin", r.nodes.iter().map(|n| format!("{:e}", n.margin)))
}

pub fn mask_csv(chart: &ParameterChart, r: &ScanResult) -> String {
    grid_csv(chart, "masked", r.mask.iter().map(|&m| u8::from(m)))
}

/// Component id and label; `-` marks masked or unreached nodes.
pub fn components_csv(chart: &ParameterChart, r: &ScanResult) -> String {
    let show = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    grid_csv(
        chart,
        "component,label",
        (0..chart.len()).map(|k| {
            let c = r.components[k].map(|c| c.to_string());
            format!("{},{}", show(c), show(r.node_label(k).map(|l| l.to_string())))
        }),
    )
}
