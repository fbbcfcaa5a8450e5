//! Built-in demos and scan families. Each demo computes its headline numbers,
//! compares them with fixed expectations and returns the artifacts to write.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};
use sflow_core::family::{find_bifurcation_on_path, registry as family_registry, segment, DetectOptions, FunctionalFamily};
use sflow_core::flow::{compact_projection_path, sfl_crossings, sfl_endpoint, DEFAULT_N_INIT, DEFAULT_TOL};
use sflow_core::geodesic::{self, geodesic_shoot, spectral_index, GeodesicModel, SigmaFn};
use sflow_core::scan::{confirm_mask, torus_chart, FamilyModel, ParameterChart, ScanModel, ScanResult};
use sflow_core::{relative_morse_index_sc, SignCompactOperator, SymmetricMatrix, DEFAULT_GAP};

use crate::driver::parallel_scan;
use crate::error::{CliError, Result};
use crate::formats::{components_csv, degeneracy_csv, geodesic_csv, mask_csv, IndexJson};
use crate::output::Artifacts;
use crate::svg::scan_svg;

pub const DEMOS: [&str; 5] = ["krasnoselskii", "torus", "sphere-tm", "ellipsoid", "split-spheres"];

/// Names accepted by `scan --config` besides the functional families.
pub const GEODESIC_SCANS: [&str; 3] = ["sphere_tm", "ellipsoid_equator", "flat_torus_lines"];

/// Numerical knobs shared by all subcommands.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub gap: f64,
    pub tol: f64,
    pub n_init: usize,
    pub seed: u64,
    /// Overrides the per-axis resolution of scan demos.
    pub resolution: Option<usize>,
    /// Overrides the finite-element mesh of geodesic computations.
    pub mesh: Option<usize>,
}

impl Default for Settings {
    fn default() -> Self {
        Self { gap: DEFAULT_GAP, tol: DEFAULT_TOL, n_init: DEFAULT_N_INIT, seed: 0, resolution: None, mesh: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: Value,
    pub actual: Value,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, expected: impl Serialize, actual: impl Serialize) -> Self {
        let (expected, actual) = (json!(expected), json!(actual));
        Self { name: name.into(), pass: expected == actual, expected, actual }
    }

    pub fn holds(name: &str, pass: bool, detail: impl Serialize) -> Self {
        Self { name: name.into(), expected: json!(true), actual: json!(detail), pass }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub artifacts: Artifacts,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn failed(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }
}

pub fn run_demo(name: &str, s: &Settings) -> Result<Outcome> {
    match name {
        "krasnoselskii" => krasnoselskii(s),
        "torus" => torus(s),
        "sphere-tm" => sphere_tm(s),
        "ellipsoid" => ellipsoid(s),
        "split-spheres" => split_spheres(s),
        _ => Err(CliError::Config(format!("unknown demo `{name}`; expected one of {}", DEMOS.join(", ")))),
    }
}

/// Node and edge model behind a scan config `family` name.
pub enum ScanFamily {
    Functional(FamilyModel),
    Geodesic(GeodesicModel),
}

impl ScanFamily {
    pub fn by_name(name: &str, s: &Settings) -> Result<Self> {
        let mesh = s.mesh.unwrap_or(64);
        match name {
            "sphere_tm" => Ok(ScanFamily::Geodesic(sphere_tm_model(mesh)?)),
            "ellipsoid_equator" => Ok(ScanFamily::Geodesic(ellipsoid_model(mesh)?)),
            "flat_torus_lines" => {
                let sigma: SigmaFn = Arc::new(|x: &[f64]| Ok((vec![], vec![0.0, 0.0], x.to_vec())));
                let mut m = GeodesicModel::new(geodesic::registry("flat_torus")?, sigma);
                m.mesh = mesh;
                Ok(ScanFamily::Geodesic(m))
            }
            _ => Ok(ScanFamily::Functional(FamilyModel::new(family_registry(name)?).with_gap(s.gap))),
        }
    }

    pub fn model(&self) -> &dyn ScanModel {
        match self {
            ScanFamily::Functional(m) => m,
            ScanFamily::Geodesic(m) => m,
        }
    }

    pub fn functional(&self) -> Option<&FunctionalFamily> {
        match self {
            ScanFamily::Functional(m) => Some(&m.family),
            ScanFamily::Geodesic(_) => None,
        }
    }
}

/// Equator geodesics of the unit sphere of speed `|v|`, indexed by polar
/// coordinates `(|v|, angle)` of `T_p S²`. The chart excludes the poles, so
/// every direction is represented by its image under the rotation about `p`
/// that carries it to the equator; the index is invariant under isometries.
pub fn sphere_tm_model(mesh: usize) -> Result<GeodesicModel> {
    let sigma: SigmaFn = Arc::new(|x: &[f64]| Ok((vec![], vec![PI / 2.0, 0.0], vec![0.0, x[0]])));
    let mut m = GeodesicModel::new(geodesic::registry("round_sphere(1)")?, sigma);
    m.mesh = mesh;
    Ok(m)
}

/// Equator of the ellipsoid with axis ratio `c`, traversed for length `L`.
pub fn ellipsoid_model(mesh: usize) -> Result<GeodesicModel> {
    let sigma: SigmaFn = Arc::new(|x: &[f64]| Ok((vec![x[0]], vec![PI / 2.0, 0.0], vec![0.0, x[1]])));
    let mut m = GeodesicModel::new(geodesic::registry("ellipsoid_revolution")?, sigma);
    m.mesh = mesh;
    Ok(m)
}

/// Grids, SVG and a summary of one scan.
pub fn scan_artifacts(out: &mut Artifacts, chart: &ParameterChart, r: &ScanResult, title: &str) -> Value {
    out.add("degeneracy.csv", degeneracy_csv(chart, r));
    out.add("mask.csv", mask_csv(chart, r));
    out.add("components.csv", components_csv(chart, r));
    out.add("scan.svg", scan_svg(chart, r, title));
    scan_summary(chart, r)
}

pub fn scan_summary(chart: &ParameterChart, r: &ScanResult) -> Value {
    let rep = &r.report;
    json!({
        "resolution": rep.resolution,
        "basepoint": chart.point(r.basepoint),
        "component_count": rep.component_count,
        "labels": rep.labels,
        "loop_defect": rep.loop_defect,
        "label_defects": rep.label_defects.len(),
        "masked_nodes": r.mask.iter().filter(|&&m| m).count(),
        "has_interior": rep.has_interior,
        "isolated_cells": rep.isolated_cells,
        "interface_fraction": rep.interface_fraction,
        "disconnected_subwindows": rep.disconnected_subwindows.len(),
        "skipped_edges": rep.skipped_edges.len(),
        "failed_nodes": rep.failed_nodes,
    })
}

fn report(out: &mut Artifacts, demo: &str, values: Value, checks: &[Check]) {
    let pass = checks.iter().all(|c| c.pass);
    out.add_json("report.json", &json!({ "demo": demo, "values": values, "checks": checks, "pass": pass }));
}

fn krasnoselskii(s: &Settings) -> Result<Outcome> {
    let mut out = Artifacts::new();
    let mut checks = Vec::new();

    // id + t K_n, K_n = -2 P_n
    let (mut crossings, mut endpoint, mut mu_rel) = (Vec::new(), Vec::new(), Vec::new());
    for n in 1..=8usize {
        let path = compact_projection_path(n, n)?;
        crossings.push(sfl_crossings(&path, s.n_init, s.tol)?.value);
        endpoint.push(sfl_endpoint(&path)?.value);
        let id = SignCompactOperator::sign(vec![1; n], true, false)?;
        let k = SymmetricMatrix::from_fn(n, |i, j| if i == j { -2.0 } else { 0.0 })?;
        let perturbed = id.with_k(k)?;
        mu_rel.push(relative_morse_index_sc(&perturbed, &id, s.gap)?);
    }
    let minus_n: Vec<i64> = (1..=8).map(|n| -n).collect();
    let n: Vec<i64> = (1..=8).collect();
    checks.push(Check::new("sfl(id + t K_n) by crossings", &minus_n, &crossings));
    checks.push(Check::new("sfl(id + t K_n) by endpoints", &minus_n, &endpoint));
    checks.push(Check::new("mu_rel(id + K_n, id)", &n, &mu_rel));
    out.add_json("sfl.json", &json!({ "n": n, "crossings": crossings, "endpoint": endpoint, "mu_rel": mu_rel }));

    let f = family_registry("krasnoselskii")?;
    let opts = DetectOptions { seed: s.seed, gap: s.gap, ..DetectOptions::default() };
    let search = find_bifurcation_on_path(&f, segment(vec![0.5], vec![4.5]), &opts)?;
    let points: Vec<f64> = search.records.iter().map(|r| r.lambda_star[0]).collect();
    let rounded: Vec<i64> = points.iter().map(|p| p.round() as i64).collect();
    let close = points.iter().all(|p| (p - p.round()).abs() <= 1e-3);
    checks.push(Check::new("bifurcation points", [1, 2, 3, 4], &rounded));
    checks.push(Check::holds("bifurcation points within 1e-3", close, &points));
    let radii: Vec<usize> = search.records.iter().map(|r| r.radius_schedule.len()).collect();
    checks.push(Check::holds("three or more witness radii", radii.iter().all(|&r| r >= 3), &radii));

    let chart = ParameterChart::new(vec![(0.5, 4.5)], vec![s.resolution.unwrap_or(401)], vec![false])?;
    let model = FamilyModel::new(f).with_gap(s.gap);
    let r = parallel_scan(&model, &chart, &[0.5])?;
    let summary = scan_artifacts(&mut out, &chart, &r, "krasnoselskii: Morse index labels on [0.5, 4.5]");
    checks.push(Check::new("components", 5, r.report.component_count));
    checks.push(Check::new("labels", [-4, -3, -2, -1, 0], &r.report.labels));

    let values = json!({
        "sfl_crossings": crossings,
        "sfl_endpoint": endpoint,
        "mu_rel": mu_rel,
        "bifurcation_points": points,
        "kernel_dims": search.records.iter().map(|r| r.kernel_dim).collect::<Vec<_>>(),
        "witness_radii": radii,
        "scan": summary,
    });
    report(&mut out, "krasnoselskii", values, &checks);
    Ok(Outcome { artifacts: out, checks })
}

/// Masked nodes of a 2-D chart form one loop `θ₁ = const` when each
/// `θ₂` row holds exactly one of them, all in the same column.
fn single_circle(chart: &ParameterChart, mask: &[bool]) -> (bool, Vec<usize>) {
    let cols: Vec<usize> = (0..chart.len()).filter(|&k| mask[k]).map(|k| chart.multi_index(k)[0]).collect();
    let rows: Vec<usize> = (0..chart.len()).filter(|&k| mask[k]).map(|k| chart.multi_index(k)[1]).collect();
    let mut sorted = rows.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let ok = !cols.is_empty()
        && cols.iter().all(|&c| c == cols[0])
        && sorted.len() == rows.len()
        && rows.len() == chart.resolution()[1];
    (ok, cols)
}

fn torus(s: &Settings) -> Result<Outcome> {
    let mut out = Artifacts::new();
    let res = s.resolution.unwrap_or(64);
    let chart = torus_chart(res)?;
    let model = FamilyModel::new(family_registry("torus_demo")?).with_gap(s.gap);
    let r = parallel_scan(&model, &chart, &[0.0, 0.0])?;
    let summary = scan_artifacts(&mut out, &chart, &r, "torus_demo: a degenerate circle that does not disconnect");
    let (circle, cols) = single_circle(&chart, &r.mask);
    let theta = cols.first().map(|&c| chart.coordinate(0, c));
    let checks = vec![
        Check::new("components", 1, r.report.component_count),
        Check::new("loop label defect", 1, r.report.loop_defect),
        Check::holds("mask is one circle", circle, json!({ "theta1": theta, "nodes": cols.len() })),
    ];
    report(&mut out, "torus", json!({ "scan": summary, "mask_theta1": theta }), &checks);
    Ok(Outcome { artifacts: out, checks })
}

/// Masked nodes more than one cell away from every curve, and curve
/// cross-sections missing from the mask. Curves are graphs over the axis
/// `1 - along`.
fn curve_fit(
    chart: &ParameterChart,
    mask: &[bool],
    curves: &[f64],
    along: usize,
    curve: impl Fn(&[f64], f64) -> f64,
) -> (Vec<Vec<f64>>, usize) {
    let h = chart.step(along);
    let across = 1 - along;
    let hx = chart.step(across);
    // the curve passes through the box of half-width one cell around `x`
    let near = |x: &[f64], c: f64| {
        (0..=16).any(|i| {
            let mut y = x.to_vec();
            y[across] += hx * (i as f64 / 8.0 - 1.0);
            (x[along] - curve(&y, c)).abs() <= h
        })
    };
    let stray = (0..chart.len())
        .filter(|&k| mask[k])
        .map(|k| chart.point(k))
        .filter(|x| curves.iter().all(|&c| !near(x, c)))
        .collect();
    // every line across the chart that meets a curve meets the mask nearby
    let mut gaps = 0;
    for j in 0..chart.resolution()[across] {
        for &c in curves {
            let mut hit_range = false;
            let mut hit = false;
            for i in 0..chart.resolution()[along] {
                let mut idx = vec![0; 2];
                idx[along] = i;
                idx[across] = j;
                let k = chart.flat_index(&idx);
                let x = chart.point(k);
                let target = curve(&x, c);
                let (lo, hi) = chart.bounds()[along];
                if target > lo + h && target < hi - h {
                    hit_range = true;
                    hit |= mask[k] && (x[along] - target).abs() <= h;
                }
            }
            gaps += usize::from(hit_range && !hit);
        }
    }
    (stray, gaps)
}

fn sphere_tm(s: &Settings) -> Result<Outcome> {
    let mut out = Artifacts::new();
    let res = s.resolution.unwrap_or(128);
    let chart = ParameterChart::new(vec![(0.1, 4.0 * PI), (0.0, 2.0 * PI)], vec![res, res], vec![false, true])?;
    let model = sphere_tm_model(s.mesh.unwrap_or(64))?;
    let r = parallel_scan(&model, &chart, &[0.1, 0.0])?;
    let summary = scan_artifacts(&mut out, &chart, &r, "round sphere: spectral index of exp(tv), |v| in [0.1, 4π]");
    let rings = [PI, 2.0 * PI, 3.0 * PI];
    let (stray, gaps) = curve_fit(&chart, &r.mask, &rings, 0, |_, c| c);
    let checks = vec![
        Check::new("labels", [0, 1, 2, 3], &r.report.labels),
        Check::new("components", 4, r.report.component_count),
        Check::new("masked nodes off the rings |v| = kπ", 0, stray.len()),
        Check::new("ring cross-sections without mask", 0, gaps),
        Check::new("loop label defect", 0, r.report.loop_defect),
    ];
    report(&mut out, "sphere-tm", json!({ "scan": summary }), &checks);
    Ok(Outcome { artifacts: out, checks })
}

fn ellipsoid(s: &Settings) -> Result<Outcome> {
    let mut out = Artifacts::new();
    let res = s.resolution.unwrap_or(64);
    let chart = ParameterChart::new(vec![(0.5, 2.0), (0.5, 7.0)], vec![res, res], vec![false, false])?;
    let model = ellipsoid_model(s.mesh.unwrap_or(64))?;
    let r = parallel_scan(&model, &chart, &[2.0, 0.5])?;
    let summary = scan_artifacts(&mut out, &chart, &r, "ellipsoid equator: spectral index over (c, L)");
    // L = k π c for every k meeting the chart
    let ks = [1.0, 2.0, 3.0, 4.0];
    let (stray, gaps) = curve_fit(&chart, &r.mask, &ks, 1, |x, k| k * PI * x[0]);
    let jumps: Vec<i64> = r.edges.iter().filter(|e| e.value != 0).map(|e| e.value.abs()).collect();
    let unit = jumps.iter().all(|&j| j == 1);
    let wrong: usize = (0..chart.len())
        .filter(|&k| !r.mask[k])
        .filter(|&k| {
            let x = chart.point(k);
            r.node_label(k) != Some((x[1] / (PI * x[0])).floor() as i64)
        })
        .count();
    let checks = vec![
        Check::new("masked nodes off the curves L = kπc", 0, stray.len()),
        Check::new("curve cross-sections without mask", 0, gaps),
        Check::holds("labels change by one across each curve", unit, json!({ "nonzero_edges": jumps.len() })),
        Check::new("labels differing from floor(L / πc)", 0, wrong),
        Check::new("label defects", 0, r.report.label_defects.len()),
    ];
    report(&mut out, "ellipsoid", json!({ "scan": summary }), &checks);
    Ok(Outcome { artifacts: out, checks })
}

fn split_spheres(s: &Settings) -> Result<Outcome> {
    let mut out = Artifacts::new();
    let metric = geodesic::registry("split_spheres(1, 1, 1, 0.7)")?;
    let mesh = s.mesh.unwrap_or(200);
    let mut checks = Vec::new();
    let mut runs = Vec::new();
    for len in [2.0, 4.0, 6.0] {
        let v: Vec<f64> = metric.direction().iter().map(|d| len * d).collect();
        let rec = geodesic_shoot(&metric, &[], metric.base_point(), &v, 512)?;
        let coarse = spectral_index(&rec, &metric, mesh)?;
        let fine = spectral_index(&rec, &metric, 2 * mesh)?;
        let want = (len / PI).floor() as i64 - (0.7 * len / PI).floor() as i64;
        checks.push(Check::new(&format!("spectral index, L = {len}"), Some(want), coarse.spectral_index));
        checks.push(Check::new(&format!("spectral index at doubled mesh, L = {len}"), Some(want), fine.spectral_index));
        checks.push(Check::new(
            &format!("crossings unchanged by mesh doubling, L = {len}"),
            coarse.crossings.len(),
            fine.crossings.len(),
        ));
        if len == 6.0 {
            out.add("geodesic.csv", geodesic_csv(&rec));
        }
        runs.push(json!({ "length": len, "index": IndexJson::new(&coarse, &rec), "fine_index": fine.spectral_index }));
    }
    out.add_json("index.json", &runs);
    report(&mut out, "split-spheres", json!({ "runs": runs }), &checks);
    Ok(Outcome { artifacts: out, checks })
}

/// Scan driven by a config file; `confirm` re-examines masked nodes by
/// searching for bifurcating branches on their segments.
pub fn run_scan(
    family: &ScanFamily,
    chart: &ParameterChart,
    basepoint: &[f64],
    confirm: bool,
    s: &Settings,
) -> Result<(ScanResult, Artifacts)> {
    let mut r = parallel_scan(family.model(), chart, basepoint)?;
    if confirm {
        let f = family
            .functional()
            .ok_or_else(|| CliError::Config("confirm mode needs a functional family".into()))?;
        let opts = DetectOptions { seed: s.seed, gap: s.gap, ..DetectOptions::default() };
        r = confirm_mask(f, chart, &r, &opts)?;
    }
    let mut out = Artifacts::new();
    let summary = scan_artifacts(&mut out, chart, &r, "scan");
    out.add_json("report.json", &json!({ "scan": summary }));
    Ok((r, out))
}
