//! Argument parsing and the subcommand drivers.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 a demo
//! expectation failed, 3 a spectral crossing could not be isolated.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;
use sflow_core::flow::{sfl_crossings, sfl_endpoint, PathKind};
use sflow_core::geodesic::{self, geodesic_shoot, spectral_index};
use sflow_core::{morse_index, DEFAULT_GAP};

use crate::demos::{run_demo, run_scan, ScanFamily, Settings, DEMOS};
use crate::driver::with_threads;
use crate::error::{CliError, Result};
use crate::formats::{geodesic_csv, read_json, GeodesicConfig, IndexJson, PathFile, ScanConfig, ScanMode};
use crate::output::Artifacts;

/// Output samples of geodesics written by `geodesic`.
const GEODESIC_SAMPLES: usize = 512;

#[derive(Debug, Parser)]
#[command(name = "sflow", version, about = "Spectral flow, bifurcation scans and geodesic indices")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
    /// Directory receiving the artifacts.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed for randomized searches.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Invertibility gap for endpoints and degeneracy tests.
    #[arg(long, global = true, default_value_t = DEFAULT_GAP)]
    pub gap: f64,
    /// Length below which a crossing interval counts as isolated.
    #[arg(long, global = true, default_value_t = sflow_core::flow::DEFAULT_TOL)]
    pub tol: f64,
    /// Initial grid points of the crossing search.
    #[arg(long, global = true, default_value_t = sflow_core::flow::DEFAULT_N_INIT)]
    pub n_init: usize,
    /// Per-axis resolution of scan demos.
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    /// Finite-element mesh of geodesic computations.
    #[arg(long, global = true)]
    pub mesh: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a built-in demo and check its expectations.
    Demo {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(DEMOS))]
        name: String,
    },
    /// Spectral flow of a sampled operator path.
    Sfl {
        #[arg(long)]
        path: PathBuf,
    },
    /// Parameter scan of a registered family.
    Scan {
        #[arg(long)]
        config: PathBuf,
    },
    /// Geodesic, conjugate points and spectral index.
    Geodesic {
        #[arg(long)]
        config: PathBuf,
    },
}

impl Args {
    pub fn settings(&self) -> Settings {
        Settings {
            gap: self.gap,
            tol: self.tol,
            n_init: self.n_init,
            seed: self.seed,
            resolution: self.resolution,
            mesh: self.mesh,
        }
    }
}

pub fn run(args: &Args) -> Result<i32> {
    if !(args.gap > 0.0 && args.tol > 0.0) || args.n_init < 2 || args.threads == Some(0) {
        return Err(CliError::Config("gap and tol must be positive, n-init at least 2, threads nonzero".into()));
    }
    let s = args.settings();
    let out = args.out.as_path();
    with_threads(args.threads, || match &args.command {
        Command::Demo { name } => demo(name, &s, out),
        Command::Sfl { path } => sfl(path, &s, out),
        Command::Scan { config } => scan(config, &s, out),
        Command::Geodesic { config } => geodesic_cmd(config, &s, out),
    })
}

fn demo(name: &str, s: &Settings, out: &Path) -> Result<i32> {
    let outcome = run_demo(name, s)?;
    outcome.artifacts.write_to(out)?;
    for c in &outcome.checks {
        println!("{} {}: {}", if c.pass { "ok  " } else { "FAIL" }, c.name, c.actual);
    }
    match outcome.failed() {
        0 => Ok(0),
        failed => Err(CliError::Expectation { failed }),
    }
}

fn sfl(path: &Path, s: &Settings, out: &Path) -> Result<i32> {
    let file: PathFile = read_json(path)?;
    let p = file.to_path(s.gap)?;
    let mut artifacts = Artifacts::new();
    let result = match sfl_crossings(&p, s.n_init, s.tol) {
        Ok(r) => r,
        Err(e @ sflow_core::Error::UnresolvedCrossing { lo, hi }) => {
            artifacts.add_json("sfl.json", &json!({ "error": "unresolved crossing", "interval": [lo, hi] }));
            artifacts.write_to(out)?;
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    // second route: endpoint relative index, or Morse indices for dense paths
    let endpoint = match p.kind() {
        PathKind::SignCompact => sfl_endpoint(&p)?.value,
        PathKind::Dense => {
            let m = |t: f64| -> Result<i64> { Ok(morse_index(&p.sample(t)?.window(), s.gap)? as i64) };
            m(0.0)? - m(1.0)?
        }
    };
    let crossings: Vec<_> = result
        .crossings
        .iter()
        .map(|c| json!({ "t": c.t, "direction": c.direction, "multiplicity": c.multiplicity }))
        .collect();
    artifacts.add_json(
        "sfl.json",
        &json!({
            "value": result.value,
            "crossings": crossings,
            "refinement_depth": result.refinement_depth,
            "endpoint_value": endpoint,
            "method_agreement": endpoint == result.value,
        }),
    );
    artifacts.write_to(out)?;
    println!("sfl = {}", result.value);
    Ok(0)
}

fn scan(config: &Path, s: &Settings, out: &Path) -> Result<i32> {
    let cfg: ScanConfig = read_json(config)?;
    let chart = cfg.chart()?;
    let family = ScanFamily::by_name(&cfg.family, s)?;
    let (r, artifacts) = run_scan(&family, &chart, &cfg.basepoint, cfg.mode == ScanMode::Confirm, s)?;
    artifacts.write_to(out)?;
    println!("components = {}, labels = {:?}", r.report.component_count, r.report.labels);
    Ok(0)
}

fn geodesic_cmd(config: &Path, s: &Settings, out: &Path) -> Result<i32> {
    let cfg: GeodesicConfig = read_json(config)?;
    let metric = geodesic::registry(&cfg.geometry)?;
    let rec = geodesic_shoot(&metric, &cfg.lambda, &cfg.p, &cfg.v, GEODESIC_SAMPLES)?;
    let index = spectral_index(&rec, &metric, s.mesh.unwrap_or(cfg.mesh))?;
    let mut artifacts = Artifacts::new();
    artifacts.add("geodesic.csv", geodesic_csv(&rec));
    artifacts.add_json("index.json", &IndexJson::new(&index, &rec));
    artifacts.write_to(out)?;
    match index.spectral_index {
        Some(i) => println!("spectral index = {i}"),
        None => println!("degenerate: t = 1 is conjugate"),
    }
    Ok(0)
}
