//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the verdicts are always printed; exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sflow::demos::{run_demo, Outcome, Settings};
use sflow_core::family::{find_bifurcation_on_path, registry, segment, DetectOptions};
use sflow_core::flow::{
    compact_projection_path, homotopy_check, sfl_crossings, sfl_endpoint, Interpolation, Operator, OperatorPath,
    PathKind, DEFAULT_N_INIT, DEFAULT_TOL,
};
use sflow_core::geodesic::{self, geodesic_shoot, spectral_index};
use sflow_core::{morse_index, relative_morse_index, SymmetricMatrix};

const GAP: f64 = 1e-8;
/// Endpoints of random paths are kept this far from singular.
const ENDPOINT_MARGIN: f64 = 1e-3;
const LAMBDA_TOL: f64 = 1e-3;
const WITNESS_RATIO: f64 = 5.0;
const WITNESS_RESIDUAL: f64 = 1e-9;
const INSTANT_TOL: f64 = 1e-3;
const ENERGY_DRIFT: f64 = 1e-8;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn timed(limit: Duration, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let v = f();
    let took = start.elapsed();
    let fast = took <= limit;
    verdict(v.pass && fast, format!("{}; {:.2?} (limit {:?})", v.detail, took, limit))
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> SymmetricMatrix {
    let raw: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    SymmetricMatrix::from_fn(n, |i, j| raw[i * n + j] + raw[j * n + i]).unwrap()
}

fn random_invertible(rng: &mut ChaCha8Rng, n: usize) -> SymmetricMatrix {
    loop {
        let m = random_symmetric(rng, n);
        if m.eigenvalues().unwrap().iter().all(|v| v.abs() > ENDPOINT_MARGIN) {
            return m;
        }
    }
}

fn random_path(rng: &mut ChaCha8Rng, n: usize, knots: usize) -> OperatorPath {
    let samples = (0..knots)
        .map(|i| {
            let end = i == 0 || i + 1 == knots;
            let m = if end { random_invertible(rng, n) } else { random_symmetric(rng, n) };
            (i as f64 / (knots - 1) as f64, Operator::Dense(m))
        })
        .collect();
    OperatorPath::from_samples(samples, Interpolation::CubicSpline, GAP).unwrap()
}

fn sfl(p: &OperatorPath) -> i64 {
    sfl_crossings(p, DEFAULT_N_INIT, DEFAULT_TOL).unwrap().value
}

fn morse_at(p: &OperatorPath, t: f64) -> i64 {
    morse_index(&p.sample(t).unwrap().window(), GAP).unwrap() as i64
}

fn krasnoselskii_flow() -> Verdict {
    let mut bad = Vec::new();
    for n in 1..=8usize {
        let p = compact_projection_path(n, n).unwrap();
        let (c, e) = (sfl(&p), sfl_endpoint(&p).unwrap().value);
        if c != n as i64 || e != n as i64 {
            bad.push(format!("n={n}: crossings {c}, endpoint {e}"));
        }
    }
    verdict(bad.is_empty(), if bad.is_empty() { "sfl = n for n = 1..8".into() } else { bad.join("; ") })
}

fn finite_reduction() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = 0;
    for _ in 0..200 {
        let n = rng.random_range(1..=20);
        let p = random_path(&mut rng, n, 5);
        bad += usize::from(sfl(&p) != morse_at(&p, 0.0) - morse_at(&p, 1.0));
    }
    verdict(bad == 0, format!("{bad} of 200 paths differ from the Morse difference"))
}

fn property_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures: Vec<&str> = Vec::new();
    for _ in 0..50 {
        let n = rng.random_range(1..=10);
        let a = random_path(&mut rng, n, 4);
        let b = random_path(&mut rng, n, 4);
        let (ea, sb) = (a.sample(1.0).unwrap(), b.sample(0.0).unwrap());
        let bridge = OperatorPath::new(PathKind::Dense, move |t| Operator::lerp(&ea, &sb, t), GAP).unwrap();
        let joined = a.concatenate(&bridge, 1e-12).unwrap().concatenate(&b, 1e-12).unwrap();
        if sfl(&joined) != sfl(&a) + sfl(&bridge) + sfl(&b) {
            failures.push("concatenation");
        }
        if sfl(&a.reversed()) != -sfl(&a) {
            failures.push("reversal");
        }
        let c = OperatorPath::constant(a.sample(0.0).unwrap(), GAP).unwrap();
        if sfl(&c) != 0 {
            failures.push("constant");
        }
        let r: Vec<f64> = (0..n * n).map(|_| rng.random_range(-0.9..0.9) / n as f64).collect();
        let m = move |t: f64| -> Vec<f64> {
            (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 } + t * r[k]).collect()
        };
        if sfl(&a.congruent(m).unwrap()) != sfl(&a) {
            failures.push("cogredience");
        }
        let (s0, s1) = (random_invertible(&mut rng, n), random_invertible(&mut rng, n));
        let (p0, p1) = (random_symmetric(&mut rng, n), random_symmetric(&mut rng, n));
        let h = move |s: f64, t: f64| {
            let mid = SymmetricMatrix::lerp(&p0, &p1, s)?;
            Ok(Operator::Dense(if t <= 0.5 {
                SymmetricMatrix::lerp(&s0, &mid, 2.0 * t)?
            } else {
                SymmetricMatrix::lerp(&mid, &s1, 2.0 * t - 1.0)?
            }))
        };
        let report = homotopy_check(h, PathKind::Dense, 5, DEFAULT_N_INIT, DEFAULT_TOL, GAP).unwrap();
        if !report.consistent {
            failures.push("homotopy");
        }
    }
    verdict(failures.is_empty(), format!("50 samples, failures: {failures:?}"))
}

fn relative_index() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad = 0;
    for _ in 0..100 {
        let n = rng.random_range(1..=20);
        let (s, t) = (random_invertible(&mut rng, n), random_invertible(&mut rng, n));
        let want = morse_index(&s, GAP).unwrap() as i64 - morse_index(&t, GAP).unwrap() as i64;
        bad += usize::from(relative_morse_index(&s, &t, GAP).unwrap() != want);
    }
    verdict(bad == 0, format!("{bad} of 100 pairs differ"))
}

fn bifurcations() -> Verdict {
    let f = registry("krasnoselskii").unwrap();
    let found = find_bifurcation_on_path(&f, segment(vec![0.5], vec![4.5]), &DetectOptions::default()).unwrap();
    let points: Vec<f64> = found.records.iter().map(|r| r.lambda_star[0]).collect();
    let located = points.len() == 4 && points.iter().zip(1..=4).all(|(p, k)| (p - k as f64).abs() <= LAMBDA_TOL);
    let witnessed = found.records.iter().all(|r| {
        let norms: Vec<f64> =
            r.witnesses.iter().map(|w| w.u.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
        norms.len() >= 3
            && norms.windows(2).all(|w| w[0] >= WITNESS_RATIO * w[1])
            && r.witnesses.iter().all(|w| w.grad_residual <= WITNESS_RESIDUAL)
    });
    verdict(located && witnessed, format!("λ* = {points:?}, witness sequences valid: {witnessed}"))
}

fn checks(outcome: &Outcome) -> Verdict {
    let failed: Vec<String> =
        outcome.checks.iter().filter(|c| !c.pass).map(|c| format!("{} = {}", c.name, c.actual)).collect();
    verdict(failed.is_empty(), if failed.is_empty() { "all demo checks hold".into() } else { failed.join("; ") })
}

fn torus() -> Verdict {
    let s = Settings { resolution: Some(64), ..Settings::default() };
    checks(&run_demo("torus", &s).unwrap())
}

fn sphere_geodesics() -> Verdict {
    let metric = geodesic::registry("round_sphere(1)").unwrap();
    let mut notes = Vec::new();
    let mut pass = true;
    for (len, want) in [(2.0, 0i64), (4.0, 1), (7.0, 2)] {
        let v: Vec<f64> = metric.direction().iter().map(|d| len * d).collect();
        let rec = geodesic_shoot(&metric, &[], metric.base_point(), &v, 512).unwrap();
        let coarse = spectral_index(&rec, &metric, 200).unwrap();
        let fine = spectral_index(&rec, &metric, 400).unwrap();
        let instants_ok = coarse.conjugate_instants.len() == want as usize
            && coarse
                .conjugate_instants
                .iter()
                .enumerate()
                .all(|(k, c)| (c.t * len - (k + 1) as f64 * PI).abs() <= INSTANT_TOL);
        let ok = coarse.spectral_index == Some(want)
            && fine.spectral_index == Some(want)
            && coarse.morse_index == Some(want)
            && instants_ok
            && rec.energy_drift <= ENERGY_DRIFT;
        pass &= ok;
        notes.push(format!(
            "L={len}: fem {:?}/{:?}, conjugate {:?}, drift {:.1e}",
            coarse.spectral_index, fine.spectral_index, coarse.morse_index, rec.energy_drift
        ));
    }
    verdict(pass, notes.join("; "))
}

fn main() {
    let mut determinism_runs = Vec::new();
    let mut demo = |name: &'static str| {
        let out = run_demo(name, &Settings::default()).unwrap();
        determinism_runs.push((name, out.artifacts.clone()));
        out
    };
    let criteria: Vec<(&str, Verdict)> = vec![
        ("1 krasnoselskii spectral flow", timed(Duration::from_secs(1), krasnoselskii_flow)),
        ("2 finite-dimensional reduction", timed(Duration::from_secs(30), finite_reduction)),
        ("3 property suite", timed(Duration::from_secs(60), property_suite)),
        ("4 relative index formula", relative_index()),
        ("5 bifurcation detection", timed(Duration::from_secs(60), bifurcations)),
        ("6 torus counterexample", timed(Duration::from_secs(120), torus)),
        ("7 sphere geodesics", timed(Duration::from_secs(120), sphere_geodesics)),
        ("8 sphere-tm scan", timed(Duration::from_secs(300), || checks(&demo("sphere-tm")))),
        ("9 ellipsoid family", timed(Duration::from_secs(300), || checks(&demo("ellipsoid")))),
        ("10 split-spheres index", timed(Duration::from_secs(120), || checks(&demo("split-spheres")))),
    ];
    let mut all = criteria;
    let deterministic = {
        let mut v = Vec::new();
        for name in ["krasnoselskii", "torus"] {
            let a = run_demo(name, &Settings::default()).unwrap().artifacts;
            let b = run_demo(name, &Settings::default()).unwrap().artifacts;
            v.push((name, a == b));
        }
        for (name, first) in &determinism_runs {
            let again = run_demo(name, &Settings::default()).unwrap().artifacts;
            v.push((name, *first == again));
        }
        let pass = v.iter().all(|(_, same)| *same);
        verdict(pass, format!("byte-identical reruns: {v:?}"))
    };
    all.push(("11 determinism", deterministic));

    let mut failed = 0;
    for (name, v) in &all {
        println!("{} criterion {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("{} of {} criteria pass", all.len() - failed, all.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
