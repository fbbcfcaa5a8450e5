use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sflow(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sflow"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn diag(d: &[f64]) -> String {
    let rows: Vec<String> = (0..d.len())
        .map(|i| {
            let r: Vec<String> = (0..d.len()).map(|j| if i == j { d[i].to_string() } else { "0".into() }).collect();
            format!("[{}]", r.join(","))
        })
        .collect();
    format!(r#"{{"dim": {}, "entries": [{}]}}"#, d.len(), rows.join(","))
}

/// `id + t K_3` on a three-dimensional window with the `+1` tail.
fn gamma3(reversed: bool) -> String {
    let ops = [r#"{"j_window": [1,1,1], "k_window": [[0,0,0],[0,0,0],[0,0,0]], "tail_plus": true, "tail_minus": false}"#,
        r#"{"j_window": [1,1,1], "k_window": [[-2,0,0],[0,-2,0],[0,0,-2]], "tail_plus": true, "tail_minus": false}"#];
    let (a, b) = if reversed { (ops[1], ops[0]) } else { (ops[0], ops[1]) };
    format!(r#"{{"kind": "sign_compact", "samples": [{{"t": 0, "operator": {a}}}, {{"t": 1, "operator": {b}}}]}}"#)
}

#[test]
fn sfl_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let forward = write(d, "g3.json", &gamma3(false));
    let o = sflow(&["sfl", "--path", &forward], &d.join("fwd"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&d.join("fwd/sfl.json"));
    assert_eq!(r["value"], -3);
    assert_eq!(r["endpoint_value"], -3);
    assert_eq!(r["method_agreement"], true);

    let backward = write(d, "g3r.json", &gamma3(true));
    sflow(&["sfl", "--path", &backward], &d.join("bwd"));
    assert_eq!(json(&d.join("bwd/sfl.json"))["value"], 3);

    let constant = format!(
        r#"{{"kind": "dense", "samples": [{{"t": 0, "operator": {m}}}, {{"t": 1, "operator": {m}}}]}}"#,
        m = diag(&[1.0, -2.0])
    );
    let c = write(d, "const.json", &constant);
    assert!(sflow(&["sfl", "--path", &c], &d.join("const")).status.success());
    assert_eq!(json(&d.join("const/sfl.json"))["value"], 0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    // an eigenvalue resting on zero over [1/4, 3/4]
    let flat = format!(
        r#"{{"kind": "dense", "samples": [{{"t": 0, "operator": {}}}, {{"t": 0.25, "operator": {}}},
            {{"t": 0.75, "operator": {}}}, {{"t": 1, "operator": {}}}]}}"#,
        diag(&[1.0]),
        diag(&[0.0]),
        diag(&[0.0]),
        diag(&[-1.0])
    );
    let p = write(d, "flat.json", &flat);
    let o = sflow(&["sfl", "--path", &p], &d.join("flat"));
    assert_eq!(o.status.code(), Some(3));
    let r = json(&d.join("flat/sfl.json"));
    assert_eq!(r["error"], "unresolved crossing");
    assert_eq!(r["interval"].as_array().unwrap().len(), 2);

    let bad = write(d, "bad.json", r#"{"kind": "dense"}"#);
    assert_eq!(sflow(&["sfl", "--path", &bad], &d.join("bad")).status.code(), Some(1));
    assert!(!d.join("bad").exists());

    let o = sflow(&["sfl", "--path", "/nonexistent/path.json"], &d.join("missing"));
    assert_eq!(o.status.code(), Some(1));
    let o = sflow(&["demo", "nonsense"], &d.join("x"));
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn scan_and_geodesic_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let cfg = write(
        d,
        "scan.json",
        r#"{"family": "krasnoselskii", "bounds": [[0.5, 4.5]], "resolution": [81], "basepoint": [0.5], "mode": "confirm"}"#,
    );
    let o = sflow(&["scan", "--config", &cfg], &d.join("scan"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&d.join("scan/report.json"));
    assert_eq!(r["scan"]["component_count"], 5);
    for f in ["degeneracy.csv", "mask.csv", "components.csv", "scan.svg"] {
        assert!(d.join("scan").join(f).exists(), "{f}");
    }
    let mask = fs::read_to_string(d.join("scan/mask.csv")).unwrap();
    assert!(mask.starts_with("i0,x0,masked\n"));
    assert_eq!(mask.lines().filter(|l| l.ends_with(",1")).count(), 4);

    let flat = write(
        d,
        "flat.json",
        r#"{"family": "flat_torus_lines", "bounds": [[0.5, 3], [-1, 1]], "resolution": [8, 8], "basepoint": [0.5, 0]}"#,
    );
    let o = sflow(&["scan", "--config", &flat, "--mesh", "32"], &d.join("flat"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&d.join("flat/report.json"));
    assert_eq!(r["scan"]["component_count"], 1);
    assert_eq!(r["scan"]["masked_nodes"], 0);

    let geo = write(
        d,
        "geo.json",
        r#"{"geometry": "round_sphere(1)", "p": [1.5707963267948966, 0], "v": [0, 4], "mesh": 100}"#,
    );
    let o = sflow(&["geodesic", "--config", &geo], &d.join("geo"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&d.join("geo/index.json"));
    assert_eq!(r["spectral_index"], 1);
    assert_eq!(r["morse_index"], 1);
    assert_eq!(r["conjugate_instants"].as_array().unwrap().len(), 1);
    let csv = fs::read_to_string(d.join("geo/geodesic.csv")).unwrap();
    assert!(csv.starts_with("t,x0,x1,v0,v1\n"));

    let exit = write(d, "exit.json", r#"{"geometry": "round_sphere(1)", "p": [1.5707963267948966, 0], "v": [-3, 0]}"#);
    assert_eq!(sflow(&["geodesic", "--config", &exit], &d.join("exit")).status.code(), Some(1));
}

#[test]
fn demos_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for run in ["a", "b"] {
        let o = sflow(&["demo", "torus", "--threads", "1"], &d.join(run));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    }
    for f in ["report.json", "mask.csv", "components.csv", "degeneracy.csv", "scan.svg"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    let r = json(&d.join("a/report.json"));
    assert_eq!(r["pass"], true);
    assert_eq!(r["values"]["scan"]["component_count"], 1);
}
