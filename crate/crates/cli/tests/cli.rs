use std::fs;
use std::path::Path;
use std::process::Command as Proc;

use alpha_lattice::validate_assumptions;
use alpha_lattice_cli::report::{MANIFEST_FILE, SUMMARY_FILE};
use alpha_lattice_cli::{parse_spec, run, Command, RunManifest, RunOptions, SpecError, STANDARD_SPEC};

const SINGLE_SITE: &str = include_str!("../specs/single_site.toml");

fn opts(dir: &Path, paths: Option<u64>) -> RunOptions {
    RunOptions {
        out: Some(dir.to_path_buf()),
        paths,
        ..RunOptions::default()
    }
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join(SUMMARY_FILE)).unwrap()).unwrap()
}

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_alpha-lattice"))
}

#[test]
fn minimal_spec_has_zero_eta() {
    let text = "[model]\ndimension = 1\nradius = 0\nrange = 1\n[stable]\nalpha = 1.5\n[sim]\ndt = 0.01\nseed = 1\nn_paths = 10\n";
    let spec = parse_spec(text).unwrap();
    assert_eq!(validate_assumptions(&spec.build_model().unwrap()).eta, 0.0);
}

#[test]
fn second_neighbour_coupling_needs_range_two() {
    let text = STANDARD_SPEC.replace("\"1\" = 0.05", "\"1\" = 0.05\n\"2\" = 0.01");
    let err = parse_spec(&text).unwrap_err();
    assert!(matches!(err, SpecError::Semantic { .. }));
    assert!(err.to_string().contains("finite range property"), "{err}");
    let widened = text.replace("range = 1", "range = 2");
    assert!(parse_spec(&widened).is_ok());
}

#[test]
fn standard_spec_round_trips() {
    let spec = parse_spec(STANDARD_SPEC).unwrap();
    let again = parse_spec(&spec.to_toml()).unwrap();
    assert_eq!(spec, again);
    assert_eq!(spec.hash(), again.hash());
    for c in Command::ALL {
        let r = spec.resolved(c);
        assert_eq!(parse_spec(&r.to_toml()).unwrap().hash(), r.hash());
    }
}

#[test]
fn syntax_errors_carry_positions() {
    let text = STANDARD_SPEC.replace("n_paths = 2000", "n_paths = \"many\"");
    let err = parse_spec(&text).unwrap_err().to_string();
    let line = STANDARD_SPEC.lines().position(|l| l.starts_with("n_paths")).unwrap() + 1;
    assert!(err.contains(&format!("line {line}")), "{err}");
}

#[test]
fn gaussian_kernel_check() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = parse_spec(STANDARD_SPEC).unwrap().resolved(Command::KernelCheck);
    let p = spec.kernel_check.as_mut().unwrap();
    p.closed_form_alphas = vec![2.0];
    p.kernel_alphas = vec![];
    let out = run(&spec, Command::KernelCheck, &opts(dir.path(), None)).unwrap();
    assert!(out.pass());
    let check = &out.report.checks[0];
    assert_eq!(check.name, "closed form alpha = 2");
    assert!(check.value < 1e-6);
    let rows = fs::read_to_string(dir.path().join("closed_form.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 100);
    let density = fs::read_to_string(dir.path().join("density.csv")).unwrap();
    assert!(density.starts_with("t,x,y,p\n"));
}

#[test]
fn simulate_is_reproducible_and_worker_independent() {
    let spec = parse_spec(STANDARD_SPEC).unwrap();
    let mut manifests = Vec::new();
    for workers in [None, Some(1), Some(4)] {
        let dir = tempfile::tempdir().unwrap();
        let o = RunOptions {
            seed: Some(42),
            workers,
            ..opts(dir.path(), Some(40))
        };
        let out = run(&spec, Command::Simulate, &o).unwrap();
        assert!(out.pass());
        for f in ["ensemble.csv", "trajectory.csv", "snapshots.bin", "site_means.csv"] {
            assert!(out.manifest.outputs.contains_key(f), "{f}");
        }
        manifests.push(out.manifest);
    }
    assert!(manifests.iter().all(|m| m.outputs == manifests[0].outputs && m.spec_hash == manifests[0].spec_hash));
    assert_eq!(manifests[0].seed, 42);
}

#[test]
fn rerun_from_manifest() {
    let spec = parse_spec(SINGLE_SITE).unwrap();
    let first = tempfile::tempdir().unwrap();
    let a = run(&spec, Command::Limit, &opts(first.path(), Some(500))).unwrap();
    let m = RunManifest::read(&first.path().join(MANIFEST_FILE)).unwrap();
    let embedded = parse_spec(&m.spec).unwrap();
    assert_eq!(embedded.command, Some(Command::Limit));
    let second = tempfile::tempdir().unwrap();
    let b = run(&embedded, Command::Limit, &opts(second.path(), None)).unwrap();
    assert_eq!(a.manifest.outputs, b.manifest.outputs);
    assert_eq!(a.manifest.spec_hash, b.manifest.spec_hash);
}

#[test]
fn gradient_decay_summary() {
    let dir = tempfile::tempdir().unwrap();
    let spec = parse_spec(STANDARD_SPEC).unwrap();
    let out = run(&spec, Command::GradientDecay, &opts(dir.path(), Some(300))).unwrap();
    let s = summary(dir.path());
    let details = &s["details"];
    assert!(details["rate"].is_f64() && details["ci"].is_array());
    assert!((details["beta_lower"].as_f64().unwrap() - 0.84).abs() < 1e-12);
    assert_eq!(s["pass"].as_bool().unwrap(), out.pass());
    assert_eq!(s["checks"][0]["name"], "decay rate");
    assert!(s["checks"][0]["oracle"].as_str().unwrap().contains("beta_lower"));
}

#[test]
fn mixing_schema() {
    let dir = tempfile::tempdir().unwrap();
    let spec = parse_spec(SINGLE_SITE).unwrap();
    run(&spec, Command::Mixing, &opts(dir.path(), Some(200))).unwrap();
    let text = fs::read_to_string(dir.path().join("mixing.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,site,ks,ks_critical,w1,n_paths"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(first[4].parse::<f64>().unwrap(), 10.0);
    assert_eq!(first[5], "200");
}

#[test]
fn checker_errors_keep_partial_output() {
    // the Du Hamel check needs U = 0; the standard model has a potential
    let dir = tempfile::tempdir().unwrap();
    let spec = parse_spec(STANDARD_SPEC).unwrap();
    let out = run(&spec, Command::Duhamel, &opts(dir.path(), Some(10))).unwrap();
    assert!(!out.pass());
    assert_eq!(out.manifest.status, "incomplete");
    assert!(summary(dir.path())["error"].as_str().unwrap().contains("unsupported"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("single.toml");
    fs::write(&spec_path, SINGLE_SITE).unwrap();

    let ok = bin()
        .args(["moments", "--quiet", "--spec"])
        .arg(&spec_path)
        .arg("--out")
        .arg(dir.path().join("ok"))
        .status()
        .unwrap();
    assert_eq!(ok.code(), Some(0));

    // a W1 threshold no finite sample can meet
    let failing = dir.path().join("failing.toml");
    fs::write(&failing, SINGLE_SITE.replace("times = [0.0, 5.0, 20.0]", "times = [0.0, 5.0, 20.0]\nw1_max = 1e-12")).unwrap();
    let out = bin()
        .args(["mixing", "--quiet", "--paths", "100", "--spec"])
        .arg(&failing)
        .arg("--out")
        .arg(dir.path().join("fail"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("failed check: W1 at t = 20"));
    assert!(dir.path().join("fail").join(MANIFEST_FILE).exists());

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[model]\nradius = ").unwrap();
    let out = bin().args(["limit", "--spec"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn manifest_path_is_accepted_as_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("single.toml");
    fs::write(&spec_path, SINGLE_SITE).unwrap();
    let first = dir.path().join("a");
    let status = bin().args(["limit", "--quiet", "--paths", "300", "--spec"]).arg(&spec_path).arg("--out").arg(&first).status().unwrap();
    assert!(status.code().is_some());
    let second = dir.path().join("b");
    bin().args(["run", "--quiet", "--spec"]).arg(first.join(MANIFEST_FILE)).arg("--out").arg(&second).status().unwrap();
    let a = RunManifest::read(&first.join(MANIFEST_FILE)).unwrap();
    let b = RunManifest::read(&second.join(MANIFEST_FILE)).unwrap();
    assert_eq!(a.outputs, b.outputs);
}
