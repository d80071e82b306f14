use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use contactopt_cli::compare::{collect_runs, compare};
use contactopt_cli::{Summary, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE};

fn contactopt(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contactopt"))
        .args(args)
        .current_dir(dir)
        .env_remove("CONTACTOPT_OUT")
        .output()
        .unwrap()
}

fn config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn gradient_run_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.toml", "scenario = \"circle-linear\"\n");
    let out = contactopt(&["run", &cfg, "--out", "r"], tmp.path());
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("r");
    for f in ["manifest.toml", "summary.toml", "iterates.csv"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let it = fs::read_to_string(dir.join("iterates.csv")).unwrap();
    assert_eq!(it.lines().next().unwrap(), "iter,rho_0,rho_1,objective,viol,dual_opt,step_type");
    let s = Summary::load(&dir).unwrap();
    assert_eq!(s.status, "converged");
    let r = std::f64::consts::FRAC_1_SQRT_2;
    assert!((s.rho[0] + r).abs() < 1e-6 && (s.rho[1] + r).abs() < 1e-6);
}

#[test]
fn manifest_reruns_the_same_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.json", r#"{"scenario": "bound-quadratic", "seed": 4}"#);
    assert_eq!(contactopt(&["run", &cfg, "--out", "a"], tmp.path()).status.code(), Some(EXIT_OK));
    let manifest = tmp.path().join("a/manifest.toml");
    let m = manifest.to_string_lossy().into_owned();
    assert_eq!(contactopt(&["run", &m, "--out", "b"], tmp.path()).status.code(), Some(EXIT_OK));
    for f in ["summary.toml", "iterates.csv", "manifest.toml"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn default_directory_names_scenario_method_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.toml", "scenario = \"quadratic-1d\"\nseed = 9\n");
    let out = contactopt(&["run", &cfg, "--out-root", "runs-here"], tmp.path());
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert!(tmp.path().join("runs-here/quadratic-1d-gradient-seed9/summary.toml").is_file());
}

#[test]
fn unknown_key_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.toml", "scenario = \"wedge\"\n[gradient]\nmax_iters = 3\n");
    let out = contactopt(&["run", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_iters"));
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn missing_arguments_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(contactopt(&["run"], tmp.path()).status.code(), Some(EXIT_USAGE));
    assert_eq!(contactopt(&["compare"], tmp.path()).status.code(), Some(EXIT_USAGE));
    assert_eq!(contactopt(&["--help"], tmp.path()).status.code(), Some(EXIT_OK));
}

#[test]
fn iteration_cap_exits_not_converged() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.toml", "scenario = \"wedge\"\n[gradient]\nmax_iter = 2\n");
    let out = contactopt(&["run", &cfg, "--out", "r"], tmp.path());
    assert_eq!(out.status.code(), Some(EXIT_NOT_CONVERGED));
    let s = Summary::load(&tmp.path().join("r")).unwrap();
    assert_eq!(s.status, "max-iterations");
    assert!(!s.success);
}

#[test]
fn zero_budget_returns_the_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "c.toml", "scenario = \"wedge\"\nmethod = \"cbo\"\n[cbo]\nbudget = 0\n");
    let out = contactopt(&["run", &cfg, "--out", "r"], tmp.path());
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let dir = tmp.path().join("r");
    let s = Summary::load(&dir).unwrap();
    assert_eq!(s.rho, vec![33.0, 38.0, 1.3]);
    assert_eq!(s.objective, 1.3);
    let samples = fs::read_to_string(dir.join("samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 2);
    assert!(samples.starts_with("iter,rho_0,rho_1,rho_2,objective,c_0,"));
}

#[test]
fn repeats_and_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        "c.toml",
        "scenario = \"quadratic-1d\"\nmethod = \"cbo\"\nseed = 2\n[cbo]\nbudget = 6\ncandidates = 200\n",
    );
    assert_eq!(contactopt(&["run", &cfg, "--repeats", "3", "--out", "reps"], tmp.path()).status.code(), Some(EXIT_OK));
    let runs = collect_runs(&tmp.path().join("reps")).unwrap();
    assert_eq!(runs.len(), 3);
    let seeds: Vec<u64> = runs.iter().map(|r| Summary::load(r).unwrap().seed).collect();
    assert_eq!(seeds, vec![2, 3, 4]);

    // The same seed twice: zero spread, zero error against itself.
    let one = config(
        tmp.path(),
        "one.toml",
        "scenario = \"quadratic-1d\"\nmethod = \"cbo\"\n[cbo]\nbudget = 4\ncandidates = 200\n",
    );
    for d in ["same/a", "same/b"] {
        assert_eq!(contactopt(&["run", &one, "--out", d], tmp.path()).status.code(), Some(EXIT_OK));
    }
    let out = contactopt(&["compare", "same", "--reference", "same/a", "--out", "cmp.csv"], tmp.path());
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("cmp.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "variable,mean,std,reference,rel_abs_error,runs,feasible_runs");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(r[4].parse::<f64>().unwrap(), 0.0);
        assert_eq!(r[5], "2");
    }

    let a = Summary::load(&tmp.path().join("same/a")).unwrap();
    let mut other = a.clone();
    other.scenario = "wedge".into();
    assert!(compare(&[a], Some(&other)).is_err());
}
