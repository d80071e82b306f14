//! Executes one configured run and writes its artifacts.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use contactopt::scenarios::{write_profiles_csv, Scenario};
use contactopt::{run_cbo, solve_nlp, NlpProblem};
use serde::{Deserialize, Serialize};

use crate::config::{Manifest, Method, RunConfig};
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const SUMMARY_FILE: &str = "summary.toml";
pub const ITERATES_FILE: &str = "iterates.csv";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const PROFILE_INITIAL_FILE: &str = "profile_initial.csv";
pub const PROFILE_FINAL_FILE: &str = "profile_final.csv";

/// Final state of a run as written to `summary.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub scenario: String,
    pub method: String,
    pub seed: u64,
    /// `converged`, `max-iterations`, `infeasible`, `stalled` for gradient
    /// runs; `feasible` or `no-feasible-sample` for Bayesian runs.
    pub status: String,
    pub success: bool,
    pub feasible: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub rho: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    pub constraints: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub multipliers: Vec<f64>,
}

impl Summary {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(SUMMARY_FILE);
        let text = fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config { path, message: e.to_string() })
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_profiles(scenario: &dyn Scenario, rho: &[f64], path: &Path) -> Result<(), CliError> {
    match scenario.pressure_profiles(rho) {
        Ok(p) => Ok(write_profiles_csv(&p, create(path)?)?),
        Err(e) => {
            eprintln!("warning: no pressure profile at {rho:?}: {e}");
            Ok(())
        }
    }
}

/// Runs `cfg` and writes all artifacts into `dir`.
pub fn execute(cfg: &RunConfig, dir: &Path) -> Result<Summary, CliError> {
    cfg.validate().map_err(CliError::Usage)?;
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let scenario = cfg.build_scenario()?;
    let sc = scenario.as_ref();
    write_text(
        &dir.join(MANIFEST_FILE),
        &toml::to_string(&Manifest::new(cfg.clone())).map_err(|e| CliError::Io(e.to_string()))?,
    )?;
    let p = sc.n_params();
    let q = sc.n_constraints();
    let summary = match cfg.method {
        Method::Gradient => {
            let start = cfg.start.clone().unwrap_or_else(|| sc.initial());
            let prob = NlpProblem::new(sc)?;
            let mut opts = cfg.gradient.clone();
            opts.seed = cfg.seed;
            write_profiles(sc, &start, &dir.join(PROFILE_INITIAL_FILE))?;
            let r = solve_nlp(&prob, &start, &opts)?;
            r.log.write_csv(p, create(&dir.join(ITERATES_FILE))?)?;
            write_profiles(sc, &r.rho, &dir.join(PROFILE_FINAL_FILE))?;
            let v = r.evaluation.max_violation();
            Summary {
                scenario: sc.name().into(),
                method: cfg.method.as_str().into(),
                seed: cfg.seed,
                status: r.status.to_string(),
                success: r.converged(),
                feasible: v <= opts.tol_viol,
                iterations: r.iterations,
                evaluations: r.evaluations,
                rho: r.rho.clone(),
                objective: r.evaluation.objective,
                max_violation: v,
                constraints: r.evaluation.constraints.clone(),
                multipliers: r.multipliers.clone(),
            }
        }
        Method::Cbo => {
            let start = sc.feasible_seed().unwrap_or_else(|| sc.initial());
            write_profiles(sc, &start, &dir.join(PROFILE_INITIAL_FILE))?;
            let r = run_cbo(sc, cfg.cbo.budget, cfg.seed, &cfg.cbo.options())?;
            r.state.write_csv(p, q, create(&dir.join(SAMPLES_FILE))?)?;
            let n = r.state.samples().len();
            match r.best.as_ref().and_then(|b| b.evaluation.clone().map(|e| (b.rho.clone(), e))) {
                Some((rho, e)) => {
                    write_profiles(sc, &rho, &dir.join(PROFILE_FINAL_FILE))?;
                    Summary {
                        scenario: sc.name().into(),
                        method: cfg.method.as_str().into(),
                        seed: cfg.seed,
                        status: "feasible".into(),
                        success: true,
                        feasible: true,
                        iterations: n,
                        evaluations: n,
                        max_violation: e.max_violation(),
                        rho,
                        objective: e.objective,
                        constraints: e.constraints,
                        multipliers: Vec::new(),
                    }
                }
                None => Summary {
                    scenario: sc.name().into(),
                    method: cfg.method.as_str().into(),
                    seed: cfg.seed,
                    status: "no-feasible-sample".into(),
                    success: false,
                    feasible: false,
                    iterations: n,
                    evaluations: n,
                    rho: Vec::new(),
                    objective: f64::NAN,
                    max_violation: f64::NAN,
                    constraints: Vec::new(),
                    multipliers: Vec::new(),
                },
            }
        }
    };
    write_text(&dir.join(SUMMARY_FILE), &toml::to_string(&summary).map_err(|e| CliError::Io(e.to_string()))?)?;
    Ok(summary)
}

/// Run directory: the explicit `out`, else the configured output (under
/// `root` when relative and a root is set), else
/// `<root or runs>/<scenario>-<method>-seed<seed>`.
pub fn run_dir(cfg: &RunConfig, out: Option<&Path>, root: Option<&Path>) -> PathBuf {
    if let Some(o) = out {
        return o.to_path_buf();
    }
    match (&cfg.output, root) {
        (Some(o), Some(r)) if o.is_relative() => r.join(o),
        (Some(o), _) => o.clone(),
        (None, r) => r.unwrap_or(Path::new("runs")).join(format!(
            "{}-{}-seed{}",
            cfg.scenario.as_str(),
            cfg.method.as_str(),
            cfg.seed
        )),
    }
}

/// Runs `repeats` copies with consecutive seeds into `rep-NNN`
/// subdirectories of `dir`; a single run uses `dir` itself.
pub fn execute_repeats(cfg: &RunConfig, dir: &Path, repeats: usize) -> Result<Vec<Summary>, CliError> {
    use rayon::prelude::*;
    if repeats <= 1 {
        return Ok(vec![execute(cfg, dir)?]);
    }
    (0..repeats)
        .into_par_iter()
        .map(|k| {
            let mut c = cfg.clone();
            c.seed = cfg.seed + k as u64;
            execute(&c, &dir.join(format!("rep-{k:03}")))
        })
        .collect()
}
