//! Statistics across repeated runs.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::run::{Summary, SUMMARY_FILE};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct VariableStats {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub reference: Option<f64>,
    /// `|mean - reference| / |reference|`.
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub scenario: String,
    pub runs: usize,
    pub feasible_runs: usize,
    pub rows: Vec<VariableStats>,
}

/// Run directories under `dir`: `dir` itself when it holds a summary, else
/// its immediate subdirectories that do, in name order.
pub fn collect_runs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if dir.join(SUMMARY_FILE).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let rd = std::fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut out: Vec<PathBuf> =
        rd.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.join(SUMMARY_FILE).is_file()).collect();
    out.sort();
    if out.is_empty() {
        return Err(CliError::Usage(format!("{} holds no run summaries", dir.display())));
    }
    Ok(out)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Mean and sample standard deviation of the final designs and objectives
/// of feasible runs, with relative errors against a reference run.
pub fn compare(runs: &[Summary], reference: Option<&Summary>) -> Result<Comparison, CliError> {
    let first = runs.first().ok_or_else(|| CliError::Usage("no runs to compare".into()))?;
    for r in runs.iter().chain(reference) {
        if r.scenario != first.scenario {
            return Err(CliError::Mismatch(format!("scenario {} differs from {}", r.scenario, first.scenario)));
        }
    }
    let ok: Vec<&Summary> = runs.iter().filter(|r| r.feasible && !r.rho.is_empty()).collect();
    let mut rows = Vec::new();
    if let Some(s0) = ok.first() {
        let p = s0.rho.len();
        let mut cols: Vec<(String, Vec<f64>, Option<f64>)> = (0..p)
            .map(|k| {
                (
                    format!("rho_{k}"),
                    ok.iter().map(|r| r.rho[k]).collect(),
                    reference.and_then(|r| r.rho.get(k).copied()),
                )
            })
            .collect();
        cols.push(("objective".into(), ok.iter().map(|r| r.objective).collect(), reference.map(|r| r.objective)));
        for (name, v, rf) in cols {
            let (mean, std) = mean_std(&v);
            let rel_error = rf.map(|r| if r == mean { 0.0 } else { (mean - r).abs() / r.abs() });
            rows.push(VariableStats { name, mean, std, reference: rf, rel_error });
        }
    }
    Ok(Comparison { scenario: first.scenario.clone(), runs: runs.len(), feasible_runs: ok.len(), rows })
}

impl Comparison {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), CliError> {
        let mut wr = csv::Writer::from_writer(w);
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        wr.write_record(["variable", "mean", "std", "reference", "rel_abs_error", "runs", "feasible_runs"])?;
        for r in &self.rows {
            wr.write_record([
                r.name.clone(),
                format!("{:.12e}", r.mean),
                format!("{:.12e}", r.std),
                opt(r.reference),
                opt(r.rel_error),
                self.runs.to_string(),
                self.feasible_runs.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}
