//! Design problems: design boxes, objectives and pressure constraints wired
//! to forward solves and sensitivities.
//!
//! Every constraint is posed as `c(ρ) >= 0`.

mod analytic;
mod clamp;
mod wedge;

use std::io::Write;

pub use analytic::{BoundQuadratic, CircleLinear, Quadratic1d};
pub use clamp::{Aggregation, ClampLiteParams, ClampLiteScenario};
pub use wedge::{WedgeParams, WedgeScenario};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub constraints: Vec<f64>,
}

impl Evaluation {
    /// `max(0, -min c)`.
    pub fn max_violation(&self) -> f64 {
        self.constraints.iter().fold(0.0f64, |m, &c| m.max(-c))
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub objective: Vec<f64>,
    /// `q x p`.
    pub constraints: Matrix,
}

pub trait Scenario: Send + Sync {
    fn name(&self) -> &str;
    /// Design box, one `[lo, hi]` per variable.
    fn bounds(&self) -> Vec<[f64; 2]>;
    fn n_params(&self) -> usize {
        self.bounds().len()
    }
    fn n_constraints(&self) -> usize;
    fn constraint_names(&self) -> Vec<String>;
    fn initial(&self) -> Vec<f64>;
    /// A known feasible design used to start Bayesian optimization.
    fn feasible_seed(&self) -> Option<Vec<f64>>;
    fn evaluate(&self, rho: &[f64]) -> Result<Evaluation>;
    fn evaluate_with_gradients(&self, rho: &[f64]) -> Result<(Evaluation, Gradients)>;
    fn pressure_profiles(&self, _rho: &[f64]) -> Result<Vec<PressureProfile>> {
        Ok(Vec::new())
    }
}

/// Groups of `per_group` consecutive chain positions where neighbouring
/// groups share their end node: 23 nodes in groups of 3 give 11 groups.
pub fn chain_segments(n_nodes: usize, per_group: usize) -> Vec<Vec<usize>> {
    if per_group < 2 || n_nodes < per_group {
        return Vec::new();
    }
    let stride = per_group - 1;
    (0..(n_nodes - 1) / stride).map(|s| (s * stride..=s * stride + stride).collect()).collect()
}

/// Mean nodal value over each group.
pub fn segment_pressure(lambda: &[f64], groups: &[Vec<usize>]) -> Result<Vec<f64>> {
    groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            if g.is_empty() {
                return Err(Error::Invalid(format!("segment {i} has no nodes")));
            }
            let mut s = 0.0;
            for &j in g {
                s += *lambda.get(j).ok_or_else(|| Error::Dimension(format!("segment {i} refers to node {j}")))?;
            }
            Ok(s / g.len() as f64)
        })
        .collect()
}

/// Nodal and segment pressures along one contact chain for one load case.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureProfile {
    pub label: String,
    pub mesh_nodes: Vec<usize>,
    pub coords: Vec<Point>,
    /// Raw multipliers.
    pub lambda: Vec<f64>,
    /// Weight-normalized pressure.
    pub pressure: Vec<f64>,
    pub segments: Vec<Vec<usize>>,
    pub segment_pressure: Vec<f64>,
}

pub const PROFILE_HEADER: [&str; 9] =
    ["snapshot", "node", "mesh_node", "x", "y", "lambda", "pressure", "segment", "segment_pressure"];

/// Writes profiles as CSV; each node is listed with the first segment that
/// contains it.
pub fn write_profiles_csv<W: Write>(profiles: &[PressureProfile], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(PROFILE_HEADER)?;
    for p in profiles {
        for i in 0..p.lambda.len() {
            let seg = p.segments.iter().position(|g| g.contains(&i));
            wr.write_record([
                p.label.clone(),
                i.to_string(),
                p.mesh_nodes[i].to_string(),
                format!("{:.12e}", p.coords[i][0]),
                format!("{:.12e}", p.coords[i][1]),
                format!("{:.12e}", p.lambda[i]),
                format!("{:.12e}", p.pressure[i]),
                seg.map_or(String::new(), |s| s.to_string()),
                seg.map_or(String::new(), |s| format!("{:.12e}", p.segment_pressure[s])),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Averaging matrix of `groups` over `offset..offset + n` rows of an
/// `m`-vector.
pub(crate) fn averaging_rows(groups: &[Vec<usize>], offset: usize, m: usize) -> Matrix {
    let mut a = Matrix::zeros(groups.len(), m);
    for (r, g) in groups.iter().enumerate() {
        for &j in g {
            a[(r, offset + j)] += 1.0 / g.len() as f64;
        }
    }
    a
}
