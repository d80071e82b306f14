use serde::{Deserialize, Serialize};

use super::{averaging_rows, chain_segments, segment_pressure, Evaluation, Gradients, PressureProfile, Scenario};
use crate::elasticity::{assemble, factorize, load_vector, Load, Material};
use crate::error::{check_len, Error, Result};
use crate::forward::{ContactSolver, ForwardOptions, ForwardSolution};
use crate::geometry::{Mesh, MeshBuilder, WedgeGeometry, WedgeMeshBuilder};
use crate::geometry::{P1_FACE, P2_FACE, RIGHT_BASE, WEDGE_PAIR};
use crate::linalg::{Cholesky, Matrix};
use crate::mortar::{build_mortar, nodal_pressure, MortarData};
use crate::sensitivity::{
    chain_rule, design_derivatives, solve_sensitivity, DesignSystem, Partials, SensitivityOptions,
};

/// Wedge joint: minimize the side load `P1` while keeping the incline
/// pressure inside a window at two load snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WedgeParams {
    pub geometry: WedgeGeometry,
    pub material: Material,
    /// Second load, applied on top of `P1` at the second snapshot.
    pub p2: f64,
    /// Horizontal spring per unit length under a sliding right base.
    pub base_spring: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Segments near the top that must carry at least `lambda_min`.
    pub top_segments: usize,
    pub nodes_per_segment: usize,
    /// `[theta1, theta2, P1]` box.
    pub bounds: [[f64; 2]; 3],
    pub initial: [f64; 3],
    pub feasible_seed: Option<[f64; 3]>,
    pub forward_tol: f64,
}

impl Default for WedgeParams {
    fn default() -> Self {
        Self {
            geometry: WedgeGeometry::default(),
            material: Material { e: 200.0, nu: 0.3 },
            p2: 2.0,
            base_spring: 1.0,
            lambda_min: 1.0,
            lambda_max: 20.0,
            top_segments: 4,
            nodes_per_segment: 3,
            bounds: [[30.0, 60.0], [30.0, 60.0], [0.5, 1.5]],
            initial: [39.0, 41.0, 1.0],
            feasible_seed: Some([33.0, 38.0, 1.3]),
            forward_tol: 1e-9,
        }
    }
}

/// Constraint layout, in order: snapshot 1 lower bounds on the top
/// segments, snapshot 1 upper bounds on every segment, then the same two
/// blocks for snapshot 2.
#[derive(Debug, Clone)]
pub struct WedgeScenario {
    params: WedgeParams,
    builder: WedgeMeshBuilder,
    segments: Vec<Vec<usize>>,
    top: Vec<usize>,
}

pub const WEDGE_SNAPSHOTS: [&str; 2] = ["t5", "t10"];

struct WedgeState {
    mesh: Mesh,
    system: DesignSystem,
    chol: Cholesky,
    sols: [ForwardSolution; 2],
}

impl WedgeScenario {
    pub fn new(params: WedgeParams) -> Result<Self> {
        Material::new(params.material.e, params.material.nu)?;
        if !(params.lambda_min < params.lambda_max) {
            return Err(Error::Invalid("lambda_min must be below lambda_max".into()));
        }
        let builder = WedgeMeshBuilder { geometry: params.geometry.clone() };
        let mesh = builder.build(&params.initial[..2])?;
        let chain = &mesh.contact_pair(WEDGE_PAIR)?.side2;
        let segments = chain_segments(chain.len(), params.nodes_per_segment);
        if segments.is_empty() || params.top_segments > segments.len() {
            return Err(Error::Invalid(format!(
                "{} top segments requested but the incline has {}",
                params.top_segments,
                segments.len()
            )));
        }
        let mid_y: Vec<f64> = segments
            .iter()
            .map(|g| g.iter().map(|&j| mesh.coords[chain[j]][1]).sum::<f64>() / g.len() as f64)
            .collect();
        let mut order: Vec<usize> = (0..segments.len()).collect();
        order.sort_by(|&a, &b| mid_y[b].total_cmp(&mid_y[a]).then(a.cmp(&b)));
        let mut top = order[..params.top_segments].to_vec();
        top.sort_unstable();
        Ok(Self { params, builder, segments, top })
    }

    pub fn params(&self) -> &WedgeParams {
        &self.params
    }

    pub fn segments(&self) -> &[Vec<usize>] {
        &self.segments
    }

    /// Indices of the segments carrying the lower bound.
    pub fn top_segment_indices(&self) -> &[usize] {
        &self.top
    }

    fn forward_options(&self) -> ForwardOptions {
        ForwardOptions { tol: self.params.forward_tol, ..ForwardOptions::default() }
    }

    /// Mesh and forward-problem data; loads are snapshot 1 then snapshot 2.
    pub fn design_system(&self, rho: &[f64]) -> Result<(Mesh, DesignSystem)> {
        check_len("wedge design", 3, rho.len())?;
        let mesh = self.builder.build(&rho[..2])?;
        let p1 = Load::Pressure { set: P1_FACE.into(), p: rho[2] };
        let p2 = Load::Pressure { set: P2_FACE.into(), p: self.params.p2 };
        let spring = Load::Foundation {
            set: RIGHT_BASE.into(),
            stiffness: self.params.base_spring,
            direction: [1.0, 0.0],
            offset: 0.0,
        };
        let sys = assemble(&mesh, &self.params.material, &[p1.clone(), spring])?;
        let f2 = load_vector(&mesh, &sys.dofs, &[p1, p2])?;
        let md = build_mortar(&mesh, &sys.dofs, &[WEDGE_PAIR])?;
        let system = DesignSystem { k: sys.k, loads: vec![sys.f_ext, f2], md, dofs: sys.dofs };
        Ok((mesh, system))
    }

    fn state(&self, rho: &[f64]) -> Result<WedgeState> {
        let (mesh, system) = self.design_system(rho)?;
        let chol = factorize(&system.k)?;
        let solver = ContactSolver::from_factor(chol, &system.md);
        let opts = self.forward_options();
        let (a, b) = rayon::join(
            || solver.solve(&system.k, &system.loads[0], &system.md, &opts),
            || solver.solve(&system.k, &system.loads[1], &system.md, &opts),
        );
        let sols = [a?, b?];
        let chol = solver.factor().clone();
        Ok(WedgeState { mesh, system, chol, sols })
    }

    fn segment_values(&self, md: &MortarData, lambda: &[f64]) -> Result<Vec<f64>> {
        let rows = md.pair_rows(WEDGE_PAIR)?;
        segment_pressure(&lambda[rows], &self.segments)
    }

    fn constraints(&self, st: &WedgeState) -> Result<Vec<f64>> {
        let mut c = Vec::with_capacity(self.n_constraints());
        for sol in &st.sols {
            let seg = self.segment_values(&st.system.md, &sol.lambda)?;
            c.extend(self.top.iter().map(|&s| seg[s] - self.params.lambda_min));
            c.extend(seg.iter().map(|v| self.params.lambda_max - v));
        }
        Ok(c)
    }

    /// `∂c/∂λ` for one snapshot block.
    fn lambda_partials(&self, md: &MortarData) -> Result<Matrix> {
        let rows = md.pair_rows(WEDGE_PAIR)?;
        let avg = averaging_rows(&self.segments, rows.start, md.n_rows());
        let nt = self.top.len();
        let ns = self.segments.len();
        let mut d = Matrix::zeros(nt + ns, md.n_rows());
        for (r, &s) in self.top.iter().enumerate() {
            d.row_mut(r).copy_from_slice(avg.row(s));
        }
        for s in 0..ns {
            for (x, v) in d.row_mut(nt + s).iter_mut().zip(avg.row(s)) {
                *x = -v;
            }
        }
        Ok(d)
    }
}

impl Scenario for WedgeScenario {
    fn name(&self) -> &str {
        "wedge"
    }

    fn bounds(&self) -> Vec<[f64; 2]> {
        self.params.bounds.to_vec()
    }

    fn n_constraints(&self) -> usize {
        2 * (self.top.len() + self.segments.len())
    }

    fn constraint_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_constraints());
        for snap in WEDGE_SNAPSHOTS {
            names.extend(self.top.iter().map(|s| format!("{snap}_lower_s{s}")));
            names.extend((0..self.segments.len()).map(|s| format!("{snap}_upper_s{s}")));
        }
        names
    }

    fn initial(&self) -> Vec<f64> {
        self.params.initial.to_vec()
    }

    fn feasible_seed(&self) -> Option<Vec<f64>> {
        self.params.feasible_seed.map(|s| s.to_vec())
    }

    fn evaluate(&self, rho: &[f64]) -> Result<Evaluation> {
        let st = self.state(rho)?;
        Ok(Evaluation { objective: rho[2], constraints: self.constraints(&st)? })
    }

    fn evaluate_with_gradients(&self, rho: &[f64]) -> Result<(Evaluation, Gradients)> {
        let st = self.state(rho)?;
        let eval = Evaluation { objective: rho[2], constraints: self.constraints(&st)? };
        let build = |r: &[f64]| self.design_system(r).map(|(_, s)| s);
        let states: Vec<(&[f64], &[f64])> = st.sols.iter().map(|s| (&s.u[..], &s.lambda[..])).collect();
        let derivs = design_derivatives(&build, rho, &states, &[0, 1], None)?;
        let md = &st.system.md;
        let n = st.system.dofs.n_free();
        let dl = self.lambda_partials(md)?;
        let block = dl.nrows();
        let mut jac = Matrix::zeros(2 * block, 3);
        for (s, sol) in st.sols.iter().enumerate() {
            let sens = solve_sensitivity(&st.chol, md, sol, &derivs[s], &SensitivityOptions::default())?;
            let mut parts = Partials::zeros(block, 3, n, md.n_rows());
            parts.d_lambda = dl.clone();
            let d = chain_rule(&parts, &sens)?;
            for r in 0..block {
                jac.row_mut(s * block + r).copy_from_slice(d.row(r));
            }
        }
        Ok((eval, Gradients { objective: vec![0.0, 0.0, 1.0], constraints: jac }))
    }

    fn pressure_profiles(&self, rho: &[f64]) -> Result<Vec<PressureProfile>> {
        let st = self.state(rho)?;
        let md = &st.system.md;
        let rows = md.pair_rows(WEDGE_PAIR)?;
        st.sols
            .iter()
            .zip(WEDGE_SNAPSHOTS)
            .map(|(sol, label)| {
                let lambda = sol.lambda[rows.clone()].to_vec();
                let pressure = nodal_pressure(md, &sol.lambda)[rows.clone()].to_vec();
                let mesh_nodes = md.nodes[rows.clone()].to_vec();
                Ok(PressureProfile {
                    label: label.into(),
                    coords: mesh_nodes.iter().map(|&i| st.mesh.coords[i]).collect(),
                    mesh_nodes,
                    segment_pressure: segment_pressure(&lambda, &self.segments)?,
                    lambda,
                    pressure,
                    segments: self.segments.clone(),
                })
            })
            .collect()
    }
}
