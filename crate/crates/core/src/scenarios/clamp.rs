use serde::{Deserialize, Serialize};

use super::{Evaluation, Gradients, PressureProfile, Scenario};
use crate::elasticity::{assemble, compliance, factorize, Load, Material};
use crate::error::{check_len, Error, Result};
use crate::forward::{ContactSolver, ForwardOptions, ForwardSolution};
use crate::geometry::{ClampLiteGeometry, ClampLiteMeshBuilder, Mesh, MeshBuilder};
use crate::geometry::{BAND_FACE, INTERFACE_PAIR, SEAL_PAIR};
use crate::linalg::{dot, Cholesky};
use crate::mortar::{build_mortar, nodal_pressure};
use crate::sensitivity::{
    design_derivatives, solve_sensitivity, total_derivatives, DesignSystem, Partials, SensitivityOptions,
};

/// How the lower bound on the largest interface element pressure is posed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Aggregation {
    /// `‖λᵉ‖_p >= lower`, plus one upper bound per element. Smooth.
    PNorm { p: f64 },
    /// `max λᵉ >= lower` and `max λᵉ <= upper`. Nonsmooth; no gradients.
    ExactMax,
}

impl Default for Aggregation {
    fn default() -> Self {
        Aggregation::PNorm { p: 8.0 }
    }
}

/// Two-body clamp: minimize compliance with a seal-pressure floor and a
/// window on the interface element pressures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClampLiteParams {
    pub geometry: ClampLiteGeometry,
    pub material: Material,
    /// Stiffness of the band holding the retainer down, per unit length.
    pub band_stiffness: f64,
    /// Downward preload displacement of the band.
    pub band_preload: f64,
    /// Nodes, counted from the left end of the flange bottom, summed into
    /// the seal pressure.
    pub seal_nodes: usize,
    pub seal_min: f64,
    pub element_min: f64,
    pub element_max: f64,
    pub bounds: [[f64; 2]; 4],
    pub initial: [f64; 4],
    pub feasible_seed: Option<[f64; 4]>,
    pub forward_tol: f64,
}

impl Default for ClampLiteParams {
    fn default() -> Self {
        Self {
            geometry: ClampLiteGeometry::default(),
            material: Material { e: 2e6, nu: 0.3 },
            band_stiffness: 1e3,
            band_preload: 0.085,
            seal_nodes: 4,
            seal_min: 30.0,
            element_min: 300.0,
            element_max: 650.0,
            bounds: [[0.35, 0.408], [0.35, 0.354], [0.443, 0.47], [0.3834, 0.44]],
            initial: [0.35, 0.32, 0.45, 0.41],
            feasible_seed: None,
            forward_tol: 1e-9,
        }
    }
}

/// Constraint layout: seal, then the lower bound on the aggregated element
/// pressure, then either one upper bound per interface element
/// ([`Aggregation::PNorm`]) or a single upper bound on the maximum
/// ([`Aggregation::ExactMax`]).
#[derive(Debug, Clone)]
pub struct ClampLiteScenario {
    params: ClampLiteParams,
    aggregation: Aggregation,
    builder: ClampLiteMeshBuilder,
    n_elements: usize,
}

struct ClampState {
    mesh: Mesh,
    system: DesignSystem,
    chol: Cholesky,
    sol: ForwardSolution,
}

impl ClampLiteScenario {
    pub fn new(params: ClampLiteParams, aggregation: Aggregation) -> Result<Self> {
        Material::new(params.material.e, params.material.nu)?;
        if let Aggregation::PNorm { p } = aggregation {
            if !(p >= 1.0) {
                return Err(Error::Invalid(format!("p-norm exponent {p} must be at least 1")));
            }
        }
        if params.seal_nodes == 0 || params.seal_nodes > params.geometry.nx_flange + 1 {
            return Err(Error::Invalid(format!("seal uses {} nodes", params.seal_nodes)));
        }
        let builder = ClampLiteMeshBuilder { geometry: params.geometry.clone() };
        let n_elements = params.geometry.nx_flange;
        Ok(Self { params, aggregation, builder, n_elements })
    }

    pub fn params(&self) -> &ClampLiteParams {
        &self.params
    }

    pub fn aggregation(&self) -> Aggregation {
        self.aggregation
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn design_system(&self, rho: &[f64]) -> Result<(Mesh, DesignSystem)> {
        check_len("clamp-lite design", 4, rho.len())?;
        let mesh = self.builder.build(rho)?;
        let band = Load::Foundation {
            set: BAND_FACE.into(),
            stiffness: self.params.band_stiffness,
            direction: [0.0, 1.0],
            offset: -self.params.band_preload,
        };
        let sys = assemble(&mesh, &self.params.material, &[band])?;
        let md = build_mortar(&mesh, &sys.dofs, &[INTERFACE_PAIR, SEAL_PAIR])?;
        let system = DesignSystem { k: sys.k, loads: vec![sys.f_ext], md, dofs: sys.dofs };
        Ok((mesh, system))
    }

    fn state(&self, rho: &[f64]) -> Result<ClampState> {
        let (mesh, system) = self.design_system(rho)?;
        let solver = ContactSolver::from_factor(factorize(&system.k)?, &system.md);
        let opts = ForwardOptions { tol: self.params.forward_tol, ..ForwardOptions::default() };
        let sol = solver.solve(&system.k, &system.loads[0], &system.md, &opts)?;
        let chol = solver.factor().clone();
        Ok(ClampState { mesh, system, chol, sol })
    }

    /// Interface element pressures: mean of the two end multipliers.
    pub fn element_pressures(&self, lambda_interface: &[f64]) -> Vec<f64> {
        lambda_interface.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    fn seal(&self, st: &ClampState) -> Result<f64> {
        let rows = st.system.md.pair_rows(SEAL_PAIR)?;
        Ok(st.sol.lambda[rows.start..rows.start + self.params.seal_nodes].iter().sum())
    }

    fn constraints(&self, st: &ClampState) -> Result<Vec<f64>> {
        let rows = st.system.md.pair_rows(INTERFACE_PAIR)?;
        let pe = self.element_pressures(&st.sol.lambda[rows]);
        let mut c = vec![self.seal(st)? - self.params.seal_min];
        match self.aggregation {
            Aggregation::PNorm { p } => {
                c.push(p_norm(&pe, p) - self.params.element_min);
                c.extend(pe.iter().map(|v| self.params.element_max - v));
            }
            Aggregation::ExactMax => {
                let mx = pe.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                c.push(mx - self.params.element_min);
                c.push(self.params.element_max - mx);
            }
        }
        Ok(c)
    }

    /// Compliance at the initial design.
    pub fn initial_compliance(&self) -> Result<f64> {
        self.evaluate(&self.params.initial).map(|e| e.objective)
    }
}

/// `(Σ |x_i|^p)^(1/p)`, scaled by the largest entry to avoid overflow.
pub fn p_norm(x: &[f64], p: f64) -> f64 {
    let mx = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if mx == 0.0 {
        return 0.0;
    }
    mx * x.iter().map(|v| (v.abs() / mx).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Gradient of [`p_norm`]; zero at the origin.
pub fn p_norm_gradient(x: &[f64], p: f64) -> Vec<f64> {
    let n = p_norm(x, p);
    if n == 0.0 {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| v.signum() * (v.abs() / n).powf(p - 1.0)).collect()
}

impl Scenario for ClampLiteScenario {
    fn name(&self) -> &str {
        "clamp-lite"
    }

    fn bounds(&self) -> Vec<[f64; 2]> {
        self.params.bounds.to_vec()
    }

    fn n_constraints(&self) -> usize {
        match self.aggregation {
            Aggregation::PNorm { .. } => 2 + self.n_elements,
            Aggregation::ExactMax => 3,
        }
    }

    fn constraint_names(&self) -> Vec<String> {
        let mut names = vec!["seal".to_string()];
        match self.aggregation {
            Aggregation::PNorm { .. } => {
                names.push("pnorm_lower".into());
                names.extend((0..self.n_elements).map(|e| format!("upper_e{e}")));
            }
            Aggregation::ExactMax => {
                names.push("max_lower".into());
                names.push("max_upper".into());
            }
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
        Ok(Evaluation { objective: compliance(&st.system.k, &st.sol.u), constraints: self.constraints(&st)? })
    }

    fn evaluate_with_gradients(&self, rho: &[f64]) -> Result<(Evaluation, Gradients)> {
        let Aggregation::PNorm { p } = self.aggregation else {
            return Err(Error::Invalid("exact-max aggregation has no gradients; use the p-norm form".into()));
        };
        let st = self.state(rho)?;
        let u = &st.sol.u;
        let eval = Evaluation { objective: compliance(&st.system.k, u), constraints: self.constraints(&st)? };
        let build = |r: &[f64]| self.design_system(r).map(|(_, s)| s);
        let derivs = design_derivatives(&build, rho, &[(&u[..], &st.sol.lambda[..])], &[0], None)?;
        let d = &derivs[0];
        let md = &st.system.md;
        let sens = solve_sensitivity(&st.chol, md, &st.sol, d, &SensitivityOptions::default())?;
        let (n, m, np) = (u.len(), md.n_rows(), rho.len());

        let mut a = Partials::zeros(1, np, n, m);
        for c in 0..np {
            a.d_rho[(0, c)] = dot(u, &d.dk_u.column(c));
        }
        let ku = st.system.k.matvec(u);
        for (x, v) in a.d_u.row_mut(0).iter_mut().zip(&ku) {
            *x = 2.0 * v;
        }

        let q = self.n_constraints();
        let mut c = Partials::zeros(q, np, n, m);
        let seal = md.pair_rows(SEAL_PAIR)?;
        for j in seal.start..seal.start + self.params.seal_nodes {
            c.d_lambda[(0, j)] = 1.0;
        }
        let iface = md.pair_rows(INTERFACE_PAIR)?;
        let pe = self.element_pressures(&st.sol.lambda[iface.clone()]);
        let gp = p_norm_gradient(&pe, p);
        for (e, g) in gp.iter().enumerate() {
            c.d_lambda[(1, iface.start + e)] += 0.5 * g;
            c.d_lambda[(1, iface.start + e + 1)] += 0.5 * g;
            c.d_lambda[(2 + e, iface.start + e)] = -0.5;
            c.d_lambda[(2 + e, iface.start + e + 1)] = -0.5;
        }
        let (da, dc) = total_derivatives(&a, &c, &sens)?;
        Ok((eval, Gradients { objective: da, constraints: dc }))
    }

    fn pressure_profiles(&self, rho: &[f64]) -> Result<Vec<PressureProfile>> {
        let st = self.state(rho)?;
        let md = &st.system.md;
        let pressure = nodal_pressure(md, &st.sol.lambda);
        [INTERFACE_PAIR, SEAL_PAIR]
            .into_iter()
            .map(|name| {
                let rows = md.pair_rows(name)?;
                let lambda = st.sol.lambda[rows.clone()].to_vec();
                let mesh_nodes = md.nodes[rows.clone()].to_vec();
                let segments: Vec<Vec<usize>> = (0..lambda.len().saturating_sub(1)).map(|e| vec![e, e + 1]).collect();
                Ok(PressureProfile {
                    label: name.into(),
                    coords: mesh_nodes.iter().map(|&i| st.mesh.coords[i]).collect(),
                    mesh_nodes,
                    segment_pressure: self.element_pressures(&lambda),
                    lambda,
                    pressure: pressure[rows].to_vec(),
                    segments,
                })
            })
            .collect()
    }
}
