//! Plane-strain linear elasticity on bilinear quads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{quad_shape, quad_shape_derivs, Mesh, DIRICHLET_X, DIRICHLET_Y};
use crate::linalg::{dot, Cholesky, SymMatrix};

const GAUSS_2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    #[serde(rename = "E")]
    pub e: f64,
    pub nu: f64,
}

impl Material {
    pub fn new(e: f64, nu: f64) -> Result<Self> {
        if !(e > 0.0) {
            return Err(Error::Domain { what: "E".into(), value: e, lo: 0.0, hi: f64::INFINITY });
        }
        if !(nu > -1.0 && nu < 0.5) {
            return Err(Error::Domain { what: "nu".into(), value: nu, lo: -1.0, hi: 0.5 });
        }
        Ok(Self { e, nu })
    }

    /// Plane-strain constitutive matrix in Voigt order `(xx, yy, xy)` with
    /// engineering shear strain.
    pub fn plane_strain_d(&self) -> [[f64; 3]; 3] {
        let (e, nu) = (self.e, self.nu);
        let c = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
        [[c * (1.0 - nu), c * nu, 0.0], [c * nu, c * (1.0 - nu), 0.0], [0.0, 0.0, c * (1.0 - 2.0 * nu) / 2.0]]
    }
}

/// Numbering of unconstrained degrees of freedom.
///
/// Dof `2 * node + c` is free unless the node is in the Dirichlet set for
/// component `c`. Free dofs keep the node order so the stiffness envelope is
/// inherited from the mesh numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    index: Vec<Option<usize>>,
    n_free: usize,
}

impl DofMap {
    pub fn from_mesh(mesh: &Mesh) -> Self {
        let mut fixed = vec![false; mesh.n_dofs()];
        for (name, c) in [(DIRICHLET_X, 0), (DIRICHLET_Y, 1)] {
            if let Some(nodes) = mesh.node_sets.get(name) {
                for &n in nodes {
                    fixed[2 * n + c] = true;
                }
            }
        }
        Self::from_fixed(&fixed)
    }

    /// Every dof free.
    pub fn unconstrained(n_nodes: usize) -> Self {
        Self::from_fixed(&vec![false; 2 * n_nodes])
    }

    fn from_fixed(fixed: &[bool]) -> Self {
        let mut n_free = 0;
        let index = fixed
            .iter()
            .map(|&f| {
                if f {
                    None
                } else {
                    n_free += 1;
                    Some(n_free - 1)
                }
            })
            .collect();
        Self { index, n_free }
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn n_total(&self) -> usize {
        self.index.len()
    }

    #[inline]
    pub fn free(&self, node: usize, comp: usize) -> Option<usize> {
        self.index[2 * node + comp]
    }

    /// Full nodal vector with zeros on constrained dofs.
    pub fn expand(&self, u: &[f64]) -> Vec<f64> {
        self.index.iter().map(|i| i.map_or(0.0, |k| u[k])).collect()
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free];
        for (g, i) in self.index.iter().enumerate() {
            if let Some(k) = i {
                out[*k] = full[g];
            }
        }
        out
    }
}

/// Boundary loads on ordered node chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Load {
    /// Uniform pressure pushing into the body across every chain edge.
    Pressure { set: String, p: f64 },
    /// Uniform traction vector per unit length.
    Traction { set: String, t: [f64; 2] },
    /// Elastic foundation: energy `k/2 ∫ (d·u - offset)^2 ds` along the chain.
    Foundation { set: String, stiffness: f64, direction: [f64; 2], offset: f64 },
}

impl Load {
    fn set(&self) -> &str {
        match self {
            Load::Pressure { set, .. } | Load::Traction { set, .. } | Load::Foundation { set, .. } => set,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub k: SymMatrix,
    pub f_ext: Vec<f64>,
    pub dofs: DofMap,
}

/// Assembles `K` (with foundations) and `f_ext` on the free dofs of `mesh`.
pub fn assemble(mesh: &Mesh, material: &Material, loads: &[Load]) -> Result<SystemMatrices> {
    assemble_with_dofs(mesh, material, loads, DofMap::from_mesh(mesh))
}

pub fn assemble_with_dofs(mesh: &Mesh, material: &Material, loads: &[Load], dofs: DofMap) -> Result<SystemMatrices> {
    if dofs.n_total() != mesh.n_dofs() {
        return Err(Error::Dimension(format!("dof map covers {} dofs, mesh has {}", dofs.n_total(), mesh.n_dofs())));
    }
    let d = material.plane_strain_d();
    let mut k = SymMatrix::zeros(dofs.n_free());
    for e in 0..mesh.quads.len() {
        let ke = element_stiffness(mesh, e, &d)?;
        let q = mesh.quads[e];
        for a in 0..8 {
            let Some(ia) = dofs.free(q[a / 2], a % 2) else { continue };
            for b in 0..=a {
                let Some(ib) = dofs.free(q[b / 2], b % 2) else { continue };
                k.add(ia, ib, ke[a][b]);
            }
        }
    }
    for load in loads {
        if let Load::Foundation { set, stiffness, direction, .. } = load {
            add_foundation(mesh, &dofs, set, *stiffness, *direction, &mut k)?;
        }
    }
    let f_ext = load_vector(mesh, &dofs, loads)?;
    Ok(SystemMatrices { k, f_ext, dofs })
}

fn element_stiffness(mesh: &Mesh, e: usize, d: &[[f64; 3]; 3]) -> Result<[[f64; 8]; 8]> {
    let mut ke = [[0.0; 8]; 8];
    for &xi in &GAUSS_2 {
        for &eta in &GAUSS_2 {
            let (b, det) = strain_matrix(mesh, e, xi, eta)?;
            let mut db = [[0.0; 8]; 3];
            for r in 0..3 {
                for c in 0..8 {
                    db[r][c] = d[r][0] * b[0][c] + d[r][1] * b[1][c] + d[r][2] * b[2][c];
                }
            }
            for a in 0..8 {
                for c in 0..=a {
                    let v = b[0][a] * db[0][c] + b[1][a] * db[1][c] + b[2][a] * db[2][c];
                    ke[a][c] += v * det;
                }
            }
        }
    }
    for a in 0..8 {
        for c in 0..a {
            ke[c][a] = ke[a][c];
        }
    }
    Ok(ke)
}

/// Strain-displacement matrix and Jacobian determinant at `(xi, eta)`.
fn strain_matrix(mesh: &Mesh, e: usize, xi: f64, eta: f64) -> Result<([[f64; 8]; 3], f64)> {
    let q = mesh.quads[e];
    let (dxi, deta) = quad_shape_derivs(xi, eta);
    let mut j = [[0.0; 2]; 2];
    for a in 0..4 {
        let p = mesh.coords[q[a]];
        j[0][0] += dxi[a] * p[0];
        j[0][1] += dxi[a] * p[1];
        j[1][0] += deta[a] * p[0];
        j[1][1] += deta[a] * p[1];
    }
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if !(det > 0.0) {
        return Err(Error::MeshQuality(format!("element {e} has Jacobian {det:e}")));
    }
    let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
    let mut b = [[0.0; 8]; 3];
    for a in 0..4 {
        let dx = inv[0][0] * dxi[a] + inv[0][1] * deta[a];
        let dy = inv[1][0] * dxi[a] + inv[1][1] * deta[a];
        b[0][2 * a] = dx;
        b[1][2 * a + 1] = dy;
        b[2][2 * a] = dy;
        b[2][2 * a + 1] = dx;
    }
    Ok((b, det))
}

fn chain_edges<'m>(mesh: &'m Mesh, set: &str) -> Result<impl Iterator<Item = (usize, usize)> + 'm> {
    let nodes = mesh.node_set(set)?;
    if nodes.len() < 2 {
        return Err(Error::Assembly(format!("load surface '{set}' needs at least two nodes")));
    }
    Ok(nodes.windows(2).map(|w| (w[0], w[1])))
}

fn add_foundation(
    mesh: &Mesh,
    dofs: &DofMap,
    set: &str,
    stiffness: f64,
    dir: [f64; 2],
    k: &mut SymMatrix,
) -> Result<()> {
    for (a, b) in chain_edges(mesh, set)? {
        let len = edge_length(mesh, a, b);
        let m = [[2.0, 1.0], [1.0, 2.0]];
        let nodes = [a, b];
        for i in 0..2 {
            for ci in 0..2 {
                let Some(r) = dofs.free(nodes[i], ci) else { continue };
                for j in 0..2 {
                    for cj in 0..2 {
                        let Some(c) = dofs.free(nodes[j], cj) else { continue };
                        if c > r {
                            continue;
                        }
                        k.add(r, c, stiffness * len / 6.0 * m[i][j] * dir[ci] * dir[cj]);
                    }
                }
            }
        }
    }
    Ok(())
}

fn edge_length(mesh: &Mesh, a: usize, b: usize) -> f64 {
    let (p, q) = (mesh.coords[a], mesh.coords[b]);
    (q[0] - p[0]).hypot(q[1] - p[1])
}

/// Consistent nodal loads on the free dofs.
pub fn load_vector(mesh: &Mesh, dofs: &DofMap, loads: &[Load]) -> Result<Vec<f64>> {
    let mut f = vec![0.0; dofs.n_free()];
    for load in loads {
        for (a, b) in chain_edges(mesh, load.set())? {
            let len = edge_length(mesh, a, b);
            let t = match load {
                Load::Pressure { p, .. } => {
                    let n = mesh.outward_normal(a, b)?;
                    [-p * n[0], -p * n[1]]
                }
                Load::Traction { t, .. } => *t,
                Load::Foundation { stiffness, direction, offset, .. } => {
                    [stiffness * offset * direction[0], stiffness * offset * direction[1]]
                }
            };
            for node in [a, b] {
                for c in 0..2 {
                    if let Some(i) = dofs.free(node, c) {
                        f[i] += 0.5 * len * t[c];
                    }
                }
            }
        }
    }
    Ok(f)
}

/// Pivots below this fraction of their diagonal entry mean a rigid-body
/// mode survived the supports.
const SINGULAR_PIVOT_TOL: f64 = 1e-10;

/// Cholesky factor of `K`; a singular stiffness means missing supports.
pub fn factorize(k: &SymMatrix) -> Result<Cholesky> {
    Cholesky::with_tolerance(k, SINGULAR_PIVOT_TOL).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot } => {
            Error::Assembly(format!("stiffness is singular at free dof {pivot}; the model needs more supports"))
        }
        other => other,
    })
}

/// `1/2 u^T K u - f^T u`.
pub fn energy(k: &SymMatrix, f_ext: &[f64], u: &[f64]) -> f64 {
    0.5 * k.quad_form(u) - dot(f_ext, u)
}

/// `u^T K u`.
pub fn compliance(k: &SymMatrix, u: &[f64]) -> f64 {
    k.quad_form(u)
}

/// In-plane stress `(sxx, syy, sxy)` in element `e` at `(xi, eta)` for the
/// full nodal displacement vector `u`.
pub fn element_stress(mesh: &Mesh, material: &Material, u: &[f64], e: usize, xi: f64, eta: f64) -> Result<[f64; 3]> {
    let (b, _) = strain_matrix(mesh, e, xi, eta)?;
    let q = mesh.quads[e];
    let mut ue = [0.0; 8];
    for a in 0..4 {
        ue[2 * a] = u[2 * q[a]];
        ue[2 * a + 1] = u[2 * q[a] + 1];
    }
    let mut eps = [0.0; 3];
    for r in 0..3 {
        eps[r] = (0..8).map(|c| b[r][c] * ue[c]).sum();
    }
    let d = material.plane_strain_d();
    let mut s = [0.0; 3];
    for r in 0..3 {
        s[r] = d[r][0] * eps[0] + d[r][1] * eps[1] + d[r][2] * eps[2];
    }
    Ok(s)
}

/// Displacement at reference point `(xi, eta)` of element `e`.
pub fn element_displacement(mesh: &Mesh, u: &[f64], e: usize, xi: f64, eta: f64) -> [f64; 2] {
    let n = quad_shape(xi, eta);
    let q = mesh.quads[e];
    let mut out = [0.0; 2];
    for a in 0..4 {
        out[0] += n[a] * u[2 * q[a]];
        out[1] += n[a] * u[2 * q[a] + 1];
    }
    out
}
