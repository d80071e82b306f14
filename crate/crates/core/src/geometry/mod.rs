//! Parameterized meshes with design-independent topology.
//!
//! Every builder maps a design vector onto nodal coordinates only: the
//! connectivity, node counts and named node sets are identical across the
//! whole design box. That is what makes central differences of the mesh (the
//! design velocity) meaningful.

mod bezier;
mod clamp;
mod wedge;

use std::collections::BTreeMap;
use std::io::Write;

pub use bezier::BezierCurve;
pub use clamp::{build_clamp_lite_mesh, ClampLiteGeometry, ClampLiteMeshBuilder, BAND_FACE, INTERFACE_PAIR, SEAL_PAIR};
pub use wedge::{
    build_wedge_mesh, BaseSupport, P2Surface, WedgeGeometry, WedgeMeshBuilder, P1_FACE, P2_FACE, RIGHT_BASE, WEDGE_PAIR,
};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub type Point = [f64; 2];

/// Nodes whose x displacement is held at zero.
pub const DIRICHLET_X: &str = "dirichlet_x";
/// Nodes whose y displacement is held at zero.
pub const DIRICHLET_Y: &str = "dirichlet_y";

/// Two boundary chains that may come into contact.
///
/// `side2` carries the mortar integrals and the multipliers; `side1` is
/// projected onto it. Both chains are ordered monotonically along the
/// surface.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactPair {
    pub name: String,
    pub side1: Vec<usize>,
    pub side2: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub coords: Vec<Point>,
    /// Bilinear quads, nodes counter-clockwise.
    pub quads: Vec<[usize; 4]>,
    /// Named node lists: Dirichlet sets and ordered boundary chains used for
    /// loads and supports.
    pub node_sets: BTreeMap<String, Vec<usize>>,
    pub contact_pairs: Vec<ContactPair>,
}

const GAUSS_2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.coords.len()
    }

    pub fn node_set(&self, name: &str) -> Result<&[usize]> {
        self.node_sets
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Invalid(format!("mesh has no node set named '{name}'")))
    }

    pub fn contact_pair(&self, name: &str) -> Result<&ContactPair> {
        self.contact_pairs
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Invalid(format!("mesh has no contact pair named '{name}'")))
    }

    /// Jacobian determinant of quad `e` at reference point `(xi, eta)`.
    pub fn jacobian_det(&self, e: usize, xi: f64, eta: f64) -> f64 {
        let q = self.quads[e];
        let (dn_dxi, dn_deta) = quad_shape_derivs(xi, eta);
        let mut j = [[0.0; 2]; 2];
        for a in 0..4 {
            let p = self.coords[q[a]];
            for c in 0..2 {
                j[0][c] += dn_dxi[a] * p[c];
                j[1][c] += dn_deta[a] * p[c];
            }
        }
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    /// Every quad must have a positive Jacobian at all four Gauss points.
    pub fn check_quality(&self) -> Result<()> {
        for e in 0..self.quads.len() {
            for &xi in &GAUSS_2 {
                for &eta in &GAUSS_2 {
                    let d = self.jacobian_det(e, xi, eta);
                    if !(d > 0.0) {
                        return Err(Error::MeshQuality(format!(
                            "element {e} has Jacobian {d:e} at ({xi:.3}, {eta:.3})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Same node count, connectivity, node sets and contact chains.
    pub fn same_topology(&self, other: &Mesh) -> bool {
        self.coords.len() == other.coords.len()
            && self.quads == other.quads
            && self.node_sets == other.node_sets
            && self.contact_pairs == other.contact_pairs
    }

    /// Outward unit normal of the boundary edge `a -> b`, oriented away from
    /// the quad that owns the edge.
    pub fn outward_normal(&self, a: usize, b: usize) -> Result<Point> {
        let owner = self
            .quads
            .iter()
            .find(|q| {
                (0..4).any(|k| {
                    let (p, r) = (q[k], q[(k + 1) % 4]);
                    (p == a && r == b) || (p == b && r == a)
                })
            })
            .ok_or_else(|| Error::Invalid(format!("edge {a}-{b} is not an element edge")))?;
        let pa = self.coords[a];
        let pb = self.coords[b];
        let t = [pb[0] - pa[0], pb[1] - pa[1]];
        let len = t[0].hypot(t[1]);
        if len == 0.0 {
            return Err(Error::Invalid(format!("edge {a}-{b} has zero length")));
        }
        let mut n = [t[1] / len, -t[0] / len];
        let c = owner
            .iter()
            .fold([0.0, 0.0], |acc, &i| [acc[0] + 0.25 * self.coords[i][0], acc[1] + 0.25 * self.coords[i][1]]);
        let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        if n[0] * (mid[0] - c[0]) + n[1] * (mid[1] - c[1]) < 0.0 {
            n = [-n[0], -n[1]];
        }
        Ok(n)
    }

    /// Nodal coordinates as CSV: `node,x,y`.
    pub fn write_coords_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["node", "x", "y"])?;
        for (i, p) in self.coords.iter().enumerate() {
            wr.write_record([i.to_string(), p[0].to_string(), p[1].to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Connectivity as CSV: `element,n0,n1,n2,n3`.
    pub fn write_quads_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["element", "n0", "n1", "n2", "n3"])?;
        for (e, q) in self.quads.iter().enumerate() {
            wr.write_record([e.to_string(), q[0].to_string(), q[1].to_string(), q[2].to_string(), q[3].to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Bilinear shape functions on `[-1, 1]^2`, nodes counter-clockwise from
/// `(-1, -1)`.
pub fn quad_shape(xi: f64, eta: f64) -> [f64; 4] {
    [
        0.25 * (1.0 - xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 + eta),
        0.25 * (1.0 - xi) * (1.0 + eta),
    ]
}

pub fn quad_shape_derivs(xi: f64, eta: f64) -> ([f64; 4], [f64; 4]) {
    (
        [-0.25 * (1.0 - eta), 0.25 * (1.0 - eta), 0.25 * (1.0 + eta), -0.25 * (1.0 + eta)],
        [-0.25 * (1.0 - xi), -0.25 * (1.0 + xi), 0.25 * (1.0 + xi), 0.25 * (1.0 - xi)],
    )
}

/// Structured block of `nx * ny` quads mapped from the unit square.
///
/// `map(s, t)` must be orientation preserving. Nodes are numbered along the
/// shorter direction first so the stiffness envelope stays narrow.
#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub offset: usize,
    pub nx: usize,
    pub ny: usize,
    s_fastest: bool,
}

impl Block {
    pub fn new(offset: usize, nx: usize, ny: usize) -> Self {
        Self { offset, nx, ny, s_fastest: nx <= ny }
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.nx && j <= self.ny);
        if self.s_fastest {
            self.offset + j * (self.nx + 1) + i
        } else {
            self.offset + i * (self.ny + 1) + j
        }
    }

    /// Appends the block's nodes and quads to `coords` / `quads`.
    pub fn emit(&self, coords: &mut Vec<Point>, quads: &mut Vec<[usize; 4]>, map: impl Fn(f64, f64) -> Point) {
        assert_eq!(coords.len(), self.offset, "blocks must be emitted in order");
        let mut local = vec![[0.0; 2]; self.n_nodes()];
        for j in 0..=self.ny {
            for i in 0..=self.nx {
                let p = map(i as f64 / self.nx as f64, j as f64 / self.ny as f64);
                local[self.node(i, j) - self.offset] = p;
            }
        }
        coords.extend(local);
        for j in 0..self.ny {
            for i in 0..self.nx {
                quads.push([self.node(i, j), self.node(i + 1, j), self.node(i + 1, j + 1), self.node(i, j + 1)]);
            }
        }
    }

    /// Nodes of the edge `t = const` (j fixed), increasing `s`.
    pub fn row(&self, j: usize) -> Vec<usize> {
        (0..=self.nx).map(|i| self.node(i, j)).collect()
    }

    /// Nodes of the edge `s = const` (i fixed), increasing `t`.
    pub fn column(&self, i: usize) -> Vec<usize> {
        (0..=self.ny).map(|j| self.node(i, j)).collect()
    }

    pub fn all_nodes(&self) -> Vec<usize> {
        (self.offset..self.offset + self.n_nodes()).collect()
    }
}

/// Maps a design vector onto a mesh with fixed topology.
pub trait MeshBuilder {
    fn n_params(&self) -> usize;
    fn build(&self, rho: &[f64]) -> Result<Mesh>;
}

/// Finite-difference step for design variable value `v`.
pub fn fd_step(v: f64) -> f64 {
    1e-6 * (1.0 + v.abs())
}

/// Central-difference design velocity `dX/drho`.
///
/// Rows are `2 * node + component`, columns follow `rho`. `h` overrides the
/// default step [`fd_step`] for every component.
pub fn design_velocity(builder: &dyn MeshBuilder, rho: &[f64], h: Option<f64>) -> Result<Matrix> {
    let base = builder.build(rho)?;
    let p = rho.len();
    let mut vel = Matrix::zeros(base.n_dofs(), p);
    for k in 0..p {
        let step = h.unwrap_or_else(|| fd_step(rho[k]));
        let mut plus = rho.to_vec();
        let mut minus = rho.to_vec();
        plus[k] += step;
        minus[k] -= step;
        let mp = builder.build(&plus)?;
        let mm = builder.build(&minus)?;
        if !mp.same_topology(&base) || !mm.same_topology(&base) {
            return Err(Error::TopologyChanged(format!("design component {k}")));
        }
        for n in 0..base.n_nodes() {
            for c in 0..2 {
                vel[(2 * n + c, k)] = (mp.coords[n][c] - mm.coords[n][c]) / (2.0 * step);
            }
        }
    }
    Ok(vel)
}
