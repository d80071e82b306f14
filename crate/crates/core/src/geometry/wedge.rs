use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Block, ContactPair, Mesh, MeshBuilder, DIRICHLET_X, DIRICHLET_Y};
use crate::error::{Error, Result};

pub const WEDGE_PAIR: &str = "incline";
pub const P1_FACE: &str = "p1_face";
pub const P2_FACE: &str = "p2_face";
pub const RIGHT_BASE: &str = "right_base";

/// Where the second load is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum P2Surface {
    LeftTop,
    RightTop,
}

/// Support of the right wedge base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseSupport {
    Clamped,
    /// Vertical motion fixed, horizontal motion free.
    Sliding,
}

/// Dimensions and resolution of the two-wedge joint.
///
/// The left wedge occupies `0 <= x <= w_left + (h - y) tan(theta1)`; the
/// right wedge starts at `w_left + (h - y) tan(theta2)` and ends at a
/// vertical face placed so it never degenerates inside the angle range.
/// Angles are measured from the vertical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WedgeGeometry {
    pub height: f64,
    pub w_left: f64,
    pub w_right: f64,
    pub nx_left: usize,
    pub ny_left: usize,
    pub nx_right: usize,
    /// Elements along the right (mortar) incline.
    pub ny_right: usize,
    pub p2_surface: P2Surface,
    pub right_base: BaseSupport,
    /// Angles accepted by the builder. Wider than the design box so central
    /// differences at a bound stay defined.
    pub angle_range: (f64, f64),
}

impl Default for WedgeGeometry {
    fn default() -> Self {
        Self {
            height: 1.0,
            w_left: 0.5,
            w_right: 0.25,
            nx_left: 8,
            ny_left: 19,
            nx_right: 10,
            ny_right: 22,
            p2_surface: P2Surface::LeftTop,
            right_base: BaseSupport::Sliding,
            angle_range: (29.0, 61.0),
        }
    }
}

/// Wedge mesh for `theta1`, `theta2` in degrees, restricted to the design
/// box `[30, 60]`.
pub fn build_wedge_mesh(theta1: f64, theta2: f64, geom: &WedgeGeometry) -> Result<Mesh> {
    for (name, v) in [("theta1", theta1), ("theta2", theta2)] {
        if !(30.0..=60.0).contains(&v) {
            return Err(Error::Domain { what: name.into(), value: v, lo: 30.0, hi: 60.0 });
        }
    }
    wedge_mesh(theta1, theta2, geom)
}

fn wedge_mesh(theta1: f64, theta2: f64, g: &WedgeGeometry) -> Result<Mesh> {
    let (lo, hi) = g.angle_range;
    for (name, v) in [("theta1", theta1), ("theta2", theta2)] {
        if !(lo..=hi).contains(&v) {
            return Err(Error::Domain { what: name.into(), value: v, lo, hi });
        }
    }
    if g.nx_left == 0 || g.ny_left == 0 || g.nx_right == 0 || g.ny_right == 0 {
        return Err(Error::Invalid("wedge resolution must be positive".into()));
    }
    let h = g.height;
    let t1 = theta1.to_radians().tan();
    let t2 = theta2.to_radians().tan();
    let x_right = g.w_left + g.w_right + h * hi.to_radians().tan();

    let left = Block::new(0, g.nx_left, g.ny_left);
    let right = Block::new(left.n_nodes(), g.nx_right, g.ny_right);
    let mut coords = Vec::with_capacity(left.n_nodes() + right.n_nodes());
    let mut quads = Vec::new();
    left.emit(&mut coords, &mut quads, |s, t| {
        let y = t * h;
        [s * (g.w_left + (h - y) * t1), y]
    });
    right.emit(&mut coords, &mut quads, |s, t| {
        let y = t * h;
        let x0 = g.w_left + (h - y) * t2;
        [x0 + s * (x_right - x0), y]
    });

    let mut side1 = left.column(g.nx_left);
    side1.reverse();
    let mut side2 = right.column(0);
    side2.reverse();

    let mut dx = left.column(0);
    let mut dy = left.row(0);
    let base = right.row(0);
    if g.right_base == BaseSupport::Clamped {
        dx.extend(&base);
    }
    dy.extend(&base);
    dx.sort_unstable();
    dy.sort_unstable();

    let p2 = match g.p2_surface {
        P2Surface::LeftTop => left.row(g.ny_left),
        P2Surface::RightTop => right.row(g.ny_right),
    };

    let mut node_sets = BTreeMap::new();
    node_sets.insert(DIRICHLET_X.to_string(), dx);
    node_sets.insert(DIRICHLET_Y.to_string(), dy);
    node_sets.insert(P1_FACE.to_string(), right.column(g.nx_right));
    node_sets.insert(P2_FACE.to_string(), p2);
    node_sets.insert(RIGHT_BASE.to_string(), base);

    let mesh =
        Mesh { coords, quads, node_sets, contact_pairs: vec![ContactPair { name: WEDGE_PAIR.into(), side1, side2 }] };
    mesh.check_quality()?;
    Ok(mesh)
}

/// Mesh builder over `(theta1, theta2)`.
#[derive(Debug, Clone, Default)]
pub struct WedgeMeshBuilder {
    pub geometry: WedgeGeometry,
}

impl MeshBuilder for WedgeMeshBuilder {
    fn n_params(&self) -> usize {
        2
    }

    fn build(&self, rho: &[f64]) -> Result<Mesh> {
        crate::error::check_len("wedge design", 2, rho.len())?;
        wedge_mesh(rho[0], rho[1], &self.geometry)
    }
}
