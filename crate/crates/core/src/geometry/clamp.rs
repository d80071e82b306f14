use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BezierCurve, Block, ContactPair, Mesh, MeshBuilder, Point, DIRICHLET_X, DIRICHLET_Y};
use crate::error::{check_len, Error, Result};

pub const INTERFACE_PAIR: &str = "interface";
pub const SEAL_PAIR: &str = "seal";
pub const BAND_FACE: &str = "band";

/// Two-body clamp: a retainer pressed onto a flange that rests on a rigid
/// plane.
///
/// The flange top follows a Bézier curve with fixed end points; the design
/// moves the ordinates of its two middle controls. The retainer bottom is
/// `y = retainer_datum - R(x)` where `R` is a second Bézier curve whose two
/// middle ordinates are design variables, so a larger ordinate means a
/// deeper retainer. Interference between the two reference surfaces is
/// allowed up to `max_interference`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClampLiteGeometry {
    /// Control abscissae of the retainer curve.
    pub retainer_x: [f64; 4],
    /// Fixed end ordinates of the retainer curve.
    pub retainer_ends: [f64; 2],
    pub retainer_datum: f64,
    pub retainer_top: f64,
    pub flange_x: [f64; 4],
    pub flange_ends: [f64; 2],
    /// Clearance between the flange bottom (`y = 0`) and the rigid plane.
    pub base_gap: f64,
    pub base_depth: f64,
    pub nx_flange: usize,
    pub ny_flange: usize,
    pub nx_retainer: usize,
    pub ny_retainer: usize,
    pub nx_base: usize,
    pub max_interference: f64,
    /// Box accepted by the builder, `[lo, hi]` per design component.
    pub admissible: [[f64; 2]; 4],
}

impl Default for ClampLiteGeometry {
    fn default() -> Self {
        Self {
            retainer_x: [0.35, 0.617, 0.883, 1.15],
            retainer_ends: [0.30, 0.42],
            retainer_datum: 0.86,
            retainer_top: 0.75,
            flange_x: [0.227, 0.5, 0.773, 1.046],
            flange_ends: [0.47, 0.40],
            base_gap: 1e-4,
            base_depth: 0.05,
            nx_flange: 40,
            ny_flange: 12,
            nx_retainer: 30,
            ny_retainer: 6,
            nx_base: 30,
            max_interference: 0.08,
            admissible: [[0.25, 0.45], [0.25, 0.45], [0.35, 0.50], [0.35, 0.50]],
        }
    }
}

impl ClampLiteGeometry {
    /// Flange top curve for design `rho`.
    pub fn flange_curve(&self, rho: &[f64]) -> BezierCurve {
        let x = self.flange_x;
        let mut c = BezierCurve::new([
            [x[0], self.flange_ends[0]],
            [x[1], rho[2]],
            [x[2], rho[3]],
            [x[3], self.flange_ends[1]],
        ]);
        c.free[1][1] = true;
        c.free[2][1] = true;
        c
    }

    /// Retainer depth curve `R`; the surface is `retainer_datum - R`.
    pub fn retainer_curve(&self, rho: &[f64]) -> BezierCurve {
        let x = self.retainer_x;
        let mut c = BezierCurve::new([
            [x[0], self.retainer_ends[0]],
            [x[1], rho[0]],
            [x[2], rho[1]],
            [x[3], self.retainer_ends[1]],
        ]);
        c.free[1][1] = true;
        c.free[2][1] = true;
        c
    }

    fn retainer_surface(&self, curve: &BezierCurve, t: f64) -> Result<Point> {
        let p = curve.eval(t)?;
        Ok([p[0], self.retainer_datum - p[1]])
    }
}

/// Clamp-lite mesh for design `rho = [r1, r2, f1, f2]` (retainer then
/// flange middle ordinates) within `bounds`.
pub fn build_clamp_lite_mesh(rho: &[f64], bounds: &[[f64; 2]], geom: &ClampLiteGeometry) -> Result<Mesh> {
    check_len("clamp-lite design", 4, rho.len())?;
    check_len("clamp-lite bounds", 4, bounds.len())?;
    check_box(rho, bounds)?;
    clamp_mesh(rho, geom)
}

fn check_box(rho: &[f64], bounds: &[[f64; 2]]) -> Result<()> {
    for (i, (&v, b)) in rho.iter().zip(bounds).enumerate() {
        if !(b[0]..=b[1]).contains(&v) {
            return Err(Error::Domain { what: format!("rho[{i}]"), value: v, lo: b[0], hi: b[1] });
        }
    }
    Ok(())
}

/// Parameter of the monotone-in-x curve point with abscissa `x`.
fn parameter_at_x(c: &BezierCurve, x: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if c.eval(mid)?[0] < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn clamp_mesh(rho: &[f64], g: &ClampLiteGeometry) -> Result<Mesh> {
    check_box(rho, &g.admissible)?;
    let flange = g.flange_curve(rho);
    let retainer = g.retainer_curve(rho);

    let fb = Block::new(0, g.nx_flange, g.ny_flange);
    let rb = Block::new(fb.n_nodes(), g.nx_retainer, g.ny_retainer);
    let bb = Block::new(fb.n_nodes() + rb.n_nodes(), g.nx_base, 1);

    let mut flange_top = Vec::with_capacity(g.nx_flange + 1);
    for i in 0..=g.nx_flange {
        flange_top.push(flange.eval(i as f64 / g.nx_flange as f64)?);
    }
    let mut retainer_bottom = Vec::with_capacity(g.nx_retainer + 1);
    for i in 0..=g.nx_retainer {
        retainer_bottom.push(g.retainer_surface(&retainer, i as f64 / g.nx_retainer as f64)?);
    }

    for p in &flange_top {
        if p[0] < g.retainer_x[0] || p[0] > g.retainer_x[3] {
            continue;
        }
        let t = parameter_at_x(&retainer, p[0])?;
        let overlap = p[1] - g.retainer_surface(&retainer, t)?[1];
        if overlap > g.max_interference {
            return Err(Error::MeshQuality(format!(
                "retainer and flange surfaces overlap by {overlap:.4} at x = {:.4}",
                p[0]
            )));
        }
    }

    let mut coords = Vec::new();
    let mut quads = Vec::new();
    fb.emit(&mut coords, &mut quads, |s, t| {
        let top = flange_top[(s * g.nx_flange as f64).round() as usize];
        [top[0], t * top[1]]
    });
    rb.emit(&mut coords, &mut quads, |s, t| {
        let bot = retainer_bottom[(s * g.nx_retainer as f64).round() as usize];
        [bot[0], bot[1] + t * (g.retainer_top - bot[1])]
    });
    let bx0 = g.flange_x[0] - 0.05;
    let bx1 = g.flange_x[3] + 0.05;
    bb.emit(&mut coords, &mut quads, |s, t| [bx0 + s * (bx1 - bx0), -g.base_gap - (1.0 - t) * g.base_depth]);

    let mut dx = fb.column(g.nx_flange);
    let mut dy = dx.clone();
    dx.extend(rb.column(0));
    dx.extend(bb.all_nodes());
    dy.extend(bb.all_nodes());
    dx.sort_unstable();
    dx.dedup();
    dy.sort_unstable();
    dy.dedup();

    let mut node_sets = BTreeMap::new();
    node_sets.insert(DIRICHLET_X.to_string(), dx);
    node_sets.insert(DIRICHLET_Y.to_string(), dy);
    node_sets.insert(BAND_FACE.to_string(), rb.row(g.ny_retainer));

    let mesh = Mesh {
        coords,
        quads,
        node_sets,
        contact_pairs: vec![
            ContactPair { name: INTERFACE_PAIR.into(), side1: rb.row(0), side2: fb.row(g.ny_flange) },
            ContactPair { name: SEAL_PAIR.into(), side1: bb.row(1), side2: fb.row(0) },
        ],
    };
    mesh.check_quality()?;
    Ok(mesh)
}

/// Mesh builder over the four clamp-lite ordinates.
#[derive(Debug, Clone, Default)]
pub struct ClampLiteMeshBuilder {
    pub geometry: ClampLiteGeometry,
}

impl MeshBuilder for ClampLiteMeshBuilder {
    fn n_params(&self) -> usize {
        4
    }

    fn build(&self, rho: &[f64]) -> Result<Mesh> {
        check_len("clamp-lite design", 4, rho.len())?;
        clamp_mesh(rho, &self.geometry)
    }
}
