//! Mortar discretization of the normal gap between two boundary chains.
//!
//! Side 2 of each pair carries the multiplier shape functions `Φ_j`; the
//! weighted gap is `g_j = ∫ Φ_j n·(x1 - x2) ds` over the part of side 2 that
//! side 1 projects onto. Normals are taken per side-2 segment in the
//! reference configuration, so `g = g0 + G u` exactly.

use crate::elasticity::DofMap;
use crate::error::{check_len, Error, Result};
use crate::geometry::{fd_step, Mesh, Point};
use crate::linalg::Matrix;

const GAUSS_2: [(f64, f64); 2] = [(0.211_324_865_405_187_1, 0.5), (0.788_675_134_594_812_9, 0.5)];

#[derive(Debug, Clone, PartialEq)]
pub struct MortarData {
    /// `m x n_free` constraint Jacobian.
    pub g: Matrix,
    pub g0: Vec<f64>,
    /// `w_j = ∫ Φ_j ds` over the overlapped part of side 2.
    pub weights: Vec<f64>,
    /// Tridiagonal mortar mass matrix: `mass_diag[j] = ∫ Φ_j²`,
    /// `mass_off[j] = ∫ Φ_j Φ_{j+1}` (zero across pair boundaries).
    pub mass_diag: Vec<f64>,
    pub mass_off: Vec<f64>,
    /// Side-2 node of each row.
    pub nodes: Vec<usize>,
    /// `(pair name, first row)` for every stacked pair.
    pub pairs: Vec<(String, usize)>,
}

impl MortarData {
    /// Constraints `g0 + G u >= 0` without an underlying surface: unit
    /// weights and identity mass. Used for analytic problems.
    pub fn from_parts(g: Matrix, g0: Vec<f64>) -> Result<Self> {
        check_len("gap rows", g.nrows(), g0.len())?;
        let m = g0.len();
        Ok(Self {
            g,
            g0,
            weights: vec![1.0; m],
            mass_diag: vec![1.0; m],
            mass_off: vec![0.0; m],
            nodes: (0..m).collect(),
            pairs: vec![("constraints".into(), 0)],
        })
    }

    pub fn n_rows(&self) -> usize {
        self.g0.len()
    }

    /// Row range of the named pair.
    pub fn pair_rows(&self, name: &str) -> Result<std::ops::Range<usize>> {
        let k = self
            .pairs
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::Invalid(format!("mortar data has no pair '{name}'")))?;
        let start = self.pairs[k].1;
        let end = self.pairs.get(k + 1).map_or(self.n_rows(), |p| p.1);
        Ok(start..end)
    }

    /// `M λ`.
    pub fn mass_apply(&self, lambda: &[f64]) -> Vec<f64> {
        let m = self.n_rows();
        let mut out = vec![0.0; m];
        for j in 0..m {
            out[j] = self.mass_diag[j] * lambda[j];
            if j + 1 < m {
                out[j] += self.mass_off[j] * lambda[j + 1];
            }
            if j > 0 {
                out[j] += self.mass_off[j - 1] * lambda[j - 1];
            }
        }
        out
    }
}

/// Mortar data for the named contact pairs, stacked in order.
pub fn build_mortar(mesh: &Mesh, dofs: &DofMap, pair_names: &[&str]) -> Result<MortarData> {
    let n = dofs.n_free();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut data = MortarData {
        g: Matrix::zeros(0, n),
        g0: Vec::new(),
        weights: Vec::new(),
        mass_diag: Vec::new(),
        mass_off: Vec::new(),
        nodes: Vec::new(),
        pairs: Vec::new(),
    };
    for name in pair_names {
        let pair = mesh.contact_pair(name)?;
        let base = data.g0.len();
        data.pairs.push((name.to_string(), base));
        let s2 = &pair.side2;
        let s1 = &pair.side1;
        if s2.len() < 2 || s1.len() < 2 {
            return Err(Error::Invalid(format!("contact pair '{name}' needs two nodes per side")));
        }
        let m = s2.len();
        rows.extend((0..m).map(|_| vec![0.0; n]));
        data.g0.extend(std::iter::repeat(0.0).take(m));
        data.weights.extend(std::iter::repeat(0.0).take(m));
        data.mass_diag.extend(std::iter::repeat(0.0).take(m));
        data.mass_off.extend(std::iter::repeat(0.0).take(m));
        data.nodes.extend(s2.iter().copied());

        let n1: Vec<Point> = s1.windows(2).map(|w| mesh.outward_normal(w[0], w[1])).collect::<Result<_>>()?;
        for k in 0..m - 1 {
            let (ia, ib) = (s2[k], s2[k + 1]);
            let (a, b) = (mesh.coords[ia], mesh.coords[ib]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            if len == 0.0 {
                return Err(Error::DegenerateSegment(k));
            }
            let tau = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
            let nk = mesh.outward_normal(ia, ib)?;
            for (l, w) in s1.windows(2).enumerate() {
                if n1[l][0] * nk[0] + n1[l][1] * nk[1] >= 0.0 {
                    continue;
                }
                let (ic, id) = (w[0], w[1]);
                let (c, d) = (mesh.coords[ic], mesh.coords[id]);
                if c == d {
                    return Err(Error::DegenerateSegment(l));
                }
                let xc = ((c[0] - a[0]) * tau[0] + (c[1] - a[1]) * tau[1]) / len;
                let xd = ((d[0] - a[0]) * tau[0] + (d[1] - a[1]) * tau[1]) / len;
                if xc == xd {
                    continue;
                }
                let lo = xc.min(xd).max(0.0);
                let hi = xc.max(xd).min(1.0);
                if hi <= lo {
                    continue;
                }
                for &(gp, gw) in &GAUSS_2 {
                    let xi = lo + gp * (hi - lo);
                    let jw = gw * (hi - lo) * len;
                    let eta = (xi - xc) / (xd - xc);
                    let phi = [1.0 - xi, xi];
                    let x2 = [a[0] + xi * (b[0] - a[0]), a[1] + xi * (b[1] - a[1])];
                    let x1 = [c[0] + eta * (d[0] - c[0]), c[1] + eta * (d[1] - c[1])];
                    let g = nk[0] * (x1[0] - x2[0]) + nk[1] * (x1[1] - x2[1]);
                    // (node, coefficient of n·u in the pointwise gap)
                    let terms = [(ic, 1.0 - eta), (id, eta), (ia, -(1.0 - xi)), (ib, -xi)];
                    for (r, &ph) in phi.iter().enumerate() {
                        let j = base + k + r;
                        data.g0[j] += jw * ph * g;
                        data.weights[j] += jw * ph;
                        for &(node, coef) in &terms {
                            for (comp, nc) in nk.iter().enumerate() {
                                if let Some(col) = dofs.free(node, comp) {
                                    rows[j][col] += jw * ph * coef * nc;
                                }
                            }
                        }
                    }
                    data.mass_diag[base + k] += jw * phi[0] * phi[0];
                    data.mass_diag[base + k + 1] += jw * phi[1] * phi[1];
                    data.mass_off[base + k] += jw * phi[0] * phi[1];
                }
            }
        }
    }
    data.g = if rows.is_empty() { Matrix::zeros(0, n) } else { Matrix::from_rows(&rows) };
    Ok(data)
}

/// `g0 + G u`.
pub fn gap(md: &MortarData, u: &[f64]) -> Vec<f64> {
    let mut g = md.g.matvec(u);
    for (gi, g0) in g.iter_mut().zip(&md.g0) {
        *gi += g0;
    }
    g
}

/// Force-per-length pressure `(M λ)_j / w_j`; rows without overlap report 0.
///
/// For a uniform multiplier this returns the multiplier itself, so a
/// uniform contact pressure is recovered exactly.
pub fn nodal_pressure(md: &MortarData, lambda: &[f64]) -> Vec<f64> {
    let ml = md.mass_apply(lambda);
    ml.iter().zip(&md.weights).map(|(v, &w)| if w > 0.0 { v / w } else { 0.0 }).collect()
}

/// Central differences of the mortar quantities with respect to the design.
#[derive(Debug, Clone, PartialEq)]
pub struct MortarDesignDerivs {
    /// `∂g0/∂ρ`, `m x p`.
    pub dg0: Matrix,
    /// `∂(G u)/∂ρ` at fixed `u`, `m x p`.
    pub dg_u: Matrix,
    /// `∂(Gᵀ λ)/∂ρ` at fixed `λ`, `n x p`.
    pub dgt_lambda: Matrix,
}

/// Differentiates `build(ρ)` around `rho` holding `u` and `lambda` fixed.
pub fn mortar_design_derivs(
    build: impl Fn(&[f64]) -> Result<MortarData>,
    rho: &[f64],
    u: &[f64],
    lambda: &[f64],
    h: Option<f64>,
) -> Result<MortarDesignDerivs> {
    let base = build(rho)?;
    let (m, n, p) = (base.n_rows(), base.g.ncols(), rho.len());
    check_len("displacement", n, u.len())?;
    check_len("multipliers", m, lambda.len())?;
    let mut out =
        MortarDesignDerivs { dg0: Matrix::zeros(m, p), dg_u: Matrix::zeros(m, p), dgt_lambda: Matrix::zeros(n, p) };
    for k in 0..p {
        let step = h.unwrap_or_else(|| fd_step(rho[k]));
        let mut rp = rho.to_vec();
        let mut rm = rho.to_vec();
        rp[k] += step;
        rm[k] -= step;
        let (mp, mm) = (build(&rp)?, build(&rm)?);
        for d in [&mp, &mm] {
            if d.n_rows() != m || d.g.ncols() != n {
                return Err(Error::TopologyChanged(format!("mortar size changed under design component {k}")));
            }
        }
        let inv = 1.0 / (2.0 * step);
        let (gp, gm) = (mp.g.matvec(u), mm.g.matvec(u));
        for j in 0..m {
            out.dg0[(j, k)] = (mp.g0[j] - mm.g0[j]) * inv;
            out.dg_u[(j, k)] = (gp[j] - gm[j]) * inv;
        }
        let (tp, tm) = (mp.g.tr_matvec(lambda), mm.g.tr_matvec(lambda));
        for i in 0..n {
            out.dgt_lambda[(i, k)] = (tp[i] - tm[i]) * inv;
        }
    }
    Ok(out)
}
