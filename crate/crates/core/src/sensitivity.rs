//! Direct differentiation of the contact equilibrium with respect to the
//! design.
//!
//! At a strictly complementary solution the active set is locally constant,
//! so for every design component
//! `[K  -G_Aᵀ; G_A  0] [du; dλ_A] = [-∂(Ku - f) + ∂(Gᵀλ); -∂g_A]`
//! and inactive multipliers keep zero derivative.

use rayon::prelude::*;

use crate::elasticity::DofMap;
use crate::error::{check_len, Error, Result};
use crate::forward::ForwardSolution;
use crate::geometry::fd_step;
use crate::linalg::{norm_inf, Cholesky, Matrix, SaddleSystem, SymMatrix};
use crate::mortar::MortarData;

/// Everything the forward problem depends on at one design: stiffness,
/// one load vector per load case, and the mortar constraints.
#[derive(Debug, Clone)]
pub struct DesignSystem {
    pub k: SymMatrix,
    pub loads: Vec<Vec<f64>>,
    pub md: MortarData,
    pub dofs: DofMap,
}

/// Explicit design derivatives at fixed state `(u, λ)`, each `rows x p`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignDerivs {
    /// `∂(K u)/∂ρ`.
    pub dk_u: Matrix,
    /// `∂f/∂ρ`.
    pub df: Matrix,
    /// `∂(Gᵀ λ)/∂ρ`.
    pub dgt_lambda: Matrix,
    /// `∂(g0 + G u)/∂ρ`.
    pub dgap: Matrix,
}

/// Central differences of a [`DesignSystem`] builder around `rho`, one
/// bundle per `(u, λ)` state (typically one per load case).
pub fn design_derivatives(
    build: &(dyn Fn(&[f64]) -> Result<DesignSystem> + Sync),
    rho: &[f64],
    states: &[(&[f64], &[f64])],
    load_case: &[usize],
    h: Option<f64>,
) -> Result<Vec<DesignDerivs>> {
    check_len("load case map", states.len(), load_case.len())?;
    let p = rho.len();
    let columns: Vec<Result<Vec<[Vec<f64>; 4]>>> = (0..p)
        .into_par_iter()
        .map(|k| {
            let step = h.unwrap_or_else(|| fd_step(rho[k]));
            let mut rp = rho.to_vec();
            let mut rm = rho.to_vec();
            rp[k] += step;
            rm[k] -= step;
            let (sp, sm) = (build(&rp)?, build(&rm)?);
            if sp.dofs != sm.dofs || sp.md.n_rows() != sm.md.n_rows() {
                return Err(Error::TopologyChanged(format!("design component {k}")));
            }
            let inv = 1.0 / (2.0 * step);
            let diff = |a: Vec<f64>, b: Vec<f64>| a.iter().zip(&b).map(|(x, y)| (x - y) * inv).collect::<Vec<f64>>();
            states
                .iter()
                .zip(load_case)
                .map(|(&(u, lam), &lc)| {
                    let dku = diff(sp.k.matvec(u), sm.k.matvec(u));
                    let df = diff(sp.loads[lc].clone(), sm.loads[lc].clone());
                    let dgl = diff(sp.md.g.tr_matvec(lam), sm.md.g.tr_matvec(lam));
                    let dg = diff(crate::mortar::gap(&sp.md, u), crate::mortar::gap(&sm.md, u));
                    Ok([dku, df, dgl, dg])
                })
                .collect()
        })
        .collect();
    let columns: Vec<Vec<[Vec<f64>; 4]>> = columns.into_iter().collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(states.len());
    for s in 0..states.len() {
        let n = states[s].0.len();
        let m = states[s].1.len();
        let mut d = DesignDerivs {
            dk_u: Matrix::zeros(n, p),
            df: Matrix::zeros(n, p),
            dgt_lambda: Matrix::zeros(n, p),
            dgap: Matrix::zeros(m, p),
        };
        for (k, col) in columns.iter().enumerate() {
            let c = &col[s];
            check_len("derivative column", n, c[0].len())?;
            check_len("gap derivative column", m, c[3].len())?;
            d.dk_u.set_column(k, &c[0]);
            d.df.set_column(k, &c[1]);
            d.dgt_lambda.set_column(k, &c[2]);
            d.dgap.set_column(k, &c[3]);
        }
        out.push(d);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sensitivities {
    /// `n x p`.
    pub du_drho: Matrix,
    /// `m x p`; rows outside `active_set` are zero.
    pub dlambda_drho: Matrix,
    pub active_set: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityOptions {
    /// Relative threshold on multipliers and gaps for the active set.
    pub eps: f64,
}

impl Default for SensitivityOptions {
    fn default() -> Self {
        Self { eps: 1e-7 }
    }
}

/// Solves the differentiated equilibrium for all design components.
///
/// Rows with zero mortar weight carry no contact and are skipped. Any row
/// whose multiplier and gap are both below threshold makes the solution map
/// non-differentiable and is reported as [`Error::Degenerate`].
pub fn solve_sensitivity(
    k: &Cholesky,
    md: &MortarData,
    sol: &ForwardSolution,
    derivs: &DesignDerivs,
    opts: &SensitivityOptions,
) -> Result<Sensitivities> {
    let m = md.n_rows();
    let n = k.order();
    let p = derivs.dk_u.ncols();
    check_len("multipliers", m, sol.lambda.len())?;
    check_len("displacements", n, sol.u.len())?;
    let lscale = norm_inf(&sol.lambda).max(f64::MIN_POSITIVE);
    let gscale = norm_inf(&sol.gap).max(f64::MIN_POSITIVE);
    let (eps_a, eps_g) = (opts.eps * lscale, opts.eps * gscale);
    let mut active = Vec::new();
    let mut degenerate = Vec::new();
    for j in 0..m {
        if md.weights[j] <= 0.0 {
            continue;
        }
        if sol.lambda[j] > eps_a {
            active.push(j);
        } else if sol.gap[j] <= eps_g {
            degenerate.push(j);
        }
    }
    if !degenerate.is_empty() {
        return Err(Error::Degenerate(degenerate));
    }
    let ga = md.g.select_rows(&active);
    let saddle = SaddleSystem::new(k, ga)?;
    let cols: Vec<(Vec<f64>, Vec<f64>)> = (0..p)
        .into_par_iter()
        .map(|c| {
            let r1: Vec<f64> =
                (0..n).map(|i| -(derivs.dk_u[(i, c)] - derivs.df[(i, c)]) + derivs.dgt_lambda[(i, c)]).collect();
            let r2: Vec<f64> = active.iter().map(|&j| -derivs.dgap[(j, c)]).collect();
            saddle.solve(&r1, &r2)
        })
        .collect();
    let mut du = Matrix::zeros(n, p);
    let mut dl = Matrix::zeros(m, p);
    for (c, (x, y)) in cols.into_iter().enumerate() {
        du.set_column(c, &x);
        for (a, &j) in active.iter().enumerate() {
            dl[(j, c)] = y[a];
        }
    }
    Ok(Sensitivities { du_drho: du, dlambda_drho: dl, active_set: active })
}

/// Explicit partial derivatives of `q` scalar functions of `(ρ, u, λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partials {
    /// `q x p`.
    pub d_rho: Matrix,
    /// `q x n`.
    pub d_u: Matrix,
    /// `q x m`.
    pub d_lambda: Matrix,
}

impl Partials {
    pub fn zeros(q: usize, p: usize, n: usize, m: usize) -> Self {
        Self { d_rho: Matrix::zeros(q, p), d_u: Matrix::zeros(q, n), d_lambda: Matrix::zeros(q, m) }
    }
}

/// `d/dρ = ∂/∂ρ + ∂/∂u du/dρ + ∂/∂λ dλ/dρ`, `q x p`.
pub fn chain_rule(parts: &Partials, sens: &Sensitivities) -> Result<Matrix> {
    let q = parts.d_rho.nrows();
    let p = parts.d_rho.ncols();
    check_len("design columns", sens.du_drho.ncols(), p)?;
    check_len("u partial columns", sens.du_drho.nrows(), parts.d_u.ncols())?;
    check_len("λ partial columns", sens.dlambda_drho.nrows(), parts.d_lambda.ncols())?;
    check_len("u partial rows", q, parts.d_u.nrows())?;
    check_len("λ partial rows", q, parts.d_lambda.nrows())?;
    let a = parts.d_u.matmul(&sens.du_drho);
    let b = parts.d_lambda.matmul(&sens.dlambda_drho);
    let mut out = parts.d_rho.clone();
    for i in 0..q {
        for j in 0..p {
            out[(i, j)] += a[(i, j)] + b[(i, j)];
        }
    }
    Ok(out)
}

/// Objective gradient and constraint Jacobian in one call.
pub fn total_derivatives(a: &Partials, c: &Partials, sens: &Sensitivities) -> Result<(Vec<f64>, Matrix)> {
    check_len("objective rows", 1, a.d_rho.nrows())?;
    let da = chain_rule(a, sens)?;
    Ok((da.row(0).to_vec(), chain_rule(c, sens)?))
}
