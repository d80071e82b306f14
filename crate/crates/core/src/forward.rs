//! Frictionless contact as a convex QP: minimize `1/2 uᵀKu - fᵀu` subject
//! to `g0 + G u >= 0`.
//!
//! With `K` factored once, eliminating `u = K⁻¹(f + Gᵀλ)` leaves a monotone
//! complementarity problem in the multipliers,
//! `s = b + W λ >= 0, λ >= 0, λ s = 0` with `W = G K⁻¹ Gᵀ`,
//! `b = g0 + G K⁻¹ f`. It is solved by a Mehrotra predictor-corrector
//! interior-point method and finished by an active-set solve that restores
//! exact complementarity.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_inf, Cholesky, Matrix, SymMatrix};
use crate::mortar::{gap, MortarData};

/// Residual norms of the contact optimality conditions.
///
/// `stationarity` is `‖Ku - f - Gᵀλ‖∞ / (1 + max(‖f‖∞, ‖Gᵀλ‖∞))`; the
/// other three are absolute: `max(-g)`, `max(-λ)`, `max |λ g|`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual).max(self.complementarity)
    }
}

impl fmt::Display for KktResiduals {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "stationarity {:.3e}, primal {:.3e}, dual {:.3e}, complementarity {:.3e}",
            self.stationarity, self.primal, self.dual, self.complementarity
        )
    }
}

#[derive(Debug, Clone)]
pub struct ForwardProblem {
    pub k: SymMatrix,
    pub f_ext: Vec<f64>,
    pub md: MortarData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Multiplies the default starting point; any positive value is valid.
    pub start_scale: f64,
    /// Multipliers and gaps below this (relative) size are clipped to zero.
    pub clip: f64,
    pub record_log: bool,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 200, start_scale: 1.0, clip: 1e-10, record_log: false }
    }
}

/// One interior-point iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub mu: f64,
    pub primal: f64,
    pub step: f64,
}

impl fmt::Display for IterationRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:4} mu {:.3e} primal {:.3e} step {:.3}", self.iter, self.mu, self.primal, self.step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSolution {
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
    pub gap: Vec<f64>,
    pub kkt: KktResiduals,
    pub iterations: usize,
    pub log: Vec<IterationRecord>,
}

/// Factorization and condensed operators shared by every load case on one
/// design.
#[derive(Debug, Clone)]
pub struct ContactSolver {
    chol: Cholesky,
    /// Rows with positive mortar weight; the others carry no contact.
    rows: Vec<usize>,
    /// `Z = K⁻¹ Gᵀ` restricted to `rows` (n x m_a).
    z: Matrix,
    w: Matrix,
}

impl ContactSolver {
    pub fn new(k: &SymMatrix, md: &MortarData) -> Result<Self> {
        let chol = Cholesky::new(k)?;
        Ok(Self::from_factor(chol, md))
    }

    pub fn from_factor(chol: Cholesky, md: &MortarData) -> Self {
        let rows: Vec<usize> = (0..md.n_rows()).filter(|&j| md.weights[j] > 0.0).collect();
        let ga = md.g.select_rows(&rows);
        let z = chol.solve_rows_transposed(&ga);
        let w = ga.matmul(&z);
        Self { chol, rows, z, w }
    }

    pub fn factor(&self) -> &Cholesky {
        &self.chol
    }

    /// Solves the contact problem for load `f_ext`.
    pub fn solve(
        &self,
        k: &SymMatrix,
        f_ext: &[f64],
        md: &MortarData,
        opts: &ForwardOptions,
    ) -> Result<ForwardSolution> {
        let u_f = self.chol.solve(f_ext);
        let m = md.n_rows();
        let ma = self.rows.len();
        let mut log = Vec::new();
        let mut lambda = vec![0.0; m];
        let mut iterations = 0;
        if ma > 0 {
            let g_uf = gap(md, &u_f);
            let b: Vec<f64> = self.rows.iter().map(|&j| g_uf[j]).collect();
            let (la, it) = self.interior_point(&b, opts, &mut log)?;
            iterations = it;
            for (a, &j) in self.rows.iter().enumerate() {
                lambda[j] = la[a];
            }
        }
        let mut u = u_f;
        for (a, &j) in self.rows.iter().enumerate() {
            let l = lambda[j];
            if l != 0.0 {
                for (i, ui) in u.iter_mut().enumerate() {
                    *ui += self.z[(i, a)] * l;
                }
            }
        }
        let g = gap(md, &u);
        let kkt = kkt_residuals(k, f_ext, md, &u, &lambda);
        Ok(ForwardSolution { u, lambda, gap: g, kkt, iterations, log })
    }

    fn interior_point(
        &self,
        b: &[f64],
        opts: &ForwardOptions,
        log: &mut Vec<IterationRecord>,
    ) -> Result<(Vec<f64>, usize)> {
        let m = b.len();
        let w = &self.w;
        let wdiag: Vec<f64> = (0..m).map(|i| w[(i, i)]).collect();
        let wmax = wdiag.iter().fold(0.0f64, |a, &v| a.max(v)).max(f64::MIN_POSITIVE);
        let bscale = norm_inf(b).max(1e-300);
        let s_scale = bscale;
        let l_scale = bscale / wmax;

        // Early exit: no contact needed.
        if b.iter().all(|&v| v >= 0.0) {
            return Ok((vec![0.0; m], 0));
        }

        let mut lam = vec![opts.start_scale * l_scale; m];
        let wl = w.matvec(&lam);
        let mut s: Vec<f64> = (0..m).map(|i| (b[i] + wl[i]).max(opts.start_scale * s_scale)).collect();

        let tol = opts.tol;
        let mut best = None;
        for iter in 1..=opts.max_iter {
            let wl = w.matvec(&lam);
            let rp: Vec<f64> = (0..m).map(|i| wl[i] + b[i] - s[i]).collect();
            let mu = dot(&lam, &s) / m as f64;

            if let Some(sol) = self.polish(b, &lam, &s, l_scale, s_scale, tol) {
                return Ok((sol, iter - 1));
            }

            let mut mat = SymMatrix::zeros(m);
            for i in 0..m {
                for j in 0..=i {
                    mat.set(i, j, w[(i, j)]);
                }
                mat.add(i, i, s[i] / lam[i]);
            }
            let chol = match Cholesky::new(&mat) {
                Ok(c) => c,
                Err(_) => break,
            };

            let newton = |rc: &[f64]| -> (Vec<f64>, Vec<f64>) {
                let rhs: Vec<f64> = (0..m).map(|i| -rp[i] - rc[i] / lam[i]).collect();
                let dl = chol.solve(&rhs);
                let wdl = w.matvec(&dl);
                let ds: Vec<f64> = (0..m).map(|i| wdl[i] + rp[i]).collect();
                (dl, ds)
            };

            let rc: Vec<f64> = (0..m).map(|i| lam[i] * s[i]).collect();
            let (dl_a, ds_a) = newton(&rc);
            let a_aff = max_step(&lam, &dl_a).min(max_step(&s, &ds_a)).min(1.0);
            let mu_aff = (0..m).map(|i| (lam[i] + a_aff * dl_a[i]) * (s[i] + a_aff * ds_a[i])).sum::<f64>() / m as f64;
            let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);
            let rc2: Vec<f64> = (0..m).map(|i| rc[i] + dl_a[i] * ds_a[i] - sigma * mu).collect();
            let (dl, ds) = newton(&rc2);
            let alpha = (0.995 * max_step(&lam, &dl).min(max_step(&s, &ds))).min(1.0);
            for i in 0..m {
                lam[i] += alpha * dl[i];
                s[i] += alpha * ds[i];
            }
            if opts.record_log {
                log.push(IterationRecord { iter, mu, primal: norm_inf(&rp), step: alpha });
            }
            best = Some(iter);
        }
        // Last chance after the final update.
        if let Some(sol) = self.polish(b, &lam, &s, l_scale, s_scale, tol) {
            return Ok((sol, opts.max_iter));
        }
        let wl = w.matvec(&lam);
        let residuals = KktResiduals {
            stationarity: 0.0,
            primal: (0..m).map(|i| (wl[i] + b[i]).min(0.0).abs()).fold(0.0, f64::max),
            dual: lam.iter().map(|l| (-l).max(0.0)).fold(0.0, f64::max),
            complementarity: (0..m).map(|i| (lam[i] * (wl[i] + b[i])).abs()).fold(0.0, f64::max),
        };
        Err(Error::NonConvergence { iterations: best.unwrap_or(0), residuals })
    }

    /// Solves `W_AA λ_A = -b_A` on the set where the multiplier dominates the
    /// gap; accepted when the result is primal and dual feasible.
    fn polish(&self, b: &[f64], lam: &[f64], s: &[f64], l_scale: f64, s_scale: f64, tol: f64) -> Option<Vec<f64>> {
        let m = b.len();
        let mu = dot(lam, s) / m as f64;
        if mu > 1e-3 * l_scale * s_scale {
            return None;
        }
        let act: Vec<usize> = (0..m).filter(|&i| lam[i] / l_scale > s[i] / s_scale).collect();
        let mut out = vec![0.0; m];
        if !act.is_empty() {
            let mut waa = SymMatrix::zeros(act.len());
            for (p, &i) in act.iter().enumerate() {
                for (q, &j) in act.iter().enumerate().take(p + 1) {
                    waa.set(p, q, self.w[(i, j)]);
                }
            }
            let chol = Cholesky::with_tolerance(&waa, 1e-13).ok()?;
            let rhs: Vec<f64> = act.iter().map(|&i| -b[i]).collect();
            let la = chol.solve(&rhs);
            if la.iter().any(|&v| v < 0.0) {
                return None;
            }
            for (p, &i) in act.iter().enumerate() {
                out[i] = la[p];
            }
        }
        let wl = self.w.matvec(&out);
        let feasible = (0..m).all(|i| b[i] + wl[i] >= -tol * s_scale);
        feasible.then_some(out)
    }
}

fn max_step(x: &[f64], dx: &[f64]) -> f64 {
    x.iter().zip(dx).filter(|(_, &d)| d < 0.0).map(|(&v, &d)| -v / d).fold(f64::INFINITY, f64::min)
}

/// Solves the contact QP from scratch.
pub fn solve_forward(p: &ForwardProblem, opts: &ForwardOptions) -> Result<ForwardSolution> {
    let solver = ContactSolver::new(&p.k, &p.md)?;
    let sol = solver.solve(&p.k, &p.f_ext, &p.md, opts)?;
    clip_solution(sol, opts.clip)
}

/// Zeroes multipliers and gaps that are negligible relative to their
/// largest entries.
pub fn clip_solution(mut sol: ForwardSolution, clip: f64) -> Result<ForwardSolution> {
    let lmax = norm_inf(&sol.lambda);
    let gmax = norm_inf(&sol.gap);
    for l in sol.lambda.iter_mut() {
        if l.abs() <= clip * lmax {
            *l = 0.0;
        }
    }
    for g in sol.gap.iter_mut() {
        if g.abs() <= clip * gmax {
            *g = 0.0;
        }
    }
    Ok(sol)
}

/// Residuals of the optimality conditions at `(u, λ)`.
pub fn kkt_residuals(k: &SymMatrix, f_ext: &[f64], md: &MortarData, u: &[f64], lambda: &[f64]) -> KktResiduals {
    let ku = k.matvec(u);
    let gtl = md.g.tr_matvec(lambda);
    let r: Vec<f64> = (0..u.len()).map(|i| ku[i] - f_ext[i] - gtl[i]).collect();
    let scale = 1.0 + norm_inf(f_ext).max(norm_inf(&gtl));
    let g = gap(md, u);
    KktResiduals {
        stationarity: norm_inf(&r) / scale,
        primal: g.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max),
        dual: lambda.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max),
        complementarity: lambda.iter().zip(&g).map(|(l, v)| (l * v).abs()).fold(0.0, f64::max),
    }
}
