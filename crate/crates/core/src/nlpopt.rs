//! Interior-point optimizer for `min a(ρ)` s.t. `c(ρ) >= 0`, `ρ_l <= ρ <= ρ_u`.
//!
//! Constraints get slacks `c(ρ) - s = 0, s >= 0` and every bound a log
//! barrier. The Lagrangian Hessian is a damped BFGS approximation and steps
//! are globalized by a filter line search on (infeasibility, barrier
//! function). When the line search fails a Gauss-Newton restoration phase
//! reduces the constraint violation alone.
//!
//! Internally the design is mapped to the unit box and each function is
//! scaled so that its gradient at the start is at most `max_gradient`.

use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_inf, Cholesky, Matrix, SymMatrix};
use crate::scenarios::{Evaluation, Scenario};

/// A design problem with a validated box.
pub struct NlpProblem<'a> {
    scenario: &'a dyn Scenario,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl<'a> NlpProblem<'a> {
    pub fn new(scenario: &'a dyn Scenario) -> Result<Self> {
        let b = scenario.bounds();
        if b.is_empty() {
            return Err(Error::Invalid("problem has no design variables".into()));
        }
        for (i, r) in b.iter().enumerate() {
            if !(r[0] < r[1]) || !r[0].is_finite() || !r[1].is_finite() {
                return Err(Error::Invalid(format!("bound {i} is [{}, {}]", r[0], r[1])));
            }
        }
        Ok(Self { scenario, lower: b.iter().map(|r| r[0]).collect(), upper: b.iter().map(|r| r[1]).collect() })
    }

    pub fn n_params(&self) -> usize {
        self.lower.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.scenario.n_constraints()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NlpOptions {
    pub max_iter: usize,
    /// Scaled dual optimality.
    pub tol_dual: f64,
    /// Largest constraint violation, in problem units.
    pub tol_viol: f64,
    pub tol_compl: f64,
    pub mu_init: f64,
    /// Barrier divisor applied when the barrier problem is solved.
    pub mu_factor: f64,
    /// Relative distance kept from the bounds at the start.
    pub bound_push: f64,
    pub max_gradient: f64,
    /// Re-evaluations at randomly perturbed designs after a degenerate
    /// contact state.
    pub max_retries: usize,
    pub retry_radius: f64,
    pub seed: u64,
    pub max_restoration: usize,
}

impl Default for NlpOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol_dual: 1e-4,
            tol_viol: 1e-6,
            tol_compl: 1e-7,
            mu_init: 0.1,
            mu_factor: 5.0,
            bound_push: 1e-2,
            max_gradient: 100.0,
            max_retries: 3,
            retry_radius: 1e-6,
            seed: 0,
            max_restoration: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepType {
    Initial,
    Normal,
    Restoration,
}

impl fmt::Display for StepType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepType::Initial => "initial",
            StepType::Normal => "normal",
            StepType::Restoration => "restoration",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub iter: usize,
    pub rho: Vec<f64>,
    pub objective: f64,
    pub violation: f64,
    pub dual_opt: f64,
    pub mu: f64,
    pub step: StepType,
}

/// Accepted iterates in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterateLog {
    records: Vec<IterateRecord>,
}

impl IterateLog {
    pub fn records(&self) -> &[IterateRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn push(&mut self, r: IterateRecord) {
        self.records.push(r);
    }

    pub fn header(p: usize) -> Vec<String> {
        let mut h = vec!["iter".to_string()];
        h.extend((0..p).map(|i| format!("rho_{i}")));
        h.extend(["objective", "viol", "dual_opt", "step_type"].map(String::from));
        h
    }

    pub fn write_csv<W: Write>(&self, p: usize, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(Self::header(p))?;
        for r in &self.records {
            let mut row = vec![r.iter.to_string()];
            row.extend(r.rho.iter().map(|v| format!("{v:.12e}")));
            row.push(format!("{:.12e}", r.objective));
            row.push(format!("{:.12e}", r.violation));
            row.push(format!("{:.12e}", r.dual_opt));
            row.push(r.step.to_string());
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NlpStatus {
    Converged,
    MaxIterations,
    /// Restoration could not reduce the violation.
    Infeasible,
    /// No acceptable step from a point with satisfied constraints.
    Stalled,
}

impl fmt::Display for NlpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NlpStatus::Converged => "converged",
            NlpStatus::MaxIterations => "max-iterations",
            NlpStatus::Infeasible => "infeasible",
            NlpStatus::Stalled => "stalled",
        })
    }
}

#[derive(Debug, Clone)]
pub struct NlpResult {
    pub status: NlpStatus,
    pub rho: Vec<f64>,
    pub evaluation: Evaluation,
    /// Constraint multipliers in problem units.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    pub dual_opt: f64,
    /// Best accepted iterate with violation within tolerance.
    pub best_feasible: Option<(Vec<f64>, Evaluation)>,
    pub log: IterateLog,
    pub evaluations: usize,
}

impl NlpResult {
    pub fn converged(&self) -> bool {
        self.status == NlpStatus::Converged
    }
}

/// Evaluated point in scaled coordinates.
#[derive(Debug, Clone)]
struct Point {
    x: Vec<f64>,
    rho: Vec<f64>,
    raw: Evaluation,
    f: f64,
    c: Vec<f64>,
    g: Vec<f64>,
    /// `q x p`.
    j: Matrix,
}

struct Evaluator<'a> {
    prob: &'a NlpProblem<'a>,
    width: Vec<f64>,
    sf: f64,
    sc: Vec<f64>,
    rng: ChaCha8Rng,
    retries: usize,
    radius: f64,
    count: usize,
}

impl<'a> Evaluator<'a> {
    fn rho(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.prob.lower).zip(&self.width).map(|((x, l), w)| l + w * x).collect()
    }

    fn to_x(&self, rho: &[f64]) -> Vec<f64> {
        rho.iter().zip(&self.prob.lower).zip(&self.width).map(|((r, l), w)| (r - l) / w).collect()
    }

    /// Evaluates at `x`, retrying at perturbed designs on degeneracy.
    fn eval(&mut self, x: &[f64]) -> Result<Point> {
        let mut rho = self.rho(x);
        let mut attempt = 0;
        loop {
            self.count += 1;
            match self.prob.scenario.evaluate_with_gradients(&rho) {
                Ok((raw, grads)) => return self.point(rho, raw, grads),
                Err(Error::Degenerate(idx)) if attempt < self.retries => {
                    attempt += 1;
                    let base = self.rho(x);
                    rho = base
                        .iter()
                        .enumerate()
                        .map(|(i, &r)| {
                            let v = r + self.rng.random_range(-self.radius..=self.radius);
                            v.clamp(self.prob.lower[i], self.prob.upper[i])
                        })
                        .collect();
                    let _ = idx;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn point(&self, rho: Vec<f64>, raw: Evaluation, grads: crate::scenarios::Gradients) -> Result<Point> {
        let p = rho.len();
        let q = raw.constraints.len();
        if grads.objective.len() != p || grads.constraints.nrows() != q || (q > 0 && grads.constraints.ncols() != p) {
            return Err(Error::Dimension("gradient shape does not match the problem".into()));
        }
        let g: Vec<f64> = (0..p).map(|k| self.sf * grads.objective[k] * self.width[k]).collect();
        let mut j = Matrix::zeros(q, p);
        for i in 0..q {
            for k in 0..p {
                j[(i, k)] = self.sc[i] * grads.constraints[(i, k)] * self.width[k];
            }
        }
        let c = raw.constraints.iter().zip(&self.sc).map(|(c, s)| c * s).collect();
        Ok(Point { x: self.to_x(&rho), f: self.sf * raw.objective, c, g, j, rho, raw })
    }
}

/// Barrier state at one iterate.
#[derive(Debug, Clone)]
struct Iterate {
    pt: Point,
    s: Vec<f64>,
    y: Vec<f64>,
    zl: Vec<f64>,
    zu: Vec<f64>,
}

const GAMMA_THETA: f64 = 1e-5;
const GAMMA_PHI: f64 = 1e-8;
const ETA_PHI: f64 = 1e-4;
const S_THETA: f64 = 1.1;
const S_PHI: f64 = 2.3;
const KAPPA_EPS: f64 = 10.0;
const KAPPA_SIGMA: f64 = 1e10;
const DUAL_SCALE_MAX: f64 = 100.0;
/// Iterations without a 10% drop of the barrier error after which `μ` is
/// decreased anyway. Contact active-set changes make the constraints only
/// piecewise smooth, and at a kink the barrier subproblem cannot converge.
const BARRIER_STALL: usize = 10;

fn theta(pt: &Point, s: &[f64]) -> f64 {
    pt.c.iter().zip(s).map(|(c, s)| (c - s).abs()).sum()
}

fn barrier(pt: &Point, s: &[f64], mu: f64) -> f64 {
    let mut v = pt.f;
    for &si in s {
        v -= mu * si.ln();
    }
    for &x in &pt.x {
        v -= mu * (x.ln() + (1.0 - x).ln());
    }
    v
}

/// `(dual residual, scale)` of the Lagrangian gradient.
fn dual_residual(it: &Iterate) -> (Vec<f64>, f64) {
    let p = it.pt.x.len();
    let jty = it.pt.j.tr_matvec(&it.y);
    let r: Vec<f64> = (0..p).map(|k| it.pt.g[k] - jty[k] - it.zl[k] + it.zu[k]).collect();
    let n = (it.y.len() + 2 * p) as f64;
    let sum: f64 = it.y.iter().chain(&it.zl).chain(&it.zu).map(|v| v.abs()).sum();
    (r, (sum / n).max(DUAL_SCALE_MAX) / DUAL_SCALE_MAX)
}

fn dual_opt(it: &Iterate) -> f64 {
    let (r, sd) = dual_residual(it);
    norm_inf(&r) / sd
}

fn complementarity(it: &Iterate, mu: f64) -> f64 {
    let mut e = 0.0f64;
    for (s, y) in it.s.iter().zip(&it.y) {
        e = e.max((s * y - mu).abs());
    }
    for k in 0..it.pt.x.len() {
        e = e.max((it.pt.x[k] * it.zl[k] - mu).abs());
        e = e.max(((1.0 - it.pt.x[k]) * it.zu[k] - mu).abs());
    }
    e
}

fn barrier_error(it: &Iterate, mu: f64) -> f64 {
    let inf = it.pt.c.iter().zip(&it.s).fold(0.0f64, |m, (c, s)| m.max((c - s).abs()));
    dual_opt(it).max(inf).max(complementarity(it, mu))
}

/// Largest `α <= 1` keeping `v + α dv >= (1 - τ) v`.
fn fraction_to_boundary(v: &[f64], dv: &[f64], tau: f64) -> f64 {
    let mut a = 1.0f64;
    for (x, d) in v.iter().zip(dv) {
        if *d < 0.0 {
            a = a.min(-tau * x / d);
        }
    }
    a
}

struct Direction {
    dx: Vec<f64>,
    ds: Vec<f64>,
    dy: Vec<f64>,
    dzl: Vec<f64>,
    dzu: Vec<f64>,
}

fn newton_direction(it: &Iterate, b: &SymMatrix, mu: f64) -> Result<Direction> {
    let p = it.pt.x.len();
    let q = it.s.len();
    let x = &it.pt.x;
    let sig_s: Vec<f64> = (0..q).map(|i| it.y[i] / it.s[i]).collect();
    let rc: Vec<f64> = (0..q).map(|i| it.pt.c[i] - it.s[i]).collect();
    let mut m = b.clone();
    for k in 0..p {
        m.add(k, k, it.zl[k] / x[k] + it.zu[k] / (1.0 - x[k]));
    }
    let j = &it.pt.j;
    for a in 0..p {
        for c in 0..=a {
            let mut v = 0.0;
            for i in 0..q {
                v += j[(i, a)] * sig_s[i] * j[(i, c)];
            }
            m.add(a, c, v);
        }
    }
    let w: Vec<f64> = (0..q).map(|i| mu / it.s[i] - sig_s[i] * rc[i]).collect();
    let jtw = j.tr_matvec(&w);
    let rhs: Vec<f64> = (0..p).map(|k| -it.pt.g[k] + mu / x[k] - mu / (1.0 - x[k]) + jtw[k]).collect();
    let chol = match Cholesky::new(&m) {
        Ok(c) => c,
        Err(_) => {
            let shift = 1e-8 * (1.0 + m.max_abs());
            for k in 0..p {
                m.add(k, k, shift);
            }
            Cholesky::new(&m)?
        }
    };
    let dx = chol.solve(&rhs);
    let jdx = j.matvec(&dx);
    let ds: Vec<f64> = (0..q).map(|i| jdx[i] + rc[i]).collect();
    let dy: Vec<f64> = (0..q).map(|i| mu / it.s[i] - it.y[i] - sig_s[i] * ds[i]).collect();
    let dzl: Vec<f64> = (0..p).map(|k| mu / x[k] - it.zl[k] - it.zl[k] / x[k] * dx[k]).collect();
    let dzu: Vec<f64> = (0..p).map(|k| mu / (1.0 - x[k]) - it.zu[k] + it.zu[k] / (1.0 - x[k]) * dx[k]).collect();
    Ok(Direction { dx, ds, dy, dzl, dzu })
}

/// Directional derivative of the barrier function along `(dx, ds)`.
fn barrier_slope(it: &Iterate, d: &Direction, mu: f64) -> f64 {
    let mut v = dot(&it.pt.g, &d.dx);
    for (s, ds) in it.s.iter().zip(&d.ds) {
        v -= mu * ds / s;
    }
    for (x, dx) in it.pt.x.iter().zip(&d.dx) {
        v += mu * (-dx / x + dx / (1.0 - x));
    }
    v
}

#[derive(Debug, Default)]
struct Filter {
    entries: Vec<(f64, f64)>,
    theta_max: f64,
}

impl Filter {
    fn acceptable(&self, th: f64, phi: f64) -> bool {
        th <= self.theta_max
            && self.entries.iter().all(|&(t, p)| th < (1.0 - GAMMA_THETA) * t || phi < p - GAMMA_PHI * t)
    }

    fn add(&mut self, th: f64, phi: f64) {
        let (t, p) = ((1.0 - GAMMA_THETA) * th, phi - GAMMA_PHI * th);
        self.entries.retain(|&(a, b)| !(a >= t && b >= p));
        self.entries.push((t, p));
    }
}

fn violation(e: &Evaluation) -> f64 {
    e.max_violation()
}

/// True when the trial raises both the objective and the violation.
fn worsens_both(prev: &Evaluation, trial: &Evaluation) -> bool {
    trial.objective > prev.objective && violation(trial) > violation(prev)
}

fn bfgs_update(b: &mut SymMatrix, s: &[f64], y: &[f64], first: bool) {
    let p = s.len();
    let bs = b.matvec(s);
    let sbs = dot(s, &bs);
    let sy = dot(s, y);
    if sbs <= 0.0 || !sbs.is_finite() {
        return;
    }
    if first && sy > 0.0 {
        let scale = dot(y, y) / sy;
        if scale.is_finite() && scale > 0.0 {
            *b = SymMatrix::identity(p);
            for k in 0..p {
                b.set(k, k, scale);
            }
            return;
        }
    }
    let (r, sr) = if sy >= 0.2 * sbs {
        (y.to_vec(), sy)
    } else {
        let t = 0.8 * sbs / (sbs - sy);
        let r: Vec<f64> = (0..p).map(|k| t * y[k] + (1.0 - t) * bs[k]).collect();
        let sr = dot(s, &r);
        (r, sr)
    };
    if sr <= 0.0 {
        return;
    }
    for a in 0..p {
        for c in 0..=a {
            let v = b.get(a, c) - bs[a] * bs[c] / sbs + r[a] * r[c] / sr;
            b.set(a, c, v);
        }
    }
}

fn lagrangian_gradient(pt: &Point, y: &[f64]) -> Vec<f64> {
    let jty = pt.j.tr_matvec(y);
    pt.g.iter().zip(&jty).map(|(g, j)| g - j).collect()
}

/// Minimizes `a` over the problem box and constraints from `rho0`.
pub fn solve_nlp(prob: &NlpProblem, rho0: &[f64], opts: &NlpOptions) -> Result<NlpResult> {
    let p = prob.n_params();
    let q = prob.n_constraints();
    crate::error::check_len("start point", p, rho0.len())?;
    let width: Vec<f64> = prob.lower.iter().zip(&prob.upper).map(|(l, u)| u - l).collect();
    let mut ev = Evaluator {
        prob,
        width,
        sf: 1.0,
        sc: vec![1.0; q],
        rng: ChaCha8Rng::seed_from_u64(opts.seed),
        retries: opts.max_retries,
        radius: opts.retry_radius,
        count: 0,
    };
    let push = opts.bound_push.clamp(1e-12, 0.49);
    let x0: Vec<f64> = ev.to_x(rho0).iter().map(|v| v.clamp(push, 1.0 - push)).collect();
    let first = ev.eval(&x0)?;
    let gmax = norm_inf(&first.g);
    ev.sf = if gmax > opts.max_gradient { opts.max_gradient / gmax } else { 1.0 };
    for i in 0..q {
        let r = norm_inf(first.j.row(i));
        ev.sc[i] = if r > opts.max_gradient { opts.max_gradient / r } else { 1.0 };
    }
    let pt = ev.point(first.rho.clone(), first.raw.clone(), unscaled_gradients(&first, &ev))?;

    let mut mu = opts.mu_init;
    let mu_min = opts.tol_compl / 10.0;
    let mut it = fresh_iterate(pt, mu);
    let mut b = SymMatrix::identity(p);
    let mut b_first = true;
    let mut b_reset = false;
    let mut filter = Filter { entries: Vec::new(), theta_max: 1e4 * theta(&it.pt, &it.s).max(1.0) };
    let theta_min = 1e-4 * theta(&it.pt, &it.s).max(1.0);
    let mut log = IterateLog::default();
    let mut best: Option<(Vec<f64>, Evaluation)> = None;
    let mut iter = 0;
    let mut stall = (f64::INFINITY, 0usize);
    let record = |log: &mut IterateLog, best: &mut Option<(Vec<f64>, Evaluation)>, it: &Iterate, iter, mu, step| {
        let v = violation(&it.pt.raw);
        log.push(IterateRecord {
            iter,
            rho: it.pt.rho.clone(),
            objective: it.pt.raw.objective,
            violation: v,
            dual_opt: dual_opt(it),
            mu,
            step,
        });
        if v <= opts.tol_viol && best.as_ref().is_none_or(|(_, e)| it.pt.raw.objective < e.objective) {
            *best = Some((it.pt.rho.clone(), it.pt.raw.clone()));
        }
    };
    record(&mut log, &mut best, &it, 0, mu, StepType::Initial);

    let status = loop {
        let compl = complementarity(&it, 0.0);
        if dual_opt(&it) <= opts.tol_dual && violation(&it.pt.raw) <= opts.tol_viol && compl <= opts.tol_compl {
            break NlpStatus::Converged;
        }
        if iter >= opts.max_iter {
            break NlpStatus::MaxIterations;
        }
        let err = barrier_error(&it, mu);
        if err < 0.9 * stall.0 {
            stall = (err, 0);
        } else {
            stall.1 += 1;
        }
        let forced = stall.1 >= BARRIER_STALL;
        if mu > mu_min && (forced || err <= KAPPA_EPS * mu) {
            while mu > mu_min && (forced || barrier_error(&it, mu) <= KAPPA_EPS * mu) {
                mu = (mu / opts.mu_factor).max(mu_min);
                if forced {
                    break;
                }
            }
            filter.entries.clear();
            stall = (f64::INFINITY, 0);
        }
        let d = newton_direction(&it, &b, mu)?;
        let tau = (1.0 - mu).max(0.99);
        let mut x_b: Vec<f64> = it.pt.x.clone();
        x_b.extend(it.pt.x.iter().map(|x| 1.0 - x));
        x_b.extend(&it.s);
        let mut dx_b: Vec<f64> = d.dx.clone();
        dx_b.extend(d.dx.iter().map(|v| -v));
        dx_b.extend(&d.ds);
        let alpha_max = fraction_to_boundary(&x_b, &dx_b, tau);
        let mut z: Vec<f64> = it.y.clone();
        z.extend(&it.zl);
        z.extend(&it.zu);
        let mut dz: Vec<f64> = d.dy.clone();
        dz.extend(&d.dzl);
        dz.extend(&d.dzu);
        let alpha_z = fraction_to_boundary(&z, &dz, tau);

        let th = theta(&it.pt, &it.s);
        let phi = barrier(&it.pt, &it.s, mu);
        let slope = barrier_slope(&it, &d, mu);
        let alpha_min = {
            let mut a = GAMMA_THETA;
            if slope < 0.0 {
                a = a.min(GAMMA_PHI * th / -slope).min(th.powf(S_THETA) / (-slope).powf(S_PHI));
            }
            (0.05 * a).max(1e-12)
        };
        let mut alpha = alpha_max;
        let mut accepted: Option<(Point, Vec<f64>, f64)> = None;
        while alpha >= alpha_min {
            let xt: Vec<f64> = (0..p).map(|k| it.pt.x[k] + alpha * d.dx[k]).collect();
            let st: Vec<f64> = (0..q).map(|i| it.s[i] + alpha * d.ds[i]).collect();
            if let Ok(pt) = ev.eval(&xt) {
                if pt.x.iter().all(|&v| v > 0.0 && v < 1.0) && !worsens_both(&it.pt.raw, &pt.raw) {
                    let tht = theta(&pt, &st);
                    let pht = barrier(&pt, &st, mu);
                    if pht.is_finite() && filter.acceptable(tht, pht) {
                        let switching = slope < 0.0 && alpha * (-slope).powf(S_PHI) > th.powf(S_THETA);
                        let ok = if switching && th <= theta_min {
                            pht <= phi + ETA_PHI * alpha * slope
                        } else {
                            tht <= (1.0 - GAMMA_THETA) * th || pht <= phi - GAMMA_PHI * th
                        };
                        if ok {
                            if !(switching && pht <= phi + ETA_PHI * alpha * slope) {
                                filter.add(th, phi);
                            }
                            accepted = Some((pt, st, alpha));
                            break;
                        }
                    }
                }
            }
            alpha *= 0.5;
        }

        iter += 1;
        match accepted {
            Some((pt, st, _)) => {
                let az = alpha_z.min(1.0);
                let mut y: Vec<f64> = (0..q).map(|i| it.y[i] + az * d.dy[i]).collect();
                let mut zl: Vec<f64> = (0..p).map(|k| it.zl[k] + az * d.dzl[k]).collect();
                let mut zu: Vec<f64> = (0..p).map(|k| it.zu[k] + az * d.dzu[k]).collect();
                for i in 0..q {
                    y[i] = y[i].clamp(mu / (KAPPA_SIGMA * st[i]), KAPPA_SIGMA * mu / st[i]);
                }
                for k in 0..p {
                    let (lo, hi) = (pt.x[k], 1.0 - pt.x[k]);
                    zl[k] = zl[k].clamp(mu / (KAPPA_SIGMA * lo), KAPPA_SIGMA * mu / lo);
                    zu[k] = zu[k].clamp(mu / (KAPPA_SIGMA * hi), KAPPA_SIGMA * mu / hi);
                }
                let step: Vec<f64> = (0..p).map(|k| pt.x[k] - it.pt.x[k]).collect();
                let gl_new = lagrangian_gradient(&pt, &y);
                let gl_old = lagrangian_gradient(&it.pt, &y);
                let yk: Vec<f64> = (0..p).map(|k| gl_new[k] - gl_old[k]).collect();
                bfgs_update(&mut b, &step, &yk, b_first);
                b_first = false;
                b_reset = false;
                it = Iterate { pt, s: st, y, zl, zu };
                record(&mut log, &mut best, &it, iter, mu, StepType::Normal);
            }
            None if th <= theta_min * 1e-2 || violation(&it.pt.raw) <= opts.tol_viol => {
                if b_reset {
                    break NlpStatus::Stalled;
                }
                b = SymMatrix::identity(p);
                b_first = true;
                b_reset = true;
                filter.entries.clear();
            }
            None => {
                filter.add(th, phi);
                match restore(&mut ev, &it, &filter, mu, opts, &mut iter, &mut |r: &Iterate, k| {
                    record(&mut log, &mut best, r, k, mu, StepType::Restoration)
                }) {
                    Some(next) => {
                        it = next;
                        b = SymMatrix::identity(p);
                        b_first = true;
                    }
                    None => break NlpStatus::Infeasible,
                }
            }
        }
    };

    let multipliers: Vec<f64> = (0..q).map(|i| it.y[i] * ev.sc[i] / ev.sf).collect();
    Ok(NlpResult {
        status,
        dual_opt: dual_opt(&it),
        rho: it.pt.rho.clone(),
        evaluation: it.pt.raw.clone(),
        multipliers,
        iterations: iter,
        best_feasible: best,
        log,
        evaluations: ev.count,
    })
}

fn unscaled_gradients(pt: &Point, ev: &Evaluator) -> crate::scenarios::Gradients {
    let p = pt.x.len();
    let q = pt.c.len();
    let mut j = Matrix::zeros(q, p);
    for i in 0..q {
        for k in 0..p {
            j[(i, k)] = pt.j[(i, k)] / ev.width[k];
        }
    }
    crate::scenarios::Gradients { objective: (0..p).map(|k| pt.g[k] / ev.width[k]).collect(), constraints: j }
}

fn fresh_iterate(pt: Point, mu: f64) -> Iterate {
    let s: Vec<f64> = pt.c.iter().map(|&c| c.max(1e-2 * c.abs().max(1.0))).collect();
    let y = s.iter().map(|s| mu / s).collect();
    let zl = pt.x.iter().map(|x| mu / x).collect();
    let zu = pt.x.iter().map(|x| mu / (1.0 - x)).collect();
    Iterate { pt, s, y, zl, zu }
}

/// `½ Σ min(c_i, 0)²` in scaled units.
fn infeasibility(pt: &Point) -> f64 {
    0.5 * pt.c.iter().map(|&c| c.min(0.0).powi(2)).sum::<f64>()
}

/// Gauss-Newton on the violated constraints until the filter accepts the
/// point or the violation vanishes.
fn restore(
    ev: &mut Evaluator,
    start: &Iterate,
    filter: &Filter,
    mu: f64,
    opts: &NlpOptions,
    iter: &mut usize,
    record: &mut dyn FnMut(&Iterate, usize),
) -> Option<Iterate> {
    let p = start.pt.x.len();
    let theta_entry = theta(&start.pt, &start.s);
    let mut pt = start.pt.clone();
    for _ in 0..opts.max_restoration {
        if *iter >= opts.max_iter {
            return None;
        }
        let psi = infeasibility(&pt);
        let viol: Vec<usize> = (0..pt.c.len()).filter(|&i| pt.c[i] < 0.0).collect();
        if viol.is_empty() {
            return None;
        }
        let mut m = SymMatrix::zeros(p);
        let mut grad = vec![0.0; p];
        for &i in &viol {
            let row = pt.j.row(i);
            for a in 0..p {
                grad[a] += row[a] * pt.c[i];
                for c in 0..=a {
                    m.add(a, c, row[a] * row[c]);
                }
            }
        }
        if norm_inf(&grad) <= 1e-12 * (1.0 + psi) {
            return None;
        }
        let reg = 1e-8 * (1.0 + m.max_abs());
        for k in 0..p {
            let x = pt.x[k];
            m.add(k, k, reg + mu / (x * x) + mu / ((1.0 - x) * (1.0 - x)));
        }
        let chol = Cholesky::new(&m).ok()?;
        let rhs: Vec<f64> = (0..p).map(|k| -grad[k] + mu / pt.x[k] - mu / (1.0 - pt.x[k])).collect();
        let d = chol.solve(&rhs);
        let mut xb = pt.x.clone();
        xb.extend(pt.x.iter().map(|x| 1.0 - x));
        let mut db = d.clone();
        db.extend(d.iter().map(|v| -v));
        let mut alpha = fraction_to_boundary(&xb, &db, 0.99);
        let slope = dot(&grad, &d);
        let mut next = None;
        while alpha > 1e-10 {
            let xt: Vec<f64> = (0..p).map(|k| pt.x[k] + alpha * d[k]).collect();
            if let Ok(t) = ev.eval(&xt) {
                if infeasibility(&t) <= psi + 1e-4 * alpha * slope.min(0.0)
                    && !worsens_both(&pt.raw, &t.raw)
                    && infeasibility(&t) < psi
                {
                    next = Some(t);
                    break;
                }
            }
            alpha *= 0.5;
        }
        pt = next?;
        *iter += 1;
        let cand = fresh_iterate(pt.clone(), mu);
        record(&cand, *iter);
        let th = theta(&cand.pt, &cand.s);
        let phi = barrier(&cand.pt, &cand.s, mu);
        if infeasibility(&pt) == 0.0 || (th <= 0.9 * theta_entry && filter.acceptable(th, phi)) {
            return Some(cand);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{BoundQuadratic, CircleLinear, Quadratic1d};

    #[test]
    fn bound_quadratic_reaches_its_kink() {
        let prob = NlpProblem::new(&BoundQuadratic).unwrap();
        let r = solve_nlp(&prob, &[4.0], &NlpOptions::default()).unwrap();
        assert!(r.converged(), "{:?}", r.status);
        assert!((r.rho[0] - 2.0).abs() < 1e-6, "{}", r.rho[0]);
        assert!((r.multipliers[0] - 2.0).abs() < 1e-4, "{}", r.multipliers[0]);
        assert!(r.iterations <= 50);
    }

    #[test]
    fn circle_linear_reaches_the_tangent_point() {
        let prob = NlpProblem::new(&CircleLinear).unwrap();
        let r = solve_nlp(&prob, &[0.5, 0.25], &NlpOptions::default()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(r.converged(), "{:?}", r.status);
        assert!((r.rho[0] + h).abs() < 1e-6 && (r.rho[1] + h).abs() < 1e-6, "{:?}", r.rho);
        assert!(r.iterations <= 50, "{}", r.iterations);
    }

    /// `min x` s.t. `x >= 0.2` and an inactive constraint with a steep
    /// kink at `y = 0.5`, the start's `y`.
    struct Kinked;

    impl Scenario for Kinked {
        fn name(&self) -> &str {
            "kinked"
        }
        fn bounds(&self) -> Vec<[f64; 2]> {
            vec![[0.0, 1.0]; 2]
        }
        fn n_constraints(&self) -> usize {
            2
        }
        fn constraint_names(&self) -> Vec<String> {
            vec!["floor".into(), "kink".into()]
        }
        fn initial(&self) -> Vec<f64> {
            vec![0.8, 0.5]
        }
        fn feasible_seed(&self) -> Option<Vec<f64>> {
            None
        }
        fn evaluate(&self, r: &[f64]) -> Result<Evaluation> {
            Ok(Evaluation { objective: r[0], constraints: vec![r[0] - 0.2, 2.0 - 50.0 * (r[1] - 0.5).abs()] })
        }
        fn evaluate_with_gradients(&self, r: &[f64]) -> Result<(Evaluation, crate::scenarios::Gradients)> {
            let side = if r[1] >= 0.5 { 1.0 } else { -1.0 };
            let g = crate::scenarios::Gradients {
                objective: vec![1.0, 0.0],
                constraints: Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -50.0 * side]]),
            };
            Ok((self.evaluate(r)?, g))
        }
    }

    #[test]
    fn inactive_kink_does_not_stall_the_barrier() {
        let r = solve_nlp(&NlpProblem::new(&Kinked).unwrap(), &[0.8, 0.5], &NlpOptions::default()).unwrap();
        assert!(r.converged(), "{}", r.status);
        assert!((r.rho[0] - 0.2).abs() < 1e-6, "{:?}", r.rho);
    }

    #[test]
    fn quadratic_1d() {
        let prob = NlpProblem::new(&Quadratic1d).unwrap();
        let r = solve_nlp(&prob, &[0.9], &NlpOptions::default()).unwrap();
        assert!(r.converged());
        assert!((r.rho[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn log_never_worsens_both_measures() {
        let prob = NlpProblem::new(&CircleLinear).unwrap();
        let r = solve_nlp(&prob, &[1.8, 1.7], &NlpOptions::default()).unwrap();
        assert!(r.converged(), "{:?}", r.status);
        for w in r.log.records().windows(2) {
            assert!(!(w[1].objective > w[0].objective && w[1].violation > w[0].violation));
        }
        let mut buf = Vec::new();
        r.log.write_csv(2, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,rho_0,rho_1,objective,viol,dual_opt,step_type\n"));
        assert_eq!(text.lines().count(), r.log.len() + 1);
    }

    #[test]
    fn rejects_empty_box() {
        struct Flat;
        impl Scenario for Flat {
            fn name(&self) -> &str {
                "flat"
            }
            fn bounds(&self) -> Vec<[f64; 2]> {
                vec![[1.0, 1.0]]
            }
            fn n_constraints(&self) -> usize {
                0
            }
            fn constraint_names(&self) -> Vec<String> {
                Vec::new()
            }
            fn initial(&self) -> Vec<f64> {
                vec![1.0]
            }
            fn feasible_seed(&self) -> Option<Vec<f64>> {
                None
            }
            fn evaluate(&self, _: &[f64]) -> Result<Evaluation> {
                unreachable!()
            }
            fn evaluate_with_gradients(&self, _: &[f64]) -> Result<(Evaluation, crate::scenarios::Gradients)> {
                unreachable!()
            }
        }
        assert!(NlpProblem::new(&Flat).is_err());
    }
}
