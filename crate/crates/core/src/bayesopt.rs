//! Constrained Bayesian optimization with Gaussian-process surrogates.
//!
//! Every output (objective and each constraint) gets its own zero-mean GP
//! with the isotropic kernel `exp(-‖r‖²/θ²)` on box-scaled inputs and
//! standardized outputs. New samples maximize `PF · EI` over random
//! candidates.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, Cholesky, SymMatrix};
use crate::scenarios::{Evaluation, Scenario};

fn std_normal() -> Normal {
    Normal::standard()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpOptions {
    pub jitter: f64,
    pub max_jitter: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub grid_points: usize,
    /// Golden-section steps after the grid search.
    pub refine_steps: usize,
}

impl Default for GpOptions {
    fn default() -> Self {
        Self { jitter: 1e-8, max_jitter: 1e-4, theta_min: 1e-2, theta_max: 1e1, grid_points: 61, refine_steps: 40 }
    }
}

/// Squared-exponential kernel.
pub fn kernel(a: &[f64], b: &[f64], theta: f64) -> f64 {
    let r2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-r2 / (theta * theta)).exp()
}

/// Fitted GP. Inputs are expected already scaled; outputs are standardized
/// internally and posterior values are returned in the original units.
#[derive(Debug, Clone)]
pub struct GpModel {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    mean: f64,
    scale: f64,
    theta: f64,
    jitter: f64,
    chol: Cholesky,
    alpha: Vec<f64>,
}

struct Factored {
    chol: Cholesky,
    jitter: f64,
}

fn factor_kernel(x: &[Vec<f64>], theta: f64, opts: &GpOptions) -> Result<Factored> {
    let t = x.len();
    let mut k = SymMatrix::zeros(t);
    for i in 0..t {
        for j in 0..i {
            k.set(i, j, kernel(&x[i], &x[j], theta));
        }
    }
    let mut jitter = opts.jitter;
    loop {
        let mut kj = k.clone();
        for i in 0..t {
            kj.set(i, i, 1.0 + jitter);
        }
        match Cholesky::with_tolerance(&kj, 1e-12) {
            Ok(chol) => return Ok(Factored { chol, jitter }),
            Err(e) if jitter * 10.0 > opts.max_jitter * (1.0 + 1e-12) => return Err(e),
            Err(_) => jitter = (jitter * 10.0).max(1e-12),
        }
    }
}

/// Log marginal likelihood of standardized outputs `y`.
fn lml_factored(f: &Factored, y: &[f64]) -> f64 {
    let a = f.chol.solve(y);
    let t = y.len() as f64;
    -0.5 * dot(y, &a) - 0.5 * f.chol.log_det() - 0.5 * t * (2.0 * std::f64::consts::PI).ln()
}

/// Largest standardized interpolation residual, `jitter · |α|`.
const MAX_RESIDUAL: f64 = 1e-7;

fn fit_score(f: &Factored, y: &[f64]) -> f64 {
    let a = f.chol.solve(y);
    if f.jitter * a.iter().fold(0.0f64, |m, v| m.max(v.abs())) > MAX_RESIDUAL {
        return f64::NEG_INFINITY;
    }
    lml_factored(f, y)
}

/// Log marginal likelihood of `y` (used as given) at length-scale `theta`.
pub fn log_marginal_likelihood(x: &[Vec<f64>], y: &[f64], theta: f64, opts: &GpOptions) -> Result<f64> {
    check_len("gp outputs", x.len(), y.len())?;
    Ok(lml_factored(&factor_kernel(x, theta, opts)?, y))
}

fn standardize(y: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let scale = if var.sqrt() > 1e-12 * (1.0 + mean.abs()) { var.sqrt() } else { 1.0 };
    (y.iter().map(|v| (v - mean) / scale).collect(), mean, scale)
}

impl GpModel {
    /// Fits with the length-scale chosen by maximum marginal likelihood
    /// among those that interpolate the data to `MAX_RESIDUAL`.
    pub fn fit(x: &[Vec<f64>], y: &[f64], opts: &GpOptions) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Invalid("gp needs at least one sample".into()));
        }
        check_len("gp outputs", x.len(), y.len())?;
        let (ys, _, _) = standardize(y);
        let (lo, hi) = (opts.theta_min.ln(), opts.theta_max.ln());
        let n = opts.grid_points.max(2);
        let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let score = |lt: f64| factor_kernel(x, lt.exp(), opts).map(|f| fit_score(&f, &ys)).unwrap_or(f64::NEG_INFINITY);
        let vals: Vec<f64> = grid.iter().map(|&g| score(g)).collect();
        let mut best = 0;
        for i in 1..n {
            if vals[i] > vals[best] {
                best = i;
            }
        }
        if !vals[best].is_finite() {
            return Self::with_theta(x, y, opts.theta_min, opts);
        }
        let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(n - 1)]);
        let (mut lt, mut lv) = (grid[best], vals[best]);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let (mut fc, mut fd) = (score(c), score(d));
        for _ in 0..opts.refine_steps {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = score(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = score(d);
            }
        }
        for (t, v) in [(c, fc), (d, fd)] {
            if v > lv {
                lt = t;
                lv = v;
            }
        }
        let _ = lv;
        Self::with_theta(x, y, lt.exp(), opts)
    }

    /// Fits at a fixed length-scale.
    pub fn with_theta(x: &[Vec<f64>], y: &[f64], theta: f64, opts: &GpOptions) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Invalid("gp needs at least one sample".into()));
        }
        check_len("gp outputs", x.len(), y.len())?;
        let (ys, mean, scale) = standardize(y);
        let f = factor_kernel(x, theta, opts)?;
        let alpha = f.chol.solve(&ys);
        Ok(Self { x: x.to_vec(), y: ys, mean, scale, theta, jitter: f.jitter, chol: f.chol, alpha })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Log marginal likelihood of the standardized outputs.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let t = self.y.len() as f64;
        -0.5 * dot(&self.y, &self.alpha) - 0.5 * self.chol.log_det() - 0.5 * t * (2.0 * std::f64::consts::PI).ln()
    }

    /// Standardized posterior `(μ, σ²)`.
    pub fn posterior_standardized(&self, rho: &[f64]) -> (f64, f64) {
        let k: Vec<f64> = self.x.iter().map(|xi| kernel(rho, xi, self.theta)).collect();
        let mu = dot(&k, &self.alpha);
        let v = self.chol.solve_lower(&k);
        let s2 = 1.0 - dot(&v, &v);
        (mu, s2.max(0.0))
    }

    /// Posterior `(μ, σ²)` in output units.
    pub fn posterior(&self, rho: &[f64]) -> (f64, f64) {
        let (m, s2) = self.posterior_standardized(rho);
        (self.mean + self.scale * m, self.scale * self.scale * s2)
    }

    pub(crate) fn standardize_value(&self, v: f64) -> f64 {
        (v - self.mean) / self.scale
    }
}

/// Expected improvement of a maximization target over `a_plus`.
pub fn expected_improvement(mu: f64, sigma: f64, a_plus: f64, xi: f64) -> f64 {
    if !(sigma > 0.0) {
        return 0.0;
    }
    let d = mu - a_plus - xi;
    let z = d / sigma;
    let n = std_normal();
    (d * n.cdf(z) + sigma * n.pdf(z)).max(0.0)
}

/// `Pr(c >= 0)` for `c ~ N(mu, sigma²)`.
pub fn feasibility_probability(mu: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        std_normal().cdf(mu / sigma)
    } else if mu >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Surrogates for one objective and its constraints.
#[derive(Debug, Clone)]
pub struct Surrogates {
    pub objective: Option<GpModel>,
    pub constraints: Vec<GpModel>,
}

/// `PF · EI` at scaled point `x`, with EI on `-a` against the incumbent
/// objective `a_plus`. Without an incumbent the value is `PF` alone.
pub fn constrained_ei(s: &Surrogates, x: &[f64], a_plus: Option<f64>, xi: f64) -> f64 {
    let mut pf = 1.0;
    for g in &s.constraints {
        let (m, v) = g.posterior(x);
        pf *= feasibility_probability(m, v.sqrt());
        if pf == 0.0 {
            return 0.0;
        }
    }
    match (a_plus, &s.objective) {
        (Some(best), Some(g)) => {
            let (m, v) = g.posterior_standardized(x);
            pf * expected_improvement(-m, v.sqrt(), -g.standardize_value(best), xi)
        }
        _ => pf,
    }
}

/// Latin hypercube design with one sample per bin in every dimension.
pub fn latin_hypercube(n: usize, bounds: &[[f64; 2]], rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let p = bounds.len();
    let mut out = vec![vec![0.0; p]; n];
    for (k, b) in bounds.iter().enumerate() {
        let mut bins: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            bins.swap(i, j);
        }
        for i in 0..n {
            let u: f64 = rng.random();
            out[i][k] = b[0] + (b[1] - b[0]) * (bins[i] as f64 + u) / n as f64;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CboOptions {
    pub n_initial: usize,
    pub candidates: usize,
    pub xi: f64,
    /// Allows a start without a feasible seed; acquisition is then `PF`
    /// until a feasible sample appears.
    pub allow_infeasible_start: bool,
    pub gp: GpOptions,
}

impl Default for CboOptions {
    fn default() -> Self {
        Self { n_initial: 8, candidates: 10_000, xi: 0.01, allow_infeasible_start: false, gp: GpOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleKind {
    Seed,
    Initial,
    Acquired,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub iter: usize,
    pub rho: Vec<f64>,
    /// `None` when the simulation failed.
    pub evaluation: Option<Evaluation>,
    pub feasible: bool,
    pub acquisition: Option<f64>,
    pub kind: SampleKind,
}

impl Sample {
    pub fn objective(&self) -> Option<f64> {
        self.evaluation.as_ref().map(|e| e.objective)
    }
}

/// Sample history and incumbent.
#[derive(Debug, Clone, Default)]
pub struct BoState {
    samples: Vec<Sample>,
    best: Option<usize>,
}

impl BoState {
    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Best feasible sample.
    pub fn incumbent(&self) -> Option<&Sample> {
        self.best.map(|i| &self.samples[i])
    }

    pub fn push(&mut self, s: Sample) {
        let better = match (s.feasible, s.objective(), self.incumbent().and_then(Sample::objective)) {
            (true, Some(a), Some(b)) => a < b,
            (true, Some(_), None) => true,
            _ => false,
        };
        self.samples.push(s);
        if better {
            self.best = Some(self.samples.len() - 1);
        }
    }

    pub fn header(p: usize, q: usize) -> Vec<String> {
        let mut h = vec!["iter".to_string()];
        h.extend((0..p).map(|i| format!("rho_{i}")));
        h.push("objective".into());
        h.extend((0..q).map(|i| format!("c_{i}")));
        h.extend(["feasible", "acquisition_value"].map(String::from));
        h
    }

    pub fn write_csv<W: Write>(&self, p: usize, q: usize, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(Self::header(p, q))?;
        let num = |v: f64| format!("{v:.12e}");
        for s in &self.samples {
            let mut row = vec![s.iter.to_string()];
            row.extend(s.rho.iter().map(|&v| num(v)));
            match &s.evaluation {
                Some(e) => {
                    row.push(num(e.objective));
                    row.extend(e.constraints.iter().map(|&v| num(v)));
                }
                None => row.extend(std::iter::repeat_n("nan".to_string(), q + 1)),
            }
            row.push(s.feasible.to_string());
            row.push(s.acquisition.map(num).unwrap_or_default());
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CboResult {
    /// Best feasible design, absent when no sample was feasible.
    pub best: Option<Sample>,
    pub state: BoState,
}

fn scale_to_unit(rho: &[f64], bounds: &[[f64; 2]]) -> Vec<f64> {
    rho.iter().zip(bounds).map(|(r, b)| (r - b[0]) / (b[1] - b[0])).collect()
}

/// Fits all surrogates on the current samples. Failed samples are left out
/// of the objective model and enter each constraint model at a value below
/// the worst observed one.
fn fit_surrogates(state: &BoState, bounds: &[[f64; 2]], q: usize, opts: &GpOptions) -> Result<Surrogates> {
    let xs: Vec<Vec<f64>> = state.samples.iter().map(|s| scale_to_unit(&s.rho, bounds)).collect();
    let ok: Vec<usize> = (0..xs.len()).filter(|&i| state.samples[i].evaluation.is_some()).collect();
    let objective = if ok.is_empty() {
        None
    } else {
        let x: Vec<Vec<f64>> = ok.iter().map(|&i| xs[i].clone()).collect();
        let y: Vec<f64> = ok.iter().map(|&i| state.samples[i].objective().unwrap()).collect();
        Some(GpModel::fit(&x, &y, opts)?)
    };
    let constraints = (0..q)
        .into_par_iter()
        .map(|j| {
            let seen: Vec<f64> =
                ok.iter().map(|&i| state.samples[i].evaluation.as_ref().unwrap().constraints[j]).collect();
            let worst = seen.iter().cloned().fold(f64::INFINITY, f64::min);
            let spread = seen.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - worst;
            let fail = if worst.is_finite() { worst - spread.max(1.0) } else { -1.0 };
            let y: Vec<f64> =
                state.samples.iter().map(|s| s.evaluation.as_ref().map_or(fail, |e| e.constraints[j])).collect();
            GpModel::fit(&xs, &y, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Surrogates { objective, constraints })
}

fn evaluate_sample(scenario: &dyn Scenario, iter: usize, rho: Vec<f64>, acq: Option<f64>, kind: SampleKind) -> Sample {
    let evaluation = scenario.evaluate(&rho).ok();
    let feasible = evaluation.as_ref().is_some_and(|e| e.is_feasible(0.0));
    Sample { iter, rho, evaluation, feasible, acquisition: acq, kind }
}

/// Runs constrained BO with `budget` evaluations after the feasible seed.
/// The first `n_initial` of them come from a Latin hypercube.
pub fn run_cbo(scenario: &dyn Scenario, budget: usize, seed: u64, opts: &CboOptions) -> Result<CboResult> {
    let bounds = scenario.bounds();
    let p = bounds.len();
    let q = scenario.n_constraints();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = BoState::default();
    match scenario.feasible_seed() {
        Some(s) => {
            check_len("feasible seed", p, s.len())?;
            state.push(evaluate_sample(scenario, 0, s, None, SampleKind::Seed));
        }
        None if opts.allow_infeasible_start => {}
        None => return Err(Error::Invalid(format!("scenario {} has no feasible seed", scenario.name()))),
    }
    let n_init = opts.n_initial.min(budget);
    for rho in latin_hypercube(n_init, &bounds, &mut rng) {
        let it = state.samples.len();
        state.push(evaluate_sample(scenario, it, rho, None, SampleKind::Initial));
    }
    for _ in n_init..budget {
        let surr = fit_surrogates(&state, &bounds, q, &opts.gp)?;
        let a_plus = state.incumbent().and_then(Sample::objective);
        let cands: Vec<Vec<f64>> =
            (0..opts.candidates.max(1)).map(|_| (0..p).map(|_| rng.random::<f64>()).collect()).collect();
        let vals: Vec<f64> = cands.par_iter().map(|x| constrained_ei(&surr, x, a_plus, opts.xi)).collect();
        let mut best = 0;
        for i in 1..vals.len() {
            if vals[i] > vals[best] {
                best = i;
            }
        }
        let rho: Vec<f64> = cands[best].iter().zip(&bounds).map(|(x, b)| b[0] + (b[1] - b[0]) * x).collect();
        let it = state.samples.len();
        state.push(evaluate_sample(scenario, it, rho, Some(vals[best]), SampleKind::Acquired));
    }
    Ok(CboResult { best: state.incumbent().cloned(), state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::Quadratic1d;
    use proptest::prelude::*;

    fn dense_lml(x: &[Vec<f64>], y: &[f64], theta: f64, jitter: f64) -> f64 {
        let t = x.len();
        let k =
            nalgebra::DMatrix::from_fn(t, t, |i, j| kernel(&x[i], &x[j], theta) + if i == j { jitter } else { 0.0 });
        let yv = nalgebra::DVector::from_column_slice(y);
        let inv = k.clone().try_inverse().unwrap();
        -0.5 * (yv.transpose() * inv * &yv)[0]
            - 0.5 * k.determinant().ln()
            - 0.5 * t as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    #[test]
    fn lml_matches_dense_density() {
        let x = vec![vec![0.1, 0.2], vec![0.5, 0.9], vec![0.8, 0.3]];
        let y = [0.3, -1.2, 0.7];
        let o = GpOptions::default();
        let v = log_marginal_likelihood(&x, &y, 1.0, &o).unwrap();
        assert!((v - dense_lml(&x, &y, 1.0, o.jitter)).abs() < 1e-10);
    }

    #[test]
    fn two_sample_posterior_by_hand() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = [1.0, -1.0];
        let g = GpModel::with_theta(&x, &y, 1.0, &GpOptions { jitter: 0.0, ..Default::default() }).unwrap();
        let e = (-1.0f64).exp();
        let at: f64 = 0.25;
        let k: [f64; 2] = [(-at * at).exp(), (-(1.0 - at) * (1.0 - at)).exp()];
        let det = 1.0 - e * e;
        let inv = [[1.0 / det, -e / det], [-e / det, 1.0 / det]];
        let a = [inv[0][0] * y[0] + inv[0][1] * y[1], inv[1][0] * y[0] + inv[1][1] * y[1]];
        let mu = k[0] * a[0] + k[1] * a[1];
        let s2 = 1.0 - (k[0] * (inv[0][0] * k[0] + inv[0][1] * k[1]) + k[1] * (inv[1][0] * k[0] + inv[1][1] * k[1]));
        let (m, v) = g.posterior(&[at]);
        assert!((m - mu).abs() < 1e-12 && (v - s2).abs() < 1e-12);
    }

    #[test]
    fn single_sample_interpolates() {
        let g = GpModel::fit(&[vec![0.3]], &[2.5], &GpOptions::default()).unwrap();
        let (m, v) = g.posterior(&[0.3]);
        assert!((m - 2.5).abs() < 1e-12);
        assert!(v <= 2.0 * g.jitter());
    }

    #[test]
    fn far_points_revert_to_prior() {
        let g = GpModel::with_theta(&[vec![0.0], vec![0.1]], &[1.0, -1.0], 0.05, &GpOptions::default()).unwrap();
        let (m, v) = g.posterior_standardized(&[5.0]);
        assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_outputs() {
        let x = vec![vec![0.1], vec![0.4], vec![0.9]];
        let g = GpModel::fit(&x, &[3.0; 3], &GpOptions::default()).unwrap();
        assert!((g.posterior(&[0.4]).0 - 3.0).abs() < 1e-9);
    }

    #[test]
    fn duplicate_rows_escalate_jitter() {
        let x = vec![vec![0.5], vec![0.5], vec![0.6]];
        let o = GpOptions { jitter: 1e-13, ..Default::default() };
        let g = GpModel::with_theta(&x, &[1.0, 1.0, 2.0], 0.2, &o).unwrap();
        assert!(g.jitter() > 1e-13);
        assert!((g.posterior(&[0.5]).0 - 1.0).abs() < 1e-6);
        let strict = GpOptions { jitter: 1e-13, max_jitter: 1e-13, ..Default::default() };
        assert!(GpModel::with_theta(&x, &[1.0, 1.0, 2.0], 0.2, &strict).is_err());
    }

    #[test]
    fn ei_closed_forms() {
        assert_eq!(expected_improvement(1.0, 0.0, 0.0, 0.01), 0.0);
        assert!((expected_improvement(0.51, 1.0, 0.5, 0.01) - 0.3989422804).abs() < 1e-9);
    }

    #[test]
    fn feasibility_factors() {
        assert_eq!(feasibility_probability(0.0, 2.0), 0.5);
        assert_eq!(feasibility_probability(0.0, 1.0) * feasibility_probability(0.0, 3.0), 0.25);
        assert!(feasibility_probability(50.0, 1.0) > 1.0 - 1e-12);
    }

    #[test]
    fn lhs_fills_each_bin_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = latin_hypercube(4, &[[0.0, 1.0]], &mut rng);
        let mut bins: Vec<usize> = s.iter().map(|r| (r[0] * 4.0) as usize).collect();
        bins.sort();
        assert_eq!(bins, [0, 1, 2, 3]);
        let one = latin_hypercube(1, &[[2.0, 3.0], [-1.0, 0.0]], &mut rng);
        assert!(one[0][0] >= 2.0 && one[0][0] <= 3.0 && one[0][1] >= -1.0 && one[0][1] <= 0.0);
    }

    #[test]
    fn budget_zero_returns_the_seed() {
        let r = run_cbo(&Quadratic1d, 0, 1, &CboOptions::default()).unwrap();
        assert_eq!(r.best.unwrap().rho, vec![0.9]);
        assert_eq!(r.state.samples().len(), 1);
    }

    #[test]
    fn quadratic_converges_for_most_seeds() {
        let hits = (0..10)
            .filter(|&s| {
                let r = run_cbo(&Quadratic1d, 30, s, &CboOptions::default()).unwrap();
                (r.best.unwrap().objective().unwrap() - 0.04).abs() <= 1e-2
            })
            .count();
        assert!(hits >= 9, "{hits}");
    }

    #[test]
    fn run_is_deterministic() {
        let o = CboOptions { candidates: 500, ..Default::default() };
        let out = |s| {
            let r = run_cbo(&Quadratic1d, 12, s, &o).unwrap();
            let mut b = Vec::new();
            r.state.write_csv(1, 1, &mut b).unwrap();
            b
        };
        assert_eq!(out(7), out(7));
        assert_ne!(out(7), out(8));
    }

    fn eval(a: f64, c: f64) -> Option<Evaluation> {
        Some(Evaluation { objective: a, constraints: vec![c] })
    }

    proptest! {
        #[test]
        fn ei_is_nonnegative_and_monotone_in_sigma(mu in -5.0f64..5.0, s in 0.0f64..3.0, ds in 0.0f64..2.0, a in -5.0f64..5.0, xi in 0.0f64..0.5) {
            let e0 = expected_improvement(mu, s, a, xi);
            let e1 = expected_improvement(mu, s + ds, a, xi);
            prop_assert!(e0 >= 0.0);
            prop_assert!(e1 + 1e-12 >= e0);
        }

        #[test]
        fn constrained_ei_is_bounded_by_ei(xs in proptest::collection::vec(0.0f64..1.0, 3..8), probe in 0.0f64..1.0) {
            let x: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
            let a: Vec<f64> = xs.iter().map(|v| (v - 0.3).powi(2)).collect();
            let c: Vec<f64> = xs.iter().map(|v| v - 0.5).collect();
            let o = GpOptions::default();
            let s = Surrogates { objective: Some(GpModel::fit(&x, &a, &o).unwrap()), constraints: vec![GpModel::fit(&x, &c, &o).unwrap()] };
            let best = a.iter().cloned().fold(f64::INFINITY, f64::min);
            let g = s.objective.as_ref().unwrap();
            let (m, v) = g.posterior_standardized(&[probe]);
            let ei = expected_improvement(-m, v.sqrt(), -g.standardize_value(best), 0.01);
            prop_assert!(constrained_ei(&s, &[probe], Some(best), 0.01) <= ei + 1e-15);
        }

        #[test]
        fn incumbent_ignores_infeasible_samples(vals in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..20), extra in (-5.0f64..5.0, -5.0f64..-1e-9)) {
            let mut st = BoState::default();
            for (i, &(a, c)) in vals.iter().enumerate() {
                st.push(Sample { iter: i, rho: vec![a], evaluation: eval(a, c), feasible: c >= 0.0, acquisition: None, kind: SampleKind::Initial });
            }
            let before = st.incumbent().map(|s| s.iter);
            st.push(Sample { iter: vals.len(), rho: vec![extra.0], evaluation: eval(extra.0, extra.1), feasible: false, acquisition: None, kind: SampleKind::Acquired });
            st.push(Sample { iter: vals.len() + 1, rho: vec![0.0], evaluation: None, feasible: false, acquisition: None, kind: SampleKind::Acquired });
            prop_assert_eq!(before, st.incumbent().map(|s| s.iter));
            if let Some(b) = st.incumbent() {
                let min = st.samples().iter().filter(|s| s.feasible).filter_map(Sample::objective).fold(f64::INFINITY, f64::min);
                prop_assert_eq!(b.objective().unwrap(), min);
            }
        }

        #[test]
        fn lhs_one_per_bin(n in 1usize..30, p in 1usize..5, seed in any::<u64>()) {
            let bounds: Vec<[f64; 2]> = (0..p).map(|k| [k as f64, k as f64 + 2.0]).collect();
            let s = latin_hypercube(n, &bounds, &mut ChaCha8Rng::seed_from_u64(seed));
            for k in 0..p {
                let mut bins: Vec<usize> = s.iter().map(|r| (((r[k] - bounds[k][0]) / 2.0 * n as f64) as usize).min(n - 1)).collect();
                bins.sort();
                prop_assert_eq!(bins, (0..n).collect::<Vec<_>>());
            }
        }

        #[test]
        fn posterior_interpolates(xs in proptest::collection::btree_set(0u32..1000, 2..12)) {
            let x: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v as f64 / 1000.0]).collect();
            let y: Vec<f64> = x.iter().map(|v| (6.0 * v[0]).sin()).collect();
            let g = GpModel::fit(&x, &y, &GpOptions::default()).unwrap();
            for (xi, yi) in x.iter().zip(&y) {
                prop_assert!((g.posterior(xi).0 - yi).abs() <= 1e-5);
            }
        }
    }
}
