//! Closed-form test problems with known optima.

use super::{Evaluation, Gradients, Scenario};
use crate::error::{check_len, Result};
use crate::linalg::Matrix;

/// `min (ρ - 0.3)²` s.t. `ρ >= 0.5` on `[0, 1]`; optimum `ρ = 0.5`,
/// objective `0.04`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Quadratic1d;

impl Scenario for Quadratic1d {
    fn name(&self) -> &str {
        "quadratic-1d"
    }

    fn bounds(&self) -> Vec<[f64; 2]> {
        vec![[0.0, 1.0]]
    }

    fn n_constraints(&self) -> usize {
        1
    }

    fn constraint_names(&self) -> Vec<String> {
        vec!["rho_min".into()]
    }

    fn initial(&self) -> Vec<f64> {
        vec![0.9]
    }

    fn feasible_seed(&self) -> Option<Vec<f64>> {
        Some(vec![0.9])
    }

    fn evaluate(&self, rho: &[f64]) -> Result<Evaluation> {
        check_len("design", 1, rho.len())?;
        Ok(Evaluation { objective: (rho[0] - 0.3).powi(2), constraints: vec![rho[0] - 0.5] })
    }

    fn evaluate_with_gradients(&self, rho: &[f64]) -> Result<(Evaluation, Gradients)> {
        let e = self.evaluate(rho)?;
        let g = Gradients { objective: vec![2.0 * (rho[0] - 0.3)], constraints: Matrix::from_rows(&[vec![1.0]]) };
        Ok((e, g))
    }
}

/// `min (ρ - 1)²` s.t. `ρ >= 2` on `[0, 5]`; optimum `ρ = 2` with
/// multiplier 2.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoundQuadratic;

impl Scenario for BoundQuadratic {
    fn name(&self) -> &str {
        "bound-quadratic"
    }

    fn bounds(&self) -> Vec<[f64; 2]> {
        vec![[0.0, 5.0]]
    }

    fn n_constraints(&self) -> usize {
        1
    }

    fn constraint_names(&self) -> Vec<String> {
        vec!["rho_min".into()]
    }

    fn initial(&self) -> Vec<f64> {
        vec![4.0]
    }

    fn feasible_seed(&self) -> Option<Vec<f64>> {
        Some(vec![4.0])
    }

    fn evaluate(&self, rho: &[f64]) -> Result<Evaluation> {
        check_len("design", 1, rho.len())?;
        Ok(Evaluation { objective: (rho[0] - 1.0).powi(2), constraints: vec![rho[0] - 2.0] })
    }

    fn evaluate_with_gradients(&self, rho: &[f64]) -> Result<(Evaluation, Gradients)> {
        let e = self.evaluate(rho)?;
        let g = Gradients { objective: vec![2.0 * (rho[0] - 1.0)], constraints: Matrix::from_rows(&[vec![1.0]]) };
        Ok((e, g))
    }
}

/// `min ρ₁ + ρ₂` s.t. `1 - ρ₁² - ρ₂² >= 0` on `[-2, 2]²`; optimum
/// `-(√2/2, √2/2)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CircleLinear;

impl Scenario for CircleLinear {
    fn name(&self) -> &str {
        "circle-linear"
    }

    fn bounds(&self) -> Vec<[f64; 2]> {
        vec![[-2.0, 2.0], [-2.0, 2.0]]
    }

    fn n_constraints(&self) -> usize {
        1
    }

    fn constraint_names(&self) -> Vec<String> {
        vec!["unit_disc".into()]
    }

    fn initial(&self) -> Vec<f64> {
        vec![0.5, 0.25]
    }

    fn feasible_seed(&self) -> Option<Vec<f64>> {
        Some(vec![0.0, 0.0])
    }

    fn evaluate(&self, rho: &[f64]) -> Result<Evaluation> {
        check_len("design", 2, rho.len())?;
        Ok(Evaluation { objective: rho[0] + rho[1], constraints: vec![1.0 - rho[0] * rho[0] - rho[1] * rho[1]] })
    }

    fn evaluate_with_gradients(&self, rho: &[f64]) -> Result<(Evaluation, Gradients)> {
        let e = self.evaluate(rho)?;
        let g = Gradients {
            objective: vec![1.0, 1.0],
            constraints: Matrix::from_rows(&[vec![-2.0 * rho[0], -2.0 * rho[1]]]),
        };
        Ok((e, g))
    }
}
