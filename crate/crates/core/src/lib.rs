//! Design optimization of 2-D elastic contact problems.
//!
//! A design vector `ρ` builds a quadrilateral mesh, the frictionless contact
//! equilibrium is solved with mortar gap constraints, and pressure
//! constraints on the contact multipliers drive either a gradient-based
//! interior-point optimizer (with KKT sensitivities) or constrained
//! Bayesian optimization.

pub mod bayesopt;
pub mod elasticity;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod linalg;
pub mod mortar;
pub mod nlpopt;
pub mod scenarios;
pub mod sensitivity;

pub use bayesopt::{run_cbo, BoState, CboOptions, CboResult, GpModel, GpOptions, Sample};
pub use elasticity::Material;
pub use error::{Error, Result};
pub use forward::{solve_forward, ForwardOptions, ForwardProblem, ForwardSolution, KktResiduals};
pub use geometry::Mesh;
pub use linalg::{Cholesky, Matrix, SymMatrix};
pub use mortar::MortarData;
pub use nlpopt::{solve_nlp, IterateLog, NlpOptions, NlpProblem, NlpResult, NlpStatus};
pub use scenarios::{
    Aggregation, BoundQuadratic, CircleLinear, ClampLiteParams, ClampLiteScenario, Evaluation, Gradients,
    PressureProfile, Quadratic1d, Scenario, WedgeParams, WedgeScenario,
};
pub use sensitivity::{solve_sensitivity, Sensitivities, SensitivityOptions};
