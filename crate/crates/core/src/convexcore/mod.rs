//! Convex-program representation, the conic backend, and the linearization
//! utilities shared by the subproblem solvers.

pub mod backend;
pub mod dump;
pub mod epigraph;
pub mod linearize;
pub mod program;
pub mod rate_sdp;

use thiserror::Error;

pub use backend::solve;
pub use epigraph::{add_cubic_over_square_epigraph, add_perspective_rate_constraint, RateTerm};
pub use linearize::{
    linearize_spectral_norm, rank_gap, taylor_ratio_upper, taylor_ratio_upper_mec,
    SpectralLowerBound,
};
pub use program::{ConicProgram, Constraint, HermitianBlock, LinExpr, VarId, VarKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvexError {
    #[error("constraint references undeclared variable {0}")]
    UnknownVariable(usize),
    #[error("malformed constraint: {0}")]
    Malformed(String),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("rate constraint is bilinear: time and share/power cannot both be variables")]
    Bilinear,
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalLimit,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
    /// Largest of the primal and dual residuals reported by the backend.
    pub residual: f64,
}

impl SolveOutcome {
    pub fn value(&self, v: VarId) -> f64 {
        self.x[v.0]
    }

    pub fn eval(&self, e: &LinExpr) -> f64 {
        e.eval(&self.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iter: u32,
    pub tol_gap_abs: f64,
    pub tol_gap_rel: f64,
    pub tol_feas: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol_gap_abs: 1e-8,
            tol_gap_rel: 1e-8,
            tol_feas: 1e-8,
        }
    }
}
