use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("{what} = {value} is outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("root finder did not converge for v = {value} (alpha = {alpha})")]
    Convergence { alpha: f64, value: f64 },

    #[error("iteration cap {cap} exceeded: {context}")]
    IterationCap { cap: usize, context: String },

    #[error("fixed-point iteration did not converge after {iterations} steps (last residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("Neumann series stopped decaying geometrically at term {term} (ratio {ratio}); discretization too coarse")]
    NonGeometric { term: usize, ratio: f64 },

    #[error("infeasible truncation: {0}")]
    Infeasible(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("series truncation cap {cap} reached at z = {z} (partial g = {partial})")]
    TruncationCap { cap: usize, z: f64, partial: f64 },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("parse error: {0}")]
    Parse(String),
}
