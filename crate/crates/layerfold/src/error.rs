//! Error types shared across the crate.

use thiserror::Error;

/// Errors from constructing or evaluating the discrete model.
#[derive(Debug, Clone, Error)]
pub enum ModelError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("x = {x} lies outside the domain [-{half_width}, {half_width}]")]
    OutsideDomain { x: f64, half_width: f64 },
    #[error("need at least {min} grid nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },
    #[error("node count must be odd so a node sits on the obstacle corner, got {got}")]
    EvenNodeCount { got: usize },
    #[error("field has {got} values but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error("field spacing {got} does not match grid spacing {expected}")]
    SpacingMismatch { expected: f64, got: f64 },
    #[error("field contains non-finite values")]
    NonFiniteField,
}

/// Errors from the constrained minimization.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no convergence within {max_iter} iterations (residual {residual:.3e}, tolerance {tolerance:.3e})")]
    MaxIterations {
        max_iter: usize,
        residual: f64,
        tolerance: f64,
        /// Best iterate found, for diagnosis.
        best: Box<crate::solver::ElasticaSolution>,
    },
    #[error("line search produced a non-finite energy at iteration {iteration}")]
    NumericalFailure { iteration: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A certified invariant of the model failed to hold on computed output.
#[derive(Debug, Clone, Error)]
pub enum InvariantViolation {
    #[error("void set splits into {runs} disjoint runs; expected a single interval")]
    MultipleVoidRuns { runs: usize },
    #[error("negative contact multiplier {value:.3e} at node {node} (tolerance {tolerance:.3e})")]
    NegativeMultiplier {
        node: usize,
        value: f64,
        tolerance: f64,
    },
}

/// Errors from the kink-band model.
#[derive(Debug, Clone, Error)]
pub enum KinkError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("friction coefficient must lie in (0, 2], got {value}")]
    FrictionRange { value: f64 },
    #[error("layer rotation must lie in [0, pi/2), got {value}")]
    AngleRange { value: f64 },
    #[error("the equilibrium load diverges as alpha -> 0: no finite buckling load")]
    DivergentLoad,
    #[error("scalar search failed to bracket a minimum: {detail}")]
    Unbracketed { detail: String },
}

/// Errors from sweeps and exponent fits.
#[derive(Debug, Error)]
pub enum ScalingError {
    #[error("exponent fit needs at least {min} usable records, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Errors from the multilayer solver.
#[derive(Debug, Error)]
pub enum MultilayerError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("layer count must lie in 1..=16, got {got}")]
    LayerCount { got: usize },
    #[error("stack of {layers} layers of thickness {thickness} does not fit the obstacle (relief m*X = {relief})")]
    StackTooTall {
        layers: usize,
        thickness: f64,
        relief: f64,
    },
    #[error("stack solve did not converge (residual {residual:.3e}, tolerance {tolerance:.3e})")]
    NoConvergence {
        residual: f64,
        tolerance: f64,
        /// Best iterate found, for diagnosis.
        best: Box<crate::multilayer::MultilayerSolution>,
    },
    #[error("constraint freeze loop did not settle within {max_outer} rounds (last change {change:.3e})")]
    OuterLoop {
        max_outer: usize,
        change: f64,
        best: Box<crate::multilayer::MultilayerSolution>,
    },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
