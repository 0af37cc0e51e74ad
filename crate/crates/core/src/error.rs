use thiserror::Error;

use crate::model::ComplexPoint;
use crate::trajectory::Trajectory;

/// Errors raised while building or evaluating an oscillator eigenstate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("invalid model parameter: {0}")]
    InvalidModel(String),
    #[error("non-finite point ({re}, {im})")]
    NonFinitePoint { re: f64, im: f64 },
    #[error("point ({}, {}) lies inside the pole guard", .0.xr, .0.xi)]
    PoleProximity(ComplexPoint),
    #[error("root finding did not converge: {0}")]
    RootFindingFailure(String),
}

/// Errors from trajectory integration.
#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error(transparent)]
    Field(#[from] EigenError),
    #[error("start point ({}, {}) is a stagnation point", .0.xr, .0.xi)]
    DegenerateStart(ComplexPoint),
    #[error("integration entered the pole guard at t = {t}")]
    PoleProximity { t: f64, partial: Box<Trajectory> },
    #[error("no real-axis crossing within the time budget {max_time}")]
    BudgetExceeded { max_time: f64 },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
}

/// Errors from density evaluation.
#[derive(Debug, Error)]
pub enum DensityError {
    #[error(transparent)]
    Field(#[from] EigenError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("line-integral route requested at the node x_r = {0}")]
    NodeSingularity(f64),
    #[error("Born density requested off the real axis at ({}, {})", .0.xr, .0.xi)]
    OffAxis(ComplexPoint),
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("finite-difference stencil around ({}, {}) crosses a region boundary", .0.xr, .0.xi)]
    StencilCrossesBoundary(ComplexPoint),
}

/// Errors from region quadrature and the headline analyses.
#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Field(#[from] EigenError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error("analysis requires an excited state (n >= 1), got n = {0}")]
    GroundState(u32),
    #[error("{0}")]
    Geometry(String),
}
