//! Complexity measures, lower bounds and algorithms for interactive decision making
//! over finite model classes.
//!
//! The scalar type is generic only where it is cheap to be: [`FiniteDistribution`] and
//! the divergence kernels accept any `num_traits::Float`. Game solving, DEC evaluation
//! and simulation run in `f64`.

pub mod algorithms;
pub mod bounds;
pub mod builders;
pub mod complexity;
pub mod distribution;
pub mod divergence;
pub mod error;
pub mod games;
pub mod io;
pub mod lp;
pub mod model;
pub mod simulator;

pub use distribution::FiniteDistribution;
pub use divergence::DivergenceKind;
pub use error::{Error, Result};
pub use games::{solve_matrix_game, GameSolution, SolverConfig};
pub use model::{Channel, MixtureSpec, Model, ModelClass, ObservationSpace, ReferenceModel, RiskMode};

/// Distribution over decisions.
pub type PolicyDistribution = FiniteDistribution<f64>;
/// Single-precision distribution, for callers that store large occupancy tables.
pub type FiniteDistributionF32 = FiniteDistribution<f32>;
