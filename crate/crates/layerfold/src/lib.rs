//! Variational models of geological layer folding.
//!
//! Three related models of how stacked elastic layers fold under overburden
//! pressure:
//!
//! - a single elastic layer pressed into a V-shaped obstacle, a constrained
//!   minimization whose void set is a single interval with length scaling as
//!   `(B/q)^{1/3}` ([`elastica`], [`solver`], [`scaling`]);
//! - a rigid-block kink-band model with interlayer friction, which has no
//!   finite buckling load and is characterized instead by its Maxwell
//!   displacement ([`kinkband`]);
//! - a stack of layers forced into the same obstacle under ordered
//!   non-penetration constraints, where voids can form at every interface or
//!   between packets of layers ([`multilayer`]).
//!
//! The numerical solvers are certified rather than trusted: KKT residuals,
//! void-interval structure, convexity and force balance are all checked
//! explicitly, and the linearized problem has a hand-derived closed form
//! ([`linearized`]) used as an independent oracle throughout the test suite.

// Stencil kernels read clearer with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod elastica;
pub mod error;
pub mod kinkband;
pub mod linearized;
pub mod multilayer;
pub mod obstacle;
pub mod scaling;
pub mod solver;

mod banded;
mod descent;

pub use elastica::{DiscreteField, ElasticaProblem, EnergyBreakdown, Grid, Mode};
pub use linearized::LinearizedContact;
pub use obstacle::ObstacleProfile;
pub use solver::{solve, ElasticaSolution, SolverOptions, VoidInterval};

// The guide's code blocks run as doctests so the book can never drift from
// the API; one module per chapter keeps failures attributable.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/elastica.md")]
    mod elastica {}
    #[doc = include_str!("../../../book/src/obstacle.md")]
    mod obstacle {}
    #[doc = include_str!("../../../book/src/scaling.md")]
    mod scaling {}
    #[doc = include_str!("../../../book/src/kinkband.md")]
    mod kinkband {}
    #[doc = include_str!("../../../book/src/multilayer.md")]
    mod multilayer {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
