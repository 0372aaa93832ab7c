//! Proximal Nesterov accelerated Gauss-Seidel (Prox-NAG-GS) for composite
//! problems `F = f + r`, with ISTA, FISTA, Chambolle-Pock and stochastic
//! baselines, numerical Lyapunov certificates and seeded benchmark
//! instances.

pub mod certificates;
pub mod error;
pub mod io;
pub mod model;
pub mod problems;
pub mod prox;
pub mod solvers;

pub use error::{Error, Result};
pub use model::{CompositeProblem, ExtendedReal, Regularizer, SampledOracle, SmoothOracle};
