//! Numerical solver and verification harness for the forced parabolic–parabolic
//! Keller–Segel system on rectangles with homogeneous Neumann boundary data:
//!
//! ```text
//! u_t   = Δu − ∇·(u∇v)
//! τ v_t = Δv − v + u + f(x, t)
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod inequalities;
pub mod operators;
pub mod quadrature;
pub mod semigroup;
pub mod snapshot;
pub mod solver;

pub use error::{KsfError, Result};
pub use grid::{Grid2D, ScalarField};
pub use semigroup::CosineBasis;
pub use solver::{ForcingSpec, Modulation, RunStatus, Solver, SolverConfig, State, Trajectory};
