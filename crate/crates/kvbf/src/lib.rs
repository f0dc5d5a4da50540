//! Mixed finite element solver for the unsteady Kelvin-Voigt-Brinkman-Forchheimer
//! equations in velocity-vorticity-pressure form.
//!
//! The discretization uses Taylor-Hood (P2/P1) or MINI (P1+bubble/P1) elements for
//! the velocity-pressure pair and continuous P1 for the scalar vorticity, with a
//! backward Euler time discretization and a Newton solve of the per-step nonlinear
//! system. A manufactured-solution harness measures discrete-in-time error norms
//! and observed convergence orders, and a channel-network scenario exercises
//! heterogeneous Darcy/Forchheimer coefficients with mixed boundary conditions.

pub mod app;
pub mod assembly;
pub mod checks;
pub mod mesh;
pub mod mms;
pub mod quadrature;
pub mod solver;
pub mod spaces;
pub mod timeloop;

mod error;

pub use error::{Error, Result};
