//! Finite-difference solver for a compressible Navier-Stokes/Cahn-Hilliard
//! mixture and its incompressible limit (model H), with energy diagnostics
//! and a low-Mach-number convergence harness.

pub mod compressible;
pub mod constitutive;
pub mod energetics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod linsolve;
pub mod model_h;
pub mod operators;

pub use error::{Error, Result};
