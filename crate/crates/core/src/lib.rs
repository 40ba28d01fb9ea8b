//! Relaxed H(div)-conforming hybrid discontinuous Galerkin discretization of
//! the Stokes equations on simplicial meshes, with the averaging
//! reconstruction that restores exact solenoidality and pressure robustness.

pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod error;
pub mod fespace;
pub mod jet;
pub mod mesh;
pub mod polyquad;
pub mod refbasis;
pub mod solver;

pub use error::{HdgError, Result};
