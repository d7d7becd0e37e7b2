//! Forward and inverse solvers for an elastic membrane pressed by a rigid
//! indenter: `−div(a ∇u) = f + λ`, `u ≥ h`, `λ ≥ 0`, `λ(u − h) = 0` on the
//! unit square with zero boundary values, and the reconstruction of the
//! coefficient `a` from noisy observations of `u`.

pub mod cli;
pub mod error;
pub mod forward;
pub mod inverse;
pub mod mesh;
pub mod scenarios;

pub use error::{Error, Result};
