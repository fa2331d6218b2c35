//! Numerical toolkit for the cubic nonlinear Schrödinger equation
//! `i w_t + w_xx + mu |w|^2 w = 0` on the line with prescribed power-law
//! behaviour `w ~ sum_k c_k^±(t) |x|^{gamma_k}` as `x -> ±inf`.
//!
//! The solution is split as `w = f + u`, where `f` is a cut-off formal
//! expansion and `u` solves a generalized, source-driven equation that is
//! marched with a linearly implicit finite-difference scheme.

pub mod error;
pub mod formal;
pub mod grid;
pub mod interp;
pub mod profile;
pub mod scheme;
pub mod verify;

pub use error::{Error, Result};
