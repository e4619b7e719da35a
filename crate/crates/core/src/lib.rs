//! Numerical laboratory for the doubly-nonlinear diffusion equation
//! `∂t(|u|^{q−2}u) = Δ_H u` driven by a Finsler norm `H`.

pub mod disc;
pub mod error;
pub mod estimates;
pub mod exact;
pub mod exec;
pub mod exhaust;
pub mod io;
pub mod linalg;
pub mod norms;
pub mod stepper;

pub use error::{Error, Result};
