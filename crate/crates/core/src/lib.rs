//! Shooting solver for radial quasilinear problems `-Δ_p u = K(|x|) f(u)`.

pub mod classify;
pub mod error;
pub mod model;
pub mod numerics;
pub mod shoot;
pub mod transform;
pub mod uniqueness;
pub mod variational;

pub use error::{Error, Result, Witness};
