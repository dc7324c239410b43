//! Coincidence-rate simulation for intensity interferometry generalized by
//! detector projection and entanglement.
//!
//! The engines build on each other: [`amplitude`] supplies the small dense
//! complex algebra, [`scene`] the propagators, [`hbt`] the scalar two-source
//! rate, [`polarization`] and [`entanglement`] the polarized and
//! tensor-contracted generalizations, and [`procedures`] the explicit
//! detector-state constructions. [`estimation`] fits source parameters to
//! rate curves and [`config`]/[`runner`] drive everything from a TOML file.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod amplitude;
pub mod config;
pub mod entanglement;
pub mod error;
pub mod estimation;
pub mod examples;
pub mod fringe;
pub mod hbt;
pub mod polarization;
pub mod procedures;
pub mod runner;
pub mod scene;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
