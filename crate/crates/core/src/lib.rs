//! Finite-volume solver for nonlocal systems of conservation laws with
//! discontinuous space-dependent coefficients.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod fft;
pub mod flux;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod model;
pub mod monitor;
pub mod solver1d;
pub mod solver2d;

pub use error::{Error, MonitorItem, Result};
