//! Noisy single-qubit simulation, quantum feature space (QFS) extraction and
//! noise classification.

pub mod classify;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod matcore;
pub mod noisegen;
pub mod pulsegen;
pub mod qfs;
pub mod qsim;
pub mod rng;

pub use error::{Error, Result};
