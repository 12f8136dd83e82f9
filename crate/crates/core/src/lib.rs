//! Non-Markovian decay of an entangled coherent-state probe and its quantum Fisher information.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundstate;
pub mod dynamics;
pub mod error;
pub mod fockstate;
pub mod qfi;
pub mod quadrature;
pub mod roots;
pub mod special;
pub mod spectral;
pub mod sweeps;

pub use error::{Error, Result};
pub use spectral::{MarkovRates, ProbeConfig, SpectralDensity};
