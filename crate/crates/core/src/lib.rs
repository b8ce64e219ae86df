//! Acoustic OFDM link: frame grid, transmit chain, channel model, receiver
//! and link metrics.

pub mod channel;
pub mod dsp;
pub mod error;
pub mod grid;
pub mod iq;
pub mod ldpc;
pub mod metrics;
pub mod ofdm;
pub mod qam;
pub mod rx;
pub mod signal;
pub mod tx;

pub use error::{Error, Result};
pub use num_complex::Complex64;
