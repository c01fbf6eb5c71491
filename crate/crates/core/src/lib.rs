//! Chaos-based coded modulation over DC-biased optical OFDM with a nonlinear LED.
//!
//! The crate covers the full design loop: the CCM trellis encoder and its
//! Viterbi decoder, the sampled conjugation function and phase mapper, the
//! Hermitian-symmetric OFDM chain, the LED model with its Bussgang
//! characterization, the error-loop union bound, the constrained optimizer of
//! the conjugation function, the BPSK/TCM baselines, and a seeded Monte Carlo
//! link simulator.

pub mod baseline;
pub mod bound;
pub mod bussgang;
pub mod codec;
pub mod conjugation;
pub mod error;
pub mod led;
pub mod ofdm;
pub mod optimizer;
pub mod quadrature;
pub mod sim;
pub mod trellis;

pub use error::{Error, Result};
