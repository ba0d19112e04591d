//! Pilot-based self-calibration of multi-channel digital receiver arrays.
//!
//! A known frequency-domain QPSK pilot is injected into every receive chain
//! through a common path. From the observed captures this crate estimates
//! each channel's timing and phase offset with a fractional-shift matched
//! filter, designs a two-stage FIR compensator (windowed-sinc fractional
//! delay followed by a regularized least-squares equalizer) and scores the
//! result with a single-null projection beamformer.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command line live in the companion `selfcal` crate.
//!
//! Frequency bins are indexed `k = 0..N`. Wherever a bin index multiplies a
//! (possibly fractional) delay, the signed bin frequency `k` for `2k < N` and
//! `k - N` otherwise is used, see [`signal::signed_bin`]. For integer delays
//! this is identical to using `k` directly.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod array;
pub mod calibration;
mod error;
pub mod experiment;
mod linalg;
pub mod nullform;
pub mod pilot;
pub mod signal;
pub mod sim;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Complex baseband sample type used throughout the crate.
pub type C64 = Complex64;
