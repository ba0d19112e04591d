//! File formats, scenario configuration and the experiment harness around
//! `selfcal-core`.

pub mod capture;
pub mod config;
pub mod export;
pub mod harness;
mod io;

pub use io::write_atomic;
