//! File formats, synthetic fixtures, batch orchestration, and the
//! `perimeterfit` command-line tool built on [`perimeterfit_core`].

pub mod cli;
pub mod config;
mod error;
pub mod fsio;
pub mod manifest;
pub mod netpbm;
pub mod palette;
pub mod pipeline;
pub mod smf;
pub mod synth;

pub use error::{Error, Result};
pub use perimeterfit_core as core;
