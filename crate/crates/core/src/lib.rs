//! Simulation-based contrast synthesis from MR fingerprinting.
//!
//! The pipeline runs phantom generation, fingerprint simulation with
//! extended phase graphs, spiral acquisition and gridding reconstruction,
//! dictionary matching and per-pixel contrast simulation, and scores the
//! result against ground-truth contrasts.

pub mod acquisition;
pub mod cli;
pub mod dictionary;
pub mod epg;
pub mod error;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod synthesis;

pub use error::{Error, Result};
