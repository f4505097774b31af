//! Numerical Finsler-geometry engine: metric tensors, torsions, sprays,
//! named Finsler connections, connection processes, and curvature identity
//! verification at sampled chart points.

pub mod commands;
pub mod config;
pub mod connections;
pub mod curvature;
pub mod error;
pub mod jets;
pub mod metrics;
pub mod processes;
pub mod report;
pub mod sample;
pub mod spray;
pub mod taylor;
pub mod tensor;

pub use error::{FinslerError, Result};
