//! Ingestion, staged fitting, scoring and reporting on top of
//! `ommirt-core`.
//!
//! Every command writes its artifacts under one output directory: draw
//! files with JSON sidecars, table CSVs, plot data and a `bundle.json`
//! that echoes the full configuration.

pub mod error;
pub mod io;
pub mod pipeline;
pub mod plots;
pub mod summary;

pub use error::{Error, Result};
pub use pipeline::{run, Command, GateMode, Method, Parallel, ResultBundle, RunConfig, SimSettings};
