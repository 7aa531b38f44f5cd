//! Support library for the `unicv` command-line tool: data-generating
//! processes, replication studies, preset study grids, CSV input, and the
//! JSON report schemas.
//!
//! The statistical machinery lives in the `unicv` crate; this crate wires
//! it to files, seeds, and the command line.

pub mod data_io;
pub mod dgp;
pub mod report;
pub mod study;
pub mod tables;
