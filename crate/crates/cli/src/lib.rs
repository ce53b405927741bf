//! Command-line companion to `regretcal-core`: dataset file formats,
//! report assembly, static SVG plots, post-training commands, and the
//! synthetic correlation sweep.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod plot;
pub mod sweep;

/// Decision thresholds used when no utility specification is given.
pub const DEFAULT_T_STAR_GRID: [f64; 11] = [
    0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.975, 0.99,
];

pub const SCHEMA_VERSION: u32 = 1;
