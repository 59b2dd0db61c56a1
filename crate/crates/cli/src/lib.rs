//! File formats, SVG rendering, benchmarking and the `gcs` command line.

pub mod bench;
pub mod commands;
pub mod formats;
pub mod render;
