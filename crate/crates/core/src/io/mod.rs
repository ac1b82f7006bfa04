//! File formats: device configs, CSV/JSON reports and SVG plots.

pub mod config;
pub mod report;
pub mod svg;
