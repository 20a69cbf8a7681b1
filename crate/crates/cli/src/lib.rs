//! Workbench command-line front end: dataset generation, training,
//! evaluation, benchmarking, and the on-disk formats they share.

pub mod bench;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod noise;
pub mod pgm;
pub mod pool;
pub mod pipeline;
pub mod smooth;
pub mod stats;
