//! On-disk formats. Datasets and refined matches are JSON lines, training
//! logs and metrics are CSV, checkpoints are a manifest plus a raw float
//! buffer. Writers are deterministic down to the byte for fixed inputs;
//! the persistence acceptance checks hold them to that.

pub mod checkpoint;
pub mod dataset;
pub mod refined;
pub mod reports;
