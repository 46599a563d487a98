//! Person re-identification and social-trait analytics for egocentric
//! photostreams.
//!
//! The pipeline consumes precomputed 128-D face descriptors:
//!
//! 1. [`ingest`] parses and validates descriptor streams and day coverage.
//! 2. [`reid`] clusters descriptors into identities (average-linkage AHC,
//!    with mean-shift and spectral baselines).
//! 3. [`consistency`] keeps, prunes or rejects clusters by Pearson correlation.
//! 4. [`segmentation`] turns each identity's appearances into interactions.
//! 5. [`profile`] computes per-wearer social traits and cohort profiles.
//! 6. [`render`] draws radar charts and the trait table.
//!
//! [`evaluation`] scores clusterings against ground truth, [`synth`]
//! generates labelled photostreams, and [`cli`] wires everything together.

pub mod cli;
pub mod consistency;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod formats;
pub mod ingest;
pub mod profile;
pub mod reid;
pub mod render;
pub mod segmentation;
pub mod synth;

pub use error::{Error, Result};
pub use exec::Execution;
