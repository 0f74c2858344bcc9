//! File formats and the `landmark-cascade` command line on top of
//! [`landmark_cascade_core`].
//!
//! * [`pts`]: 300-W style `.pts` annotations.
//! * [`manifest`]: JSON dataset manifests.
//! * [`model_file`]: versioned `.cascade.json` model files.
//! * [`model3d`]: 3D landmark models for POSIT.
//! * [`pipeline`]: dataset-level pose estimation, augmentation plans,
//!   batch prediction and evaluation.
//! * [`cli`]: the subcommands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod image_io;
pub mod manifest;
pub mod model3d;
pub mod model_file;
pub mod pipeline;
pub mod pts;
pub mod report;

pub use error::{Error, Result};
