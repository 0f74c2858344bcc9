//! Cascaded shape regression for facial landmark localisation.
//!
//! The crate is `no_std` (with `alloc`) so the numerical core can be embedded
//! anywhere; file formats, PNG decoding and the command line live in the
//! `landmark-cascade` companion crate.
//!
//! Pipeline overview:
//!
//! 1. Shapes are normalised into the unit frame of their face box ([`geometry`]).
//! 2. Every cascade stage samples a [`features::FeaturePool`] whose anchors are
//!    addressed relative to the current shape estimate, either by triplet
//!    interpolation, two-point interpolation or closest-landmark offsets.
//! 3. Random ferns ([`fern`]) regress the remaining shape residual from
//!    pixel-difference features; stages are chained in [`cascade`].
//! 4. Per-sample initialisation counts can be rebalanced against the head-pose
//!    distribution ([`headpose`], [`balance`]) so rare poses get more training
//!    instances.
//! 5. [`metrics`] implements normalised mean error, success rate and CED curves.
//!
//! Enable the `parallel` feature to spread feature extraction and fern fitting
//! over a rayon pool. Results never depend on the thread count.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod balance;
pub mod cascade;
pub mod dataset;
mod error;
pub mod features;
pub mod fern;
pub mod geometry;
pub mod headpose;
mod math;
pub mod metrics;
mod par;
pub mod rng;
pub mod synth;

pub use crate::error::{Error, Result};

pub use crate::balance::{AugmentationPlan, GaussianFit, InitConfig, InitSource};
pub use crate::cascade::{CascadeModel, Stage, TrainConfig, TrainLog};
pub use crate::dataset::{Image, Sample};
pub use crate::features::{FeatureMode, FeaturePool};
pub use crate::fern::Fern;
pub use crate::geometry::{BBox, Point2, Shape, SimilarityTransform};
pub use crate::headpose::{CameraIntrinsics, EulerAngles, Model3D, PoseEstimate};
pub use crate::metrics::Normalizer;
pub use crate::synth::SynthConfig;
