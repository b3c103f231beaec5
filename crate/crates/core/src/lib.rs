//! Species distribution modelling from presence-only sightings.
//!
//! The crate covers the whole tabular pipeline:
//!
//! * [`geo`]: ESRI ASCII grid rasters, point sampling and great-circle distance.
//! * [`data`]: observation parsing, pseudo-absence synthesis, feature assembly,
//!   class balancing and the stratified 70:10:20 split.
//! * [`tree`]: CART trees (gini classification, variance regression).
//! * [`ensemble`]: bagged random forests, L2 gradient boosting, impurity
//!   importance and the JSON model file.
//! * [`metrics`]: confusion matrix, threshold metrics and rank-based AUC.
//! * [`map`]: scoring a lat/lon grid into CSV and PGM distribution maps.
//! * [`pipeline`]: the ingest / train / evaluate stages composed end to end.
//! * [`synth`]: Gaussian two-cluster datasets for desk-scale benchmarks.

pub mod data;
pub mod ensemble;
pub mod error;
pub mod geo;
pub mod map;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod tree;

pub use error::{Result, SdmError};
