//! Post-capture intelligence for a line-following robot photographer.
//!
//! The crate is organised by stage:
//!
//! 1. [`model`] – picture and face records, JSON Lines ingest, burst-atomic splits.
//! 2. [`tinynet`] – the small dense/convolutional network engine.
//! 3. [`face_quality`] – the feature-based and image-based face scorers.
//! 4. [`composition`] – position/occupancy gates and center-distance picture scores.
//! 5. [`threshold_opt`] – genetic fitting of the gate thresholds plus a grid oracle.
//! 6. [`abstraction`] – the face-layout canvas and the picture classifier.
//! 7. [`selection`] – crop cascades and quota-constrained best-picture selection.
//! 8. [`sim`] – deterministic simulation of line following and picture taking.
//! 9. [`stats`], [`pipeline`] – rating statistics and end-to-end evaluation.

pub mod abstraction;
pub mod composition;
pub mod face_quality;
pub mod model;
pub mod pgm;
pub mod pipeline;
pub mod selection;
pub mod sim;
pub mod stats;
pub mod synthetic;
pub mod threshold_opt;
pub mod tinynet;

pub use model::{
    BoundingBox, Dataset, FaceCountCategory, FaceFeatures, FaceObservation, Label, PictureRecord,
};

/// Crate version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
