//! Viewpoint-invariant LiDAR place recognition.
//!
//! Point-cloud submaps are projected to spherical range panoramas, encoded by
//! SO(3)-equivariant spherical correlations, enriched by self-attention across
//! the rotation grid and pooled into a NetVLAD descriptor that is invariant to
//! sensor orientation.

pub mod error;
pub mod eval;
pub mod harmonic;
pub mod ingest;
pub mod model;
pub mod parallel;
pub mod projection;
pub mod real;
pub mod training;

pub use error::{Error, Result};
pub use real::Real;
