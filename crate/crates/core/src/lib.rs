//! Evaluation engine for generated 3D assets.
//!
//! The engine scores a triangle mesh (plus optional RGB renders) along five
//! axes: geometric, semantic and structural consistency, text-3D alignment
//! and aesthetics. Every foundation model is reached through the file-based
//! sidecar protocol in [`backends`], so the numeric core stays deterministic
//! and can be driven entirely by the stub backends in tests.
//!
//! Module map:
//!
//! - [`assets`]: mesh loading, validation, normalization and normals
//! - [`camrig`]: turntable camera rigs and the pinhole projection
//! - [`raster`]: z-buffer rasterizer and per-vertex visibility
//! - [`backends`]: tensor file format, job protocol, process runner, stubs
//! - [`metrics`]: the five scores
//! - [`localize`]: back-projection of evidence onto the mesh, heatmap export
//! - [`bench`]: prompt sets, human annotations, agreement statistics
//! - [`pipeline`]: run configuration, orchestration and the run report

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assets;
pub mod backends;
pub mod bench;
pub mod camrig;
pub mod localize;
pub mod metrics;
pub mod pipeline;
pub mod raster;

pub use nalgebra;

/// Double-precision 3-vector used for all geometry.
pub type Vec3 = nalgebra::Vector3<f64>;
