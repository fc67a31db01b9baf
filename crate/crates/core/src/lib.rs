//! Differentiable surfel rendering on view-dependent depth maps.
//!
//! A depth map is lifted to camera-space surfels, normals are estimated from
//! the surfel positions, and every surfel is shaded independently, so each
//! pixel depends on exactly one surfel and its immediate neighbors. The
//! [`grad`] module differentiates that pipeline with respect to depth.

// `!(x > 0.0)` is used on purpose to reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array_api;
pub mod error;
pub mod geometry;
pub mod grad;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod recon;
pub mod rng;
pub mod scenegen;
pub mod shading;
pub mod surfel;

pub use error::{Error, Result};
pub use geometry::{Camera, Ray, Rgb, Vec3};
pub use grid::Grid;
pub use shading::{Albedo, Image, LightingRig, Material, PointLight, Specular};
pub use surfel::{DepthMap, NormalField, SurfelField};
