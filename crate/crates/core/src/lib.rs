//! Conflation of pre-registered triangle meshes through a sparse truncated
//! signed distance field.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`occupancy`] voxelizes the union of all sources into a coarse grid and
//!    derives the per-column top height layer.
//! 2. [`camera`] places virtual panoramic cameras above that layer and builds
//!    a Fibonacci lattice of ray directions shared by every camera.
//! 3. [`raycast`] renders per-camera, per-source depth samples (first hit and
//!    the next surface behind it) through a bounding volume hierarchy.
//! 4. [`tsdf`] folds every depth sample into one sparse volume with
//!    per-source weights and an adaptive negative bandwidth.
//! 5. [`extract`] runs marching cubes over the observed band, and [`eval`]
//!    scores the result against a reference surface.
//!
//! The crate is `no_std` with `alloc`. The `parallel` feature (which implies
//! `std`) distributes ray casting over a rayon pool; results are identical
//! with and without it.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod camera;
pub mod error;
pub mod eval;
pub mod extract;
pub mod geometry;
pub mod mesh;
pub mod occupancy;
pub mod raycast;
pub mod tsdf;

mod bvh;
mod mc_tables;

pub use error::{Error, Result};
pub use geometry::{Aabb, Vec3};
pub use mesh::{SurfaceSampleSet, TriangleMesh};
