//! Finite-volume solver for the depth-averaged Savage-Hutter granular
//! avalanche equations on unstructured triangular meshes.
//!
//! The scheme is cell-centred: a modified HLL flux with wet/dry wave-speed
//! estimates at cell interfaces, ENO-type minimal-norm linear
//! reconstruction, MUSCL-Hancock predictor/corrector stepping under a CFL
//! limit, and newest-vertex-bisection h-adaptivity driven by a jump-based
//! error indicator.
//!
//! Per-cell and per-edge work runs through [`par`], which uses rayon when
//! the `parallel` feature is enabled and plain iterators otherwise. Both
//! paths produce bit-identical results.

// Checks are written as `!(x > 0.0)` so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptivity;
pub mod error;
pub mod io;
pub mod mesh;
pub mod par;
pub mod physics;
pub mod reconstruction;
pub mod riemann;
pub mod scenarios;
pub mod state;
pub mod timestepper;

pub use error::{Error, Result};
pub use mesh::TriMesh;
pub use par::Execution;
pub use state::{ConservedState, PrimitiveState, Vec2};
