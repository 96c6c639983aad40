//! Monte-Carlo machinery for occupation measures of continuous
//! semimartingales in `R^N`.
//!
//! The crate simulates Itô diffusions on a uniform grid, evaluates distance
//! and signed-distance geometry for a small catalog of codimension-1
//! manifolds, and estimates the density of the occupation measure along the
//! leaves of a foliation `{phi = a}`. On top of that it provides band
//! estimators for one-dimensional, geometric and graph local times together
//! with the diagnostics needed to compare them.
//!
//! Everything here is `no_std` + `alloc`. The `parallel` feature enables a
//! rayon-backed path fold; results are identical to the serial fold because
//! every path is generated from its own counter-based stream and reductions
//! run in path-index order.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod geometry;
pub mod linalg;
pub mod localtime;
pub mod occupation;
pub mod paths;
pub mod quadrature;
pub mod qv;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{
    Foliation, GoodExtension, GraphFunction, GraphSurface, LevelFunction, Manifold, Projection,
    ReachInfo, Region,
};
pub use paths::{ModelKind, PathEnsemble, PathSource, SamplePath, SdeModel, TimeGrid};
pub use qv::QuadraticVariationModel;
pub use stats::EnsembleEstimate;
