//! Spatial and object QA generation from egocentric video byproducts.
//!
//! The crate consumes gravity-unaligned point clouds, camera trajectories and
//! per-frame instance masks, and produces template-based QA items together
//! with the metrics used to score model answers against them.

pub mod balance;
pub mod facts;
pub mod fusion;
pub mod io;
pub mod forge;
pub mod geom;
pub mod metrics;
pub mod qa;
pub mod rng;
pub mod synth;
