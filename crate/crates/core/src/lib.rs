//! Simulation of a near-infrared bladder-sensing chain: layered tissue
//! models, Monte Carlo photon transport, the modified Beer-Lambert law, the
//! analog front end, session statistics, and the scenario harness.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod chain;
pub mod error;
pub mod geom;
pub mod harness;
pub mod mbll;
pub mod provenance;
pub mod tissue;
pub mod transport;

pub use error::{Error, ErrorClass, Result};
pub use geom::{Aabb, Vec3};
pub use tissue::{MediaLibrary, OpticalMedium, SceneOffset, TissueScene};
