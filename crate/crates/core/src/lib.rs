//! Structure-preserving simulation of sphere-valued stochastic
//! Landau–Lifshitz–Gilbert dynamics in one space dimension, and the
//! statistical checks that connect its stationary states to statistically
//! stationary solutions of the Schrödinger map equation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bound;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod grid;
pub mod rng;
pub mod runner;
pub mod scheme;
pub mod stats;
pub mod transforms;
pub mod vec3;
pub mod verify;

pub use error::{Error, Result};
pub use field::{HMoments, InitialCondition, NoiseIntensity, SphereField};
pub use grid::Grid1D;
pub use vec3::Vec3;
