//! Steady two-layer subsonic duct flow with a contact discontinuity.
//!
//! The library solves for steady compressible Euler flow of two gas layers
//! separated by a contact discontinuity in an infinite duct whose walls are
//! small perturbations of straight lines. The problem is posed in Lagrangian
//! (stream-function) coordinates where the interface and walls become fixed
//! horizontal lines; a damped Picard iteration over linear elliptic
//! transmission problems produces the stream potential, from which the
//! primitive fields and the physical interface location are reconstructed.
//!
//! Pipeline: [`farfield`] fixes the downstream asymptotic state from the
//! wall-height offsets, [`duct`] builds the background/connector potentials
//! and boundary data, [`picard`] iterates the linearized problems assembled
//! in [`transmission`] on the [`grid`], and [`fields`] / [`verify`] map back
//! to physical coordinates and check the invariants of the solution.

pub mod config;
pub mod duct;
pub mod error;
pub mod farfield;
pub mod fields;
pub mod gas;
pub mod grid;
pub mod picard;
pub mod pipeline;
pub mod transmission;
pub mod verify;

pub use error::{Error, Result};
