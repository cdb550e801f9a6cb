//! Numerical laboratory for the one-dimensional viscous heat-conducting gas
//! in Lagrangian mass coordinates.
//!
//! The crate bundles a staggered semi-implicit solver for the three
//! boundary-condition families, the operator and norm toolkit used to measure
//! data and solution differences, two-scale data with its averaged problem,
//! and the study drivers that fit convergence rates.

pub mod dsl;
pub mod exec;
pub mod grid;
pub mod homog;
pub mod linalg;
pub mod norms;
pub mod ops;
pub mod problem;
pub mod solver;
pub mod study;
pub mod twoscale;

pub use grid::{Grid, GridError, Loc, ScalarField, SpaceTimeField};
