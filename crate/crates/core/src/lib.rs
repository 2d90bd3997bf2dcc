//! Fractional Gagliardo and projected seminorms, Nitsche-type extension
//! operators across Lipschitz graphs and wedges, Whitney covers, rigid-motion
//! projections, and numerical estimates of fractional Korn, Korn–Poincaré and
//! Hardy-type constants.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod extension;
pub mod fields;
pub mod geometry;
pub mod korn;
pub mod quadrature;
pub mod seminorms;
pub mod vecops;

pub mod acceptance;
pub mod cli;

pub use error::{Error, Result};
pub use fields::{FieldRef, FieldSpec, RigidMotion, VectorField};
pub use geometry::{Domain, LipschitzFn};
pub use quadrature::{make_grid, Grid};

pub use seminorms::FracParams;
