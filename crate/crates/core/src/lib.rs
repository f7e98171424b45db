//! Finite element projection schemes for the Ericksen–Leslie model of
//! nematic liquid crystal flow in two space dimensions.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
mod coupled;
pub mod diagnostics;
pub mod error;
mod factor;
pub mod fespace;
pub mod flow;
pub mod linsolve;
pub mod mesh;
pub mod ops_cg;
pub mod ops_dg;
pub mod problem;
pub mod quadrature;
pub mod scheme_cg;
pub mod scheme_dg;
pub mod vec3;
pub mod vtk;

pub use error::{Error, Result};
