//! Exact and heuristic solvers for electric vehicle routing with nonlinear
//! charging functions.
//!
//! The numeric kernel [`pwl`] is generic over the float type; everything
//! built on top of it works in `f64` through [`PwlFunction`].

pub mod bpc;
pub mod charge;
pub mod master;
pub mod model;
pub mod pricing;
pub mod pwl;
pub mod study;
pub mod tabu;

/// Piecewise-linear function in double precision, the type used by every solver.
pub type PwlFunction = pwl::Pwl<f64>;
/// Single-precision variant of the kernel.
pub type PwlFunction32 = pwl::Pwl<f32>;

pub use model::{parse_instance, Instance, NodeKind, Route};
