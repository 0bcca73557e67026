//! Numerical lab for linearized Monge-Ampere equations in the plane.

pub mod descriptor;
pub mod domain;
pub mod error;
pub mod functions;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod lma;
pub mod potential;
pub mod section;
pub mod stencil;

pub use domain::ConvexDomain;
pub use error::{Error, Result};
pub use grid::{Grid, Point, ScalarField};
pub use lma::{CrossScheme, LinearizedOperator};
pub use potential::{AnalyticPotential, ConvexPotential, Sym2};
