//! Numerical extremal and balanced Kähler metrics on toric surfaces.

pub mod curvature;
pub mod error;
pub mod geodesics;
pub mod io;
pub mod polygon;
pub mod potential;
pub mod quadrature;
pub mod reduce;
pub mod report;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
pub use polygon::{AffineMap, Edge, ExtremalAffine, Lattice, Polygon};
pub use potential::{Atlas, CoefficientSet, PotentialJet, VertexChart};
