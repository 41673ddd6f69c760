//! Simulation of the directed random graph on `Z x Z` in which each comparable
//! pair of vertices is joined independently, together with the tools needed to
//! study its longest paths: skeleton points of single lines, renewal constants,
//! pathwise upper and lower bounds, Brownian directed percolation, GUE extreme
//! eigenvalues and the Tracy-Widom reference distribution.

pub mod bounds;
pub mod constants;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod model;
pub mod par;
pub mod paths1d;
pub mod rmt;
pub mod skeleton;
pub mod stats;

pub use error::{Error, Result};
pub use model::{ConnectivityKernel, CoinField, EdgeOracle, OracleLayout, SeedSpec, Vertex, Window};
