//! Spectral-gap rewiring on simple undirected graphs.
//!
//! The crate covers the normalized Laplacian and its gap ([`spectral`]),
//! greedy edge flips that raise or lower the gap ([`rewiring`]), closed
//! forms and fixtures on small rings ([`analytic`]), and a linear
//! over-smoothing testbed ([`smoothing`]).

pub mod analytic;
pub mod error;
pub mod graph;
pub mod rewiring;
pub mod smoothing;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{Direction, Edge, EdgeDelta, GeneratorSpec, Graph, GraphFamily};
pub use spectral::{SolverConfig, SpectrumEstimate};
