//! Sparse extremal-dependence networks for heavy-tailed multivariate data.
//!
//! The crate covers the whole chain from raw observations to a reported
//! graph: transformed-linear arithmetic on the positive orthant, Fréchet
//! simulation, TPDM estimation, partial tail-correlation coefficients, the
//! graphical lasso and Laplacian-constrained graph learning, and the vote and
//! bootstrap machinery used to pick a single network.

pub mod error;
pub mod glasso;
pub mod graph;
pub mod io;
pub mod lab;
pub mod linalg;
pub mod pipeline;
pub mod ptcc;
pub mod sample;
pub mod select;
pub mod sgl;
pub mod tl;
pub mod tpdm;

pub use error::{Error, ErrorClass, Result};
pub use graph::{EdgeVoteTable, GraphStructure};
pub use sample::SampleMatrix;
pub use tpdm::{Threshold, Tpdm};
