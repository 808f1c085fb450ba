//! Centered random forests: lazily realized dyadic trees, the averaged
//! estimator, closed-form risk bounds and Monte Carlo machinery to check
//! them.

pub mod adaptive;
pub mod analytics;
pub mod bounds;
pub mod cell;
pub mod data;
pub mod error;
pub mod forest;
pub mod harness;
pub mod rng;
pub mod tree;

pub use cell::{endpoints_from_expansion, overlap_volume, DyadicCell};
pub use data::{Dataset, ModelSpec, RegressionFunction};
pub use error::{Error, Result};
pub use forest::{tree_predict, ForestModel};
pub use tree::{overlap_via_counts, CenteredTree, LeafAssignment, SelectionProbs};
