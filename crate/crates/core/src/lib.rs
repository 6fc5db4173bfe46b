//! Mediation analysis with unknown causal structure: linear SEMs, equivalence
//! classes of DAGs, varying-subset OLS, and the MIDA estimator with plug-in
//! asymptotic inference.

pub mod dataset;
pub mod error;
pub mod graphs;
pub mod harness;
pub mod linalg;
pub mod lsem;
pub mod mida;
pub mod stats;
pub mod structure;
pub mod subset_ols;

pub use dataset::Dataset;
pub use error::{Error, Result};
