//! DAGs, CPDAGs, Meek closure and Markov equivalence class enumeration.
//!
//! Node labels are 1-indexed everywhere in the public API.

mod cpdag;
mod dag;
mod mec;
mod pdag;
mod text;

pub use cpdag::{dag_to_cpdag, Cpdag};
pub use dag::Dag;
pub use mec::{
    enumerate_mec, parent_set_multiset, MecIndex, ParentSetMultiset, DEFAULT_MAX_COMPONENT_SIZE,
};
pub use pdag::{MeekRule, Pdag};
