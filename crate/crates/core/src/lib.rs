//! Exact simulation of hybrid quantum-classical set intersection.
//!
//! The crate models a classical record database, a reduced state-vector
//! Grover engine over the joint index space of two sets, a bit-faithful
//! five-register circuit for the generalized Grover iteration, a BBHT-style
//! search driver for unknown solution counts, the outer intersection loop
//! with tombstone updates, and an analysis harness for query scaling.

pub mod amplification;
pub mod analysis;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod full_circuit;
pub mod ledger;
pub mod planted;
pub mod qintersection;
pub mod rng;
pub mod statevector;

pub use amplification::{bbht_reference, subroutine1, BbhtState, Engine, SearchOptions, SearchOutcome};
pub use dataset::{
    brute_force_intersection, marked_pairs, match_fn, tombstone_pair, Dataset, LoadOptions, MarkedSet, Record,
    RecordKind,
};
pub use error::{Error, Result};
pub use full_circuit::{CircuitState, RegisterLayout};
pub use ledger::QueryLedger;
pub use qintersection::{dense_prefilter, q_intersection, q_union, IntersectionResult, RunConfig};
pub use statevector::{theoretical_success, StateVector};
