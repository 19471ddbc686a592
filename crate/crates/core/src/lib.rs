//! Trainable statevector circuits wrapped around Simon-promise oracles.
//!
//! The crate simulates a `2n`-qubit circuit of parameterized gates around a
//! reversible oracle, turns `J` measured bitstrings into a guess for the hidden
//! shift, and optimizes the gate parameters against the resulting success
//! probability with finite-difference gradient descent and a gradient-assisted
//! genetic search.

pub mod error;
pub mod gf2;
pub mod optimize;
pub mod oracle;
pub mod pipeline;
pub mod postprocess;
pub mod simulator;

pub use error::{Error, Result};
pub use gf2::{BitString, Gf2Solution};
pub use oracle::{MappingTable, OraclePermutation};
pub use pipeline::{CostReport, Pipeline, TrainingSet};
pub use postprocess::{Guess, LookupTable, PostProcessor};
pub use simulator::{CircuitLayout, GateFamily, GateKind, OutcomeDistribution, StateVector};

/// Real parameters of a circuit, indexed by shared-parameter id.
pub type ParamVector = Vec<f64>;
