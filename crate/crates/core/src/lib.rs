//! Tagged particle in the asymmetric exclusion process with long jumps.
//!
//! Modules: the jump kernel and its lattice constants ([`kernel`]), an exact
//! continuous-time simulator ([`process`]), limit laws ([`limits`]), diagnostics of the
//! symmetric random walk ([`rwalk`]), exact generator checks on tiny tori ([`oracle`]),
//! Monte Carlo estimators ([`stats`]) and the replica runner ([`experiment`]).

pub mod error;
pub mod experiment;
pub mod kernel;
pub mod lattice;
pub mod limits;
pub mod process;
pub mod numerics;
pub mod oracle;
pub mod rng;
pub mod rwalk;
pub mod stats;

pub use error::{Error, Result};
pub use lattice::LatticeVector;
