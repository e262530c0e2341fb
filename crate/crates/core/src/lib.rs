//! Simulation and verification toolkit for the parallel Kac's walk
//! pseudorandom-unitary construction.
//!
//! The crate is split by concern:
//!
//! * [`numerics`]: dense complex linear algebra, trace distance, operator
//!   norms, Haar sampling and deterministic RNG streams.
//! * [`kacwalk`]: bit-string helpers, the blockwise rotation `H_f`, the
//!   permutation `P_σ` and samplers for the walk ensemble.
//! * [`relations`]: relations, relation states and distinct-block tests.
//! * [`oracles`]: path-recording oracles (`PR`, `V`, `W`, `E`) on a sparse
//!   relation basis, plus the adversary harness.
//! * [`purified`]: the purified function-permutation oracle and the
//!   compression map onto relation registers.
//! * [`experiments`]: Monte-Carlo experiments and exact identity checks with
//!   JSON/CSV reporting.
//! * [`prf`]: a toy keyed PRF / Feistel PRP substitute for the random
//!   functions and permutations. It is not cryptographically secure.

pub mod error;
pub mod experiments;
pub mod kacwalk;
pub mod numerics;
pub mod oracles;
pub mod prf;
pub mod purified;
pub mod relations;

pub use error::{Error, Result};
pub use kacwalk::{FunctionTable, KacParams, Permutation, WalkUnitary};
pub use relations::{Relation, RelationClass};
pub use numerics::{DensityMatrix, Operator, StateVector, C64};
pub use oracles::{AdversarySpec, RecordedState};
pub use experiments::{Check, ExperimentReport, Flag, TableRow};
pub use prf::ToyKey;

/// Version string embedded into every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
