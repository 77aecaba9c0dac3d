//! Consistent-histories engine for finite-dimensional closed quantum systems.
//!
//! * [`linalg`]: dense complex operators, states, validation.
//! * [`events`]: projectors and projective decompositions of the identity.
//! * [`histories`]: families, chain operators, decoherence matrices,
//!   consistency, probabilities and conditioning.
//! * [`frameworks`]: compatibility, refinement, the single-framework check,
//!   framework enumeration and truth-functional search.
//! * [`models`]: single spin, spin + Stern-Gerlach apparatus, and the cat toy.
//! * [`scenario`]: the JSON scenario file format.

pub mod events;
pub mod exec;
pub mod frameworks;
pub mod histories;
pub mod linalg;
pub mod models;
pub mod scenario;
pub mod tolerance;

pub use events::{make_decomposition, spin_projector, Decomposition, Projector, SpinSign};
pub use exec::Execution;
pub use histories::{
    chain_operator, condition_on_outcome, decoherence_matrix, is_consistent, probabilities,
    Condition, ConsistencyOptions, DecoherenceMatrix, Dynamics, Family, History, Slot,
};
pub use linalg::{DensityOperator, Operator, StateVector, Unitary, C64};
pub use tolerance::Tolerances;
