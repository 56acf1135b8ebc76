//! Efficient deterministic policies of finite-horizon MDPs with vector
//! rewards.
//!
//! A model is turned into the linear program over state-action frequencies
//! ([`vlp::build_program`]); its efficient vertices are walked by
//! [`pareto::enumerate_efficient`] and mapped back to policies. Indices are
//! 0-based throughout.

pub mod design;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod pareto;
pub mod simplex;
pub mod vlp;

pub use design::DesignInstance;
pub use dynamics::{ActionMap, FrequencyVector, Policy, PolicySpec, PolicyValue, RegularityReport};
pub use error::{Error, Result};
pub use model::{Model, ValidationReport};
pub use pareto::{
    EnumerationOptions, EnumerationResult, OracleResult, VertexRecord, WeightCertificate,
};
pub use simplex::{LpOutcome, LpProblem, LpStatus};
pub use vlp::CanonicalProgram;
