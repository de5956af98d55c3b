//! Multi-round monotone submodular maximization with cardinality and
//! per-element fairness constraints.
//!
//! Every round a scheduler picks `k` of `n` elements (workers). The utility of
//! a round is a monotone submodular set function `f`, and each element `u`
//! must be picked in at least a fraction `r_u` of the rounds in the long run.
//! The crate provides:
//!
//! * counted value oracles for `f` ([`oracle`]),
//! * the multilinear extension and its marginal weights ([`multilinear`]),
//! * the fairness polytope and its linear maximizer ([`polytope`]),
//! * the two fair continuous-greedy drivers ([`greedy`]) and the randomized
//!   dependent rounding that turns their output into per-round sets
//!   ([`rounding`]),
//! * the debt-priority discrete scheduler, the plain greedy baseline and the
//!   slot-assignment policy ([`discrete`]),
//! * an exact LP for the optimal time-average utility ([`lp`]),
//! * trace analysis and bound certificates ([`metrics`]).

pub mod discrete;
pub mod error;
pub mod greedy;
pub mod instances;
pub mod lp;
pub mod metrics;
pub mod multilinear;
pub mod oracle;
pub mod polytope;
pub mod rng;
pub mod rounding;

pub use error::{Error, Result};
pub use multilinear::FractionalPoint;
pub use oracle::{UtilityKind, UtilityOracle, WorkerPool};
