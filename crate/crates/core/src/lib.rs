//! Risk-averse Markov decision processes with Kusuoka-type risk mappings over
//! randomized (simplex) policies.
//!
//! * [`mdp`] finite models, cost laws, policies, trajectory simulation.
//! * [`risk`] AVaR and AVaR-mixture functionals on discrete laws and on
//!   partial-expectation curves `q -> E[(Z - q)_+]`.
//! * [`oracle`] exact dynamic programming on a known model.
//! * [`learner`] the sample-based g-value learner, the finite-sample error bound
//!   and the transition-estimate concentration suite.
//! * [`harness`] experiment pipeline and relative-error reports.

pub mod error;
pub mod harness;
pub mod hashing;
pub mod learner;
pub mod mdp;
pub mod oracle;
pub mod risk;
pub mod rng;

pub use error::{Error, Result};
