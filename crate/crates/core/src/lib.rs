//! Discrete Bayes belief networks and influence diagrams.
//!
//! The crate covers the whole path from a hand-written network description
//! to answers a consultant can act on:
//!
//! * [`model`]: variables, nodes, tables and structural validation.
//! * [`canonical`]: noisy-OR and noisy-MAX parameterizations and their
//!   expansion into full tables.
//! * [`inference`]: exact posteriors by variable elimination, with a
//!   joint-enumeration oracle.
//! * [`decision`]: expected utility of each alternative of a decision.
//! * [`sensitivity`]: sensitivity ranges, odds-likelihood forms and
//!   parameter sweeps.
//! * [`netlang`]: the `.bn`/`.ev` text formats.
//! * [`scenario`], [`cli`] and [`service`]: batch and HTTP front ends.

pub mod canonical;
pub mod cli;
pub mod decision;
pub mod inference;
pub mod model;
pub mod netlang;
pub mod random;
pub mod scenario;
pub mod sensitivity;
pub mod service;

pub use canonical::{
    compile_to_cpt, diff_cpts, expand_leaky_noisy_or, expand_noisy_max, expand_noisy_or, parameter_counts,
    CanonicalError, LeakConvention, MaxCause, NoisyMaxSpec, NoisyOrSpec, ParameterCounts,
};
pub use decision::{expected_utility, recommend, DecisionError, DecisionRecommendation, UtilityTable};
pub use inference::{enumerate_joint, posterior, prob_of_evidence, Distribution, InferenceError, Query};
pub use model::{
    expand_deterministic_max, topological_order, validate, Cpd, Cpt, Evidence, ModelError, Network, Node, NodeKind,
    ValidationReport, VariableSpec,
};
pub use netlang::{parse_evidence, parse_network, serialize_evidence, serialize_network, ParseDiagnostic};
pub use sensitivity::{
    chain_sensitivity, cpt_parameter_sweep, likelihood_sensitivity, log_odds_decomposition, posterior_from_odds,
    sensitivity_range, Event,
};
