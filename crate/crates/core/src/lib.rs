//! Robust binary hypothesis testing over tandem networks under
//! ε-contamination uncertainty.

// Negated float comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod extended_f64;
pub mod lfd;
pub mod model;
pub mod optimize;
pub mod rules;
pub mod runner;
pub mod sim;

pub use engine::{
    asymptotic_error, learnability_check, phi_delta_scheme, propagate, propagate_under,
    social_trajectory, Asymptote, ChainConfig, EpsSchedule, LfdCache, Mode, PhiDelta,
    SocialTrajectory, StageError, Verdict,
};
pub use error::{Error, Result};
pub use lfd::{solve_breakpoints, Law, LfdPair, LrEvent, UncertaintySpec};
pub use model::{Hypothesis, LrTail, ModelKind, NominalPair};
pub use rules::{kernel, kernel_prob, social_rule, FirstAgentRule, Kernel, Priors, RelayRule};
