use thiserror::Error;

/// Errors produced by the solvers, engines and harnesses in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("observation {y} is outside the support of the model")]
    OutsideSupport { y: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("uncertainty classes are not disjoint (c' = {c_lo}, c'' = {c_hi})")]
    NotDisjoint { c_lo: f64, c_hi: f64 },

    #[error("could not bracket the root of the {which} normalization equation")]
    NoBracket { which: &'static str },

    #[error("degenerate posterior after stage {k}: P_F = {p_f}, P_M = {p_m}")]
    DegeneratePosterior { k: usize, p_f: f64, p_m: f64 },

    #[error("relay rule does not contract (rho0 = {rho0}, rho1 = {rho1})")]
    NoContraction { rho0: f64, rho1: f64 },

    #[error("phi-delta scheme inapplicable: {0}")]
    SchemeInapplicable(String),

    #[error("phi-delta threshold search exceeded t = 2^60 without an admissible N*")]
    SearchExhausted,

    #[error("learnability verdict inconclusive: {0}")]
    Inconclusive(String),

    #[error("ex-post verification failed: {0}")]
    VerificationFailed(String),

    #[error("worst-case dominance violated at stage {k} ({quantity}): simulated {simulated} > LFD {bound} + 4 se ({se})")]
    DominanceViolation {
        k: usize,
        quantity: &'static str,
        simulated: f64,
        bound: f64,
        se: f64,
    },

    #[error("stochastic ordering violated at t = {t}: {detail} (violation {violation})")]
    OrderingViolation {
        t: f64,
        detail: String,
        violation: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
