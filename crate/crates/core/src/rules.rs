//! Agent decision rules and their transition kernels.

use serde::{Deserialize, Serialize};

use crate::engine::StageError;
use crate::error::{invalid, Error, Result};
use crate::lfd::{Law, LfdPair, LrEvent};
use crate::model::{same, Hypothesis};

/// Prior `(π0, π1)` with `π1 = 1 - π0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PriorsRepr", into = "PriorsRepr")]
pub struct Priors {
    pi0: f64,
}

#[derive(Serialize, Deserialize)]
struct PriorsRepr {
    pi0: f64,
}

impl TryFrom<PriorsRepr> for Priors {
    type Error = Error;
    fn try_from(r: PriorsRepr) -> Result<Self> {
        Priors::new(r.pi0)
    }
}

impl From<Priors> for PriorsRepr {
    fn from(p: Priors) -> Self {
        PriorsRepr { pi0: p.pi0 }
    }
}

impl Priors {
    pub fn new(pi0: f64) -> Result<Self> {
        if !(pi0 > 0.0 && pi0 < 1.0) {
            return Err(invalid("pi0", format!("{pi0} is not in (0, 1)")));
        }
        Ok(Priors { pi0 })
    }

    pub fn uniform() -> Self {
        Priors { pi0: 0.5 }
    }

    pub fn pi0(&self) -> f64 {
        self.pi0
    }

    pub fn pi1(&self) -> f64 {
        1.0 - self.pi0
    }

    /// `π0 P_F + π1 P_M`.
    pub fn bayes_error(&self, p_f: f64, p_m: f64) -> f64 {
        self.pi0 * p_f + self.pi1() * p_m
    }
}

impl Default for Priors {
    fn default() -> Self {
        Priors::uniform()
    }
}

/// Agent 1 decides 1 iff `l*(Y) >= threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstAgentRule {
    pub threshold: f64,
}

impl FirstAgentRule {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(threshold > 0.0) || threshold.is_nan() {
            return Err(invalid("threshold", format!("{threshold} must be positive")));
        }
        Ok(FirstAgentRule { threshold })
    }

    /// The minimax single-agent test, threshold `π0/π1`.
    pub fn minimax(priors: Priors) -> Self {
        FirstAgentRule {
            threshold: priors.pi0() / priors.pi1(),
        }
    }

    /// `P_h(U_1 = 1)`.
    pub fn prob_one(&self, lfd: &LfdPair, law: Law, h: Hypothesis) -> f64 {
        lfd.prob(law, h, LrEvent::Ge, self.threshold)
    }

    /// The equivalent relay rule fed a 0 from a virtual predecessor.
    pub fn as_relay(&self) -> RelayRule {
        RelayRule {
            t1: self.threshold,
            t0: self.threshold,
            p: 1.0,
            q: 0.0,
        }
    }

    pub fn decide(&self, lstar: f64) -> bool {
        lstar >= self.threshold || same(lstar, self.threshold)
    }
}

/// Randomized likelihood-ratio relay `(t1, t0, p, q)`.
///
/// With `u` the predecessor's bit: if `u = 1`, output 0 iff `l* < t1`, or
/// `l* = t1` with probability `p`; if `u = 0`, output 1 iff `l* > t0`, or
/// `l* = t0` with probability `1 - q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelayRule {
    #[serde(with = "crate::extended_f64")]
    pub t1: f64,
    #[serde(with = "crate::extended_f64")]
    pub t0: f64,
    pub p: f64,
    pub q: f64,
}

impl RelayRule {
    pub fn new(t1: f64, t0: f64, p: f64, q: f64) -> Result<Self> {
        let r = RelayRule { t1, t0, p, q };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 >= 0.0) || self.t1.is_infinite() {
            return Err(invalid("t1", format!("{} must be finite and non-negative", self.t1)));
        }
        if !(self.t0 >= self.t1) {
            return Err(invalid("t0", format!("{} is below t1 = {}", self.t0, self.t1)));
        }
        for (name, v) in [("p", self.p), ("q", self.q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(name, format!("{v} is not in [0, 1]")));
            }
        }
        Ok(())
    }

    /// A rule that always repeats its input.
    pub fn pass_through() -> Self {
        RelayRule {
            t1: 0.0,
            t0: f64::INFINITY,
            p: 0.0,
            q: 1.0,
        }
    }

    /// Simulated decision given `l*`, the incoming bit and a uniform coin.
    pub fn decide(&self, lstar: f64, u_prev: bool, coin: f64) -> bool {
        if u_prev {
            if same(lstar, self.t1) {
                coin >= self.p
            } else {
                lstar > self.t1
            }
        } else if same(lstar, self.t0) {
            coin >= self.q
        } else {
            lstar > self.t0
        }
    }
}

/// `P_h(φ(Y, u) = 1)` for both inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kernel {
    pub one_given_one: f64,
    pub one_given_zero: f64,
}

impl Kernel {
    pub fn prob(&self, u_prev: bool, v: bool) -> f64 {
        let one = if u_prev {
            self.one_given_one
        } else {
            self.one_given_zero
        };
        if v {
            one
        } else {
            1.0 - one
        }
    }
}

/// Transition kernel of a relay rule under the given law and hypothesis.
pub fn kernel(rule: &RelayRule, lfd: &LfdPair, law: Law, h: Hypothesis) -> Kernel {
    let t1 = lfd.lstar_tail(law, h, rule.t1);
    let t0 = lfd.lstar_tail(law, h, rule.t0);
    Kernel {
        one_given_one: (t1.above + (1.0 - rule.p) * t1.atom).clamp(0.0, 1.0),
        one_given_zero: (t0.above + (1.0 - rule.q) * t0.atom).clamp(0.0, 1.0),
    }
}

/// `Q_h(φ(Y, u_prev) = v)` under the least-favorable pair.
pub fn kernel_prob(rule: &RelayRule, lfd: &LfdPair, h: Hypothesis, u_prev: bool, v: bool) -> f64 {
    kernel(rule, lfd, Law::LeastFavorable, h).prob(u_prev, v)
}

/// Myopic minimax rule for the next agent given the predecessor's
/// least-favorable error probabilities. Ties at `t1` keep the incoming bit
/// and ties at `t0` decide 1.
pub fn social_rule(priors: Priors, prev: &StageError) -> Result<RelayRule> {
    let (qf, qm) = (prev.p_f, prev.p_m);
    if !(qf > 0.0 && qf < 1.0 && qm > 0.0 && qm < 1.0) {
        return Err(Error::DegeneratePosterior {
            k: prev.k,
            p_f: qf,
            p_m: qm,
        });
    }
    let ratio = priors.pi0() / priors.pi1();
    let t1 = ratio * qf / (1.0 - qm);
    let t0 = ratio * (1.0 - qf) / qm;
    if t0 < t1 {
        // Predecessor worse than a coin flip: its bit is inverted evidence,
        // which a threshold relay cannot exploit.
        return Err(invalid(
            "prev",
            format!("P_F + P_M = {} exceeds 1", qf + qm),
        ));
    }
    Ok(RelayRule {
        t1,
        t0,
        p: 0.0,
        q: 0.0,
    })
}
