//! Exact error propagation along a tandem chain.
//!
//! Stage `k` receives the bit of stage `k-1` and applies a relay whose
//! kernel under hypothesis `h` is `K_h(u -> 1)`. Error probabilities obey
//!
//! ```text
//! P_F,k = P_F,k-1 K0(1->1) + (1 - P_F,k-1) K0(0->1)
//! P_M,k = P_M,k-1 K1(0->0) + (1 - P_M,k-1) K1(1->0)
//! ```
//!
//! which for a shared rule converges linearly to `a/(a+d)` and `m/(m+f)`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lfd::{Law, LfdPair, LrEvent};
use crate::model::{Hypothesis, NominalPair};
use crate::rules::{kernel, social_rule, FirstAgentRule, Priors, RelayRule};

/// `(P_F, P_M, P_e)` at chain position `k` (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub k: usize,
    pub p_f: f64,
    pub p_m: f64,
    pub p_e: f64,
}

impl StageError {
    pub fn new(k: usize, p_f: f64, p_m: f64, priors: Priors) -> Self {
        StageError {
            k,
            p_f,
            p_m,
            p_e: priors.bayes_error(p_f, p_m),
        }
    }
}

/// Per-agent contamination levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EpsSchedule {
    Constant { eps0: f64, eps1: f64 },
    /// `ε_i,k = a_i / k`.
    Harmonic { a0: f64, a1: f64 },
    /// One pair per agent.
    Explicit { pairs: Vec<(f64, f64)> },
}

impl EpsSchedule {
    pub fn constant(eps: f64) -> Self {
        EpsSchedule::Constant { eps0: eps, eps1: eps }
    }

    /// `(ε0_k, ε1_k)` for agent `k >= 1`.
    pub fn at(&self, k: usize) -> Result<(f64, f64)> {
        if k == 0 {
            return Err(invalid("k", "agents are numbered from 1"));
        }
        match self {
            EpsSchedule::Constant { eps0, eps1 } => Ok((*eps0, *eps1)),
            EpsSchedule::Harmonic { a0, a1 } => Ok((a0 / k as f64, a1 / k as f64)),
            EpsSchedule::Explicit { pairs } => pairs
                .get(k - 1)
                .copied()
                .ok_or_else(|| invalid("eps_schedule", format!("no entry for agent {k}"))),
        }
    }

    /// Constant pair if every agent shares it.
    pub fn as_constant(&self) -> Option<(f64, f64)> {
        match self {
            EpsSchedule::Constant { eps0, eps1 } => Some((*eps0, *eps1)),
            EpsSchedule::Harmonic { a0, a1 } if *a0 == 0.0 && *a1 == 0.0 => Some((0.0, 0.0)),
            EpsSchedule::Explicit { pairs } => {
                let first = *pairs.first()?;
                pairs.iter().all(|&p| p == first).then_some(first)
            }
            _ => None,
        }
    }
}

/// A tandem chain: priors, length, nominal pair and contamination schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub priors: Priors,
    pub n: usize,
    pub eps: EpsSchedule,
    pub model: NominalPair,
}

impl ChainConfig {
    pub fn new(priors: Priors, n: usize, eps: EpsSchedule, model: NominalPair) -> Result<Self> {
        let c = ChainConfig { priors, n, eps, model };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "chain length must be at least 1"));
        }
        if let EpsSchedule::Explicit { pairs } = &self.eps {
            if pairs.len() != self.n {
                return Err(invalid(
                    "eps_schedule",
                    format!("{} pairs for a chain of length {}", pairs.len(), self.n),
                ));
            }
        }
        Ok(())
    }

    /// Least-favorable pairs for agents `1..=n`, solved once per distinct
    /// contamination pair.
    pub fn lfds(&self, cache: &LfdCache) -> Result<Vec<Arc<LfdPair>>> {
        (1..=self.n)
            .map(|k| {
                let (e0, e1) = self.eps.at(k)?;
                cache.get(e0, e1)
            })
            .collect()
    }
}

/// Memoized least-favorable pairs for one nominal pair.
#[derive(Debug)]
pub struct LfdCache {
    model: NominalPair,
    solved: RwLock<HashMap<(u64, u64), Arc<LfdPair>>>,
}

impl LfdCache {
    pub fn new(model: NominalPair) -> Self {
        LfdCache {
            model,
            solved: RwLock::new(HashMap::new()),
        }
    }

    pub fn get(&self, eps0: f64, eps1: f64) -> Result<Arc<LfdPair>> {
        let key = (eps0.to_bits(), eps1.to_bits());
        if let Some(hit) = self.solved.read().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let lfd = Arc::new(LfdPair::solve(self.model.clone(), eps0, eps1)?);
        let mut w = self.solved.write().expect("cache lock");
        Ok(w.entry(key).or_insert(lfd).clone())
    }

    pub fn len(&self) -> usize {
        self.solved.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl AsRef<LfdPair> for LfdPair {
    fn as_ref(&self) -> &LfdPair {
        self
    }
}

fn pick<T>(items: &[T], i: usize) -> &T {
    if items.len() == 1 {
        &items[0]
    } else {
        &items[i]
    }
}

/// Stage-1 errors of the first agent.
pub fn first_stage<L: AsRef<LfdPair>>(first: &FirstAgentRule, lfd: &L, priors: Priors, law: Law) -> StageError {
    let lfd = lfd.as_ref();
    let p_f = first.prob_one(lfd, law, Hypothesis::H0);
    let p_m = 1.0 - first.prob_one(lfd, law, Hypothesis::H1);
    StageError::new(1, p_f, p_m, priors)
}

/// One application of the error recurrence.
pub fn step(prev: &StageError, rule: &RelayRule, lfd: &LfdPair, priors: Priors, law: Law) -> StageError {
    let k0 = kernel(rule, lfd, law, Hypothesis::H0);
    let k1 = kernel(rule, lfd, law, Hypothesis::H1);
    let p_f = prev.p_f * k0.one_given_one + (1.0 - prev.p_f) * k0.one_given_zero;
    let p_m = prev.p_m * (1.0 - k1.one_given_zero) + (1.0 - prev.p_m) * (1.0 - k1.one_given_one);
    StageError::new(prev.k + 1, p_f.clamp(0.0, 1.0), p_m.clamp(0.0, 1.0), priors)
}

/// Exact stage errors for `k = 1..=n` under the given law.
///
/// `relays` holds one shared rule or one rule per agent `2..=n`; `lfds` holds
/// one shared pair or one pair per agent `1..=n`.
pub fn propagate_under<L: AsRef<LfdPair>>(
    first: &FirstAgentRule,
    relays: &[RelayRule],
    lfds: &[L],
    priors: Priors,
    n: usize,
    law: Law,
) -> Result<Vec<StageError>> {
    if n == 0 {
        return Err(invalid("n", "chain length must be at least 1"));
    }
    if lfds.is_empty() || (lfds.len() != 1 && lfds.len() != n) {
        return Err(invalid("lfds", format!("expected 1 or {n} pairs, got {}", lfds.len())));
    }
    if n > 1 && relays.len() != 1 && relays.len() != n - 1 {
        return Err(invalid(
            "relays",
            format!("expected 1 or {} rules, got {}", n - 1, relays.len()),
        ));
    }
    let mut out = Vec::with_capacity(n);
    out.push(first_stage(first, &lfds[0], priors, law));
    for k in 2..=n {
        let next = step(&out[k - 2], pick(relays, k - 2), pick(lfds, k - 1).as_ref(), priors, law);
        out.push(next);
    }
    Ok(out)
}

/// Exact stage errors under the least-favorable pairs.
pub fn propagate<L: AsRef<LfdPair>>(
    first: &FirstAgentRule,
    relays: &[RelayRule],
    lfds: &[L],
    priors: Priors,
    n: usize,
) -> Result<Vec<StageError>> {
    propagate_under(first, relays, lfds, priors, n, Law::LeastFavorable)
}

/// Result of a social-learning chain.
#[derive(Clone, Debug)]
pub struct SocialTrajectory {
    pub stages: Vec<StageError>,
    /// Rule of agent `k` at index `k - 2`.
    pub rules: Vec<RelayRule>,
    /// Set when the posterior collapsed before agent `n`.
    pub halted: Option<Error>,
}

impl SocialTrajectory {
    /// The full trajectory, or the halting diagnostic.
    pub fn complete(self) -> Result<Self> {
        match self.halted {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

/// Agents choose their rules myopically, each minimizing its own minimax
/// error given its predecessors.
pub fn social_trajectory(config: &ChainConfig, cache: &LfdCache) -> Result<SocialTrajectory> {
    config.validate()?;
    let lfds = config.lfds(cache)?;
    let priors = config.priors;
    let first = FirstAgentRule::minimax(priors);
    let mut stages = vec![first_stage(&first, &lfds[0], priors, Law::LeastFavorable)];
    let mut rules = Vec::with_capacity(config.n.saturating_sub(1));
    for k in 2..=config.n {
        let prev = stages[k - 2];
        let rule = match social_rule(priors, &prev) {
            Ok(r) => r,
            Err(e) => {
                return Ok(SocialTrajectory {
                    stages,
                    rules,
                    halted: Some(e),
                })
            }
        };
        stages.push(step(&prev, &rule, &lfds[k - 1], priors, Law::LeastFavorable));
        rules.push(rule);
    }
    Ok(SocialTrajectory {
        stages,
        rules,
        halted: None,
    })
}

/// Fixed point of a shared relay rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Asymptote {
    pub p_f: f64,
    pub p_m: f64,
    pub p_e: f64,
    /// `|K0(1->1) - K0(0->1)|`, the contraction factor of `P_F`.
    pub rho0: f64,
    /// `|K1(1->1) - K1(0->1)|`, the contraction factor of `P_M`.
    pub rho1: f64,
}

/// Limit of the stage errors for a shared rule under the least-favorable pair.
pub fn asymptotic_error(rule: &RelayRule, lfd: &LfdPair, priors: Priors) -> Result<Asymptote> {
    let k0 = kernel(rule, lfd, Law::LeastFavorable, Hypothesis::H0);
    let k1 = kernel(rule, lfd, Law::LeastFavorable, Hypothesis::H1);
    let a = k0.one_given_zero;
    let d = 1.0 - k0.one_given_one;
    let m = 1.0 - k1.one_given_one;
    let f = k1.one_given_zero;
    let rho0 = (1.0 - a - d).abs();
    let rho1 = (1.0 - m - f).abs();
    if !(a + d > 0.0) || !(m + f > 0.0) || rho0 >= 1.0 || rho1 >= 1.0 {
        return Err(Error::NoContraction { rho0, rho1 });
    }
    let p_f = a / (a + d);
    let p_m = m / (m + f);
    Ok(Asymptote {
        p_f,
        p_m,
        p_e: priors.bayes_error(p_f, p_m),
        rho0,
        rho1,
    })
}

/// The `Φ_δ` construction: agents `1..=N*` report 1 iff their own
/// `l* >= t` or the predecessor reported 1; later agents relay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiDelta {
    pub t: f64,
    pub n_star: u64,
    /// `ln δ / ln(1 - Q1(l* >= t))`; `N*` must exceed it.
    pub lower: f64,
    /// `ln(1-δ) / ln(1 - Q1(l* >= t)/t)`; `N*` must stay below it.
    pub upper: f64,
    pub p_f: f64,
    pub p_m: f64,
}

const PHI_DELTA_MAX_T: f64 = 1_152_921_504_606_846_976.0; // 2^60

/// Search `t = 2, 4, 8, ...` until an integer lies strictly between the two
/// bounds, then return the smallest such integer.
pub fn phi_delta_scheme(lfd: &LfdPair, delta: f64) -> Result<PhiDelta> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("{delta} is not in (0, 1)")));
    }
    if lfd.spec.eps0 != 0.0 {
        return Err(Error::SchemeInapplicable(format!(
            "eps0 = {} must be zero",
            lfd.spec.eps0
        )));
    }
    if !lfd.model().llr_unbounded_above() {
        return Err(Error::SchemeInapplicable(
            "the nominal log-likelihood ratio is bounded above".into(),
        ));
    }
    let mut t = 2.0;
    while t <= PHI_DELTA_MAX_T {
        let g1 = lfd.event_prob(Hypothesis::H1, LrEvent::Ge, t);
        if g1 > 0.0 && g1 < 1.0 {
            let lower = delta.ln() / (-g1).ln_1p();
            let upper = (-delta).ln_1p() / (-g1 / t).ln_1p();
            let n_star = lower.floor() + 1.0;
            if n_star < upper && n_star >= 1.0 {
                let g0 = lfd.event_prob(Hypothesis::H0, LrEvent::Ge, t);
                let n = n_star as i32;
                return Ok(PhiDelta {
                    t,
                    n_star: n_star as u64,
                    lower,
                    upper,
                    p_m: (1.0 - g1).powi(n),
                    p_f: 1.0 - (1.0 - g0).powi(n),
                });
            }
        }
        t *= 2.0;
    }
    Err(Error::SearchExhausted)
}

/// Which design criterion a learnability question is posed under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// All rules chosen jointly to minimize the last agent's error.
    Dd,
    /// Each agent minimizes its own error given its predecessors.
    Sl,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub learnable: bool,
    pub clause: String,
}

/// Decide structurally whether the minimax error can be driven to zero.
pub fn learnability_check(config: &ChainConfig, mode: Mode) -> Result<Verdict> {
    let above = config.model.llr_unbounded_above();
    let below = config.model.llr_unbounded_below();
    let verdict = |learnable: bool, clause: &str| {
        Ok(Verdict {
            learnable,
            clause: clause.to_string(),
        })
    };
    if let Some((e0, e1)) = config.eps.as_constant() {
        return match mode {
            Mode::Dd => {
                if e0 == 0.0 && above {
                    verdict(true, "eps0 = 0 and the log-likelihood ratio is unbounded above")
                } else if e1 == 0.0 && below {
                    verdict(true, "eps1 = 0 and the log-likelihood ratio is unbounded below")
                } else {
                    verdict(
                        false,
                        "neither (eps0 = 0, LLR unbounded above) nor (eps1 = 0, LLR unbounded below) holds",
                    )
                }
            }
            Mode::Sl => {
                if e0 == 0.0 && e1 == 0.0 && above && below {
                    verdict(true, "eps0 = eps1 = 0 and the log-likelihood ratio is unbounded")
                } else if e0 == 0.0 && e1 == 0.0 {
                    verdict(false, "the log-likelihood ratio is bounded")
                } else {
                    verdict(false, "identical classes with a nonzero contamination level")
                }
            }
        };
    }
    match (&config.eps, mode) {
        (EpsSchedule::Harmonic { .. }, Mode::Sl) => {
            if above && below {
                verdict(
                    true,
                    "contamination levels converge to zero and the log-likelihood ratio is unbounded",
                )
            } else {
                verdict(false, "the log-likelihood ratio is bounded")
            }
        }
        (EpsSchedule::Harmonic { .. }, Mode::Dd) => Err(Error::Inconclusive(
            "no criterion covers decentralized detection with varying classes".into(),
        )),
        (EpsSchedule::Explicit { .. }, _) => Err(Error::Inconclusive(
            "a finite explicit schedule does not determine limiting contamination levels".into(),
        )),
        (EpsSchedule::Constant { .. }, _) => unreachable!("constant schedules handled above"),
    }
}
