//! Threshold design for tandem chains.
//!
//! Three problems are solved numerically:
//!
//! * `FiniteDd`: per-agent thresholds minimizing the last agent's error in a
//!   chain of known length. Small discrete problems are enumerated; otherwise
//!   cyclic coordinate descent from several starts.
//! * `AsymptoticDd`: one shared relay minimizing the limiting error.
//! * `UnknownSl`: one shared relay minimizing `max{P_e,2, P_e,∞}`, the worst
//!   error over all positions `k >= 2`.
//!
//! The shared-relay problems use a log-spaced grid over the range of `l*`,
//! randomization scanned only at atoms of `l*`, then Nelder–Mead on the
//! thresholds and golden-section on the randomization.

pub mod search;

use std::cmp::Ordering;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{
    first_stage, propagate, social_trajectory, step, ChainConfig, LfdCache, StageError,
};
use crate::error::{invalid, Error, Result};
use crate::lfd::{Law, LfdPair};
use crate::model::{same, Hypothesis};
use crate::rules::{kernel, FirstAgentRule, Priors, RelayRule};
use search::{cmp_vec, golden_section, nelder_mead, NelderMeadOptions};

/// Grid resolution per threshold axis.
pub const GRID: usize = 64;
/// Randomization levels scanned at atoms.
pub const RANDOMIZATION_LEVELS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
/// Tail mass below which unbounded `l*` ranges are truncated.
pub const TAIL_CUTOFF: f64 = 1e-12;
/// Sweep-improvement threshold for coordinate descent.
pub const SWEEP_TOL: f64 = 1e-10;
/// Number of random starts for the finite-length problem.
pub const RANDOM_STARTS: usize = 8;
/// Largest number of deterministic chains enumerated outright.
pub const EXHAUSTIVE_LIMIT: u64 = 2_000_000;
/// Stages evaluated when verifying the worst-position structure.
pub const VERIFY_STAGES: usize = 500;
/// Slack of that verification.
pub const VERIFY_TOL: f64 = 1e-9;

const REFINE_STARTS: usize = 4;
const REFINE_ROUNDS: usize = 30;
const LINE_POINTS: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    FiniteDd,
    AsymptoticDd,
    UnknownSl,
}

impl std::str::FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "finite-dd" => Ok(Objective::FiniteDd),
            "asymptotic-dd" => Ok(Objective::AsymptoticDd),
            "unknown-sl" => Ok(Objective::UnknownSl),
            other => Err(invalid("objective", format!("unknown objective {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BestRule {
    Relay(RelayRule),
    Chain {
        first: FirstAgentRule,
        relays: Vec<RelayRule>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iterate: Vec<f64>,
    pub value: f64,
}

/// Where the worst position of a shared relay lies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlBreakdown {
    pub p_e2: f64,
    pub p_inf: f64,
    /// `true` when `P_e,2 >= P_e,∞`.
    pub at_stage_two: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub objective: Objective,
    pub best_rule: BestRule,
    pub value: f64,
    pub trace: Vec<TracePoint>,
    pub restarts: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<SlBreakdown>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

/// Limit of `P_e,k` for a chain whose first agent is the minimax test and
/// whose later agents all use `rule`. A component whose kernel does not
/// contract stays at its stage-1 value.
pub fn chain_limit(rule: &RelayRule, lfd: &LfdPair, priors: Priors) -> Option<StageError> {
    let first = first_stage(&FirstAgentRule::minimax(priors), lfd, priors, Law::LeastFavorable);
    let k0 = kernel(rule, lfd, Law::LeastFavorable, Hypothesis::H0);
    let k1 = kernel(rule, lfd, Law::LeastFavorable, Hypothesis::H1);
    let a = k0.one_given_zero;
    let d = 1.0 - k0.one_given_one;
    let m = 1.0 - k1.one_given_one;
    let f = k1.one_given_zero;
    let limit = |x: f64, y: f64, start: f64| -> Option<f64> {
        let s = x + y;
        if s <= 0.0 {
            Some(start)
        } else if s >= 2.0 {
            None
        } else {
            Some(x / s)
        }
    };
    let p_f = limit(a, d, first.p_f)?;
    let p_m = limit(m, f, first.p_m)?;
    Some(StageError::new(usize::MAX, p_f, p_m, priors))
}

/// Limiting error of a shared relay; infinite when the chain oscillates.
pub fn asymptotic_dd_value(rule: &RelayRule, lfd: &LfdPair, priors: Priors) -> f64 {
    chain_limit(rule, lfd, priors).map_or(f64::INFINITY, |s| s.p_e)
}

/// `max{P_e,2, P_e,∞}` of a shared relay.
pub fn unknown_sl_value(rule: &RelayRule, lfd: &LfdPair, priors: Priors) -> (f64, SlBreakdown) {
    let first = first_stage(&FirstAgentRule::minimax(priors), lfd, priors, Law::LeastFavorable);
    let p_e2 = step(&first, rule, lfd, priors, Law::LeastFavorable).p_e;
    let p_inf = asymptotic_dd_value(rule, lfd, priors);
    let b = SlBreakdown {
        p_e2,
        p_inf,
        at_stage_two: p_e2 >= p_inf,
    };
    (p_e2.max(p_inf), b)
}

/// Range of `l*` relevant to threshold design: the clip points when finite,
/// otherwise the point beyond which both tails carry under `TAIL_CUTOFF`.
pub fn effective_range(lfd: &LfdPair) -> (f64, f64) {
    let (lo, hi) = lfd.lstar_range();
    let m = lfd.model();
    let q_lo = lfd.clip(m.lr_upper_quantile(Hypothesis::H0, 1.0 - TAIL_CUTOFF));
    let q_hi = lfd.clip(m.lr_upper_quantile(Hypothesis::H1, TAIL_CUTOFF));
    let lo = if lo > 0.0 { lo } else { q_lo.max(f64::MIN_POSITIVE) };
    let hi = if hi.is_finite() { hi } else { q_hi };
    (lo, hi.max(lo))
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 || !(hi > lo) {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            i if i == n - 1 => hi,
            i => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
struct Slot {
    t: f64,
    atom: bool,
}

fn slots(lfd: &LfdPair) -> Vec<Slot> {
    let (lo, hi) = effective_range(lfd);
    let atoms = lfd.lstar_atoms();
    let mut out: Vec<Slot> = log_grid(lo, hi, GRID)
        .into_iter()
        .filter(|t| !atoms.iter().any(|a| same(*a, *t)))
        .map(|t| Slot { t, atom: false })
        .collect();
    out.extend(atoms.iter().map(|&t| Slot { t, atom: true }));
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    out
}

fn rule_key(r: &RelayRule) -> [f64; 4] {
    [r.t1, r.t0, r.p, r.q]
}

fn better(a: &(f64, RelayRule), b: &(f64, RelayRule)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then_with(|| cmp_vec(&rule_key(&a.1), &rule_key(&b.1)))
}

/// Drop randomization that cannot matter because the threshold has no atom.
fn normalize(rule: RelayRule, lfd: &LfdPair) -> RelayRule {
    let atoms = lfd.lstar_atoms();
    let on_atom = |t: f64| atoms.iter().any(|&a| same(a, t));
    RelayRule {
        p: if on_atom(rule.t1) { rule.p } else { 0.0 },
        q: if on_atom(rule.t0) { rule.q } else { 0.0 },
        ..rule
    }
}

/// Shared-relay minimization of `value` by grid scan plus refinement.
fn optimize_shared(
    lfd: &LfdPair,
    value: &(dyn Fn(&RelayRule) -> f64 + Sync),
    trace: &mut Vec<TracePoint>,
) -> (f64, RelayRule) {
    let grid = slots(lfd);
    let levels = |s: &Slot| -> &'static [f64] {
        if s.atom {
            &RANDOMIZATION_LEVELS
        } else {
            &RANDOMIZATION_LEVELS[..1]
        }
    };
    let mut scanned: Vec<(f64, RelayRule)> = (0..grid.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let grid = &grid;
            (i..grid.len()).flat_map(move |j| {
                let (s1, s0) = (grid[i], grid[j]);
                levels(&s1).iter().flat_map(move |&p| {
                    levels(&s0).iter().map(move |&q| {
                        let r = RelayRule {
                            t1: s1.t,
                            t0: s0.t,
                            p,
                            q,
                        };
                        (value(&r), r)
                    })
                })
            })
        })
        .filter(|(v, _)| v.is_finite())
        .collect();
    scanned.sort_by(better);
    scanned.dedup_by(|a, b| a.0 == b.0);
    let starts: Vec<(f64, RelayRule)> = scanned.into_iter().take(REFINE_STARTS).collect();
    if let Some(s) = starts.first() {
        trace.push(TracePoint {
            iterate: rule_key(&s.1).to_vec(),
            value: s.0,
        });
    }
    let (lo, hi) = effective_range(lfd);
    let atoms = lfd.lstar_atoms();
    let on_atom = |t: f64| atoms.iter().any(|&a| same(a, t));
    let refined: Vec<(f64, RelayRule)> = starts
        .par_iter()
        .map(|&(v0, r0)| refine(r0, v0, lo, hi, &on_atom, value))
        .collect();
    let mut best = refined
        .into_iter()
        .chain(starts.iter().copied())
        .min_by(better)
        .expect("grid holds at least one contracting rule");
    best.1 = normalize(best.1, lfd);
    best.0 = value(&best.1);
    trace.push(TracePoint {
        iterate: rule_key(&best.1).to_vec(),
        value: best.0,
    });
    best
}

fn refine(
    start: RelayRule,
    v_start: f64,
    lo: f64,
    hi: f64,
    on_atom: &dyn Fn(f64) -> bool,
    value: &(dyn Fn(&RelayRule) -> f64 + Sync),
) -> (f64, RelayRule) {
    let pin1 = on_atom(start.t1);
    let pin0 = on_atom(start.t0);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut best = (v_start, start);
    for _ in 0..REFINE_ROUNDS {
        let before = best.0;
        // Thresholds not sitting on atoms move continuously in log space.
        let cur = best.1;
        let free: Vec<f64> = [(!pin1, cur.t1), (!pin0, cur.t0)]
            .iter()
            .filter(|(free, _)| *free)
            .map(|(_, t)| t.ln())
            .collect();
        if !free.is_empty() {
            let build = |x: &[f64]| -> RelayRule {
                let mut it = x.iter().map(|v| v.clamp(llo, lhi).exp());
                let mut t1 = if pin1 { cur.t1 } else { it.next().unwrap() };
                let mut t0 = if pin0 { cur.t0 } else { it.next().unwrap() };
                if t1 > t0 {
                    match (pin1, pin0) {
                        (true, false) => t0 = t1,
                        (false, true) => t1 = t0,
                        _ => std::mem::swap(&mut t1, &mut t0),
                    }
                }
                RelayRule { t1, t0, ..cur }
            };
            let f = |x: &[f64]| {
                let v = value(&build(x));
                if v.is_finite() {
                    v
                } else {
                    f64::MAX
                }
            };
            let step = ((lhi - llo) / GRID as f64).max(1e-3);
            let (x, fx) = nelder_mead(f, &free, step, NelderMeadOptions::default());
            let cand = (fx, build(&x));
            if better(&cand, &best) == Ordering::Less {
                best = cand;
            }
        }
        // Randomization at pinned thresholds.
        if pin1 {
            let cur = best.1;
            let (p, fp) = golden_section(|p| value(&RelayRule { p, ..cur }), 0.0, 1.0, 1e-10);
            let cand = (fp, RelayRule { p, ..cur });
            if better(&cand, &best) == Ordering::Less {
                best = cand;
            }
        }
        if pin0 {
            let cur = best.1;
            let (q, fq) = golden_section(|q| value(&RelayRule { q, ..cur }), 0.0, 1.0, 1e-10);
            let cand = (fq, RelayRule { q, ..cur });
            if better(&cand, &best) == Ordering::Less {
                best = cand;
            }
        }
        if before - best.0 < 1e-13 {
            break;
        }
    }
    best
}

/// Minimize the limiting error over shared relays.
pub fn optimize_asymptotic_dd(lfd: &LfdPair, priors: Priors) -> Result<OptimizationReport> {
    let mut trace = Vec::new();
    let value = |r: &RelayRule| asymptotic_dd_value(r, lfd, priors);
    let (v, rule) = optimize_shared(lfd, &value, &mut trace);
    let mut diagnostics = Vec::new();
    if crate::engine::asymptotic_error(&rule, lfd, priors).is_err() {
        diagnostics.push("optimum does not contract; value is the limit of the stage-1 state".into());
    }
    Ok(OptimizationReport {
        objective: Objective::AsymptoticDd,
        best_rule: BestRule::Relay(rule),
        value: v,
        trace,
        restarts: REFINE_STARTS,
        breakdown: None,
        diagnostics,
    })
}

/// Minimize the worst error over all positions `k >= 2`.
pub fn optimize_unknown_sl(lfd: &LfdPair, priors: Priors) -> Result<OptimizationReport> {
    let mut trace = Vec::new();
    let value = |r: &RelayRule| unknown_sl_value(r, lfd, priors).0;
    let (v, rule) = optimize_shared(lfd, &value, &mut trace);
    let (_, breakdown) = unknown_sl_value(&rule, lfd, priors);
    verify_worst_position(&rule, lfd, priors, v)?;
    Ok(OptimizationReport {
        objective: Objective::UnknownSl,
        best_rule: BestRule::Relay(rule),
        value: v,
        trace,
        restarts: REFINE_STARTS,
        breakdown: Some(breakdown),
        diagnostics: Vec::new(),
    })
}

/// Check that no stage in `2..=500` exceeds `max{P_e,2, P_e,∞}`.
pub fn verify_worst_position(rule: &RelayRule, lfd: &LfdPair, priors: Priors, value: f64) -> Result<()> {
    let stages = propagate(&FirstAgentRule::minimax(priors), &[*rule], &[lfd], priors, VERIFY_STAGES)?;
    let sup = stages[1..].iter().map(|s| s.p_e).fold(f64::NEG_INFINITY, f64::max);
    if sup > value + VERIFY_TOL {
        return Err(Error::VerificationFailed(format!(
            "stage error {sup} exceeds max(P_e,2, P_e,inf) = {value} for {rule:?}"
        )));
    }
    Ok(())
}

/// Per-agent deterministic thresholds for a chain of known length.
#[derive(Clone, Debug, PartialEq)]
struct ChainParams {
    /// `[τ, t1_2, t0_2, ..., t1_N, t0_N]`.
    x: Vec<f64>,
}

impl ChainParams {
    fn rules(&self) -> (FirstAgentRule, Vec<RelayRule>) {
        let first = FirstAgentRule {
            threshold: self.x[0],
        };
        let relays = self.x[1..]
            .chunks(2)
            .map(|c| RelayRule {
                t1: c[0],
                t0: c[1],
                p: 0.0,
                q: 0.0,
            })
            .collect();
        (first, relays)
    }
}

fn chain_value(params: &ChainParams, lfds: &[std::sync::Arc<LfdPair>], priors: Priors) -> f64 {
    let (first, relays) = params.rules();
    let n = lfds.len();
    let mut s = first_stage(&first, &lfds[0], priors, Law::LeastFavorable);
    for k in 2..=n {
        s = step(&s, &relays[k - 2], &lfds[k - 1], priors, Law::LeastFavorable);
    }
    s.p_e
}

/// Candidate thresholds for one coordinate: atoms, midpoints, bounds and a
/// log grid.
fn line_candidates(lo: f64, hi: f64, atoms: &[f64]) -> Vec<f64> {
    let mut c: Vec<f64> = log_grid(lo, hi, LINE_POINTS);
    let inside: Vec<f64> = atoms.iter().copied().filter(|&a| a >= lo && a <= hi).collect();
    c.extend(&inside);
    let mut edges = vec![lo];
    edges.extend(&inside);
    edges.push(hi);
    c.extend(edges.windows(2).map(|w| (w[0] * w[1]).sqrt()));
    c.sort_by(f64::total_cmp);
    c.dedup_by(|a, b| same(*a, *b));
    c
}

/// Every deterministic chain when each agent's `l*` takes finitely many
/// values: a threshold only matters through which values it admits, so
/// placing it at each value or above the largest covers all behaviours.
/// `None` if some `l*` is continuous or the count exceeds the limit.
fn enumerate_finite_dd(lfds: &[std::sync::Arc<LfdPair>], priors: Priors) -> Option<(f64, ChainParams, u64)> {
    if !lfds.iter().all(|l| l.model().is_discrete()) {
        return None;
    }
    let places: Vec<Vec<f64>> = lfds
        .iter()
        .map(|l| {
            let mut v = l.lstar_atoms();
            let top = *v.last().expect("discrete models have atoms");
            v.push(2.0 * top);
            v
        })
        .collect();
    let mut count: u64 = places[0].len() as u64;
    for p in &places[1..] {
        let m = p.len() as u64;
        count = count.checked_mul(m * (m + 1) / 2).filter(|&c| c <= EXHAUSTIVE_LIMIT)?;
    }
    let n = lfds.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    // Depth-first over agents, carrying the stage error reached so far.
    fn walk(
        k: usize,
        s: StageError,
        x: &mut Vec<f64>,
        places: &[Vec<f64>],
        lfds: &[std::sync::Arc<LfdPair>],
        priors: Priors,
        best: &mut Option<(f64, Vec<f64>)>,
    ) {
        if k == lfds.len() {
            if best.as_ref().is_none_or(|b| s.p_e < b.0) {
                *best = Some((s.p_e, x.clone()));
            }
            return;
        }
        let pl = &places[k];
        for (i, &t1) in pl.iter().enumerate() {
            for &t0 in &pl[i..] {
                let r = RelayRule { t1, t0, p: 0.0, q: 0.0 };
                let next = step(&s, &r, &lfds[k], priors, Law::LeastFavorable);
                x.push(t1);
                x.push(t0);
                walk(k + 1, next, x, places, lfds, priors, best);
                x.truncate(x.len() - 2);
            }
        }
    }
    for &t in &places[0] {
        let first = FirstAgentRule { threshold: t };
        let s = first_stage(&first, &lfds[0], priors, Law::LeastFavorable);
        let mut x = vec![t];
        walk(1, s, &mut x, &places, &lfds[..n], priors, &mut best);
    }
    best.map(|(v, x)| (v, ChainParams { x }, count))
}

/// Minimize the final-stage error of a chain of known length.
pub fn optimize_finite_dd(config: &ChainConfig, cache: &LfdCache, seed: u64) -> Result<OptimizationReport> {
    config.validate()?;
    let priors = config.priors;
    let lfds = config.lfds(cache)?;
    let n = config.n;
    let tau = priors.pi0() / priors.pi1();
    if n == 1 {
        let params = ChainParams { x: vec![tau] };
        let value = chain_value(&params, &lfds, priors);
        return Ok(OptimizationReport {
            objective: Objective::FiniteDd,
            best_rule: BestRule::Chain {
                first: FirstAgentRule { threshold: tau },
                relays: Vec::new(),
            },
            value,
            trace: vec![TracePoint {
                iterate: params.x,
                value,
            }],
            restarts: 0,
            breakdown: None,
            diagnostics: Vec::new(),
        });
    }
    if let Some((value, best, count)) = enumerate_finite_dd(&lfds, priors) {
        let (first, relays) = best.rules();
        return Ok(OptimizationReport {
            objective: Objective::FiniteDd,
            best_rule: BestRule::Chain { first, relays },
            value,
            trace: vec![TracePoint { iterate: best.x, value }],
            restarts: 0,
            breakdown: None,
            diagnostics: vec![format!("enumerated {count} deterministic chains")],
        });
    }
    // Per-agent ranges; thresholds above the top of the range mean "never".
    let ranges: Vec<(f64, f64)> = lfds
        .iter()
        .map(|l| {
            let (lo, hi) = effective_range(l);
            (lo, 2.0 * hi)
        })
        .collect();
    let atoms: Vec<Vec<f64>> = lfds.iter().map(|l| l.lstar_atoms()).collect();
    let agent_of = |i: usize| if i == 0 { 0 } else { i.div_ceil(2) };

    let mut starts: Vec<ChainParams> = Vec::new();
    let mut diagnostics = Vec::new();
    match social_trajectory(config, cache)?.complete() {
        Ok(tr) => {
            let mut x = vec![tau];
            for (k, r) in tr.rules.iter().enumerate() {
                let (lo, hi) = ranges[k + 1];
                let t1 = r.t1.clamp(lo, hi);
                x.push(t1);
                x.push(r.t0.clamp(t1, hi));
            }
            starts.push(ChainParams { x });
        }
        Err(e) => diagnostics.push(format!("social start skipped: {e}")),
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_STARTS {
        let mut draw = |lo: f64, hi: f64| -> f64 {
            let u: f64 = rng.random();
            (lo.ln() + u * (hi.ln() - lo.ln())).exp()
        };
        let mut x = vec![draw(ranges[0].0, ranges[0].1)];
        for &(lo, hi) in &ranges[1..] {
            let a = draw(lo, hi);
            let b = draw(lo, hi);
            x.push(a.min(b));
            x.push(a.max(b));
        }
        starts.push(ChainParams { x });
    }
    let restarts = starts.len();

    let descend = |mut p: ChainParams| -> (f64, ChainParams, Vec<TracePoint>) {
        let mut v = chain_value(&p, &lfds, priors);
        let mut trace = vec![TracePoint {
            iterate: p.x.clone(),
            value: v,
        }];
        for _sweep in 0..500 {
            let before = v;
            for i in 0..p.x.len() {
                let k = agent_of(i);
                let (mut lo, mut hi) = ranges[k];
                if i > 0 {
                    if i % 2 == 1 {
                        hi = p.x[i + 1];
                    } else {
                        lo = p.x[i - 1];
                    }
                }
                let eval = |t: f64, p: &ChainParams| {
                    let mut q = p.clone();
                    q.x[i] = t;
                    chain_value(&q, &lfds, priors)
                };
                let cands = line_candidates(lo, hi, &atoms[k]);
                let mut best = (v, p.x[i]);
                let mut best_idx = None;
                for (j, &t) in cands.iter().enumerate() {
                    let fv = eval(t, &p);
                    if fv < best.0 {
                        best = (fv, t);
                        best_idx = Some(j);
                    }
                }
                // Polish between the neighbouring candidates.
                if let Some(j) = best_idx {
                    let a = cands[j.saturating_sub(1)];
                    let b = cands[(j + 1).min(cands.len() - 1)];
                    if b > a {
                        let (lt, fv) = golden_section(|s| eval(s.exp(), &p), a.ln(), b.ln(), 1e-12);
                        if fv < best.0 {
                            best = (fv, lt.exp().clamp(lo, hi));
                        }
                    }
                }
                if best.0 < v {
                    p.x[i] = best.1;
                    v = chain_value(&p, &lfds, priors);
                }
            }
            // Joint moves of each relay's pair: with `t1 <= t0` coupling the
            // coordinates, single-coordinate steps can stall.
            for k in 1..n {
                let (i1, i0) = (2 * k - 1, 2 * k);
                let (lo, hi) = ranges[k];
                let cands = line_candidates(lo, hi, &atoms[k]);
                let mut best = (v, p.x[i1], p.x[i0]);
                let mut q = p.clone();
                for (a_idx, &a) in cands.iter().enumerate() {
                    for &b in &cands[a_idx..] {
                        q.x[i1] = a;
                        q.x[i0] = b;
                        let fv = chain_value(&q, &lfds, priors);
                        if fv < best.0 {
                            best = (fv, a, b);
                        }
                    }
                }
                if best.0 < v {
                    p.x[i1] = best.1;
                    p.x[i0] = best.2;
                    v = best.0;
                }
            }
            trace.push(TracePoint {
                iterate: p.x.clone(),
                value: v,
            });
            if before - v < SWEEP_TOL {
                break;
            }
        }
        (v, p, trace)
    };

    let results: Vec<(f64, ChainParams, Vec<TracePoint>)> = starts.into_par_iter().map(descend).collect();
    let (value, best, trace) = results
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| cmp_vec(&a.1.x, &b.1.x)))
        .expect("at least one start");
    let (first, relays) = best.rules();
    Ok(OptimizationReport {
        objective: Objective::FiniteDd,
        best_rule: BestRule::Chain { first, relays },
        value,
        trace,
        restarts,
        breakdown: None,
        diagnostics,
    })
}

/// Objective value of a report's rule, recomputed from scratch.
pub fn reevaluate(report: &OptimizationReport, lfds: &[std::sync::Arc<LfdPair>], priors: Priors) -> Result<f64> {
    match (&report.best_rule, report.objective) {
        (BestRule::Relay(r), Objective::AsymptoticDd) => Ok(asymptotic_dd_value(r, &lfds[0], priors)),
        (BestRule::Relay(r), Objective::UnknownSl) => Ok(unknown_sl_value(r, &lfds[0], priors).0),
        (BestRule::Chain { first, relays }, Objective::FiniteDd) => {
            let s = propagate(first, relays, lfds, priors, lfds.len())?;
            Ok(s.last().expect("non-empty").p_e)
        }
        _ => Err(invalid("report", "rule shape does not match the objective")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EpsSchedule;
    use crate::model::NominalPair;
    use std::sync::Arc;

    fn expo(eps: f64) -> LfdPair {
        LfdPair::solve(NominalPair::exponential(1.0, 2.0).unwrap(), eps, eps).unwrap()
    }

    #[test]
    fn finite_dd_single_agent() {
        let m = NominalPair::exponential(1.0, 2.0).unwrap();
        let cache = LfdCache::new(m.clone());
        let cfg = ChainConfig::new(Priors::uniform(), 1, EpsSchedule::constant(0.01), m).unwrap();
        let r = optimize_finite_dd(&cfg, &cache, 7).unwrap();
        assert!((r.value - 0.38125).abs() < 1e-9);
        match r.best_rule {
            BestRule::Chain { first, .. } => assert_eq!(first.threshold, 1.0),
            _ => panic!("wrong shape"),
        }
    }

    #[test]
    fn finite_dd_improves_with_length() {
        let m = NominalPair::exponential(1.0, 2.0).unwrap();
        let cache = LfdCache::new(m.clone());
        let mut prev = 1.0;
        for n in 1..=4 {
            let cfg = ChainConfig::new(Priors::uniform(), n, EpsSchedule::constant(0.01), m.clone()).unwrap();
            let r = optimize_finite_dd(&cfg, &cache, 7).unwrap();
            let lfds = cfg.lfds(&cache).unwrap();
            assert!((reevaluate(&r, &lfds, cfg.priors).unwrap() - r.value).abs() < 1e-12);
            assert!(r.value <= prev + 1e-12, "n {n}: {} > {prev}", r.value);
            prev = r.value;
        }
    }

    #[test]
    fn shared_optimizers_are_ordered() {
        let l = expo(0.01);
        let pr = Priors::uniform();
        let dd = optimize_asymptotic_dd(&l, pr).unwrap();
        let sl = optimize_unknown_sl(&l, pr).unwrap();
        assert!(dd.value <= sl.value + 1e-12);
        assert!(sl.value <= 0.38125 + 1e-12);
        let lfds = vec![Arc::new(l)];
        assert!((reevaluate(&dd, &lfds, pr).unwrap() - dd.value).abs() < 1e-12);
        assert!((reevaluate(&sl, &lfds, pr).unwrap() - sl.value).abs() < 1e-12);
    }

    #[test]
    fn chain_limit_pass_through_is_stage_one() {
        let l = expo(0.01);
        let s = chain_limit(&RelayRule::pass_through(), &l, Priors::uniform()).unwrap();
        assert!((s.p_e - 0.38125).abs() < 1e-12);
    }

    #[test]
    fn effective_range_is_finite() {
        for eps in [0.0, 0.01] {
            let (lo, hi) = effective_range(&expo(eps));
            assert!(lo > 0.0 && hi.is_finite() && hi > lo);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(12))]
        #[test]
        fn optimizers_dominance_and_reevaluation(m1 in 1.3f64..4.0, eps in 0.0f64..0.08) {
            let l = LfdPair::solve(NominalPair::exponential(1.0, m1).unwrap(), eps, eps).unwrap();
            let pr = Priors::uniform();
            let dd = optimize_asymptotic_dd(&l, pr).unwrap();
            let sl = optimize_unknown_sl(&l, pr).unwrap();
            let single = first_stage(&FirstAgentRule::minimax(pr), &l, pr, Law::LeastFavorable).p_e;
            proptest::prop_assert!(dd.value <= sl.value + 1e-12);
            proptest::prop_assert!(sl.value <= single + 1e-12);
            let lfds = vec![Arc::new(l.clone())];
            proptest::prop_assert!((reevaluate(&dd, &lfds, pr).unwrap() - dd.value).abs() < 1e-12);
            proptest::prop_assert!((reevaluate(&sl, &lfds, pr).unwrap() - sl.value).abs() < 1e-12);
        }

        #[test]
        fn finite_dd_non_increasing_in_n(p in 0.55f64..0.9, r in 0.55f64..0.9, eps in 0.0f64..0.1) {
            let m = NominalPair::discrete(vec![0.0, 1.0, 2.0], vec![p, (1.0 - p) / 2.0, (1.0 - p) / 2.0],
                                          vec![(1.0 - r) / 2.0, (1.0 - r) / 2.0, r]).unwrap();
            if LfdPair::solve(m.clone(), eps, eps).is_err() {
                return Ok(());
            }
            let cache = LfdCache::new(m.clone());
            let mut prev = f64::INFINITY;
            for n in 1..=4 {
                let cfg = ChainConfig::new(Priors::uniform(), n, EpsSchedule::constant(eps), m.clone()).unwrap();
                let v = optimize_finite_dd(&cfg, &cache, 1).unwrap().value;
                proptest::prop_assert!(v <= prev + 1e-12, "n = {}: {} > {}", n, v, prev);
                prev = v;
            }
        }
    }
}
