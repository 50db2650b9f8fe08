//! Monte Carlo validation of tandem chains.
//!
//! Observations of agent `k` under `H_i` are drawn from the class member
//! `(1-ε_i,k) P_i* + ε_i,k R_i,k`; the chain then runs on `l*` exactly as the
//! engine assumes. Every `(block, agent, hypothesis)` triple owns a ChaCha
//! stream derived from the master seed, so results do not depend on thread
//! scheduling and adding agents leaves earlier agents' draws unchanged.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::propagate;
use crate::error::{invalid, Error, Result};
use crate::lfd::{Law, LfdPair, LfdSampler};
use crate::model::{Hypothesis, ModelKind, NominalPair};
use crate::optimize::effective_range;
use crate::rules::{FirstAgentRule, Priors, RelayRule};

/// Replicates per RNG block.
pub const BLOCK: usize = 1 << 16;
/// Width of the dominance band in standard errors.
pub const DOMINANCE_SIGMAS: f64 = 4.0;
/// Allowed slack in the closed-form ordering checks.
pub const ORDERING_TOL: f64 = 1e-9;

/// Contaminating distribution `R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Contamination {
    /// No contamination: observations follow the nominal.
    None,
    /// The class member is the least-favorable distribution itself.
    LeastFavorable,
    PointMass { y: f64 },
    ShiftedNominal { shift: f64 },
    /// `R` is the other hypothesis' nominal.
    SwapNominal,
    TwoPoint { y_a: f64, y_b: f64, w: f64 },
}

/// A contaminating distribution attached to one hypothesis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    #[serde(flatten)]
    pub kind: Contamination,
    pub applies_to: Hypothesis,
}

/// Contamination under each hypothesis for one agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContaminationPair {
    pub h0: Contamination,
    pub h1: Contamination,
}

impl ContaminationPair {
    pub fn none() -> Self {
        ContaminationPair {
            h0: Contamination::None,
            h1: Contamination::None,
        }
    }

    pub fn least_favorable() -> Self {
        ContaminationPair {
            h0: Contamination::LeastFavorable,
            h1: Contamination::LeastFavorable,
        }
    }

    pub fn get(&self, h: Hypothesis) -> &Contamination {
        match h {
            Hypothesis::H0 => &self.h0,
            Hypothesis::H1 => &self.h1,
        }
    }
}

impl From<ContaminationSpec> for ContaminationPair {
    fn from(s: ContaminationSpec) -> Self {
        match s.applies_to {
            Hypothesis::H0 => ContaminationPair {
                h0: s.kind,
                h1: Contamination::None,
            },
            Hypothesis::H1 => ContaminationPair {
                h0: Contamination::None,
                h1: s.kind,
            },
        }
    }
}

impl Contamination {
    /// `R` must live inside the observation space of the model.
    pub fn validate(&self, model: &NominalPair) -> Result<()> {
        let check = |y: f64| {
            if model.in_support(y) {
                Ok(())
            } else {
                Err(Error::OutsideSupport { y })
            }
        };
        match self {
            Contamination::None | Contamination::LeastFavorable | Contamination::SwapNominal => Ok(()),
            Contamination::PointMass { y } => check(*y),
            Contamination::TwoPoint { y_a, y_b, w } => {
                if !(0.0..=1.0).contains(w) {
                    return Err(invalid("w", format!("{w} is not in [0, 1]")));
                }
                check(*y_a)?;
                check(*y_b)
            }
            Contamination::ShiftedNominal { shift } => match model.kind() {
                ModelKind::GaussianShift { .. } if shift.is_finite() => Ok(()),
                ModelKind::ExponentialMeans { .. } if *shift >= 0.0 && shift.is_finite() => Ok(()),
                ModelKind::Discrete { support, .. } => support.iter().try_for_each(|s| check(s + shift)),
                _ => Err(invalid("shift", format!("{shift} moves mass outside the support"))),
            },
        }
    }
}

/// Draws `l*` for one agent under one hypothesis.
struct AgentDraw<'a> {
    lfd: &'a LfdPair,
    h: Hypothesis,
    eps: f64,
    r: &'a Contamination,
    lf: Option<LfdSampler<'a>>,
}

impl AgentDraw<'_> {
    fn nominal<R: Rng + ?Sized>(&self, h: Hypothesis, rng: &mut R) -> f64 {
        self.lfd.model().sample_nominal(h, rng)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let model = self.lfd.model();
        if let Some(lf) = &self.lf {
            return lf.sample(rng);
        }
        // The selection coin is drawn even without contamination so that
        // every menu entry consumes the stream identically.
        let u: f64 = rng.random();
        let y = if u >= self.eps {
            self.nominal(self.h, rng)
        } else {
            match self.r {
                Contamination::None => self.nominal(self.h, rng),
                Contamination::PointMass { y } => *y,
                Contamination::ShiftedNominal { shift } => self.nominal(self.h, rng) + shift,
                Contamination::SwapNominal => self.nominal(self.h.other(), rng),
                Contamination::TwoPoint { y_a, y_b, w } => {
                    let v: f64 = rng.random();
                    if v < *w {
                        *y_a
                    } else {
                        *y_b
                    }
                }
                Contamination::LeastFavorable => unreachable!("handled by the sampler"),
            }
        };
        self.lfd.clip(model.lr_value(y).expect("validated support"))
    }
}

/// Per-stage Monte Carlo estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimStage {
    pub k: usize,
    pub p_f: f64,
    pub p_m: f64,
    pub p_e: f64,
    pub se_f: f64,
    pub se_m: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub stages: Vec<SimStage>,
    /// Replicates per hypothesis.
    pub n_samples: usize,
    pub seed: u64,
}

fn stream_id(block: usize, agent: usize, h: Hypothesis) -> u64 {
    ((block as u64) << 32) | ((agent as u64) << 1) | h.index() as u64
}

fn pick<T>(items: &[T], i: usize) -> &T {
    if items.len() == 1 {
        &items[0]
    } else {
        &items[i]
    }
}

/// Simulate the chain with `n_samples` replicates under each hypothesis.
///
/// `relays`, `lfds` and `contamination` each hold one shared entry or one
/// entry per agent (relays: per agent `2..=n`).
#[allow(clippy::too_many_arguments)]
pub fn simulate_chain(
    first: &FirstAgentRule,
    relays: &[RelayRule],
    lfds: &[LfdPair],
    contamination: &[ContaminationPair],
    priors: Priors,
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<SimResult> {
    if n_samples == 0 {
        return Err(invalid("n_samples", "at least one replicate is required"));
    }
    if n == 0 {
        return Err(invalid("n", "chain length must be at least 1"));
    }
    let shape_ok = |len: usize, full: usize| len == 1 || len == full;
    if lfds.is_empty() || !shape_ok(lfds.len(), n) {
        return Err(invalid("lfds", format!("expected 1 or {n} pairs")));
    }
    if contamination.is_empty() || !shape_ok(contamination.len(), n) {
        return Err(invalid("contamination", format!("expected 1 or {n} pairs")));
    }
    if n > 1 && !shape_ok(relays.len(), n - 1) {
        return Err(invalid("relays", format!("expected 1 or {} rules", n - 1)));
    }
    for c in contamination {
        c.h0.validate(lfds[0].model())?;
        c.h1.validate(lfds[0].model())?;
    }
    let blocks = n_samples.div_ceil(BLOCK);
    // ones[h][k]: replicates whose agent k+1 decided 1 under h.
    let tallies: Vec<[Vec<u64>; 2]> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let reps = BLOCK.min(n_samples - b * BLOCK);
            let mut out = [vec![0u64; n], vec![0u64; n]];
            for h in Hypothesis::BOTH {
                let draws: Vec<AgentDraw> = (0..n)
                    .map(|k| {
                        let lfd = pick(lfds, k);
                        let r = pick(contamination, k).get(h);
                        AgentDraw {
                            lfd,
                            h,
                            eps: lfd.epsilon(h),
                            r,
                            lf: matches!(r, Contamination::LeastFavorable).then(|| lfd.sampler(h)),
                        }
                    })
                    .collect();
                let mut rngs: Vec<ChaCha8Rng> = (0..n)
                    .map(|k| {
                        let mut r = ChaCha8Rng::seed_from_u64(seed);
                        r.set_stream(stream_id(b, k, h));
                        r
                    })
                    .collect();
                let counts = &mut out[h.index()];
                for _ in 0..reps {
                    let l = draws[0].draw(&mut rngs[0]);
                    let mut u = first.decide(l);
                    counts[0] += u as u64;
                    for k in 1..n {
                        let rng = &mut rngs[k];
                        let l = draws[k].draw(rng);
                        let coin: f64 = rng.random();
                        u = pick(relays, k - 1).decide(l, u, coin);
                        counts[k] += u as u64;
                    }
                }
            }
            out
        })
        .collect();
    let nf = n_samples as f64;
    let stages = (0..n)
        .map(|k| {
            let ones0: u64 = tallies.iter().map(|t| t[0][k]).sum();
            let ones1: u64 = tallies.iter().map(|t| t[1][k]).sum();
            let p_f = ones0 as f64 / nf;
            let p_m = 1.0 - ones1 as f64 / nf;
            let se_f = (p_f * (1.0 - p_f) / nf).sqrt();
            let se_m = (p_m * (1.0 - p_m) / nf).sqrt();
            let (pi0, pi1) = (priors.pi0(), priors.pi1());
            SimStage {
                k: k + 1,
                p_f,
                p_m,
                p_e: priors.bayes_error(p_f, p_m),
                se_f,
                se_m,
                se: (pi0 * pi0 * se_f * se_f + pi1 * pi1 * se_m * se_m).sqrt(),
            }
        })
        .collect();
    Ok(SimResult {
        stages,
        n_samples,
        seed,
    })
}

/// Observation grid used for point-mass adversaries.
pub fn observation_grid(lfd: &LfdPair, n_grid: usize) -> Vec<f64> {
    let model = lfd.model();
    match model.kind() {
        ModelKind::Discrete { support, .. } => support.clone(),
        ModelKind::ExponentialMeans { m0, m1 } => {
            let top = 8.0 * m0.max(*m1);
            (0..n_grid).map(|i| top * i as f64 / (n_grid - 1).max(1) as f64).collect()
        }
        ModelKind::GaussianShift { mu0, mu1, sigma } => {
            let (a, b) = (mu0.min(*mu1) - 4.0 * sigma, mu0.max(*mu1) + 4.0 * sigma);
            (0..n_grid).map(|i| a + (b - a) * i as f64 / (n_grid - 1).max(1) as f64).collect()
        }
    }
}

/// A menu of at least `budget` contamination pairs: point masses under each
/// hypothesis and under both, shifted and swapped nominals and two-point
/// mixtures.
pub fn default_menu(lfd: &LfdPair, budget: usize) -> Vec<ContaminationPair> {
    let mut menu = vec![
        ContaminationPair::none(),
        ContaminationPair::least_favorable(),
        ContaminationPair {
            h0: Contamination::SwapNominal,
            h1: Contamination::SwapNominal,
        },
    ];
    let n_grid = (budget / 4).max(4);
    let ys = observation_grid(lfd, n_grid);
    for &y in &ys {
        menu.push(ContaminationPair {
            h0: Contamination::PointMass { y },
            h1: Contamination::None,
        });
        menu.push(ContaminationPair {
            h0: Contamination::None,
            h1: Contamination::PointMass { y },
        });
    }
    // Pair the extreme observations against each other.
    for i in 0..ys.len() {
        let j = ys.len() - 1 - i;
        menu.push(ContaminationPair {
            h0: Contamination::PointMass { y: ys[j] },
            h1: Contamination::PointMass { y: ys[i] },
        });
    }
    if !matches!(lfd.model().kind(), ModelKind::Discrete { .. }) {
        for s in [0.5, 1.0, 2.0, 4.0] {
            menu.push(ContaminationPair {
                h0: Contamination::ShiftedNominal { shift: s },
                h1: Contamination::None,
            });
        }
    }
    let (y_lo, y_hi) = (ys[0], ys[ys.len() - 1]);
    let mut w = 0.0;
    while menu.len() < budget {
        menu.push(ContaminationPair {
            h0: Contamination::TwoPoint { y_a: y_hi, y_b: y_lo, w },
            h1: Contamination::TwoPoint { y_a: y_lo, y_b: y_hi, w },
        });
        w = (w + 0.1) % 1.0;
    }
    menu
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialReport {
    /// Largest simulated final-stage `P_e` over the menu.
    pub worst_found: f64,
    pub argmax: ContaminationPair,
    /// Exact final-stage `P_e` under the least-favorable pair.
    pub lfd_bound: f64,
    /// Largest `(simulated - exact) / se` over candidates, stages and both
    /// error types.
    pub max_z: f64,
    pub candidates: usize,
}

/// Search a contamination menu for a member beating the least-favorable
/// chain error. Any stage-wise excess beyond `4 se`, for either error type,
/// is reported as an error.
#[allow(clippy::too_many_arguments)]
pub fn adversarial_search(
    first: &FirstAgentRule,
    relays: &[RelayRule],
    lfd: &LfdPair,
    priors: Priors,
    n: usize,
    menu: &[ContaminationPair],
    budget: usize,
    n_samples: usize,
    seed: u64,
) -> Result<AdversarialReport> {
    let exact = propagate(first, relays, &[lfd], priors, n)?;
    let mut worst: Option<(f64, ContaminationPair)> = None;
    let mut max_z = f64::NEG_INFINITY;
    let candidates = menu.iter().take(budget);
    let mut count = 0;
    for (i, c) in candidates.enumerate() {
        count += 1;
        let sim = simulate_chain(
            first,
            relays,
            std::slice::from_ref(lfd),
            std::slice::from_ref(c),
            priors,
            n,
            n_samples,
            seed.wrapping_add(i as u64),
        )?;
        for (s, e) in sim.stages.iter().zip(&exact) {
            for (quantity, sim_v, se, bound) in [("P_F", s.p_f, s.se_f, e.p_f), ("P_M", s.p_m, s.se_m, e.p_m)] {
                // A zero standard error at the boundary still allows one
                // replicate of slack.
                let se = se.max(1.0 / n_samples as f64);
                let z = (sim_v - bound) / se;
                max_z = max_z.max(z);
                if sim_v > bound + DOMINANCE_SIGMAS * se {
                    return Err(Error::DominanceViolation {
                        k: s.k,
                        quantity,
                        simulated: sim_v,
                        bound,
                        se,
                    });
                }
            }
        }
        let last = sim.stages.last().expect("n >= 1").p_e;
        if worst.as_ref().is_none_or(|w| last > w.0) {
            worst = Some((last, c.clone()));
        }
    }
    let (worst_found, argmax) = worst.ok_or_else(|| invalid("menu", "no candidates"))?;
    Ok(AdversarialReport {
        worst_found,
        argmax,
        lfd_bound: exact.last().expect("n >= 1").p_e,
        max_z,
        candidates: count,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub max_violation: f64,
    pub grid: Vec<f64>,
}

fn t_grid(lfd: &LfdPair, n_grid: usize) -> Vec<f64> {
    let (lo, hi) = effective_range(lfd);
    (0..n_grid)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n_grid - 1) as f64).exp())
        .collect()
}

/// `P0*(l* > t) <= Q0(l* > t) <= Q1(l* > t) <= P1*(l* > t)` on a grid over
/// the range of `l*`.
pub fn ordering_check(lfd: &LfdPair, n_grid: usize) -> Result<OrderingReport> {
    use crate::lfd::LrEvent::Gt;
    if n_grid < 2 {
        return Err(invalid("n_grid", "at least two grid points are required"));
    }
    let grid = t_grid(lfd, n_grid);
    let mut max_violation: f64 = 0.0;
    for &t in &grid {
        let chain = [
            ("P0", lfd.prob(Law::Nominal, Hypothesis::H0, Gt, t)),
            ("Q0", lfd.prob(Law::LeastFavorable, Hypothesis::H0, Gt, t)),
            ("Q1", lfd.prob(Law::LeastFavorable, Hypothesis::H1, Gt, t)),
            ("P1", lfd.prob(Law::Nominal, Hypothesis::H1, Gt, t)),
        ];
        for w in chain.windows(2) {
            let v = w[0].1 - w[1].1;
            max_violation = max_violation.max(v);
            if v > ORDERING_TOL {
                return Err(Error::OrderingViolation {
                    t,
                    detail: format!("{}(l* > t) = {} exceeds {}(l* > t) = {}", w[0].0, w[0].1, w[1].0, w[1].1),
                    violation: v,
                });
            }
        }
    }
    Ok(OrderingReport { max_violation, grid })
}

/// The two tail bounds linking `Q0` and `Q1` through `dQ1 = l* dQ0`, in both
/// weak and strict form:
///
/// ```text
/// Q1(l* <= t) <= t Q0(l* <= t) - t/2 Q0(l* <= t/2)
/// Q0(l* >= t) <= Q1(l* >= t)/t - Q1(l* >= 2t)/(2t)
/// ```
pub fn tail_bound_check(lfd: &LfdPair, n_grid: usize) -> Result<OrderingReport> {
    use crate::lfd::LrEvent::{Ge, Gt, Le, Lt};
    if n_grid < 2 {
        return Err(invalid("n_grid", "at least two grid points are required"));
    }
    let q = |h, e, t| lfd.prob(Law::LeastFavorable, h, e, t);
    let (h0, h1) = (Hypothesis::H0, Hypothesis::H1);
    let grid = t_grid(lfd, n_grid);
    let mut max_violation: f64 = 0.0;
    for &t in &grid {
        for (below, above) in [(Le, Ge), (Lt, Gt)] {
            let first = q(h1, below, t) - (t * q(h0, below, t) - 0.5 * t * q(h0, below, 0.5 * t));
            let second = q(h0, above, t) - (q(h1, above, t) / t - q(h1, above, 2.0 * t) / (2.0 * t));
            for (name, v) in [("lower-tail bound", first), ("upper-tail bound", second)] {
                max_violation = max_violation.max(v);
                if v > ORDERING_TOL {
                    return Err(Error::OrderingViolation {
                        t,
                        detail: name.to_string(),
                        violation: v,
                    });
                }
            }
        }
    }
    Ok(OrderingReport { max_violation, grid })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expo(eps: f64) -> LfdPair {
        LfdPair::solve(NominalPair::exponential(1.0, 2.0).unwrap(), eps, eps).unwrap()
    }

    fn coin(eps: f64) -> LfdPair {
        let m = NominalPair::discrete(vec![0.0, 1.0], vec![0.8, 0.2], vec![0.2, 0.8]).unwrap();
        LfdPair::solve(m, eps, eps).unwrap()
    }

    fn phi_a(l: &LfdPair) -> RelayRule {
        RelayRule::new(l.b * l.c_lo, 5.0f64.min(l.b * l.c_hi), 1.0, 0.0).unwrap()
    }

    #[test]
    fn stage_one_without_contamination() {
        let l = expo(0.0);
        let pr = Priors::uniform();
        let first = FirstAgentRule::minimax(pr);
        let r = simulate_chain(&first, &[], &[l], &[ContaminationPair::none()], pr, 1, 400_000, 3).unwrap();
        let s = r.stages[0];
        assert!((s.p_e - 0.375).abs() < 4.0 * s.se, "{s:?}");
    }

    #[test]
    fn seeded_runs_are_identical() {
        let l = expo(0.01);
        let pr = Priors::uniform();
        let first = FirstAgentRule::minimax(pr);
        let run = || {
            simulate_chain(&first, &[phi_a(&l)], std::slice::from_ref(&l), &[ContaminationPair::least_favorable()], pr, 5, 70_000, 11)
                .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn adding_agents_keeps_earlier_draws() {
        let l = expo(0.01);
        let pr = Priors::uniform();
        let first = FirstAgentRule::minimax(pr);
        let c = [ContaminationPair::least_favorable()];
        let a = simulate_chain(&first, &[phi_a(&l)], std::slice::from_ref(&l), &c, pr, 3, 10_000, 5).unwrap();
        let b = simulate_chain(&first, &[phi_a(&l)], std::slice::from_ref(&l), &c, pr, 6, 10_000, 5).unwrap();
        assert_eq!(a.stages[..], b.stages[..3]);
    }

    #[test]
    fn nominal_law_matches_nominal_propagation() {
        let l = expo(0.01);
        let pr = Priors::uniform();
        let first = FirstAgentRule::minimax(pr);
        let rule = phi_a(&l);
        let exact = crate::engine::propagate_under(&first, &[rule], &[&l], pr, 8, Law::Nominal).unwrap();
        let sim = simulate_chain(&first, &[rule], std::slice::from_ref(&l), &[ContaminationPair::none()], pr, 8, 200_000, 9).unwrap();
        for (s, e) in sim.stages.iter().zip(&exact) {
            assert!((s.p_e - e.p_e).abs() <= 4.0 * s.se, "{s:?} vs {e:?}");
        }
    }

    #[test]
    fn zero_epsilon_menu_is_inert() {
        let l = expo(0.0);
        let pr = Priors::uniform();
        let first = FirstAgentRule::minimax(pr);
        let rule = RelayRule::new(0.7, 3.0, 0.0, 0.0).unwrap();
        let menu = default_menu(&l, 12);
        let results: Vec<SimResult> = menu
            .iter()
            .filter(|c| !matches!(c.h0, Contamination::LeastFavorable))
            .map(|c| simulate_chain(&first, &[rule], std::slice::from_ref(&l), std::slice::from_ref(c), pr, 4, 5_000, 1).unwrap())
            .collect();
        for r in &results[1..] {
            assert_eq!(r.stages, results[0].stages);
        }
    }

    #[test]
    fn ordering_holds_for_all_families() {
        let models = [
            NominalPair::exponential(1.0, 2.0).unwrap(),
            NominalPair::gaussian(0.0, 1.0, 1.0).unwrap(),
            NominalPair::discrete(vec![0.0, 1.0], vec![0.8, 0.2], vec![0.2, 0.8]).unwrap(),
        ];
        for m in models {
            for eps in [0.0, 0.01, 0.1] {
                let l = LfdPair::solve(m.clone(), eps, eps).unwrap();
                let o = ordering_check(&l, 100).unwrap();
                assert!(o.max_violation <= ORDERING_TOL);
                let t = tail_bound_check(&l, 100).unwrap();
                assert!(t.max_violation <= ORDERING_TOL);
            }
        }
    }

    #[test]
    fn ordering_example_at_one() {
        use crate::lfd::LrEvent::Gt;
        let l = expo(0.01);
        let p0 = l.prob(Law::Nominal, Hypothesis::H0, Gt, 1.0);
        let q0 = l.prob(Law::LeastFavorable, Hypothesis::H0, Gt, 1.0);
        assert!((p0 - 0.25).abs() < 1e-15);
        assert!((q0 - 0.2575).abs() < 1e-12);
    }

    #[test]
    fn discrete_small_adversarial_search() {
        let l = coin(0.1);
        let pr = Priors::uniform();
        let first = FirstAgentRule::minimax(pr);
        let rule = RelayRule::new(1.0, 1.0, 0.0, 0.0).unwrap();
        let menu = default_menu(&l, 20);
        let rep = adversarial_search(&first, &[rule], &l, pr, 3, &menu, 20, 20_000, 4).unwrap();
        assert!(rep.worst_found <= rep.lfd_bound + 0.02);
    }

    #[test]
    fn invalid_contamination_rejected() {
        let m = NominalPair::exponential(1.0, 2.0).unwrap();
        assert!(Contamination::PointMass { y: -1.0 }.validate(&m).is_err());
        assert!(Contamination::ShiftedNominal { shift: -0.5 }.validate(&m).is_err());
        assert!(Contamination::TwoPoint { y_a: 1.0, y_b: 2.0, w: 1.5 }.validate(&m).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(16))]
        #[test]
        fn ordering_over_random_classes(kind in 0u8..2, a in 0.0f64..1.0, e0 in 0.0f64..0.08, e1 in 0.0f64..0.08) {
            let m = if kind == 0 {
                NominalPair::exponential(1.0, 1.3 + 3.0 * a).unwrap()
            } else {
                NominalPair::gaussian(0.0, 0.5 + 2.0 * a, 1.0).unwrap()
            };
            let l = LfdPair::solve(m, e0, e1).unwrap();
            proptest::prop_assert!(ordering_check(&l, 50).is_ok());
            proptest::prop_assert!(tail_bound_check(&l, 50).is_ok());
        }

        #[test]
        fn seeded_and_close_to_exact(t1 in 0.6f64..2.0, w in 0.0f64..1.0, p in 0.0f64..=1.0, seed in proptest::prelude::any::<u64>()) {
            let l = expo(0.01);
            let pr = Priors::uniform();
            let first = FirstAgentRule::minimax(pr);
            let rule = RelayRule::new(t1, t1 + w * 3.0, p, 0.0).unwrap();
            let c = [ContaminationPair::least_favorable()];
            let a = simulate_chain(&first, &[rule], std::slice::from_ref(&l), &c, pr, 6, 20_000, seed).unwrap();
            let b = simulate_chain(&first, &[rule], std::slice::from_ref(&l), &c, pr, 6, 20_000, seed).unwrap();
            proptest::prop_assert_eq!(&a, &b);
            let exact = propagate(&first, &[rule], &[&l], pr, 6).unwrap();
            for (s, e) in a.stages.iter().zip(&exact) {
                proptest::prop_assert!((s.p_e - e.p_e).abs() <= 4.0 * s.se, "{:?} vs {:?}", s, e);
            }
        }
    }
}
