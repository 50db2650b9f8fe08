//! Huber least-favorable pairs for ε-contamination classes.
//!
//! For `P_i = {(1-ε_i) P_i* + ε_i R}` the least-favorable densities are
//!
//! ```text
//! q0 = (1-ε0) p0*            if L <  c''      q1 = (1-ε1) p1*        if L >  c'
//!      (1-ε0) p1* / c''      if L >= c''           (1-ε1) c' p0*     if L <= c'
//! ```
//!
//! so that `l* = q1/q0 = b · clamp(L, c', c'')` with `b = (1-ε1)/(1-ε0)`.
//! The breakpoints solve the two normalization equations
//!
//! ```text
//! F0(c) = P0*(L < c) + P1*(L >= c) / c = 1/(1-ε0)
//! F1(c) = P1*(L > c) + c · P0*(L <= c) = 1/(1-ε1)
//! ```
//!
//! `F0` is continuous and strictly decreasing on the essential range of `L`
//! and `F1` is continuous and strictly increasing above its minimum, also for
//! atomic `L`, so each has a unique root found by bisection.

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{same, Hypothesis, LrTail, NominalPair};

const BISECT_MAX_ITER: usize = 2_000;
const BRACKET_MAX_STEPS: usize = 2_000;

/// A nominal pair together with its two contamination levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySpec {
    pub model: NominalPair,
    pub eps0: f64,
    pub eps1: f64,
}

impl UncertaintySpec {
    pub fn new(model: NominalPair, eps0: f64, eps1: f64) -> Result<Self> {
        for (name, e) in [("eps0", eps0), ("eps1", eps1)] {
            if !(0.0..1.0).contains(&e) {
                return Err(crate::error::invalid(name, format!("{e} is not in [0, 1)")));
            }
        }
        Ok(UncertaintySpec { model, eps0, eps1 })
    }
}

/// Events on the clipped likelihood ratio `l*` relative to a threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LrEvent {
    Gt,
    Ge,
    Eq,
    Lt,
    Le,
}

/// Which law the observation follows when evaluating an `l*` event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Law {
    /// The least-favorable member `Q_i` of the class.
    LeastFavorable,
    /// The nominal `P_i*`, pushed through the same clipping.
    Nominal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Pos {
    Below,
    AtLo,
    Interior,
    AtHi,
    Above,
}

/// The solved least-favorable pair.
#[derive(Clone, Debug, PartialEq)]
pub struct LfdPair {
    pub spec: UncertaintySpec,
    /// `c'`; zero iff `eps1 = 0`.
    pub c_lo: f64,
    /// `c''`; infinite iff `eps0 = 0`.
    pub c_hi: f64,
    pub b: f64,
    /// Normalization residuals `(1-ε_i) F_i(c) - 1` at the solved breakpoints.
    pub residuals: [f64; 2],
}

fn f0(model: &NominalPair, c: f64) -> f64 {
    let t0 = model.lr_tail(Hypothesis::H0, c);
    let t1 = model.lr_tail(Hypothesis::H1, c);
    t0.below() + t1.at_least() / c
}

fn f1(model: &NominalPair, c: f64) -> f64 {
    let t0 = model.lr_tail(Hypothesis::H0, c);
    let t1 = model.lr_tail(Hypothesis::H1, c);
    t1.above + c * t0.at_most()
}

/// Bisection on `[lo, hi]` for an increasing (`rising`) or decreasing
/// function crossing `target`. Runs until the bracket stops shrinking.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, target: f64, rising: bool) -> f64 {
    for _ in 0..BISECT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let above_target = f(mid) > target;
        if above_target != rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Pick whichever end has the smaller residual.
    if (f(lo) - target).abs() <= (f(hi) - target).abs() {
        lo
    } else {
        hi
    }
}

fn solve_c_hi(model: &NominalPair, eps0: f64) -> Result<f64> {
    if eps0 == 0.0 {
        return Ok(f64::INFINITY);
    }
    let target = 1.0 / (1.0 - eps0);
    let (lmin, lmax) = model.lr_range();
    // Lower end: F0 must exceed the target there.
    let lo = if lmin > 0.0 {
        if f0(model, lmin) <= target {
            return Err(Error::NotDisjoint {
                c_lo: lmin,
                c_hi: lmin,
            });
        }
        lmin
    } else {
        let mut lo = 1.0;
        let mut steps = 0;
        while f0(model, lo) <= target {
            lo *= 0.5;
            steps += 1;
            if steps > BRACKET_MAX_STEPS || lo == 0.0 {
                return Err(Error::NoBracket { which: "c''" });
            }
        }
        lo
    };
    let hi = if lmax.is_finite() {
        lmax
    } else {
        let mut hi = lo.max(1.0) * 2.0;
        let mut steps = 0;
        while f0(model, hi) > target {
            hi *= 2.0;
            steps += 1;
            if steps > BRACKET_MAX_STEPS || !hi.is_finite() {
                return Err(Error::NoBracket { which: "c''" });
            }
        }
        hi
    };
    Ok(bisect(|c| f0(model, c), lo, hi, target, false))
}

fn solve_c_lo(model: &NominalPair, eps1: f64) -> Result<f64> {
    if eps1 == 0.0 {
        return Ok(0.0);
    }
    let target = 1.0 / (1.0 - eps1);
    let (lmin, _) = model.lr_range();
    // F1 equals 1 at and below the essential minimum of L.
    let lo = lmin;
    let mut hi = target.max(lmin * 2.0).max(f64::MIN_POSITIVE);
    let mut steps = 0;
    while f1(model, hi) < target {
        hi *= 2.0;
        steps += 1;
        if steps > BRACKET_MAX_STEPS || !hi.is_finite() {
            return Err(Error::NoBracket { which: "c'" });
        }
    }
    Ok(bisect(|c| f1(model, c), lo, hi, target, true))
}

/// Solve the breakpoints of the least-favorable pair.
pub fn solve_breakpoints(spec: &UncertaintySpec) -> Result<LfdPair> {
    let spec = UncertaintySpec::new(spec.model.clone(), spec.eps0, spec.eps1)?;
    let c_hi = solve_c_hi(&spec.model, spec.eps0)?;
    let c_lo = solve_c_lo(&spec.model, spec.eps1)?;
    if !(c_lo < c_hi) || same(c_lo, c_hi) {
        return Err(Error::NotDisjoint { c_lo, c_hi });
    }
    let r0 = if c_hi.is_finite() {
        (1.0 - spec.eps0) * f0(&spec.model, c_hi) - 1.0
    } else {
        0.0
    };
    let r1 = if c_lo > 0.0 {
        (1.0 - spec.eps1) * f1(&spec.model, c_lo) - 1.0
    } else {
        0.0
    };
    let b = (1.0 - spec.eps1) / (1.0 - spec.eps0);
    Ok(LfdPair {
        spec,
        c_lo,
        c_hi,
        b,
        residuals: [r0, r1],
    })
}

impl LfdPair {
    pub fn solve(model: NominalPair, eps0: f64, eps1: f64) -> Result<Self> {
        solve_breakpoints(&UncertaintySpec::new(model, eps0, eps1)?)
    }

    pub fn model(&self) -> &NominalPair {
        &self.spec.model
    }

    /// `[b c', b c'']`, the range of `l*`.
    pub fn lstar_range(&self) -> (f64, f64) {
        (self.b * self.c_lo, self.b * self.c_hi)
    }

    /// Clip a nominal likelihood-ratio value.
    pub fn clip(&self, lr: f64) -> f64 {
        self.b * lr.clamp(self.c_lo, self.c_hi)
    }

    /// `l*(y)`.
    pub fn clipped_lr(&self, y: f64) -> Result<f64> {
        Ok(self.clip(self.spec.model.lr_value(y)?))
    }

    fn eps(&self, h: Hypothesis) -> f64 {
        match h {
            Hypothesis::H0 => self.spec.eps0,
            Hypothesis::H1 => self.spec.eps1,
        }
    }

    fn nominal(&self, h: Hypothesis, x: f64) -> LrTail {
        if x.is_infinite() {
            return LrTail {
                above: 0.0,
                atom: 0.0,
            };
        }
        self.spec.model.lr_tail(h, x)
    }

    fn locate(&self, x: f64) -> Pos {
        if same(x, self.c_lo) {
            Pos::AtLo
        } else if self.c_hi.is_finite() && same(x, self.c_hi) {
            Pos::AtHi
        } else if x < self.c_lo {
            Pos::Below
        } else if x > self.c_hi {
            Pos::Above
        } else {
            Pos::Interior
        }
    }

    /// Mass of the atom of `l*` at `b c'`.
    fn lo_mass(&self, law: Law, h: Hypothesis) -> f64 {
        let p0_le = self.nominal(Hypothesis::H0, self.c_lo).at_most();
        match (law, h) {
            (Law::LeastFavorable, Hypothesis::H0) => (1.0 - self.spec.eps0) * p0_le,
            (Law::LeastFavorable, Hypothesis::H1) => (1.0 - self.spec.eps1) * self.c_lo * p0_le,
            (Law::Nominal, h) => self.nominal(h, self.c_lo).at_most(),
        }
    }

    /// Mass of the atom of `l*` at `b c''` (zero when `c''` is infinite).
    fn hi_mass(&self, law: Law, h: Hypothesis) -> f64 {
        if !self.c_hi.is_finite() {
            return 0.0;
        }
        let p1_ge = self.nominal(Hypothesis::H1, self.c_hi).at_least();
        match (law, h) {
            (Law::LeastFavorable, Hypothesis::H0) => (1.0 - self.spec.eps0) * p1_ge / self.c_hi,
            (Law::LeastFavorable, Hypothesis::H1) => (1.0 - self.spec.eps1) * p1_ge,
            (Law::Nominal, h) => self.nominal(h, self.c_hi).at_least(),
        }
    }

    /// `(P(l* > s), P(l* = s))` under the given law and hypothesis.
    pub fn lstar_tail(&self, law: Law, h: Hypothesis, s: f64) -> LrTail {
        let zero = LrTail {
            above: 0.0,
            atom: 0.0,
        };
        if s.is_nan() || s == f64::INFINITY {
            return zero;
        }
        let x = s / self.b;
        match self.locate(x) {
            Pos::Below => LrTail {
                above: 1.0,
                atom: 0.0,
            },
            Pos::AtLo => {
                let atom = self.lo_mass(law, h);
                LrTail {
                    above: (1.0 - atom).max(0.0),
                    atom,
                }
            }
            Pos::AtHi => LrTail {
                above: 0.0,
                atom: self.hi_mass(law, h),
            },
            Pos::Above => zero,
            Pos::Interior => {
                let t = self.nominal(h, x);
                match (law, h) {
                    (Law::Nominal, _) => t,
                    (Law::LeastFavorable, Hypothesis::H0) => {
                        let w = 1.0 - self.spec.eps0;
                        let beyond = self.nominal(Hypothesis::H0, self.c_hi).at_least();
                        LrTail {
                            above: w * (t.above - beyond).max(0.0) + self.hi_mass(law, h),
                            atom: w * t.atom,
                        }
                    }
                    (Law::LeastFavorable, Hypothesis::H1) => {
                        let w = 1.0 - self.spec.eps1;
                        LrTail {
                            above: w * t.above,
                            atom: w * t.atom,
                        }
                    }
                }
            }
        }
    }

    /// Probability of an `l*` event under law and hypothesis.
    pub fn prob(&self, law: Law, h: Hypothesis, event: LrEvent, s: f64) -> f64 {
        let t = self.lstar_tail(law, h, s);
        let p = match event {
            LrEvent::Gt => t.above,
            LrEvent::Ge => t.above + t.atom,
            LrEvent::Eq => t.atom,
            LrEvent::Lt => 1.0 - t.above - t.atom,
            LrEvent::Le => 1.0 - t.above,
        };
        p.clamp(0.0, 1.0)
    }

    /// `Q_h(event)` under the least-favorable pair.
    pub fn event_prob(&self, h: Hypothesis, event: LrEvent, s: f64) -> f64 {
        self.prob(Law::LeastFavorable, h, event, s)
    }

    /// Values carrying positive probability of `l*` under either hypothesis,
    /// ascending. Continuous families contribute only the clip atoms.
    pub fn lstar_atoms(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        let mut push = |v: f64| {
            if v.is_finite() && !out.iter().any(|&w| same(w, v)) {
                out.push(v);
            }
        };
        if self.lo_mass(Law::LeastFavorable, Hypothesis::H0) > 0.0
            || self.lo_mass(Law::LeastFavorable, Hypothesis::H1) > 0.0
        {
            push(self.b * self.c_lo);
        }
        for a in self.spec.model.lr_atoms() {
            push(self.clip(a.lr));
        }
        if self.hi_mass(Law::LeastFavorable, Hypothesis::H0) > 0.0 {
            push(self.b * self.c_hi);
        }
        out.sort_by(f64::total_cmp);
        out
    }

    /// Draw `l*(Y)` with `Y ~ Q_h` by inverse transform.
    pub fn sample_lfd<R: Rng + ?Sized>(&self, h: Hypothesis, rng: &mut R) -> f64 {
        self.sampler(h).sample(rng)
    }

    /// Inverse-transform sampler of `l*` under `Q_h` with its constants
    /// precomputed.
    pub fn sampler(&self, h: Hypothesis) -> LfdSampler<'_> {
        match h {
            Hypothesis::H0 => {
                let atom = self.hi_mass(Law::LeastFavorable, h);
                let start = self.nominal(Hypothesis::H0, self.c_hi).at_least();
                LfdSampler {
                    lfd: self,
                    h,
                    atom,
                    atom_value: self.b * self.c_hi,
                    v_from: start,
                    v_span: 1.0 - start,
                }
            }
            Hypothesis::H1 => {
                let atom = self.lo_mass(Law::LeastFavorable, h);
                let end = self.nominal(Hypothesis::H1, self.c_lo).above;
                LfdSampler {
                    lfd: self,
                    h,
                    atom,
                    atom_value: self.b * self.c_lo,
                    v_from: 0.0,
                    v_span: end,
                }
            }
        }
    }

    /// Draw `l*(Y)` with `Y ~ P_h*`.
    pub fn sample_nominal_lstar<R: Rng + ?Sized>(&self, h: Hypothesis, rng: &mut R) -> f64 {
        let y = self.spec.model.sample_nominal(h, rng);
        self.clip(self.spec.model.lr_value(y).expect("sampled within support"))
    }

    /// Contamination level of the class for hypothesis `h`.
    pub fn epsilon(&self, h: Hypothesis) -> f64 {
        self.eps(h)
    }
}

/// Under `Q0` the clip atom sits at `b c''`; the rest is `P0*` restricted to
/// `L < c''`. Under `Q1` the atom sits at `b c'`; the rest is `P1*` restricted
/// to `L > c'`.
#[derive(Clone, Copy, Debug)]
pub struct LfdSampler<'a> {
    lfd: &'a LfdPair,
    h: Hypothesis,
    atom: f64,
    atom_value: f64,
    v_from: f64,
    v_span: f64,
}

impl LfdSampler<'_> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        if u < self.atom {
            return self.atom_value;
        }
        let v = self.v_from + (u - self.atom) / (1.0 - self.atom) * self.v_span;
        self.lfd.clip(self.lfd.spec.model.lr_upper_quantile(self.h, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn expo(eps: f64) -> LfdPair {
        LfdPair::solve(NominalPair::exponential(1.0, 2.0).unwrap(), eps, eps).unwrap()
    }

    fn coin() -> NominalPair {
        NominalPair::discrete(vec![0.0, 1.0], vec![0.8, 0.2], vec![0.2, 0.8]).unwrap()
    }

    #[test]
    fn zero_epsilon_gives_trivial_breakpoints() {
        let l = expo(0.0);
        assert_eq!(l.c_lo, 0.0);
        assert_eq!(l.c_hi, f64::INFINITY);
        assert_eq!(l.b, 1.0);
    }

    #[test]
    fn exponential_breakpoints_match_closed_form() {
        let l = expo(0.01);
        // 1/(4 c''^2) = 1/0.99 - 1 and c' + 1/(4c') = 1/0.99 with c' >= 0.5.
        let s: f64 = 1.0 / 0.99;
        let c_hi = 1.0 / (2.0 * (s - 1.0).sqrt());
        let c_lo = (s + (s * s - 1.0).sqrt()) / 2.0;
        assert!((l.c_hi - c_hi).abs() < 1e-9, "{} vs {}", l.c_hi, c_hi);
        assert!((l.c_lo - c_lo).abs() < 1e-9, "{} vs {}", l.c_lo, c_lo);
        assert!(l.residuals.iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn discrete_breakpoints_are_exact() {
        let l = LfdPair::solve(coin(), 0.1, 0.1).unwrap();
        assert!((l.c_lo - 7.0 / 18.0).abs() < 1e-12);
        assert!((l.c_hi - 18.0 / 7.0).abs() < 1e-12);
        let s = l.c_hi;
        assert!((l.event_prob(Hypothesis::H1, LrEvent::Eq, s) - 0.72).abs() < 1e-12);
        assert!((l.event_prob(Hypothesis::H0, LrEvent::Eq, s) - 0.28).abs() < 1e-12);
        let s = l.c_lo;
        assert!((l.event_prob(Hypothesis::H0, LrEvent::Eq, s) - 0.72).abs() < 1e-12);
        assert!((l.event_prob(Hypothesis::H1, LrEvent::Eq, s) - 0.28).abs() < 1e-12);
    }

    #[test]
    fn clipped_lr_examples() {
        let l = expo(0.01);
        assert!((l.clipped_lr(2.0 * 2f64.ln()).unwrap() - 1.0).abs() < 1e-14);
        assert!((l.clipped_lr(0.0).unwrap() - l.c_lo).abs() < 1e-15);
        let d = LfdPair::solve(coin(), 0.1, 0.1).unwrap();
        assert!((d.clipped_lr(1.0).unwrap() - 18.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn event_probabilities_match_hand_values() {
        let l = expo(0.01);
        let c2 = l.c_hi;
        let c1 = l.c_lo;
        let q0 = 0.99 * (0.25 - 1.0 / (4.0 * c2 * c2)) + 0.99 * (1.0 / (2.0 * c2)) / c2;
        assert!((l.event_prob(Hypothesis::H0, LrEvent::Ge, 1.0) - q0).abs() < 1e-14);
        assert!((q0 - 0.2575).abs() < 1e-12);
        let q1 = 0.99 * (1.0 / (2.0 * c1) - 0.5) + 0.99 * c1 * (1.0 - 1.0 / (4.0 * c1 * c1));
        assert!((l.event_prob(Hypothesis::H1, LrEvent::Lt, 1.0) - q1).abs() < 1e-14);
        assert!((q1 - 0.505).abs() < 1e-9);
        for h in Hypothesis::BOTH {
            assert_eq!(l.event_prob(h, LrEvent::Ge, 0.0), 1.0);
        }
    }

    #[test]
    fn total_mass_and_support() {
        for eps in [0.0, 0.01, 0.1] {
            let l = expo(eps);
            let (lo, hi) = l.lstar_range();
            for h in Hypothesis::BOTH {
                assert!(l.event_prob(h, LrEvent::Lt, lo * (1.0 - 1e-9)) < 1e-15);
                if hi.is_finite() {
                    assert_eq!(l.event_prob(h, LrEvent::Gt, hi * (1.0 + 1e-9)), 0.0);
                }
                let mid = l.event_prob(h, LrEvent::Gt, lo) - l.event_prob(h, LrEvent::Ge, hi);
                let total = l.event_prob(h, LrEvent::Eq, lo) + mid + l.event_prob(h, LrEvent::Eq, hi);
                assert!((total - 1.0).abs() < 1e-9, "eps {eps} h {h:?} total {total}");
            }
        }
    }

    #[test]
    fn hi_atom_frequency_under_sampling() {
        let l = expo(0.01);
        let atom = 0.99 * (1.0 / (2.0 * l.c_hi)) / l.c_hi;
        assert!((atom - 0.02).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 1_000_000;
        let top = l.b * l.c_hi;
        let hits = (0..n)
            .filter(|_| l.sample_lfd(Hypothesis::H0, &mut rng) == top)
            .count();
        let p = hits as f64 / n as f64;
        let sigma = (atom * (1.0 - atom) / n as f64).sqrt();
        assert!((p - atom).abs() < 3.0 * sigma, "p = {p}");
    }

    #[test]
    fn sampling_matches_event_probabilities() {
        let l = expo(0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 400_000;
        for h in Hypothesis::BOTH {
            let xs: Vec<f64> = (0..n).map(|_| l.sample_lfd(h, &mut rng)).collect();
            for &t in &[0.7, 1.0, 1.5, 3.0] {
                let exact = l.event_prob(h, LrEvent::Gt, t);
                let p = xs.iter().filter(|&&x| x > t).count() as f64 / n as f64;
                let sigma = (exact * (1.0 - exact) / n as f64).sqrt();
                assert!((p - exact).abs() <= 4.0 * sigma, "h {h:?} t {t} {p} vs {exact}");
            }
        }
    }

    #[test]
    fn zero_epsilon_lfd_equals_nominal() {
        let l = expo(0.0);
        for h in Hypothesis::BOTH {
            for &t in &[0.3, 0.5, 0.9, 2.0, 10.0] {
                let a = l.prob(Law::LeastFavorable, h, LrEvent::Gt, t);
                let b = l.prob(Law::Nominal, h, LrEvent::Gt, t);
                assert!((a - b).abs() < 1e-15);
            }
        }
        let mut r1 = ChaCha8Rng::seed_from_u64(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..50).map(|_| l.sample_lfd(Hypothesis::H1, &mut r1)).collect();
        let b: Vec<f64> = (0..50).map(|_| l.sample_lfd(Hypothesis::H1, &mut r2)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn overlapping_classes_rejected() {
        let m = NominalPair::exponential(1.0, 2.0).unwrap();
        assert!(matches!(LfdPair::solve(m.clone(), 0.2, 0.2), Err(Error::NotDisjoint { .. })));
        assert!(matches!(LfdPair::solve(m, 0.3, 0.3), Err(Error::NotDisjoint { .. })));
        assert!(LfdPair::solve(coin(), 0.5, 0.5).is_err());
    }

    #[test]
    fn gaussian_breakpoints_are_symmetric() {
        let l = LfdPair::solve(NominalPair::gaussian(0.0, 1.0, 1.0).unwrap(), 0.05, 0.05).unwrap();
        assert!((l.c_lo * l.c_hi - 1.0).abs() < 1e-9);
        assert!(l.residuals.iter().all(|r| r.abs() < 1e-10));
    }

    proptest! {
        #[test]
        fn breakpoints_monotone_in_eps(e in 0.0f64..0.15, d in 0.0f64..0.03) {
            let m = NominalPair::exponential(1.0, 2.0).unwrap();
            let a = LfdPair::solve(m.clone(), e, e).unwrap();
            let b = LfdPair::solve(m, e + d, e + d).unwrap();
            prop_assert!(b.c_lo >= a.c_lo - 1e-12);
            prop_assert!(b.c_hi <= a.c_hi * (1.0 + 1e-12));
        }

        #[test]
        fn normalization_holds(m1 in 1.3f64..5.0, e0 in 0.0f64..0.05, e1 in 0.0f64..0.05) {
            let m = NominalPair::exponential(1.0, m1).unwrap();
            let l = LfdPair::solve(m, e0, e1).unwrap();
            prop_assert!(l.residuals.iter().all(|r| r.abs() < 1e-10));
            for h in Hypothesis::BOTH {
                let (lo, hi) = l.lstar_range();
                let total = l.event_prob(h, LrEvent::Ge, lo);
                prop_assert!((total - 1.0).abs() < 1e-9);
                if hi.is_finite() {
                    prop_assert!(l.event_prob(h, LrEvent::Gt, hi) == 0.0);
                }
            }
        }

        #[test]
        fn discrete_normalization(p in 0.55f64..0.95, e in 0.0f64..0.1) {
            let m = NominalPair::discrete(vec![0.0, 1.0, 2.0], vec![p, (1.0 - p) * 0.5, (1.0 - p) * 0.5],
                                          vec![1.0 - p, p * 0.5, p * 0.5]).unwrap();
            if let Ok(l) = LfdPair::solve(m, e, e) {
                prop_assert!(l.residuals.iter().all(|r| r.abs() < 1e-12));
            }
        }
    }
}
