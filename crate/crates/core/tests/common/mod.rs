//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls the event-probability or kernel code of the library:
//! discrete least-favorable pmfs come straight from the clipping formulas, and
//! chain errors come from explicit enumeration of observation paths.

#![allow(dead_code)]

use rand::{Rng, RngExt};
use robust_tandem::{LfdPair, NominalPair, Priors, RelayRule};

/// Least-favorable pmfs and `l*` for every support point of a discrete model.
#[derive(Clone, Debug)]
pub struct DiscreteLfd {
    pub lstar: Vec<f64>,
    pub q0: Vec<f64>,
    pub q1: Vec<f64>,
}

impl DiscreteLfd {
    pub fn q(&self, h: usize) -> &[f64] {
        if h == 0 {
            &self.q0
        } else {
            &self.q1
        }
    }

    /// Distinct values of `l*`, ascending.
    pub fn levels(&self) -> Vec<f64> {
        let mut v = self.lstar.clone();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| close(*a, *b));
        v
    }
}

pub fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// `q0 = (1-ε0) p0` below `c''` and `(1-ε0) p1 / c''` above it;
/// `q1 = (1-ε1) p1` above `c'` and `(1-ε1) c' p0` below it.
pub fn discrete_lfd(p0: &[f64], p1: &[f64], eps0: f64, eps1: f64, c_lo: f64, c_hi: f64) -> DiscreteLfd {
    let mut q0 = Vec::new();
    let mut q1 = Vec::new();
    for (&a, &b) in p0.iter().zip(p1) {
        let l = b / a;
        q0.push(if l < c_hi { (1.0 - eps0) * a } else { (1.0 - eps0) * b / c_hi });
        q1.push(if l > c_lo { (1.0 - eps1) * b } else { (1.0 - eps1) * c_lo * a });
    }
    let lstar = q0.iter().zip(&q1).map(|(a, b)| b / a).collect();
    DiscreteLfd { lstar, q0, q1 }
}

pub fn discrete_lfd_of(lfd: &LfdPair, p0: &[f64], p1: &[f64]) -> DiscreteLfd {
    discrete_lfd(p0, p1, lfd.spec.eps0, lfd.spec.eps1, lfd.c_lo, lfd.c_hi)
}

/// `P_h(U_k = 1)` for `k = 1..=n` by walking every observation path.
pub fn enumerate_chain(d: &DiscreteLfd, h: usize, first: f64, relays: &[RelayRule], n: usize) -> Vec<f64> {
    fn walk(d: &DiscreteLfd, h: usize, relays: &[RelayRule], k: usize, n: usize, u: bool, w: f64, acc: &mut [f64]) {
        if u {
            acc[k - 1] += w;
        }
        if k == n || w == 0.0 {
            return;
        }
        let r = if relays.len() == 1 { relays[0] } else { relays[k - 1] };
        for (&l, &q) in d.lstar.iter().zip(d.q(h)) {
            let (t, keep_zero) = if u { (r.t1, r.p) } else { (r.t0, r.q) };
            if close(l, t) {
                // With probability `keep_zero` the agent outputs 0 at a tie.
                walk(d, h, relays, k + 1, n, false, w * q * keep_zero, acc);
                walk(d, h, relays, k + 1, n, true, w * q * (1.0 - keep_zero), acc);
            } else {
                walk(d, h, relays, k + 1, n, l > t, w * q, acc);
            }
        }
    }
    let mut acc = vec![0.0; n];
    for (&l, &q) in d.lstar.iter().zip(d.q(h)) {
        let u = l > first || close(l, first);
        walk(d, h, relays, 1, n, u, q, &mut acc);
    }
    acc
}

/// `(P_F, P_M, P_e)` per stage from path enumeration.
pub fn enumerate_errors(d: &DiscreteLfd, priors: Priors, first: f64, relays: &[RelayRule], n: usize) -> Vec<(f64, f64, f64)> {
    let f = enumerate_chain(d, 0, first, relays, n);
    let one = enumerate_chain(d, 1, first, relays, n);
    f.iter()
        .zip(&one)
        .map(|(&pf, &p1)| {
            let pm = 1.0 - p1;
            (pf, pm, priors.pi0() * pf + priors.pi1() * pm)
        })
        .collect()
}

/// Smallest final-stage error over all deterministic chains (`p = q = 0`)
/// whose thresholds sit at a level of `l*` or above the largest one.
pub fn exhaustive_finite_dd(d: &DiscreteLfd, priors: Priors, n: usize) -> f64 {
    let mut places = d.levels();
    places.push(2.0 * places.last().unwrap());
    let ge = |h: usize, t: f64| -> f64 {
        d.lstar
            .iter()
            .zip(d.q(h))
            .filter(|(&l, _)| l > t || close(l, t))
            .map(|(_, &q)| q)
            .sum()
    };
    let pairs: Vec<(f64, f64)> = places
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| places[i..].iter().map(move |&b| (a, b)))
        .collect();
    let mut best = f64::INFINITY;
    let mut stack: Vec<(usize, f64, f64)> = places.iter().map(|&t| (1, ge(0, t), ge(1, t))).collect();
    while let Some((k, p0, p1)) = stack.pop() {
        if k == n {
            best = best.min(priors.pi0() * p0 + priors.pi1() * (1.0 - p1));
            continue;
        }
        for &(t1, t0) in &pairs {
            let next = |h: usize, p: f64| p * ge(h, t1) + (1.0 - p) * ge(h, t0);
            stack.push((k + 1, next(0, p0), next(1, p1)));
        }
    }
    best
}

/// A random positive pmf of the given size.
pub fn random_pmf<R: Rng>(rng: &mut R, m: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..m).map(|_| 0.05 + rng.random::<f64>()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// A random discrete model with its solved least-favorable pair.
pub fn random_discrete<R: Rng>(rng: &mut R, m: usize, max_eps: f64) -> (LfdPair, Vec<f64>, Vec<f64>) {
    loop {
        let p0 = random_pmf(rng, m);
        let p1 = random_pmf(rng, m);
        let support: Vec<f64> = (0..m).map(|i| i as f64).collect();
        let Ok(model) = NominalPair::discrete(support, p0.clone(), p1.clone()) else { continue };
        let e0 = max_eps * rng.random::<f64>();
        let e1 = max_eps * rng.random::<f64>();
        if let Ok(l) = LfdPair::solve(model, e0, e1) {
            return (l, p0, p1);
        }
    }
}

/// A random relay: thresholds drawn log-uniformly over `[lo, hi]` or snapped
/// to one of `atoms`, and randomization levels drawn from `[0, 1]`.
pub fn random_relay<R: Rng>(rng: &mut R, lo: f64, hi: f64, atoms: &[f64]) -> RelayRule {
    let pick = |rng: &mut R| {
        if !atoms.is_empty() && rng.random::<f64>() < 0.5 {
            atoms[rng.random_range(0..atoms.len())]
        } else {
            (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
        }
    };
    let a = pick(rng);
    let b = pick(rng);
    RelayRule::new(a.min(b), a.max(b), rng.random(), rng.random()).unwrap()
}
