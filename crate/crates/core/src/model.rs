//! Nominal observation models.
//!
//! A [`NominalPair`] bundles the two nominal distributions `P0*`, `P1*` and
//! exposes everything downstream code needs about the nominal likelihood
//! ratio `L(y) = p1*(y) / p0*(y)`: point evaluation, closed-form tails under
//! either hypothesis, atoms, the essential range of `L`, a generalized
//! inverse of the tail (for inverse-transform sampling) and raw observation
//! sampling.
//!
//! Three families ship: exponentials with different means, Gaussians with a
//! location shift and finite-support pmfs. All tails are closed form.

use rand::{Rng, RngExt};
use rand_distr::{Distribution, Exp, Normal as NormalSampler};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Relative tolerance used when deciding that two likelihood-ratio values
/// coincide (atoms, thresholds sitting on atoms).
pub const REL_TIE: f64 = 1e-12;

/// Tolerance on pmf normalization.
const PMF_SUM_TOL: f64 = 1e-12;

pub(crate) fn same(a: f64, b: f64) -> bool {
    a == b || (a.is_finite() && b.is_finite() && (a - b).abs() <= REL_TIE * a.abs().max(b.abs()))
}

/// Hypothesis index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub const BOTH: [Hypothesis; 2] = [Hypothesis::H0, Hypothesis::H1];

    pub fn index(self) -> usize {
        match self {
            Hypothesis::H0 => 0,
            Hypothesis::H1 => 1,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Hypothesis::H0),
            1 => Ok(Hypothesis::H1),
            _ => Err(crate::error::invalid("hypothesis", format!("index {i} is not 0 or 1"))),
        }
    }

    pub fn other(self) -> Self {
        match self {
            Hypothesis::H0 => Hypothesis::H1,
            Hypothesis::H1 => Hypothesis::H0,
        }
    }
}

/// Family and parameters of a nominal pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// `P_i*` exponential with mean `m_i`.
    ExponentialMeans { m0: f64, m1: f64 },
    /// `P_i*` normal with mean `mu_i` and common standard deviation `sigma`.
    GaussianShift { mu0: f64, mu1: f64, sigma: f64 },
    /// Finite support; observations are the support labels themselves.
    Discrete {
        support: Vec<f64>,
        pmf0: Vec<f64>,
        pmf1: Vec<f64>,
    },
}

/// Tail of the nominal likelihood ratio at a point: `P_i*(L > t)` and
/// `P_i*(L = t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrTail {
    pub above: f64,
    pub atom: f64,
}

impl LrTail {
    pub fn at_least(&self) -> f64 {
        self.above + self.atom
    }

    pub fn at_most(&self) -> f64 {
        1.0 - self.above
    }

    pub fn below(&self) -> f64 {
        (1.0 - self.above - self.atom).max(0.0)
    }
}

/// One atom of the nominal likelihood ratio of a discrete model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrAtom {
    pub lr: f64,
    pub p0: f64,
    pub p1: f64,
}

impl LrAtom {
    pub fn mass(&self, h: Hypothesis) -> f64 {
        match h {
            Hypothesis::H0 => self.p0,
            Hypothesis::H1 => self.p1,
        }
    }
}

/// Serialized form of a [`NominalPair`]. The boundedness flags are optional
/// on input; when present they are checked against the family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llr_unbounded_above: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llr_unbounded_below: Option<bool>,
}

/// A validated, immutable nominal pair `(P0*, P1*)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct NominalPair {
    kind: ModelKind,
    llr_unbounded_above: bool,
    llr_unbounded_below: bool,
    /// Sorted, merged likelihood-ratio atoms (discrete models only).
    atoms: Vec<LrAtom>,
}

impl TryFrom<ModelSpec> for NominalPair {
    type Error = Error;

    fn try_from(spec: ModelSpec) -> Result<Self> {
        let pair = NominalPair::new(spec.kind)?;
        if let Some(above) = spec.llr_unbounded_above {
            if above != pair.llr_unbounded_above {
                return Err(Error::InvalidModel(format!(
                    "llr_unbounded_above = {above} is inconsistent with the model family"
                )));
            }
        }
        if let Some(below) = spec.llr_unbounded_below {
            if below != pair.llr_unbounded_below {
                return Err(Error::InvalidModel(format!(
                    "llr_unbounded_below = {below} is inconsistent with the model family"
                )));
            }
        }
        Ok(pair)
    }
}

impl From<NominalPair> for ModelSpec {
    fn from(pair: NominalPair) -> Self {
        ModelSpec {
            llr_unbounded_above: Some(pair.llr_unbounded_above),
            llr_unbounded_below: Some(pair.llr_unbounded_below),
            kind: pair.kind,
        }
    }
}

impl NominalPair {
    pub fn new(kind: ModelKind) -> Result<Self> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(crate::error::invalid(name, format!("must be finite and positive, got {v}")))
            }
        };
        let (above, below, atoms) = match &kind {
            ModelKind::ExponentialMeans { m0, m1 } => {
                positive("m0", *m0)?;
                positive("m1", *m1)?;
                if m0 == m1 {
                    return Err(Error::InvalidModel("exponential means must differ".into()));
                }
                // L(y) = (m0/m1) exp(y (1/m0 - 1/m1)) on y >= 0.
                (m1 > m0, m1 < m0, Vec::new())
            }
            ModelKind::GaussianShift { mu0, mu1, sigma } => {
                positive("sigma", *sigma)?;
                if !mu0.is_finite() || !mu1.is_finite() {
                    return Err(Error::InvalidModel("gaussian means must be finite".into()));
                }
                if mu0 == mu1 {
                    return Err(Error::InvalidModel("gaussian means must differ".into()));
                }
                (true, true, Vec::new())
            }
            ModelKind::Discrete { support, pmf0, pmf1 } => {
                let atoms = discrete_atoms(support, pmf0, pmf1)?;
                (false, false, atoms)
            }
        };
        Ok(NominalPair {
            kind,
            llr_unbounded_above: above,
            llr_unbounded_below: below,
            atoms,
        })
    }

    pub fn exponential(m0: f64, m1: f64) -> Result<Self> {
        Self::new(ModelKind::ExponentialMeans { m0, m1 })
    }

    pub fn gaussian(mu0: f64, mu1: f64, sigma: f64) -> Result<Self> {
        Self::new(ModelKind::GaussianShift { mu0, mu1, sigma })
    }

    pub fn discrete(support: Vec<f64>, pmf0: Vec<f64>, pmf1: Vec<f64>) -> Result<Self> {
        Self::new(ModelKind::Discrete { support, pmf0, pmf1 })
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn llr_unbounded_above(&self) -> bool {
        self.llr_unbounded_above
    }

    pub fn llr_unbounded_below(&self) -> bool {
        self.llr_unbounded_below
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, ModelKind::Discrete { .. })
    }

    /// Likelihood-ratio atoms, ascending. Empty for continuous families.
    pub fn lr_atoms(&self) -> &[LrAtom] {
        &self.atoms
    }

    /// `L(y) = p1*(y) / p0*(y)`.
    pub fn lr_value(&self, y: f64) -> Result<f64> {
        match &self.kind {
            ModelKind::ExponentialMeans { m0, m1 } => {
                if !(y.is_finite() && y >= 0.0) {
                    return Err(Error::OutsideSupport { y });
                }
                Ok((m0 / m1) * (y * (1.0 / m0 - 1.0 / m1)).exp())
            }
            ModelKind::GaussianShift { mu0, mu1, sigma } => {
                if !y.is_finite() {
                    return Err(Error::OutsideSupport { y });
                }
                let mid = 0.5 * (mu0 + mu1);
                Ok(((mu1 - mu0) / (sigma * sigma) * (y - mid)).exp())
            }
            ModelKind::Discrete { support, pmf0, pmf1 } => support
                .iter()
                .position(|&s| s == y)
                .map(|j| pmf1[j] / pmf0[j])
                .ok_or(Error::OutsideSupport { y }),
        }
    }

    /// Essential range `[inf L, sup L]` of the likelihood ratio.
    pub fn lr_range(&self) -> (f64, f64) {
        match &self.kind {
            ModelKind::ExponentialMeans { m0, m1 } => {
                let r = m0 / m1;
                if m1 > m0 {
                    (r, f64::INFINITY)
                } else {
                    (0.0, r)
                }
            }
            ModelKind::GaussianShift { .. } => (0.0, f64::INFINITY),
            ModelKind::Discrete { .. } => (
                self.atoms.first().map_or(0.0, |a| a.lr),
                self.atoms.last().map_or(0.0, |a| a.lr),
            ),
        }
    }

    /// `(P_h*(L > t), P_h*(L = t))`.
    pub fn lr_tail(&self, h: Hypothesis, t: f64) -> LrTail {
        debug_assert!(t >= 0.0 || !t.is_nan());
        match &self.kind {
            ModelKind::ExponentialMeans { m0, m1 } => {
                let m = if h == Hypothesis::H0 { *m0 } else { *m1 };
                LrTail {
                    above: exponential_tail(*m0, *m1, m, t),
                    atom: 0.0,
                }
            }
            ModelKind::GaussianShift { mu0, mu1, sigma } => {
                let mu = if h == Hypothesis::H0 { *mu0 } else { *mu1 };
                LrTail {
                    above: gaussian_tail(*mu0, *mu1, *sigma, mu, t),
                    atom: 0.0,
                }
            }
            ModelKind::Discrete { .. } => {
                let mut above = 0.0;
                let mut atom = 0.0;
                for a in &self.atoms {
                    if same(a.lr, t) {
                        atom += a.mass(h);
                    } else if a.lr > t {
                        above += a.mass(h);
                    }
                }
                LrTail { above, atom }
            }
        }
    }

    /// Generalized inverse of the tail: the smallest `t` with
    /// `P_h*(L > t) <= v`, for `v` in `[0, 1]`.
    pub fn lr_upper_quantile(&self, h: Hypothesis, v: f64) -> f64 {
        let v = v.clamp(0.0, 1.0);
        match &self.kind {
            ModelKind::ExponentialMeans { m0, m1 } => {
                let m = if h == Hypothesis::H0 { *m0 } else { *m1 };
                let r = m0 / m1;
                let kappa = 1.0 / m0 - 1.0 / m1;
                if kappa > 0.0 {
                    // P(L > t) = (t/r)^(-1/(kappa m)).
                    if v <= 0.0 {
                        f64::INFINITY
                    } else {
                        r * v.powf(-kappa * m)
                    }
                } else {
                    // P(L > t) = 1 - (t/r)^(-1/(kappa m)), exponent positive.
                    r * (1.0 - v).powf(-kappa * m)
                }
            }
            ModelKind::GaussianShift { mu0, mu1, sigma } => {
                let mu = if h == Hypothesis::H0 { *mu0 } else { *mu1 };
                let delta = mu1 - mu0;
                let mid = 0.5 * (mu0 + mu1);
                // Upper-tail probability v of the observation side that maps
                // to large L.
                let z = upper_normal_quantile(if delta > 0.0 { v } else { 1.0 - v });
                let y = mu + sigma * z;
                (delta / (sigma * sigma) * (y - mid)).exp()
            }
            ModelKind::Discrete { .. } => {
                let mut tail = 0.0;
                let mut answer = self.atoms.last().map_or(0.0, |a| a.lr);
                for a in self.atoms.iter().rev() {
                    if tail <= v {
                        answer = a.lr;
                    } else {
                        break;
                    }
                    tail += a.mass(h);
                }
                answer
            }
        }
    }

    /// Draw an observation from `P_h*`.
    pub fn sample_nominal<R: Rng + ?Sized>(&self, h: Hypothesis, rng: &mut R) -> f64 {
        match &self.kind {
            ModelKind::ExponentialMeans { m0, m1 } => {
                let m = if h == Hypothesis::H0 { *m0 } else { *m1 };
                Exp::new(1.0 / m).expect("validated mean").sample(rng)
            }
            ModelKind::GaussianShift { mu0, mu1, sigma } => {
                let mu = if h == Hypothesis::H0 { *mu0 } else { *mu1 };
                NormalSampler::new(mu, *sigma)
                    .expect("validated sigma")
                    .sample(rng)
            }
            ModelKind::Discrete { support, pmf0, pmf1 } => {
                let pmf = if h == Hypothesis::H0 { pmf0 } else { pmf1 };
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (label, p) in support.iter().zip(pmf) {
                    acc += p;
                    if u < acc {
                        return *label;
                    }
                }
                *support.last().expect("non-empty support")
            }
        }
    }

    /// Whether `y` is a valid observation for this model.
    pub fn in_support(&self, y: f64) -> bool {
        self.lr_value(y).is_ok()
    }
}

fn discrete_atoms(support: &[f64], pmf0: &[f64], pmf1: &[f64]) -> Result<Vec<LrAtom>> {
    if support.is_empty() {
        return Err(Error::InvalidModel("discrete support is empty".into()));
    }
    if pmf0.len() != support.len() || pmf1.len() != support.len() {
        return Err(Error::InvalidModel(format!(
            "support has {} labels but pmf0/pmf1 have {}/{} entries",
            support.len(),
            pmf0.len(),
            pmf1.len()
        )));
    }
    for (i, s) in support.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::InvalidModel(format!("support label {s} is not finite")));
        }
        if support[..i].contains(s) {
            return Err(Error::InvalidModel(format!("duplicate support label {s}")));
        }
    }
    for (name, pmf) in [("pmf0", pmf0), ("pmf1", pmf1)] {
        if pmf.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
            return Err(Error::InvalidModel(format!(
                "{name} must be strictly positive on the shared support"
            )));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > PMF_SUM_TOL {
            return Err(Error::InvalidModel(format!("{name} sums to {total}, not 1")));
        }
    }
    let mut atoms: Vec<LrAtom> = pmf0
        .iter()
        .zip(pmf1)
        .map(|(&p0, &p1)| LrAtom { lr: p1 / p0, p0, p1 })
        .collect();
    atoms.sort_by(|a, b| a.lr.total_cmp(&b.lr));
    let mut merged: Vec<LrAtom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match merged.last_mut() {
            Some(last) if same(last.lr, a.lr) => {
                last.p0 += a.p0;
                last.p1 += a.p1;
            }
            _ => merged.push(a),
        }
    }
    if merged.len() < 2 {
        return Err(Error::InvalidModel("pmf0 and pmf1 are identical".into()));
    }
    Ok(merged)
}

fn exponential_tail(m0: f64, m1: f64, m: f64, t: f64) -> f64 {
    let r = m0 / m1;
    let kappa = 1.0 / m0 - 1.0 / m1;
    if kappa > 0.0 {
        if t <= r {
            1.0
        } else if t.is_infinite() {
            0.0
        } else {
            (t / r).powf(-1.0 / (kappa * m))
        }
    } else if t >= r {
        0.0
    } else if t <= 0.0 {
        1.0
    } else {
        // L > t  <=>  y < ln(t/r)/kappa.
        let y_t = (t / r).ln() / kappa;
        -(-y_t / m).exp_m1()
    }
}

fn gaussian_tail(mu0: f64, mu1: f64, sigma: f64, mu: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let delta = mu1 - mu0;
    let mid = 0.5 * (mu0 + mu1);
    let y_t = sigma * sigma / delta * t.ln() + mid;
    let z = (y_t - mu) / sigma;
    if delta > 0.0 {
        upper_normal_tail(z)
    } else {
        upper_normal_tail(-z)
    }
}

/// `P(Z > z)` for a standard normal `Z`.
fn upper_normal_tail(z: f64) -> f64 {
    if z == f64::INFINITY {
        0.0
    } else if z == f64::NEG_INFINITY {
        1.0
    } else {
        0.5 * erfc(z / std::f64::consts::SQRT_2)
    }
}

/// `z` with `P(Z > z) = v`.
fn upper_normal_quantile(v: f64) -> f64 {
    if v <= 0.0 {
        return f64::INFINITY;
    }
    if v >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let std = Normal::standard();
    if v < 0.5 {
        -std.inverse_cdf(v)
    } else {
        std.inverse_cdf(1.0 - v)
    }
}
