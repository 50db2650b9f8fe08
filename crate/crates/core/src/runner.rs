//! Experiment configuration, presets and result emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::engine::{
    phi_delta_scheme, propagate, propagate_under, social_trajectory, ChainConfig, EpsSchedule,
    LfdCache, PhiDelta, StageError,
};
use crate::error::Error;
use crate::lfd::{Law, LfdPair};
use crate::model::NominalPair;
use crate::optimize::{
    asymptotic_dd_value, optimize_asymptotic_dd, optimize_finite_dd, optimize_unknown_sl,
    unknown_sl_value, BestRule, Objective, OptimizationReport,
};
use crate::rules::{FirstAgentRule, Priors, RelayRule};
use crate::sim::{simulate_chain, Contamination, ContaminationPair, ContaminationSpec, SimResult};

/// Contamination levels as written in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsSetting {
    /// The same level under both hypotheses for every agent.
    Level(f64),
    /// `"a/k"`, or `"a0/k,a1/k"` for distinct hypotheses.
    Formula(String),
    Schedule(EpsSchedule),
}

impl Default for EpsSetting {
    fn default() -> Self {
        EpsSetting::Level(0.0)
    }
}

impl EpsSetting {
    pub fn resolve(&self) -> crate::Result<EpsSchedule> {
        match self {
            EpsSetting::Level(e) => Ok(EpsSchedule::constant(*e)),
            EpsSetting::Schedule(s) => Ok(s.clone()),
            EpsSetting::Formula(f) => {
                let parse_one = |s: &str| -> crate::Result<(f64, bool)> {
                    let s = s.trim();
                    let (num, harmonic) = match s.strip_suffix("/k") {
                        Some(a) => (a, true),
                        None => (s, false),
                    };
                    let v = num.trim().parse::<f64>().map_err(|_| {
                        crate::error::invalid("eps", format!("cannot read {s:?} as a level or a/k"))
                    })?;
                    Ok((v, harmonic))
                };
                let parts: Vec<&str> = f.split(',').collect();
                let (a0, a1) = match parts.as_slice() {
                    [one] => (parse_one(one)?, parse_one(one)?),
                    [x, y] => (parse_one(x)?, parse_one(y)?),
                    _ => return Err(crate::error::invalid("eps", format!("malformed formula {f:?}"))),
                };
                match (a0.1, a1.1) {
                    (true, true) => Ok(EpsSchedule::Harmonic { a0: a0.0, a1: a1.0 }),
                    (false, false) => Ok(EpsSchedule::Constant { eps0: a0.0, eps1: a1.0 }),
                    _ => Err(crate::error::invalid("eps", "mixing constant and a/k levels is not supported")),
                }
            }
        }
    }
}

/// How the relay rules of a chain are chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RuleSpec {
    /// One explicit rule shared by agents `2..=n`.
    Relay(RelayRule),
    /// `"social"`, `"optimize:<objective>"` or `"phi-delta:<delta>"`.
    Named(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RuleChoice {
    Relay(RelayRule),
    Social,
    Optimize(Objective),
    PhiDelta(f64),
}

impl RuleSpec {
    pub fn choice(&self) -> crate::Result<RuleChoice> {
        match self {
            RuleSpec::Relay(r) => {
                r.validate()?;
                Ok(RuleChoice::Relay(*r))
            }
            RuleSpec::Named(s) => {
                let s = s.trim();
                if s == "social" {
                    return Ok(RuleChoice::Social);
                }
                if let Some(obj) = s.strip_prefix("optimize:") {
                    return Ok(RuleChoice::Optimize(obj.parse()?));
                }
                if let Some(d) = s.strip_prefix("phi-delta:") {
                    let delta = d
                        .parse::<f64>()
                        .map_err(|_| crate::error::invalid("rule", format!("cannot read delta from {s:?}")))?;
                    return Ok(RuleChoice::PhiDelta(delta));
                }
                Err(crate::error::invalid("rule", format!("unknown rule {s:?}")))
            }
        }
    }
}

fn default_rule() -> RuleSpec {
    RuleSpec::Named("social".into())
}
fn default_n() -> usize {
    30
}
fn default_samples() -> usize {
    100_000
}

/// A complete experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: NominalPair,
    #[serde(default)]
    pub priors: Priors,
    #[serde(default)]
    pub eps: EpsSetting,
    #[serde(default = "default_rule")]
    pub rule: RuleSpec,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Contaminations shared by every agent, at most one per hypothesis.
    /// Empty means observations follow the least-favorable pair.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contamination: Vec<ContaminationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl ExperimentConfig {
    /// Parse a config document, or a manifest embedding one under `config`.
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).context("config is not valid JSON")?;
        let cfg: ExperimentConfig = match value.get("config") {
            Some(inner) if value.get("model").is_none() => {
                serde_json::from_value(inner.clone()).context("invalid experiment config under `config`")?
            }
            // Parse the text again so errors carry line and column.
            _ => serde_json::from_str(text).context("invalid experiment config")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.n == 0 {
            bail!("field `n`: chain length must be at least 1");
        }
        self.chain_config().context("field `eps`")?;
        self.rule.choice().context("field `rule`")?;
        self.contamination_pair().context("field `contamination`")?;
        Ok(())
    }

    pub fn chain_config(&self) -> crate::Result<ChainConfig> {
        ChainConfig::new(self.priors, self.n, self.eps.resolve()?, self.model.clone())
    }

    /// The config with formulas expanded and defaults written out.
    pub fn resolved(&self) -> crate::Result<Self> {
        let mut c = self.clone();
        c.eps = EpsSetting::Schedule(self.eps.resolve()?);
        Ok(c)
    }

    pub fn contamination_pair(&self) -> crate::Result<ContaminationPair> {
        let mut pair = ContaminationPair::least_favorable();
        let mut seen = [false; 2];
        for spec in &self.contamination {
            let h = spec.applies_to.index();
            if seen[h] {
                return Err(crate::error::invalid(
                    "contamination",
                    format!("two entries for hypothesis {:?}", spec.applies_to),
                ));
            }
            seen[h] = true;
            spec.kind.validate(&self.model)?;
            match spec.applies_to {
                crate::model::Hypothesis::H0 => pair.h0 = spec.kind.clone(),
                crate::model::Hypothesis::H1 => pair.h1 = spec.kind.clone(),
            }
        }
        // A hypothesis left unspecified beside a specified one is nominal.
        if seen.iter().any(|&s| s) {
            if !seen[0] {
                pair.h0 = Contamination::None;
            }
            if !seen[1] {
                pair.h1 = Contamination::None;
            }
        }
        Ok(pair)
    }

    fn constant_lfd(&self, cache: &LfdCache) -> crate::Result<Arc<LfdPair>> {
        let sched = self.eps.resolve()?;
        let (e0, e1) = sched
            .as_constant()
            .ok_or_else(|| crate::error::invalid("eps", "this command needs the same level for every agent"))?;
        cache.get(e0, e1)
    }
}

/// The rules and exact trajectory a config resolves to.
#[derive(Clone, Debug)]
pub struct ResolvedChain {
    pub first: FirstAgentRule,
    /// Rules of agents `2..=n`, or one shared rule.
    pub relays: Vec<RelayRule>,
    pub lfds: Vec<Arc<LfdPair>>,
    pub stages: Vec<StageError>,
    pub report: Option<OptimizationReport>,
    pub phi_delta: Option<PhiDelta>,
}

fn optimize(cfg: &ExperimentConfig, cache: &LfdCache, objective: Objective) -> crate::Result<OptimizationReport> {
    match objective {
        Objective::FiniteDd => optimize_finite_dd(&cfg.chain_config()?, cache, cfg.seed),
        Objective::AsymptoticDd => optimize_asymptotic_dd(&*cfg.constant_lfd(cache)?, cfg.priors),
        Objective::UnknownSl => optimize_unknown_sl(&*cfg.constant_lfd(cache)?, cfg.priors),
    }
}

/// Resolve the rule choice of `cfg` into a concrete chain.
pub fn resolve_chain(cfg: &ExperimentConfig, cache: &LfdCache, objective: Option<Objective>) -> crate::Result<ResolvedChain> {
    let chain = cfg.chain_config()?;
    let lfds = chain.lfds(cache)?;
    let priors = cfg.priors;
    let minimax = FirstAgentRule::minimax(priors);
    let choice = match objective {
        Some(o) => RuleChoice::Optimize(o),
        None => cfg.rule.choice()?,
    };
    let (first, relays, report, phi) = match choice {
        RuleChoice::Relay(r) => (minimax, vec![r], None, None),
        RuleChoice::Social => {
            let traj = social_trajectory(&chain, cache)?.complete()?;
            let relays = if traj.rules.is_empty() { vec![RelayRule::pass_through()] } else { traj.rules };
            (minimax, relays, None, None)
        }
        RuleChoice::Optimize(o) => {
            let report = optimize(cfg, cache, o)?;
            let (first, relays) = match &report.best_rule {
                BestRule::Relay(r) => (minimax, vec![*r]),
                BestRule::Chain { first, relays } if relays.is_empty() => (*first, vec![RelayRule::pass_through()]),
                BestRule::Chain { first, relays } => (*first, relays.clone()),
            };
            (first, relays, Some(report), None)
        }
        RuleChoice::PhiDelta(delta) => {
            let p = phi_delta_scheme(&*cfg.constant_lfd(cache)?, delta)?;
            let or_rule = RelayRule::new(0.0, p.t, 0.0, 0.0)?;
            let relays = (2..=cfg.n.max(2))
                .map(|k| if (k as u64) <= p.n_star { or_rule } else { RelayRule::pass_through() })
                .collect();
            (FirstAgentRule::new(p.t)?, relays, None, Some(p))
        }
    };
    let relays = fit_relays(relays, cfg.n);
    let stages = propagate(&first, &relays, &lfds, priors, cfg.n)?;
    Ok(ResolvedChain {
        first,
        relays,
        lfds,
        stages,
        report,
        phi_delta: phi,
    })
}

fn fit_relays(mut relays: Vec<RelayRule>, n: usize) -> Vec<RelayRule> {
    if relays.len() > 1 {
        relays.truncate(n.saturating_sub(1).max(1));
    }
    relays
}

/// Format with at most 12 significant digits.
pub fn fmt12(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    if rounded == 0.0 || (1e-4..1e15).contains(&rounded.abs()) {
        rounded.to_string()
    } else {
        format!("{rounded:e}")
    }
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Output naming: `<prefix><name>`, parents created on demand.
#[derive(Clone, Debug)]
pub struct Outputs {
    prefix: String,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(prefix: impl Into<String>) -> Self {
        Outputs {
            prefix: prefix.into(),
            written: Vec::new(),
        }
    }

    fn path(&mut self, name: &str) -> anyhow::Result<PathBuf> {
        let p = PathBuf::from(format!("{}{}", self.prefix, name));
        if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        self.written.push(p.clone());
        Ok(p)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

fn stage_rows(stages: &[StageError]) -> Vec<Vec<String>> {
    stages
        .iter()
        .map(|s| vec![s.k.to_string(), fmt12(s.p_f), fmt12(s.p_m), fmt12(s.p_e)])
        .collect()
}

pub const CHAIN_HEADER: [&str; 4] = ["k", "P_F", "P_M", "P_e"];
pub const SIM_HEADER: [&str; 5] = ["k", "P_F_hat", "P_M_hat", "P_e_hat", "se"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Lfd,
    Chain,
    Optimize,
    Simulate,
    Figure,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Lfd => "lfd",
            Command::Chain => "chain",
            Command::Optimize => "optimize",
            Command::Simulate => "simulate",
            Command::Figure => "figure",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    FigRules,
    FigMean,
    FigEps,
}

impl std::str::FromStr for Preset {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "fig-rules" => Ok(Preset::FigRules),
            "fig-mean" => Ok(Preset::FigMean),
            "fig-eps" => Ok(Preset::FigEps),
            _ => bail!("unknown preset {s:?} (expected fig-rules, fig-mean or fig-eps)"),
        }
    }
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::FigRules => "fig-rules",
            Preset::FigMean => "fig-mean",
            Preset::FigEps => "fig-eps",
        }
    }
}

/// Everything a run needs besides the config.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub objective: Option<Objective>,
    pub preset: Option<Preset>,
}

/// What a run produced.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    /// Text for standard output.
    pub stdout: String,
}

/// The numerical example used by the presets: exponential means 1 and 2,
/// equal priors, `ε0 = ε1 = 0.01`.
pub fn example_config() -> ExperimentConfig {
    ExperimentConfig {
        model: NominalPair::exponential(1.0, 2.0).expect("valid means"),
        priors: Priors::uniform(),
        eps: EpsSetting::Level(0.01),
        rule: default_rule(),
        n: 30,
        n_samples: default_samples(),
        seed: 0,
        contamination: Vec::new(),
        out: None,
    }
}

/// Run one command. `cfg` may be absent only for `figure`.
pub fn run(command: Command, cfg: Option<ExperimentConfig>, opts: &RunOptions, out_prefix: &str) -> anyhow::Result<RunOutput> {
    let mut outputs = Outputs::new(out_prefix);
    let cfg = match (command, cfg) {
        (_, Some(c)) => c,
        (Command::Figure, None) => example_config(),
        (_, None) => bail!("`{}` needs --config", command.name()),
    };
    cfg.validate()?;
    let cache = LfdCache::new(cfg.model.clone());
    let mut stdout = String::new();
    let mut extra = serde_json::Map::new();
    match command {
        Command::Lfd => {
            let lfds = cfg.chain_config()?.lfds(&cache)?;
            let l = &lfds[0];
            let first = FirstAgentRule::minimax(cfg.priors);
            let s = crate::engine::first_stage(&first, l.as_ref(), cfg.priors, Law::LeastFavorable);
            let doc = json!({
                "eps0": l.spec.eps0,
                "eps1": l.spec.eps1,
                "c_lo": l.c_lo,
                "c_hi": json_f64(l.c_hi),
                "b": l.b,
                "lstar_range": [l.lstar_range().0, json_f64(l.lstar_range().1)],
                "lstar_atoms": l.lstar_atoms().into_iter().map(json_f64).collect::<Vec<_>>(),
                "residuals": l.residuals,
                "single_agent_minimax_error": s.p_e,
            });
            stdout = serde_json::to_string_pretty(&doc)? + "\n";
            write_json(&outputs.path("lfd.json")?, &doc)?;
        }
        Command::Chain => {
            let rc = resolve_chain(&cfg, &cache, opts.objective)?;
            write_csv(&outputs.path("chain.csv")?, &CHAIN_HEADER, stage_rows(&rc.stages))?;
            extra.insert("rules".into(), rules_json(&rc));
            let last = rc.stages.last().expect("n >= 1");
            writeln!(stdout, "P_e,{} = {}", last.k, fmt12(last.p_e))?;
        }
        Command::Optimize => {
            let objective = match (opts.objective, cfg.rule.choice()?) {
                (Some(o), _) => o,
                (None, RuleChoice::Optimize(o)) => o,
                _ => bail!("no objective: pass --objective or set rule to \"optimize:<objective>\""),
            };
            let rc = resolve_chain(&cfg, &cache, Some(objective))?;
            let report = rc.report.as_ref().expect("optimizer ran");
            write_json(&outputs.path("optimize.json")?, report)?;
            write_csv(&outputs.path("optimize-chain.csv")?, &CHAIN_HEADER, stage_rows(&rc.stages))?;
            writeln!(stdout, "{} value = {}", objective_name(objective), fmt12(report.value))?;
        }
        Command::Simulate => {
            let rc = resolve_chain(&cfg, &cache, opts.objective)?;
            let pair = cfg.contamination_pair()?;
            let lfds: Vec<LfdPair> = if rc.lfds.iter().all(|l| Arc::ptr_eq(l, &rc.lfds[0])) {
                vec![rc.lfds[0].as_ref().clone()]
            } else {
                rc.lfds.iter().map(|l| l.as_ref().clone()).collect()
            };
            let sim = simulate_chain(&rc.first, &rc.relays, &lfds, std::slice::from_ref(&pair), cfg.priors, cfg.n, cfg.n_samples, cfg.seed)?;
            write_csv(
                &outputs.path("simulate.csv")?,
                &SIM_HEADER,
                sim.stages.iter().map(|s| {
                    vec![s.k.to_string(), fmt12(s.p_f), fmt12(s.p_m), fmt12(s.p_e), fmt12(s.se)]
                }),
            )?;
            let summary = sim_summary(&sim, &rc, &pair, cfg.priors, cfg.n)?;
            write_json(&outputs.path("simulate.json")?, &summary)?;
            stdout = serde_json::to_string_pretty(&summary)? + "\n";
        }
        Command::Figure => {
            let preset = opts.preset.context("`figure` needs --preset")?;
            let summary = run_preset(preset, &mut outputs)?;
            stdout = serde_json::to_string_pretty(&summary)? + "\n";
            extra.insert("preset".into(), json!(preset.name()));
        }
    }
    let resolved = cfg.resolved()?;
    let manifest_path = outputs.path("manifest.json")?;
    let files: Vec<String> = outputs.written().iter().map(|p| p.display().to_string()).collect();
    let mut manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command.name(),
        "objective": opts.objective.map(objective_name),
        "config": resolved,
        "tolerances": {
            "breakpoint_bisection": "machine precision",
            "tie": crate::model::REL_TIE,
            "optimizer_sweep": crate::optimize::SWEEP_TOL,
            "verify": crate::optimize::VERIFY_TOL,
            "ordering": crate::sim::ORDERING_TOL,
            "dominance_sigmas": crate::sim::DOMINANCE_SIGMAS,
        },
        "outputs": files,
    });
    manifest.as_object_mut().expect("object").extend(extra);
    write_json(&manifest_path, &manifest)?;
    Ok(RunOutput {
        files: outputs.written().to_vec(),
        stdout,
    })
}

fn json_f64(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn objective_name(o: Objective) -> &'static str {
    match o {
        Objective::FiniteDd => "finite-dd",
        Objective::AsymptoticDd => "asymptotic-dd",
        Objective::UnknownSl => "unknown-sl",
    }
}

fn rules_json(rc: &ResolvedChain) -> serde_json::Value {
    json!({
        "first": rc.first,
        "relays": rc.relays,
        "phi_delta": rc.phi_delta,
    })
}

fn sim_summary(
    sim: &SimResult,
    rc: &ResolvedChain,
    pair: &ContaminationPair,
    priors: Priors,
    n: usize,
) -> anyhow::Result<serde_json::Value> {
    // The exact law the simulation should reproduce, when there is one.
    let law = match (&pair.h0, &pair.h1) {
        (Contamination::LeastFavorable, Contamination::LeastFavorable) => Some(Law::LeastFavorable),
        (Contamination::None, Contamination::None) => Some(Law::Nominal),
        _ => None,
    };
    let bound = &rc.stages;
    let mut max_excess_z = f64::NEG_INFINITY;
    for (s, e) in sim.stages.iter().zip(bound) {
        let floor = 1.0 / sim.n_samples as f64;
        max_excess_z = max_excess_z
            .max((s.p_f - e.p_f) / s.se_f.max(floor))
            .max((s.p_m - e.p_m) / s.se_m.max(floor));
    }
    let mut doc = json!({
        "n_samples": sim.n_samples,
        "seed": sim.seed,
        "contamination": pair,
        "final": sim.stages.last(),
        "lfd_final_p_e": bound.last().map(|s| s.p_e),
        "max_excess_z_over_lfd": max_excess_z,
    });
    if let Some(law) = law {
        let exact = propagate_under(&rc.first, &rc.relays, &rc.lfds, priors, n, law)?;
        let max_abs_z = sim
            .stages
            .iter()
            .zip(&exact)
            .map(|(s, e)| (s.p_e - e.p_e).abs() / s.se.max(1.0 / sim.n_samples as f64))
            .fold(0.0, f64::max);
        doc["exact_law"] = json!(match law {
            Law::LeastFavorable => "least_favorable",
            Law::Nominal => "nominal",
        });
        doc["max_abs_z_vs_exact"] = json!(max_abs_z);
    }
    Ok(doc)
}

/// `φ_A` and `φ_B`: `t1 = b c'`, `p = 1`, `q = 0`, with `t0 = 5` and
/// `t0 = 1.1`. `t0` is capped at the top of the range of `l*`, where every
/// larger threshold acts the same except on the atom.
pub fn example_rules(lfd: &LfdPair) -> crate::Result<(RelayRule, RelayRule)> {
    let t1 = lfd.b * lfd.c_lo;
    let top = lfd.b * lfd.c_hi;
    Ok((RelayRule::new(t1, 5.0f64.min(top), 1.0, 0.0)?, RelayRule::new(t1, 1.1f64.min(top), 1.0, 0.0)?))
}

pub const FIG_RULES_N: usize = 30;
pub const FIG_MEAN_GRID: (f64, f64, usize) = (1.2, 4.0, 15);
pub const FIG_EPS_GRID: (f64, f64, usize) = (0.0, 0.3, 31);

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64).collect()
}

/// Optimized unknown-length SL and asymptotic DD values for one class pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub x: f64,
    pub disjoint: bool,
    pub unknown_sl: f64,
    pub asymptotic_dd: f64,
}

impl SweepPoint {
    pub fn gap(&self) -> f64 {
        self.unknown_sl - self.asymptotic_dd
    }
}

/// Both optimized values at one point; classes that overlap admit nothing
/// better than guessing, which the pair of values records as `0.5`.
pub fn sweep_point(model: NominalPair, eps: f64, priors: Priors, x: f64) -> crate::Result<SweepPoint> {
    match LfdPair::solve(model, eps, eps) {
        Ok(l) => {
            let sl = optimize_unknown_sl(&l, priors)?;
            let dd = optimize_asymptotic_dd(&l, priors)?;
            Ok(SweepPoint {
                x,
                disjoint: true,
                unknown_sl: sl.value,
                asymptotic_dd: dd.value,
            })
        }
        Err(Error::NotDisjoint { .. }) => {
            let guess = priors.pi0().min(priors.pi1());
            Ok(SweepPoint {
                x,
                disjoint: false,
                unknown_sl: guess,
                asymptotic_dd: guess,
            })
        }
        Err(e) => Err(e),
    }
}

pub fn fig_mean_sweep() -> crate::Result<Vec<SweepPoint>> {
    let (lo, hi, n) = FIG_MEAN_GRID;
    linspace(lo, hi, n)
        .into_iter()
        .map(|m1| sweep_point(NominalPair::exponential(1.0, m1)?, 0.01, Priors::uniform(), m1))
        .collect()
}

pub fn fig_eps_sweep() -> crate::Result<Vec<SweepPoint>> {
    let (lo, hi, n) = FIG_EPS_GRID;
    linspace(lo, hi, n)
        .into_iter()
        .map(|e| {
            // Round the grid so 0.01 steps print and compare exactly.
            let e = (e * 1e6).round() / 1e6;
            sweep_point(NominalPair::exponential(1.0, 2.0)?, e, Priors::uniform(), e)
        })
        .collect()
}

fn sweep_rows(points: &[SweepPoint]) -> Vec<Vec<String>> {
    points
        .iter()
        .map(|p| {
            vec![
                fmt12(p.x),
                (p.disjoint as u8).to_string(),
                fmt12(p.unknown_sl),
                fmt12(p.asymptotic_dd),
                fmt12(p.gap()),
            ]
        })
        .collect()
}

fn run_preset(preset: Preset, outputs: &mut Outputs) -> anyhow::Result<serde_json::Value> {
    match preset {
        Preset::FigRules => {
            let cfg = example_config();
            let cache = LfdCache::new(cfg.model.clone());
            let lfd = cfg.constant_lfd(&cache)?;
            let (a, b) = example_rules(&lfd)?;
            let first = FirstAgentRule::minimax(cfg.priors);
            let mut summary = serde_json::Map::new();
            for (name, rule) in [("phi-a", a), ("phi-b", b)] {
                let stages = propagate(&first, &[rule], &[lfd.as_ref()], cfg.priors, FIG_RULES_N)?;
                write_csv(&outputs.path(&format!("fig-rules-{name}.csv"))?, &CHAIN_HEADER, stage_rows(&stages))?;
                let (sl, br) = unknown_sl_value(&rule, &lfd, cfg.priors);
                summary.insert(
                    name.into(),
                    json!({
                        "rule": rule,
                        "p_e2": br.p_e2,
                        "p_inf": br.p_inf,
                        "sup_over_k_ge_2": sl,
                        "worst_at_stage_two": br.at_stage_two,
                        "asymptotic_dd_value": asymptotic_dd_value(&rule, &lfd, cfg.priors),
                    }),
                );
            }
            let v = serde_json::Value::Object(summary);
            write_json(&outputs.path("fig-rules.json")?, &v)?;
            Ok(v)
        }
        Preset::FigMean | Preset::FigEps => {
            let (name, col, points) = match preset {
                Preset::FigMean => ("fig-mean", "m1", fig_mean_sweep()?),
                _ => ("fig-eps", "eps", fig_eps_sweep()?),
            };
            write_csv(
                &outputs.path(&format!("{name}.csv"))?,
                &[col, "disjoint", "unknown_sl", "asymptotic_dd", "gap"],
                sweep_rows(&points),
            )?;
            Ok(json!({ "preset": name, "points": points.len() }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt12(0.38125), "0.38125");
        assert_eq!(fmt12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt12(f64::INFINITY), "inf");
        assert_eq!(fmt12(0.0), "0");
        assert_eq!(fmt12(1.1102230246251565e-16), "1.11022302463e-16");
        assert_eq!(fmt12(-2.5e-7).parse::<f64>().unwrap(), -2.5e-7);
    }

    #[test]
    fn eps_formulas() {
        let f = |s: &str| EpsSetting::Formula(s.into()).resolve();
        assert_eq!(f("0.5/k").unwrap(), EpsSchedule::Harmonic { a0: 0.5, a1: 0.5 });
        assert_eq!(f("0.1/k, 0.2/k").unwrap(), EpsSchedule::Harmonic { a0: 0.1, a1: 0.2 });
        assert_eq!(f("0.01").unwrap(), EpsSchedule::constant(0.01));
        assert!(f("0.1/k,0.2").is_err());
        assert!(f("k/2").is_err());
    }

    #[test]
    fn rule_specs() {
        let named = |s: &str| RuleSpec::Named(s.into()).choice();
        assert_eq!(named("social").unwrap(), RuleChoice::Social);
        assert_eq!(named("optimize:unknown-sl").unwrap(), RuleChoice::Optimize(Objective::UnknownSl));
        assert_eq!(named("phi-delta:0.05").unwrap(), RuleChoice::PhiDelta(0.05));
        assert!(named("optimize:fastest").is_err());
        assert!(named("greedy").is_err());
    }

    #[test]
    fn config_errors_name_the_field() {
        let bad = r#"{"model": {"kind": "exponential_means", "m0": 1.0, "m1": 2.0}, "n": 0}"#;
        let msg = format!("{:#}", ExperimentConfig::from_json(bad).unwrap_err());
        assert!(msg.contains("`n`"), "{msg}");
        let typo = r#"{"model": {"kind": "exponential_means", "m0": 1.0, "m1": 2.0}, "seeed": 1}"#;
        let msg = format!("{:#}", ExperimentConfig::from_json(typo).unwrap_err());
        assert!(msg.contains("seeed") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn manifest_is_accepted_as_config() {
        let cfg = example_config();
        let manifest = json!({ "command": "chain", "config": cfg.resolved().unwrap() });
        let back = ExperimentConfig::from_json(&manifest.to_string()).unwrap();
        assert_eq!(back.resolved().unwrap(), cfg.resolved().unwrap());
    }

    #[test]
    fn phi_delta_chain_meets_delta() {
        let mut cfg = example_config();
        cfg.eps = EpsSetting::Schedule(EpsSchedule::Constant { eps0: 0.0, eps1: 0.05 });
        cfg.rule = RuleSpec::Named("phi-delta:0.05".into());
        let cache = LfdCache::new(cfg.model.clone());
        let p = phi_delta_scheme(&cfg.constant_lfd(&cache).unwrap(), 0.05).unwrap();
        cfg.n = p.n_star as usize + 3;
        let rc = resolve_chain(&cfg, &cache, None).unwrap();
        let last = rc.stages.last().unwrap();
        assert!((last.p_f - p.p_f).abs() < 1e-12, "{last:?} {p:?}");
        assert!((last.p_m - p.p_m).abs() < 1e-12);
        assert!(last.p_f < 0.05 && last.p_m < 0.05);
    }

    #[test]
    fn contamination_defaults() {
        let mut cfg = example_config();
        assert_eq!(cfg.contamination_pair().unwrap(), ContaminationPair::least_favorable());
        cfg.contamination = vec![ContaminationSpec {
            kind: Contamination::PointMass { y: 3.0 },
            applies_to: crate::model::Hypothesis::H0,
        }];
        let p = cfg.contamination_pair().unwrap();
        assert_eq!(p.h1, Contamination::None);
    }

    proptest::proptest! {
        #[test]
        fn config_round_trips(m1 in 1.1f64..6.0, pi0 in 0.05f64..0.95, eps in 0.0f64..0.1, n in 1usize..60,
                              seed in proptest::prelude::any::<u64>(), harmonic in proptest::prelude::any::<bool>()) {
            let cfg = ExperimentConfig {
                model: NominalPair::exponential(1.0, m1).unwrap(),
                priors: Priors::new(pi0).unwrap(),
                eps: if harmonic { EpsSetting::Formula(format!("{eps}/k")) } else { EpsSetting::Level(eps) },
                rule: RuleSpec::Named("optimize:asymptotic-dd".into()),
                n,
                n_samples: 1000,
                seed,
                contamination: Vec::new(),
                out: None,
            };
            let text = serde_json::to_string(&cfg.resolved().unwrap()).unwrap();
            let back = ExperimentConfig::from_json(&text).unwrap();
            proptest::prop_assert_eq!(back.resolved().unwrap(), cfg.resolved().unwrap());
        }
    }
}
