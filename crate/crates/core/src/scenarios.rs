//! Composite experiments: regime switching, randomized stress runs, MEV burn
//! and side-by-side rule comparison.

use std::collections::BTreeMap;
use std::io::{self, Write};

use crate::analysis::attracting_range;
use crate::distributions::ToleranceDistribution;
use crate::dynamics::{BurnPolicy, MarketInstance, MevSequence, OrbitTrace, UpdateRule};
use crate::error::{Error, Result};
use crate::rng::{self, StreamTag};

#[derive(Debug, Clone, PartialEq)]
pub struct Regime {
    pub inst: MarketInstance,
    pub eta: f64,
}

/// Two markets joined by a threshold on λ: regime 1 applies while
/// `λ_t ≤ θ`, regime 2 while `λ_t > θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeConfig {
    pub regime1: Regime,
    pub regime2: Regime,
    pub theta: f64,
    pub steps: usize,
    pub epoch_len: usize,
}

impl RegimeConfig {
    /// θ = 0.408, η₁ = 0.9, w₁ = 1.1, η₂ = 1.0 with illustrative truncated
    /// Normal tolerances: N(0.35, 0.01)/N(0.45, 0.01) in regime 1 and
    /// N(0.4, 0.01)/N(0.5, 0.01) with w₂ = 1.6 in regime 2.
    pub fn reference() -> Self {
        let tn = |mu| ToleranceDistribution::truncated_normal(mu, 0.01).expect("valid reference law");
        RegimeConfig {
            regime1: Regime {
                inst: MarketInstance::new(tn(0.35), tn(0.45), 1.1).expect("valid reference market"),
                eta: 0.9,
            },
            regime2: Regime {
                inst: MarketInstance::new(tn(0.4), tn(0.5), 1.6).expect("valid reference market"),
                eta: 1.0,
            },
            theta: 0.408,
            steps: 5000,
            epoch_len: 50,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::argument(format!("theta must lie in (0,1), got {}", self.theta)));
        }
        if self.steps == 0 || self.epoch_len == 0 {
            return Err(Error::argument("steps and epoch_len must be positive"));
        }
        for r in [&self.regime1, &self.regime2] {
            if !(r.eta > 0.0 && r.eta.is_finite()) {
                return Err(Error::argument(format!("regime eta must be positive, got {}", r.eta)));
            }
        }
        Ok(())
    }

    fn regime(&self, lambda: f64) -> (u8, &Regime) {
        if lambda <= self.theta {
            (1, &self.regime1)
        } else {
            (2, &self.regime2)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressConfig {
    pub n_epochs: usize,
    pub blocks_per_epoch: usize,
    pub eta_range: (f64, f64),
    pub w_range: (f64, f64),
    pub beta_perturb_every: usize,
    /// Ranges for `(a_u, b_u, a_m, b_m)`.
    pub beta_param_ranges: [(f64, f64); 4],
    pub seed: u64,
}

impl Default for StressConfig {
    fn default() -> Self {
        StressConfig {
            n_epochs: 100,
            blocks_per_epoch: 50,
            eta_range: (0.4, 1.0),
            w_range: (0.5, 2.0),
            beta_perturb_every: 10,
            beta_param_ranges: [(1.5, 6.0); 4],
            seed: 0,
        }
    }
}

impl StressConfig {
    fn validate(&self) -> Result<()> {
        if self.n_epochs == 0 || self.blocks_per_epoch == 0 || self.beta_perturb_every == 0 {
            return Err(Error::argument("epoch counts and perturbation period must be positive"));
        }
        let positive = |name: &str, (lo, hi): (f64, f64)| {
            if lo > 0.0 && lo <= hi && hi.is_finite() {
                Ok(())
            } else {
                Err(Error::argument(format!(
                    "{name} range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
                )))
            }
        };
        positive("eta", self.eta_range)?;
        positive("w", self.w_range)?;
        for r in self.beta_param_ranges {
            positive("beta shape", r)?;
        }
        Ok(())
    }
}

/// Parameters in force over a run of consecutive steps.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub start: usize,
    pub len: usize,
    pub eta: f64,
    pub w: f64,
    /// `(a_u, b_u, a_m, b_m)` when both laws are Beta.
    pub beta: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub min_lambda: f64,
    pub max_lambda: f64,
    pub max_abs_delta: f64,
    /// Share of steps whose λ lies in the attracting band of its segment.
    pub band_fraction: f64,
    /// Exits from a segment's band after entering it within that segment.
    pub band_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub trace: OrbitTrace,
    /// Regime applied at each step, for regime runs.
    pub regimes: Option<Vec<u8>>,
    pub epochs: Vec<EpochRecord>,
    pub summary: Summary,
}

impl ScenarioResult {
    /// `t,lambda,delta,eta_t,regime`; the regime cell is empty outside regime runs.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,lambda,delta,eta_t,regime")?;
        let tr = &self.trace;
        for t in 0..tr.len() {
            let regime = self.regimes.as_ref().map(|r| r[t].to_string()).unwrap_or_default();
            writeln!(out, "{t},{},{},{},{regime}", tr.lambdas[t], tr.deltas[t], tr.etas[t])?;
        }
        Ok(())
    }

    /// `epoch,eta,w,a_u,b_u,a_m,b_m`, one row per parameter segment.
    pub fn write_epoch_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "epoch,eta,w,a_u,b_u,a_m,b_m")?;
        for e in &self.epochs {
            let shapes = match e.beta {
                Some([a, b, c, d]) => format!("{a},{b},{c},{d}"),
                None => ",,,".to_string(),
            };
            writeln!(out, "{},{},{},{shapes}", e.epoch, e.eta, e.w)?;
        }
        Ok(())
    }
}

fn check_interior(lambda0: f64) -> Result<()> {
    if lambda0 > 0.0 && lambda0 < 1.0 {
        Ok(())
    } else {
        Err(Error::precondition(format!("lambda0 must lie in (0,1), got {lambda0}")))
    }
}

/// Tracks band entry and exits per parameter segment.
#[derive(Default)]
struct BandTracker {
    inside_steps: usize,
    total: usize,
    violations: usize,
    entered: bool,
}

impl BandTracker {
    fn reset(&mut self) {
        self.entered = false;
    }

    fn observe(&mut self, lambda: f64, band: (f64, f64)) {
        let now = lambda >= band.0 && lambda <= band.1;
        if self.entered && !now {
            self.violations += 1;
        }
        self.entered |= now;
        self.inside_steps += now as usize;
        self.total += 1;
    }
}

fn summarize(trace: &OrbitTrace, band: &BandTracker) -> Summary {
    let (min_lambda, max_lambda) = trace
        .lambdas
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| {
            (lo.min(l), hi.max(l))
        });
    Summary {
        min_lambda,
        max_lambda,
        max_abs_delta: trace.deltas.iter().fold(0.0, |m, d| m.max(d.abs())),
        band_fraction: if band.total == 0 {
            0.0
        } else {
            band.inside_steps as f64 / band.total as f64
        },
        band_violations: band.violations,
    }
}

fn beta_params(inst: &MarketInstance) -> Option<[f64; 4]> {
    let (a, b) = inst.users().beta_shapes()?;
    let (c, d) = inst.miners().beta_shapes()?;
    Some([a, b, c, d])
}

/// Full-rule run switching between two markets at threshold θ.
pub fn run_regime(cfg: &RegimeConfig, lambda0: f64) -> Result<ScenarioResult> {
    cfg.validate()?;
    check_interior(lambda0)?;
    let n = cfg.steps + 1;
    let (mut lambdas, mut deltas, mut etas, mut ks, mut regimes) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    let bands = [
        attracting_range(&cfg.regime1.inst, cfg.regime1.eta)?,
        attracting_range(&cfg.regime2.inst, cfg.regime2.eta)?,
    ];
    let mut band = BandTracker::default();
    let mut epochs = Vec::new();
    let mut prev_regime = 0;
    let mut l = lambda0;
    for t in 0..n {
        let (id, r) = cfg.regime(l);
        let k = r.inst.burn().reference_k();
        if t % cfg.epoch_len == 0 {
            epochs.push(EpochRecord {
                epoch: t / cfg.epoch_len,
                start: t,
                len: cfg.epoch_len.min(n - t),
                eta: r.eta,
                w: r.inst.w(),
                beta: beta_params(&r.inst),
            });
        }
        if id != prev_regime {
            band.reset();
            prev_regime = id;
        }
        band.observe(l, bands[id as usize - 1]);
        let d = r.inst.delta(l, k);
        lambdas.push(l);
        deltas.push(d);
        etas.push(r.eta);
        ks.push(k);
        regimes.push(id);
        if t + 1 < n {
            l = r.inst.advance(UpdateRule::Full, l, r.eta, d);
        }
    }
    let trace = OrbitTrace {
        lambdas,
        deltas,
        etas,
        ks,
        rule: UpdateRule::Full,
        description: format!(
            "regime switch at theta={}: [{}] eta={} | [{}] eta={}",
            cfg.theta, cfg.regime1.inst, cfg.regime1.eta, cfg.regime2.inst, cfg.regime2.eta
        ),
    };
    let summary = summarize(&trace, &band);
    Ok(ScenarioResult {
        trace,
        regimes: Some(regimes),
        epochs,
        summary,
    })
}

/// Full-rule run whose η and w are redrawn every epoch and whose Beta
/// tolerance shapes are redrawn every `beta_perturb_every` blocks.
///
/// Epoch `e` draws from stream `(seed, Epoch, e)` and the `p`-th
/// perturbation from `(seed, Perturbation, p)`, so the draws never shift
/// when the run is recorded differently.
pub fn run_stress(cfg: &StressConfig, lambda0: f64) -> Result<ScenarioResult> {
    cfg.validate()?;
    check_interior(lambda0)?;
    let total = cfg.n_epochs * cfg.blocks_per_epoch;
    let n = total + 1;
    let (mut lambdas, mut deltas, mut etas, mut ks) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    let mut epochs = Vec::new();
    let mut band = BandTracker::default();

    let draw = |rng: &mut rand_chacha::ChaCha8Rng, (lo, hi): (f64, f64)| rng::uniform(rng, lo, hi);
    let mut eta = 0.0;
    let mut w = 0.0;
    let mut shapes = [0.0; 4];
    let mut inst: Option<MarketInstance> = None;
    let mut range = (0.0, 1.0);
    let mut l = lambda0;
    let mut perturbations = 0u64;
    for t in 0..n {
        let epoch = (t / cfg.blocks_per_epoch).min(cfg.n_epochs - 1);
        let new_epoch = t % cfg.blocks_per_epoch == 0 && t < total;
        let perturb = t % cfg.beta_perturb_every == 0 && t < total;
        if new_epoch {
            let mut r = rng::substream(cfg.seed, StreamTag::Epoch, epoch as u64);
            eta = draw(&mut r, cfg.eta_range);
            w = draw(&mut r, cfg.w_range);
        }
        if perturb {
            let mut r = rng::substream(cfg.seed, StreamTag::Perturbation, perturbations);
            perturbations += 1;
            for (s, range) in shapes.iter_mut().zip(cfg.beta_param_ranges) {
                *s = draw(&mut r, range);
            }
        }
        if new_epoch || perturb {
            let m = MarketInstance::new(
                ToleranceDistribution::beta(shapes[0], shapes[1])?,
                ToleranceDistribution::beta(shapes[2], shapes[3])?,
                w,
            )?;
            range = attracting_range(&m, eta)?;
            inst = Some(m);
            band.reset();
            let seg_end =
                (t + cfg.beta_perturb_every - t % cfg.beta_perturb_every).min((epoch + 1) * cfg.blocks_per_epoch);
            epochs.push(EpochRecord {
                epoch,
                start: t,
                len: seg_end - t,
                eta,
                w,
                beta: Some(shapes),
            });
        }
        let m = inst.as_ref().expect("parameters are drawn at t = 0");
        band.observe(l, range);
        let d = m.delta(l, 1.0);
        lambdas.push(l);
        deltas.push(d);
        etas.push(eta);
        ks.push(1.0);
        if t < total {
            l = m.advance(UpdateRule::Full, l, eta, d);
        }
    }
    let trace = OrbitTrace {
        lambdas,
        deltas,
        etas,
        ks,
        rule: UpdateRule::Full,
        description: format!("stress test seed={}", cfg.seed),
    };
    let summary = summarize(&trace, &band);
    Ok(ScenarioResult {
        trace,
        regimes: None,
        epochs,
        summary,
    })
}

/// Full-rule run of `inst` under a burn policy.
pub fn run_burn(
    inst: &MarketInstance,
    burn: BurnPolicy,
    eta: f64,
    lambda0: f64,
    steps: usize,
) -> Result<ScenarioResult> {
    if burn == BurnPolicy::None {
        return Err(Error::argument("run_burn needs a burn policy other than none"));
    }
    let burned = inst.reburned(burn)?;
    let trace = burned.simulate(UpdateRule::Full, lambda0, eta, &MevSequence::default(), steps)?;
    let mut band = BandTracker::default();
    let range = attracting_range(&burned, eta)?;
    for &l in &trace.lambdas {
        band.observe(l, range);
    }
    let summary = summarize(&trace, &band);
    Ok(ScenarioResult {
        epochs: vec![EpochRecord {
            epoch: 0,
            start: 0,
            len: trace.len(),
            eta,
            w: burned.w(),
            beta: beta_params(&burned),
        }],
        trace,
        regimes: None,
        summary,
    })
}

/// All four update rules from the same start.
pub fn run_rule_comparison(
    inst: &MarketInstance,
    eta: f64,
    lambda0: f64,
    steps: usize,
) -> Result<BTreeMap<UpdateRule, OrbitTrace>> {
    UpdateRule::ALL
        .into_iter()
        .map(|rule| Ok((rule, inst.simulate(rule, lambda0, eta, &MevSequence::default(), steps)?)))
        .collect()
}

/// Aligned CSV `t,full,miner_scaled,user_scaled,plain`.
pub fn write_rule_comparison_csv<W: Write>(traces: &BTreeMap<UpdateRule, OrbitTrace>, mut out: W) -> io::Result<()> {
    let names: Vec<&str> = traces.keys().map(|r| r.name()).collect();
    writeln!(out, "t,{}", names.join(","))?;
    let len = traces.values().map(OrbitTrace::len).min().unwrap_or(0);
    for t in 0..len {
        let row: Vec<String> = traces.values().map(|tr| tr.lambdas[t].to_string()).collect();
        writeln!(out, "{t},{}", row.join(","))?;
    }
    Ok(())
}
