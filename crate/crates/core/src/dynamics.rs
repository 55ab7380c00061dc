//! The extraction-rate update map and orbit simulation.
//!
//! A [`MarketInstance`] fixes the users' and miners' tolerance laws, the
//! target participation ratio `w` and an optional burn policy. Its target
//! function is `Δ(λ) = 1 − F(λ) − w·G(k·λ)`, which is strictly decreasing
//! with `Δ(0) = 1`, so it has a unique root `λ*` in `(0, 1)`.
//!
//! Four update maps share the form `λ + η·s(λ)·Δ(λ)` and differ only in the
//! scale `s` and in how the result is projected back to the admissible range.

use std::fmt;
use std::io::{self, Write};

use crate::distributions::ToleranceDistribution;
use crate::error::{Error, Result};
use crate::rng::{self, StreamTag};

/// `|Δ(λ)|` below this leaves λ unchanged, pinning the interior fixed point.
pub const DELTA_FIXED_EPS: f64 = 1e-15;
pub const DEFAULT_LAMBDA_STAR_TOL: f64 = 1e-12;
const BISECTION_MAX_ITER: usize = 200;
const SIGN_PROBE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum BurnPolicy {
    None,
    /// Miners keep a fixed fraction `k ∈ (0, 1]` of their share.
    Constant(f64),
    /// `k` is redrawn uniformly from `[lo, hi]` at every step.
    Sampled {
        lo: f64,
        hi: f64,
        seed: u64,
    },
}

impl BurnPolicy {
    fn validate(&self) -> Result<()> {
        match *self {
            BurnPolicy::None => Ok(()),
            BurnPolicy::Constant(k) if k > 0.0 && k <= 1.0 => Ok(()),
            BurnPolicy::Constant(k) => Err(Error::argument(format!("burn fraction k must lie in (0,1], got {k}"))),
            BurnPolicy::Sampled { lo, hi, .. } if lo > 0.0 && lo <= hi && hi <= 1.0 => Ok(()),
            BurnPolicy::Sampled { lo, hi, .. } => Err(Error::argument(format!(
                "sampled burn range must satisfy 0 < lo <= hi <= 1, got [{lo}, {hi}]"
            ))),
        }
    }

    /// The `k` used for reference quantities such as `λ*`; the midpoint for
    /// sampled policies.
    pub fn reference_k(&self) -> f64 {
        match *self {
            BurnPolicy::None => 1.0,
            BurnPolicy::Constant(k) => k,
            BurnPolicy::Sampled { lo, hi, .. } => 0.5 * (lo + hi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UpdateRule {
    /// `h(λ) = λ + ηλ(1−λ)Δ(λ)`, clamped to `[0, 1]`.
    Full,
    /// `h₁(λ) = λ + ηλΔ(λ)`, clamped below at 0.
    MinerScaled,
    /// `h₂(λ) = λ + η(1−λ)Δ(λ)`, clamped above at 1.
    UserScaled,
    /// `h₃(λ) = λ + ηΔ(λ)`, unprojected.
    Plain,
}

impl UpdateRule {
    pub const ALL: [UpdateRule; 4] = [
        UpdateRule::Full,
        UpdateRule::MinerScaled,
        UpdateRule::UserScaled,
        UpdateRule::Plain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UpdateRule::Full => "full",
            UpdateRule::MinerScaled => "miner_scaled",
            UpdateRule::UserScaled => "user_scaled",
            UpdateRule::Plain => "plain",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name() == s)
    }

    pub fn admissible(self, lambda: f64) -> bool {
        match self {
            UpdateRule::Full => (0.0..=1.0).contains(&lambda),
            UpdateRule::MinerScaled => lambda >= 0.0 && lambda.is_finite(),
            UpdateRule::UserScaled => lambda <= 1.0 && lambda.is_finite(),
            UpdateRule::Plain => lambda.is_finite(),
        }
    }

    pub fn admissible_range(self) -> &'static str {
        match self {
            UpdateRule::Full => "[0, 1]",
            UpdateRule::MinerScaled => "[0, inf)",
            UpdateRule::UserScaled => "(-inf, 1]",
            UpdateRule::Plain => "(-inf, inf)",
        }
    }

    fn scale(self, l: f64) -> f64 {
        match self {
            UpdateRule::Full => l * (1.0 - l),
            UpdateRule::MinerScaled => l,
            UpdateRule::UserScaled => 1.0 - l,
            UpdateRule::Plain => 1.0,
        }
    }

    fn scale_slope(self, l: f64) -> f64 {
        match self {
            UpdateRule::Full => 1.0 - 2.0 * l,
            UpdateRule::MinerScaled => 1.0,
            UpdateRule::UserScaled => -1.0,
            UpdateRule::Plain => 0.0,
        }
    }

    fn project(self, x: f64) -> f64 {
        match self {
            UpdateRule::Full => x.clamp(0.0, 1.0),
            UpdateRule::MinerScaled => x.max(0.0),
            UpdateRule::UserScaled => x.min(1.0),
            UpdateRule::Plain => x,
        }
    }
}

impl fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-step MEV multipliers `m_t`, giving `η_t = η·m_t`.
#[derive(Debug, Clone, PartialEq)]
pub enum MevSequence {
    Constant(f64),
    /// Repeated cyclically when shorter than the run.
    Series(Vec<f64>),
    Sampled {
        lo: f64,
        hi: f64,
        seed: u64,
    },
}

impl Default for MevSequence {
    fn default() -> Self {
        MevSequence::Constant(1.0)
    }
}

impl MevSequence {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            MevSequence::Constant(m) => *m > 0.0 && m.is_finite(),
            MevSequence::Series(v) => !v.is_empty() && v.iter().all(|m| *m > 0.0 && m.is_finite()),
            MevSequence::Sampled { lo, hi, .. } => *lo > 0.0 && lo <= hi && hi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::argument(format!(
                "MEV values must be positive and finite: {self:?}"
            )))
        }
    }

    /// The first `n` multipliers.
    pub fn take(&self, n: usize) -> Vec<f64> {
        match self {
            MevSequence::Constant(m) => vec![*m; n],
            MevSequence::Series(v) => v.iter().copied().cycle().take(n).collect(),
            MevSequence::Sampled { lo, hi, seed } => {
                let mut rng = rng::substream(*seed, StreamTag::Mev, 0);
                (0..n).map(|_| rng::uniform(&mut rng, *lo, *hi)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketInstance {
    users: ToleranceDistribution,
    miners: ToleranceDistribution,
    w: f64,
    burn: BurnPolicy,
    lambda_star: f64,
}

impl MarketInstance {
    pub fn new(users: ToleranceDistribution, miners: ToleranceDistribution, w: f64) -> Result<Self> {
        Self::with_burn(users, miners, w, BurnPolicy::None)
    }

    pub fn with_burn(
        users: ToleranceDistribution,
        miners: ToleranceDistribution,
        w: f64,
        burn: BurnPolicy,
    ) -> Result<Self> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::argument(format!("target ratio w must be positive, got {w}")));
        }
        burn.validate()?;
        let mut inst = MarketInstance {
            users,
            miners,
            w,
            burn,
            lambda_star: f64::NAN,
        };
        let k = inst.burn.reference_k();
        if !(inst.delta(1.0, k) < 0.0) {
            return Err(Error::argument(format!(
                "target function is not negative at lambda=1 (w*G(k)={}), no interior root",
                w * inst.miners.cdf(k)
            )));
        }
        let root = inst.bisect_root(0.0, k)?;
        let below = inst.delta((root - SIGN_PROBE).max(0.0), k);
        let above = inst.delta((root + SIGN_PROBE).min(1.0), k);
        if !(below > 0.0 && above < 0.0) {
            return Err(Error::argument(format!(
                "target function has no strict sign change at its root {root}: \
                 the interior fixed point is not unique"
            )));
        }
        inst.lambda_star = root;
        Ok(inst)
    }

    pub fn users(&self) -> &ToleranceDistribution {
        &self.users
    }

    pub fn miners(&self) -> &ToleranceDistribution {
        &self.miners
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn burn(&self) -> &BurnPolicy {
        &self.burn
    }

    /// Same tolerance laws and target under a different burn policy.
    pub fn reburned(&self, burn: BurnPolicy) -> Result<Self> {
        Self::with_burn(self.users.clone(), self.miners.clone(), self.w, burn)
    }

    /// `Δ(λ) = 1 − F(λ) − w·G(k·λ)`.
    #[inline]
    pub fn delta(&self, lambda: f64, k: f64) -> f64 {
        self.users.survival(lambda) - self.w * self.miners.cdf(k * lambda)
    }

    /// `Δ` at the policy's reference `k`.
    #[inline]
    pub fn delta_ref(&self, lambda: f64) -> f64 {
        self.delta(lambda, self.burn.reference_k())
    }

    /// `Δ′(λ) = −f(λ) − w·k·g(k·λ)`.
    pub fn delta_slope(&self, lambda: f64) -> Result<f64> {
        let k = self.burn.reference_k();
        Ok(-self.users.pdf(lambda)? - self.w * k * self.miners.pdf(k * lambda)?)
    }

    /// The interior root of `Δ`, bisected to machine precision at construction.
    pub fn lambda_star(&self) -> f64 {
        self.lambda_star
    }

    /// Root of `Δ` by bisection on `[0, 1]` until the bracket is narrower than `tol`.
    pub fn lambda_star_tol(&self, tol: f64) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::argument(format!("tolerance must be positive, got {tol}")));
        }
        self.bisect_root(tol, self.burn.reference_k())
    }

    fn bisect_root(&self, tol: f64, k: f64) -> Result<f64> {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        if !(self.delta(lo, k) > 0.0 && self.delta(hi, k) < 0.0) {
            return Err(Error::Internal(
                "target function does not bracket a root on [0,1]".into(),
            ));
        }
        for _ in 0..BISECTION_MAX_ITER {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let d = self.delta(mid, k);
            if d == 0.0 {
                return Ok(mid);
            }
            if d > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= tol {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// One update of `rule` from `lambda` with intensity `eta_t` and burn `k`.
    #[inline]
    pub fn step(&self, rule: UpdateRule, lambda: f64, eta_t: f64, k: f64) -> f64 {
        self.advance(rule, lambda, eta_t, self.delta(lambda, k))
    }

    /// Update given an already evaluated `Δ(λ)`.
    #[inline]
    pub fn advance(&self, rule: UpdateRule, lambda: f64, eta_t: f64, delta: f64) -> f64 {
        if delta.abs() < DELTA_FIXED_EPS {
            return lambda;
        }
        rule.project(lambda + eta_t * rule.scale(lambda) * delta)
    }

    /// `Φ(λ) = (ln λ − ln λ*)²`.
    pub fn potential(&self, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::domain(format!("potential needs lambda in (0,1), got {lambda}")));
        }
        let d = lambda.ln() - self.lambda_star.ln();
        Ok(d * d)
    }

    /// Analytic derivative of the unprojected update map at `lambda`.
    pub fn rule_derivative(&self, rule: UpdateRule, lambda: f64, eta: f64) -> Result<f64> {
        let delta = self.delta_ref(lambda);
        let slope = self.delta_slope(lambda)?;
        Ok(1.0 + eta * (rule.scale_slope(lambda) * delta + rule.scale(lambda) * slope))
    }

    /// Derivative of the projected map: zero where the projection is active.
    pub fn step_derivative(&self, rule: UpdateRule, lambda: f64, eta: f64) -> Result<f64> {
        let raw = lambda + eta * rule.scale(lambda) * self.delta_ref(lambda);
        if rule.project(raw) != raw {
            return Ok(0.0);
        }
        self.rule_derivative(rule, lambda, eta)
    }

    /// `T` updates of `rule` from `lambda0` with `η_t = η·m_t`.
    pub fn simulate(
        &self,
        rule: UpdateRule,
        lambda0: f64,
        eta: f64,
        mev: &MevSequence,
        steps: usize,
    ) -> Result<OrbitTrace> {
        if !rule.admissible(lambda0) {
            return Err(Error::precondition(format!(
                "lambda0={lambda0} is outside the admissible range {} of the {rule} rule",
                rule.admissible_range()
            )));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::precondition(format!("eta must be positive, got {eta}")));
        }
        if steps == 0 {
            return Err(Error::precondition("simulation needs at least one step"));
        }
        mev.validate()?;

        let n = steps + 1;
        let etas: Vec<f64> = mev.take(n).into_iter().map(|m| eta * m).collect();
        let ks: Vec<f64> = match self.burn {
            BurnPolicy::Sampled { lo, hi, seed } => {
                let mut rng = rng::substream(seed, StreamTag::Burn, 0);
                (0..n).map(|_| rng::uniform(&mut rng, lo, hi)).collect()
            }
            _ => vec![self.burn.reference_k(); n],
        };

        let mut lambdas = Vec::with_capacity(n);
        let mut deltas = Vec::with_capacity(n);
        let mut l = lambda0;
        for t in 0..n {
            let d = self.delta(l, ks[t]);
            lambdas.push(l);
            deltas.push(d);
            if t < steps {
                l = self.advance(rule, l, etas[t], d);
            }
        }
        Ok(OrbitTrace {
            lambdas,
            deltas,
            etas,
            ks,
            rule,
            description: self.to_string(),
        })
    }
}

impl fmt::Display for MarketInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F={}, G={}, w={}", self.users, self.miners, self.w)?;
        match self.burn {
            BurnPolicy::None => Ok(()),
            BurnPolicy::Constant(k) => write!(f, ", burn k={k}"),
            BurnPolicy::Sampled { lo, hi, seed } => write!(f, ", burn k~U[{lo}, {hi}] seed={seed}"),
        }
    }
}

/// Time series `λ_t, Δ(λ_t), η_t` for `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitTrace {
    pub lambdas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub etas: Vec<f64>,
    /// Burn fraction in effect at each step.
    pub ks: Vec<f64>,
    pub rule: UpdateRule,
    pub description: String,
}

impl OrbitTrace {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn last_lambda(&self) -> f64 {
        *self.lambdas.last().expect("trace holds at least the initial point")
    }

    /// CSV with header `t,lambda,delta,eta_t`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,lambda,delta,eta_t")?;
        for t in 0..self.len() {
            writeln!(out, "{t},{},{},{}", self.lambdas[t], self.deltas[t], self.etas[t])?;
        }
        Ok(())
    }
}
