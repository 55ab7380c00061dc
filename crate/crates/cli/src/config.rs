//! Run configuration: one JSON document, overridable by dotted-path flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use mevrate::scenarios::{Regime, RegimeConfig, StressConfig};
use mevrate::{BurnPolicy, MarketInstance, MevSequence, ToleranceDistribution, UpdateRule};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub svg: bool,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market: Option<MarketConfig>,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub thresholds: ThresholdsConfig,
    #[serde(default)]
    pub bifurcate: BifurcateConfig,
    #[serde(default)]
    pub periods: PeriodsConfig,
    #[serde(default)]
    pub chaos_witness: WitnessConfig,
    #[serde(default)]
    pub scenario: ScenarioConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Precision {
    /// Grid size for the convergence-threshold infimum.
    pub grid_n: usize,
    /// Root tolerance for periodic points.
    pub period_tol: f64,
}

impl Default for Precision {
    fn default() -> Self {
        Precision {
            grid_n: mevrate::analysis::DEFAULT_GRID_N,
            period_tol: mevrate::orbits::DEFAULT_PERIOD_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistConfig {
    Beta { a: f64, b: f64 },
    Uniform { lo: f64, hi: f64 },
    TruncatedNormal { mu: f64, sigma2: f64 },
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

impl DistConfig {
    pub fn build(&self) -> mevrate::Result<ToleranceDistribution> {
        match self {
            DistConfig::Beta { a, b } => ToleranceDistribution::beta(*a, *b),
            DistConfig::Uniform { lo, hi } => ToleranceDistribution::uniform(*lo, *hi),
            DistConfig::TruncatedNormal { mu, sigma2 } => ToleranceDistribution::truncated_normal(*mu, *sigma2),
            DistConfig::PiecewiseLinear { knots } => ToleranceDistribution::piecewise_linear(knots),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum BurnConfig {
    #[default]
    None,
    Constant {
        k: f64,
    },
    /// `seed` defaults to the run seed.
    Sampled {
        lo: f64,
        hi: f64,
        seed: Option<u64>,
    },
}

impl BurnConfig {
    pub fn build(&self, run_seed: u64) -> BurnPolicy {
        match *self {
            BurnConfig::None => BurnPolicy::None,
            BurnConfig::Constant { k } => BurnPolicy::Constant(k),
            BurnConfig::Sampled { lo, hi, seed } => BurnPolicy::Sampled {
                lo,
                hi,
                seed: seed.unwrap_or(run_seed),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum MevConfig {
    Constant {
        m: f64,
    },
    Series {
        values: Vec<f64>,
    },
    /// `seed` defaults to the run seed.
    Sampled {
        lo: f64,
        hi: f64,
        seed: Option<u64>,
    },
}

impl Default for MevConfig {
    fn default() -> Self {
        MevConfig::Constant { m: 1.0 }
    }
}

impl MevConfig {
    pub fn build(&self, run_seed: u64) -> MevSequence {
        match self {
            MevConfig::Constant { m } => MevSequence::Constant(*m),
            MevConfig::Series { values } => MevSequence::Series(values.clone()),
            MevConfig::Sampled { lo, hi, seed } => MevSequence::Sampled {
                lo: *lo,
                hi: *hi,
                seed: seed.unwrap_or(run_seed),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RuleConfig {
    #[default]
    Full,
    MinerScaled,
    UserScaled,
    Plain,
}

impl From<RuleConfig> for UpdateRule {
    fn from(r: RuleConfig) -> Self {
        match r {
            RuleConfig::Full => UpdateRule::Full,
            RuleConfig::MinerScaled => UpdateRule::MinerScaled,
            RuleConfig::UserScaled => UpdateRule::UserScaled,
            RuleConfig::Plain => UpdateRule::Plain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub users: DistConfig,
    pub miners: DistConfig,
    pub w: f64,
    #[serde(default)]
    pub burn: BurnConfig,
}

impl MarketConfig {
    pub fn build(&self, run_seed: u64) -> mevrate::Result<MarketInstance> {
        MarketInstance::with_burn(
            self.users.build()?,
            self.miners.build()?,
            self.w,
            self.burn.build(run_seed),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub rule: RuleConfig,
    pub lambda0: f64,
    pub eta: f64,
    pub steps: usize,
    pub mev: MevConfig,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            rule: RuleConfig::Full,
            lambda0: 0.1,
            eta: 0.5,
            steps: 1000,
            mev: MevConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdsConfig {
    pub eta: f64,
}

impl Default for ThresholdsConfig {
    fn default() -> Self {
        ThresholdsConfig { eta: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    #[default]
    Eta,
    Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BifurcateConfig {
    pub axis: ScanAxis,
    pub lo: f64,
    pub hi: f64,
    pub n_params: usize,
    pub burn_in: usize,
    pub n_record: usize,
    pub lambda0: f64,
    pub rule: RuleConfig,
    /// Range axis only: fixed intensity and support centers.
    pub eta: f64,
    pub w: f64,
    pub users_center: f64,
    pub miners_center: f64,
}

impl Default for BifurcateConfig {
    fn default() -> Self {
        BifurcateConfig {
            axis: ScanAxis::Eta,
            lo: 0.05,
            hi: 3.0,
            n_params: 400,
            burn_in: 200,
            n_record: 200,
            lambda0: 0.3,
            rule: RuleConfig::Full,
            eta: 1.0,
            w: 1.0,
            users_center: 0.5,
            miners_center: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeriodsConfig {
    pub eta: f64,
    pub ks: Vec<usize>,
    /// Defaults to `200·2^⌈log₂ k⌉` per `k`.
    pub grid_n: Option<usize>,
    pub rule: RuleConfig,
}

impl Default for PeriodsConfig {
    fn default() -> Self {
        PeriodsConfig {
            eta: 0.6,
            ks: vec![1, 2, 3, 4, 5, 6, 7],
            grid_n: None,
            rule: RuleConfig::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WitnessConfig {
    pub eta: f64,
    pub w: f64,
    pub a0: f64,
    pub search_steps: usize,
}

impl Default for WitnessConfig {
    fn default() -> Self {
        WitnessConfig {
            eta: 1.0,
            w: 1.0,
            a0: 0.1,
            search_steps: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    #[default]
    Regime,
    Stress,
    Burn,
    Rules,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSide {
    pub users: DistConfig,
    pub miners: DistConfig,
    pub w: f64,
    pub eta: f64,
}

impl RegimeSide {
    fn build(&self) -> mevrate::Result<Regime> {
        Ok(Regime {
            inst: MarketInstance::new(self.users.build()?, self.miners.build()?, self.w)?,
            eta: self.eta,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub lambda0: f64,
    /// Iterations for regime, burn and rule runs.
    pub steps: usize,
    /// Intensity for burn and rule runs.
    pub eta: f64,
    pub regime1: RegimeSide,
    pub regime2: RegimeSide,
    pub theta: f64,
    pub epoch_len: usize,
    pub n_epochs: usize,
    pub blocks_per_epoch: usize,
    pub eta_range: (f64, f64),
    pub w_range: (f64, f64),
    pub beta_perturb_every: usize,
    pub beta_param_ranges: [(f64, f64); 4],
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let tn = |mu| DistConfig::TruncatedNormal { mu, sigma2: 0.01 };
        let stress = StressConfig::default();
        ScenarioConfig {
            kind: ScenarioKind::Regime,
            lambda0: 0.3,
            steps: 5000,
            eta: 1.0,
            regime1: RegimeSide {
                users: tn(0.35),
                miners: tn(0.45),
                w: 1.1,
                eta: 0.9,
            },
            regime2: RegimeSide {
                users: tn(0.4),
                miners: tn(0.5),
                w: 1.6,
                eta: 1.0,
            },
            theta: 0.408,
            epoch_len: 50,
            n_epochs: stress.n_epochs,
            blocks_per_epoch: stress.blocks_per_epoch,
            eta_range: stress.eta_range,
            w_range: stress.w_range,
            beta_perturb_every: stress.beta_perturb_every,
            beta_param_ranges: stress.beta_param_ranges,
        }
    }
}

impl ScenarioConfig {
    pub fn regime_config(&self) -> mevrate::Result<RegimeConfig> {
        Ok(RegimeConfig {
            regime1: self.regime1.build()?,
            regime2: self.regime2.build()?,
            theta: self.theta,
            steps: self.steps,
            epoch_len: self.epoch_len,
        })
    }

    pub fn stress_config(&self, seed: u64) -> StressConfig {
        StressConfig {
            n_epochs: self.n_epochs,
            blocks_per_epoch: self.blocks_per_epoch,
            eta_range: self.eta_range,
            w_range: self.w_range,
            beta_perturb_every: self.beta_perturb_every,
            beta_param_ranges: self.beta_param_ranges,
            seed,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub svg: bool,
    pub set: Vec<String>,
}

/// Reads the config file (or starts from an empty document), applies
/// `--set path=value` edits and the common flags, then validates.
pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<RunConfig, CliError> {
    let mut doc = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{} is not valid JSON: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    for assignment in &ov.set {
        apply_set(&mut doc, assignment)?;
    }
    if let Some(out) = &ov.out {
        set_path(&mut doc, "out", Value::String(out.display().to_string()))?;
    }
    if let Some(seed) = ov.seed {
        set_path(&mut doc, "seed", Value::from(seed))?;
    }
    if ov.svg {
        set_path(&mut doc, "svg", Value::Bool(true))?;
    }
    serde_path_to_error::deserialize(doc).map_err(|e| {
        let key = e.path().to_string();
        CliError::Config(format!("invalid config at `{key}`: {}", e.into_inner()))
    })
}

fn apply_set(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects path=value, got `{assignment}`")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    set_path(doc, path, value)
}

fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(CliError::Config(format!("empty segment in key `{path}`")));
        }
        let obj = match cur {
            Value::Object(map) => map,
            _ => return Err(CliError::Config(format!("key `{path}` descends into a non-object"))),
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}
