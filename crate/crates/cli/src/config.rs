//! Scenario documents.
//!
//! A document is TOML with three optional top-level keys and one table:
//!
//! ```toml
//! scenario = "regret_compare"
//! seed = 20180409
//! output_dir = "out"
//!
//! [parameters]
//! items = 50
//! horizon = 5000
//! ```
//!
//! The shape of `[parameters]` depends on the scenario. Missing parameters
//! take their defaults, which are filled in at parse time so that the
//! resolved config written next to every output is complete.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use recloop::analysis::{BoundParams, ExplorationSource};
use recloop::engine::{PreferencePrior, SimConfig};
use recloop::personalization::{LowRankConfig, Regime, RidgeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ScenarioKind {
    #[default]
    RegretCompare,
    BiasThresholdSweep,
    BoundReport,
    TwoStageRidge,
    TwoStageLowRank,
    Custom,
}

/// Biased versus unbiased empirical averaging on random catalogs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegretCompareParams {
    pub items: usize,
    pub horizon: u64,
    pub replications: usize,
    /// Per-item preference prior; Bernoulli with `p_max = 2 ln K / (3K)` by default.
    pub preferences: Option<PreferencePrior>,
    pub noise_sigma: f64,
}

impl Default for RegretCompareParams {
    fn default() -> Self {
        Self {
            items: 50,
            horizon: 5000,
            replications: 50,
            preferences: None,
            noise_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasThresholdSweepParams {
    pub items_min: usize,
    pub items_max: usize,
    /// Fixed preference probability; `ln K / (2K)` per K when absent.
    pub p: Option<f64>,
}

impl Default for BiasThresholdSweepParams {
    fn default() -> Self {
        Self {
            items_min: 2,
            items_max: 10_000,
            p: None,
        }
    }
}

/// Bound inputs. `delta_min` may be measured from `qualities`, and `c`
/// computed from `exploration`. Whatever is left unset takes the values
/// `delta_min = 0.5`, `items = 2`, `c = 0.25`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundReportParams {
    pub delta_min: Option<f64>,
    pub qualities: Option<Vec<f64>>,
    pub sigma: f64,
    pub items: Option<usize>,
    pub horizon: f64,
    pub c: Option<f64>,
    pub exploration: Option<ExplorationSource>,
    pub alpha: f64,
}

impl Default for BoundReportParams {
    fn default() -> Self {
        Self {
            delta_min: None,
            qualities: None,
            sigma: 1.0,
            items: None,
            horizon: std::f64::consts::E,
            c: None,
            exploration: None,
            alpha: 1.0,
        }
    }
}

impl BoundReportParams {
    pub fn resolve(&self) -> Result<BoundParams> {
        let delta_min = match (self.delta_min, &self.qualities) {
            (Some(d), None) => d,
            (None, Some(q)) => recloop::analysis::delta_min(q)?,
            (Some(_), Some(_)) => bail!("parameters.delta_min and parameters.qualities are mutually exclusive"),
            (None, None) => bail!("parameters.delta_min or parameters.qualities is required"),
        };
        let items = match (self.items, &self.qualities) {
            (Some(k), Some(q)) if k != q.len() => bail!("parameters.items = {k} but {} qualities given", q.len()),
            (Some(k), _) => k,
            (None, Some(q)) => q.len(),
            (None, None) => bail!("parameters.items is required"),
        };
        let c = match (self.c, &self.exploration) {
            (Some(c), None) => c,
            (None, Some(src)) => recloop::analysis::exploration_constant(src, items)?,
            (Some(_), Some(_)) => bail!("parameters.c and parameters.exploration are mutually exclusive"),
            (None, None) => bail!("parameters.c or parameters.exploration is required"),
        };
        Ok(BoundParams {
            delta_min,
            sigma: self.sigma,
            items,
            horizon: self.horizon,
            c,
            alpha: self.alpha,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoStageRidgeParams {
    pub experiment: RidgeConfig,
    pub regimes: Vec<Regime>,
    /// Seeds `seed, seed + 1, ...`.
    pub seeds: u64,
    /// Also write each run's training and test rows.
    pub write_datasets: bool,
}

impl Default for TwoStageRidgeParams {
    fn default() -> Self {
        Self {
            experiment: RidgeConfig::default(),
            regimes: Regime::ALL.to_vec(),
            seeds: 1,
            write_datasets: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoStageLowRankParams {
    pub experiment: LowRankConfig,
    pub regimes: Vec<Regime>,
    pub seeds: u64,
    pub write_datasets: bool,
}

impl Default for TwoStageLowRankParams {
    fn default() -> Self {
        Self {
            experiment: LowRankConfig::default(),
            regimes: Regime::ALL.to_vec(),
            seeds: 1,
            write_datasets: false,
        }
    }
}

/// Any single simulation, replicated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomParams {
    /// Its `seed` is replaced by the document's.
    pub simulation: SimConfig,
    #[serde(default = "one")]
    pub replications: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", content = "parameters", rename_all = "snake_case")]
pub enum Scenario {
    RegretCompare(RegretCompareParams),
    BiasThresholdSweep(BiasThresholdSweepParams),
    BoundReport(BoundReportParams),
    TwoStageRidge(TwoStageRidgeParams),
    TwoStageLowRank(TwoStageLowRankParams),
    Custom(CustomParams),
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            Scenario::RegretCompare(_) => ScenarioKind::RegretCompare,
            Scenario::BiasThresholdSweep(_) => ScenarioKind::BiasThresholdSweep,
            Scenario::BoundReport(_) => ScenarioKind::BoundReport,
            Scenario::TwoStageRidge(_) => ScenarioKind::TwoStageRidge,
            Scenario::TwoStageLowRank(_) => ScenarioKind::TwoStageLowRank,
            Scenario::Custom(_) => ScenarioKind::Custom,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    #[serde(flatten)]
    pub scenario: Scenario,
    pub seed: u64,
    pub output_dir: PathBuf,
}

/// The document as written, before the parameters are interpreted.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    scenario: Option<ScenarioKind>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    parameters: Option<toml::Table>,
}

pub const DEFAULT_OUTPUT_DIR: &str = "out";

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    parse_config_as(text, None)
}

/// Parse with an optional scenario override. The override must agree with
/// the document's `scenario` key when both are present.
pub fn parse_config_as(text: &str, kind: Option<ScenarioKind>) -> Result<ScenarioConfig> {
    let raw: RawDocument = toml::from_str(text).context("invalid scenario document")?;
    let kind = match (raw.scenario, kind) {
        (Some(a), Some(b)) if a != b => bail!("document declares scenario {a:?} but {b:?} was requested"),
        (a, b) => a.or(b).unwrap_or_default(),
    };
    let params = raw.parameters.unwrap_or_default();
    let scenario = match kind {
        ScenarioKind::RegretCompare => Scenario::RegretCompare(params_as(params)?),
        ScenarioKind::BiasThresholdSweep => Scenario::BiasThresholdSweep(params_as(params)?),
        ScenarioKind::BoundReport => Scenario::BoundReport(params_as(params)?),
        ScenarioKind::TwoStageRidge => Scenario::TwoStageRidge(params_as(params)?),
        ScenarioKind::TwoStageLowRank => Scenario::TwoStageLowRank(params_as(params)?),
        ScenarioKind::Custom => Scenario::Custom(params_as(params)?),
    };
    let mut config = ScenarioConfig {
        scenario,
        seed: raw.seed.unwrap_or(0),
        output_dir: raw.output_dir.unwrap_or_else(|| DEFAULT_OUTPUT_DIR.into()),
    };
    config.fill_defaults();
    config.validate()?;
    Ok(config)
}

/// Defaults for a scenario with no document at all.
pub fn default_config(kind: ScenarioKind) -> Result<ScenarioConfig> {
    parse_config_as("", Some(kind))
}

fn params_as<T: DeserializeOwned>(table: toml::Table) -> Result<T> {
    serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." { "parameters".to_string() } else { format!("parameters.{path}") };
        anyhow!("{key}: {}", e.into_inner())
    })
}

impl ScenarioConfig {
    fn fill_defaults(&mut self) {
        match &mut self.scenario {
            Scenario::RegretCompare(p) => {
                p.preferences.get_or_insert_with(|| PreferencePrior::bernoulli_for(p.items));
            }
            Scenario::BoundReport(p) => {
                if p.qualities.is_none() {
                    p.delta_min.get_or_insert(0.5);
                    p.items.get_or_insert(2);
                }
                if p.exploration.is_none() {
                    p.c.get_or_insert(0.25);
                }
            }
            Scenario::Custom(p) => p.simulation.seed = self.seed,
            _ => {}
        }
    }

    /// Apply command-line overrides, then re-check.
    pub fn override_with(&mut self, seed: Option<u64>, out: Option<PathBuf>, reps: Option<usize>, horizon: Option<u64>) -> Result<()> {
        if let Some(seed) = seed {
            self.seed = seed;
        }
        if let Some(out) = out {
            self.output_dir = out;
        }
        match &mut self.scenario {
            Scenario::RegretCompare(p) => {
                p.replications = reps.unwrap_or(p.replications);
                p.horizon = horizon.unwrap_or(p.horizon);
            }
            Scenario::Custom(p) => {
                p.replications = reps.unwrap_or(p.replications);
                p.simulation.horizon = horizon.unwrap_or(p.simulation.horizon);
            }
            Scenario::BoundReport(p) => {
                if let Some(h) = horizon {
                    p.horizon = h as f64;
                }
                if reps.is_some() {
                    bail!("--reps does not apply to bound_report");
                }
            }
            other => {
                if reps.is_some() || horizon.is_some() {
                    bail!("--reps/--horizon do not apply to {:?}", other.kind());
                }
            }
        }
        self.fill_defaults();
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        match &self.scenario {
            Scenario::RegretCompare(p) => {
                if p.items == 0 {
                    bail!("parameters.items: must be >= 1");
                }
                if p.horizon == 0 {
                    bail!("parameters.horizon: must be >= 1");
                }
                if p.replications == 0 {
                    bail!("parameters.replications: must be >= 1");
                }
                if !(p.noise_sigma >= 0.0 && p.noise_sigma.is_finite()) {
                    bail!("parameters.noise_sigma: {} must be finite and >= 0", p.noise_sigma);
                }
                self.regret_configs()?.0.validate().context("parameters")?;
            }
            Scenario::BiasThresholdSweep(p) => {
                if p.items_min == 0 || p.items_max < p.items_min {
                    bail!("parameters.items_min/items_max: need 1 <= items_min <= items_max");
                }
                if let Some(q) = p.p {
                    if !(q > 0.0 && q < 1.0) {
                        bail!("parameters.p: {q} must lie in (0, 1)");
                    }
                }
            }
            Scenario::BoundReport(p) => {
                p.resolve()?;
            }
            Scenario::TwoStageRidge(p) => {
                recloop::personalization::TwoStageConfig::Ridge(p.experiment).validate().context("parameters")?;
                check_runs(&p.regimes, p.seeds)?;
            }
            Scenario::TwoStageLowRank(p) => {
                recloop::personalization::TwoStageConfig::LowRank(p.experiment.clone())
                    .validate()
                    .context("parameters")?;
                check_runs(&p.regimes, p.seeds)?;
            }
            Scenario::Custom(p) => {
                p.simulation.validate().context("parameters.simulation")?;
                if p.replications == 0 {
                    bail!("parameters.replications: must be >= 1");
                }
            }
        }
        Ok(())
    }

    /// The biased and unbiased simulations of a `regret_compare` scenario.
    pub fn regret_configs(&self) -> Result<(SimConfig, SimConfig)> {
        use recloop::distributions::NoiseSpec;
        use recloop::engine::{PreferenceSource, QualitySource, Retention};
        use recloop::model::FeedbackChannel;
        use recloop::scoring::ScoringAlgorithm;
        let Scenario::RegretCompare(p) = &self.scenario else {
            bail!("not a regret_compare scenario");
        };
        let prior = p.preferences.unwrap_or_else(|| PreferencePrior::bernoulli_for(p.items));
        let biased = SimConfig {
            qualities: QualitySource::unit_uniform(p.items),
            preferences: PreferenceSource::Prior { prior },
            noise: if p.noise_sigma > 0.0 { NoiseSpec::normal(p.noise_sigma) } else { NoiseSpec::none() },
            channel: FeedbackChannel::AbsoluteBiased,
            scorer: ScoringAlgorithm::EmpiricalAverage,
            horizon: p.horizon,
            seed: self.seed,
            retention: Retention::SummaryOnly,
            score_stride: None,
        };
        let unbiased = SimConfig {
            channel: FeedbackChannel::UnbiasedQuality,
            scorer: ScoringAlgorithm::ClippedAverage,
            ..biased.clone()
        };
        Ok((biased, unbiased))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

fn check_runs(regimes: &[Regime], seeds: u64) -> Result<()> {
    if regimes.is_empty() {
        bail!("parameters.regimes: must not be empty");
    }
    if seeds == 0 {
        bail!("parameters.seeds: must be >= 1");
    }
    Ok(())
}
