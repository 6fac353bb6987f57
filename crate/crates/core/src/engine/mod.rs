//! The sequential interaction loop and its replication machinery, plus
//! dataset generation for two-stage experiments (see [`dataset`]).

pub mod dataset;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{NoiseSpec, PreferenceSpec};
use crate::error::{domain, Error, Result};
use crate::model::{argmax_sum, draw_agent, make_feedback, regret_unchecked, FeedbackChannel, InteractionRecord};
use crate::rng::RngStream;
use crate::scoring::{ScoreState, ScoringAlgorithm};

pub use dataset::{
    evaluate_policy, generate_dataset, ChoiceEnvironment, Dataset, DatasetRow, Exclusions, Policy, SamplingPlan,
    ScoreRule,
};

const PARAMETER_STREAM: u64 = 0;
const DYNAMICS_STREAM: u64 = 1;

/// Where item qualities come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum QualitySource {
    Explicit { qualities: Vec<f64> },
    /// `items` qualities drawn i.i.d. uniform on `[low, high)` per replication.
    Uniform { items: usize, low: f64, high: f64 },
}

impl QualitySource {
    pub fn unit_uniform(items: usize) -> Self {
        QualitySource::Uniform {
            items,
            low: 0.0,
            high: 1.0,
        }
    }

    pub fn items(&self) -> usize {
        match self {
            QualitySource::Explicit { qualities } => qualities.len(),
            QualitySource::Uniform { items, .. } => *items,
        }
    }

    fn draw(&self, rng: &mut RngStream) -> Vec<f64> {
        match self {
            QualitySource::Explicit { qualities } => qualities.clone(),
            QualitySource::Uniform { items, low, high } => {
                (0..*items).map(|_| low + (high - low) * rng.random::<f64>()).collect()
            }
        }
    }
}

/// Per-item parameter priors: each replication redraws one spec per item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PreferencePrior {
    /// `p_i ~ U[0, p_max]`.
    Bernoulli { p_max: f64 },
    /// `mu_i = 0`, `sigma_i ~ U[0, sigma_max]`.
    Normal { sigma_max: f64 },
    /// Scale `1 / rate_i ~ U(0, scale_max]`.
    Exponential { scale_max: f64 },
    /// `shape_i ~ U[shape_low, shape_high]` with a fixed minimum.
    Pareto { shape_low: f64, shape_high: f64, minimum: f64 },
}

impl PreferencePrior {
    /// Bernoulli prior with `p_max = 2 ln K / (3 K)`.
    pub fn bernoulli_for(items: usize) -> Self {
        let k = items as f64;
        PreferencePrior::Bernoulli {
            p_max: 2.0 * k.ln() / (3.0 * k),
        }
    }

    pub fn normal_default() -> Self {
        PreferencePrior::Normal { sigma_max: 1.0 }
    }

    pub fn exponential_default() -> Self {
        PreferencePrior::Exponential { scale_max: 1.0 }
    }

    pub fn pareto_default() -> Self {
        PreferencePrior::Pareto {
            shape_low: 2.0,
            shape_high: 4.0,
            minimum: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            PreferencePrior::Bernoulli { p_max } if !(0.0..=1.0).contains(&p_max) => {
                Err(domain("p_max", format!("{p_max} not in [0, 1]")))
            }
            PreferencePrior::Normal { sigma_max } if !(sigma_max >= 0.0 && sigma_max.is_finite()) => {
                Err(domain("sigma_max", format!("{sigma_max} must be finite and >= 0")))
            }
            PreferencePrior::Exponential { scale_max } if !(scale_max > 0.0 && scale_max.is_finite()) => {
                Err(domain("scale_max", format!("{scale_max} must be finite and > 0")))
            }
            PreferencePrior::Pareto {
                shape_low,
                shape_high,
                minimum,
            } => {
                if !(shape_low > 1.0 && shape_high >= shape_low && shape_high.is_finite()) {
                    return Err(domain("shape", format!("need 1 < {shape_low} <= {shape_high}")));
                }
                PreferenceSpec::Pareto {
                    shape: shape_low,
                    minimum,
                }
                .validate()
            }
            _ => Ok(()),
        }
    }

    fn draw(&self, rng: &mut RngStream) -> PreferenceSpec {
        // 1 - U[0,1) lies in (0, 1], which keeps scales and shapes valid.
        let u = 1.0 - rng.random::<f64>();
        match *self {
            PreferencePrior::Bernoulli { p_max } => PreferenceSpec::Bernoulli { p: p_max * (1.0 - u) },
            PreferencePrior::Normal { sigma_max } => PreferenceSpec::Normal {
                mu: 0.0,
                sigma: sigma_max * (1.0 - u),
            },
            PreferencePrior::Exponential { scale_max } => PreferenceSpec::Exponential {
                rate: 1.0 / (scale_max * u),
            },
            PreferencePrior::Pareto {
                shape_low,
                shape_high,
                minimum,
            } => PreferenceSpec::Pareto {
                shape: shape_low + (shape_high - shape_low) * (1.0 - u),
                minimum,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum PreferenceSource {
    /// One spec per item.
    PerItem { specs: Vec<PreferenceSpec> },
    /// The same spec for every item.
    Shared { spec: PreferenceSpec },
    /// Specs redrawn per replication from a prior.
    Prior { prior: PreferencePrior },
}

impl PreferenceSource {
    fn resolve(&self, items: usize, rng: &mut RngStream) -> Vec<PreferenceSpec> {
        match self {
            PreferenceSource::PerItem { specs } => specs.clone(),
            PreferenceSource::Shared { spec } => vec![*spec; items],
            PreferenceSource::Prior { prior } => (0..items).map(|_| prior.draw(rng)).collect(),
        }
    }
}

/// How much of the per-step log an episode keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Retention {
    /// Regret path and counts only.
    #[default]
    SummaryOnly,
    Full,
    /// Every `every`-th step (t = every, 2·every, ...).
    Stride { every: u64 },
}

impl Retention {
    fn keeps(&self, t: u64) -> bool {
        match *self {
            Retention::SummaryOnly => false,
            Retention::Full => true,
            Retention::Stride { every } => every > 0 && t % every == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub qualities: QualitySource,
    pub preferences: PreferenceSource,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub channel: FeedbackChannel,
    /// An `Oracle` scorer with an empty `q` scores items by their true
    /// qualities.
    pub scorer: ScoringAlgorithm,
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub retention: Retention,
    /// Record the full score vector every `score_stride` steps.
    #[serde(default)]
    pub score_stride: Option<u64>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        let k = self.qualities.items();
        if k == 0 {
            return Err(Error::Config("catalog needs at least one item".into()));
        }
        match &self.qualities {
            QualitySource::Explicit { qualities } => {
                if let Some(q) = qualities.iter().find(|q| !q.is_finite()) {
                    return Err(Error::Config(format!("quality {q} is not finite")));
                }
            }
            QualitySource::Uniform { low, high, .. } => {
                if !(low.is_finite() && high.is_finite() && low <= high) {
                    return Err(Error::Config(format!("bad uniform quality range [{low}, {high})")));
                }
            }
        }
        match &self.preferences {
            PreferenceSource::PerItem { specs } => {
                if specs.len() != k {
                    return Err(Error::Dimension {
                        expected: k,
                        actual: specs.len(),
                    });
                }
                specs.iter().try_for_each(PreferenceSpec::validate)?;
            }
            PreferenceSource::Shared { spec } => spec.validate()?,
            PreferenceSource::Prior { prior } => prior.validate()?,
        }
        self.noise.validate()?;
        if let ScoringAlgorithm::Oracle { q } = &self.scorer {
            if !q.is_empty() && q.len() != k {
                return Err(Error::Dimension {
                    expected: k,
                    actual: q.len(),
                });
            }
        }
        if self.score_stride == Some(0) {
            return Err(Error::Config("score_stride must be >= 1".into()));
        }
        if let Retention::Stride { every: 0 } = self.retention {
            return Err(Error::Config("retention stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// One sampled score: item `item` had score `score` when agent `t` arrived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSample {
    pub t: u64,
    pub item: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    /// Qualities used in this episode (drawn when a prior was configured).
    pub qualities: Vec<f64>,
    pub preferences: Vec<PreferenceSpec>,
    /// `cumulative_regret[t - 1]` is the regret after `t` agents.
    pub cumulative_regret: Vec<f64>,
    pub selection_counts: Vec<u64>,
    pub records: Vec<InteractionRecord>,
    pub realized_value_sum: f64,
    pub score_trace: Vec<ScoreSample>,
}

impl SimulationResult {
    pub fn final_regret(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }
}

/// Run replication 0 of `config`.
pub fn run_episode(config: &SimConfig) -> Result<SimulationResult> {
    config.validate()?;
    Ok(episode(config, 0))
}

/// Run replication `replication` of `config`, i.e. the episode driven by
/// stream `(config.seed, replication)`.
pub fn run_replication(config: &SimConfig, replication: u64) -> Result<SimulationResult> {
    config.validate()?;
    Ok(episode(config, replication))
}

fn episode(config: &SimConfig, replication: u64) -> SimulationResult {
    let base = RngStream::new(config.seed, replication);
    let mut param_rng = base.derive(PARAMETER_STREAM);
    let mut rng = base.derive(DYNAMICS_STREAM);

    let qualities = config.qualities.draw(&mut param_rng);
    let k = qualities.len();
    let preferences = config.preferences.resolve(k, &mut param_rng);
    let scorer = match &config.scorer {
        ScoringAlgorithm::Oracle { q } if q.is_empty() => ScoringAlgorithm::Oracle { q: qualities.clone() },
        other => other.clone(),
    };
    let mut state = ScoreState::new(k, scorer).expect("validated config");

    let horizon = config.horizon as usize;
    let mut cumulative_regret = Vec::with_capacity(horizon);
    let mut records = Vec::new();
    let mut score_trace = Vec::new();
    let mut regret = 0.0;
    let mut realized_value_sum = 0.0;

    for t in 1..=config.horizon {
        let draw = draw_agent(&preferences, &config.noise, &mut rng);
        let scores = state.scores(t, &mut rng);
        let chosen = argmax_sum(&scores, &draw.theta);
        let value = qualities[chosen] + draw.theta[chosen] + draw.epsilon[chosen];
        let feedback = make_feedback(config.channel, value, draw.theta[chosen], scores[chosen]);
        state.observe(chosen, feedback).expect("chosen index is in range");

        regret += regret_unchecked(&qualities, &draw.theta, chosen);
        cumulative_regret.push(regret);
        realized_value_sum += value;

        if config.retention.keeps(t) {
            records.push(InteractionRecord {
                t,
                chosen,
                value,
                feedback,
                score_at_choice: scores[chosen],
            });
        }
        if let Some(stride) = config.score_stride {
            if t % stride == 0 {
                score_trace.extend(scores.iter().enumerate().map(|(item, &score)| ScoreSample { t, item, score }));
            }
        }
    }

    SimulationResult {
        qualities,
        preferences,
        cumulative_regret,
        selection_counts: state.counts().to_vec(),
        records,
        realized_value_sum,
        score_trace,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    /// `paths[r]` is replication `r`'s cumulative regret path.
    pub paths: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Standard error of the mean path (sample standard deviation over
    /// `sqrt(replications)`; zero for a single replication).
    pub std_error: Vec<f64>,
    pub selection_counts: Vec<Vec<u64>>,
}

impl BatchResult {
    pub fn replications(&self) -> usize {
        self.paths.len()
    }

    pub fn final_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }

    pub fn final_std_error(&self) -> f64 {
        self.std_error.last().copied().unwrap_or(0.0)
    }
}

/// Run `replications` independent episodes in parallel; replication `r`
/// uses stream `r` under the config's seed.
pub fn run_batch(config: &SimConfig, replications: usize) -> Result<BatchResult> {
    if replications == 0 {
        return Err(Error::Config("replications must be >= 1".into()));
    }
    config.validate()?;
    let results: Vec<SimulationResult> = (0..replications as u64)
        .into_par_iter()
        .map(|r| episode(config, r))
        .collect();
    Ok(aggregate(results))
}

fn aggregate(results: Vec<SimulationResult>) -> BatchResult {
    let n = results.len();
    let len = results[0].cumulative_regret.len();
    let mut mean = vec![0.0; len];
    for r in &results {
        for (m, x) in mean.iter_mut().zip(&r.cumulative_regret) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let std_error = if n < 2 {
        vec![0.0; len]
    } else {
        let mut var = vec![0.0; len];
        for r in &results {
            for ((v, x), m) in var.iter_mut().zip(&r.cumulative_regret).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        var.iter()
            .map(|v| (v / (n - 1) as f64).sqrt() / (n as f64).sqrt())
            .collect()
    };

    let selection_counts = results.iter().map(|r| r.selection_counts.clone()).collect();
    let paths = results.into_iter().map(|r| r.cumulative_regret).collect();
    BatchResult {
        paths,
        mean,
        std_error,
        selection_counts,
    }
}
