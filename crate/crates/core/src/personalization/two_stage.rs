//! The train-then-test protocol and the four training regimes.

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::als::{als_fit, AlsFit, AlsOptions, Rating};
use super::feature::{fit_feature_policy, FeatureModel, FeatureParams, OracleFeatureScore};
use super::lowrank::{LowRankModel, LowRankParams, OracleLowRankScore};
use crate::engine::dataset::{generate_dataset, ChoiceEnvironment, Dataset, Policy, SamplingPlan, ScoreRule};
use crate::error::{domain, Error, Result};
use crate::model::FeedbackChannel;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Ridge,
    LowRank,
}

/// How the training set is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Users choose under the true scores and report their full value.
    Oracle,
    /// Users choose under the true scores and report value minus preference.
    OracleUnbiased,
    /// Items are assigned uniformly at random.
    Random,
    /// Fit on random assignments, then regenerate training data under the fit.
    Iterated,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::Oracle, Regime::OracleUnbiased, Regime::Random, Regime::Iterated];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RidgeConfig {
    pub model: FeatureParams,
    /// Training rows, one fresh user each.
    pub observations: usize,
    /// Test rows; the training size when absent.
    pub test_observations: Option<usize>,
    pub lambda: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self {
            model: FeatureParams::default(),
            observations: 20_000,
            test_observations: None,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowRankConfig {
    pub model: LowRankParams,
    /// Factorization rank; `2q` when absent.
    pub rank: Option<usize>,
    pub lambda_grid: Vec<f64>,
    /// Share of training ratings held out to choose λ.
    pub holdout_fraction: f64,
    pub sweeps: usize,
}

impl Default for LowRankConfig {
    fn default() -> Self {
        Self {
            model: LowRankParams::default(),
            rank: None,
            lambda_grid: vec![0.01, 0.1, 1.0, 10.0],
            holdout_fraction: 0.1,
            sweeps: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum TwoStageConfig {
    Ridge(RidgeConfig),
    LowRank(LowRankConfig),
}

impl TwoStageConfig {
    pub fn experiment(&self) -> Experiment {
        match self {
            TwoStageConfig::Ridge(_) => Experiment::Ridge,
            TwoStageConfig::LowRank(_) => Experiment::LowRank,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TwoStageConfig::Ridge(c) => {
                c.model.validate()?;
                if c.observations == 0 || c.test_observations == Some(0) {
                    return Err(domain("observations", "must be >= 1"));
                }
                if !(c.lambda >= 0.0 && c.lambda.is_finite()) {
                    return Err(domain("lambda", format!("{} must be finite and >= 0", c.lambda)));
                }
            }
            TwoStageConfig::LowRank(c) => {
                c.model.validate()?;
                if 2 * c.model.ratings_per_user > c.model.n_items {
                    return Err(Error::Config(format!(
                        "{} items cannot hold {} disjoint training and test ratings per user",
                        c.model.n_items, c.model.ratings_per_user
                    )));
                }
                if c.rank == Some(0) {
                    return Err(domain("rank", "must be >= 1"));
                }
                if c.lambda_grid.is_empty() || c.lambda_grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
                    return Err(domain("lambda_grid", "must be a non-empty list of finite values >= 0"));
                }
                if !(c.holdout_fraction > 0.0 && c.holdout_fraction < 1.0) {
                    return Err(domain("holdout_fraction", format!("{} must lie in (0, 1)", c.holdout_fraction)));
                }
                if c.sweeps == 0 {
                    return Err(domain("sweeps", "must be >= 1"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageResult {
    pub experiment: Experiment,
    pub regime: Regime,
    /// Regularization of the final fit.
    pub lambda: f64,
    pub test_mean_value: f64,
    /// Test-set mean value when choosing under the true scores.
    pub oracle_benchmark: f64,
    /// Test-set mean value when every score is 0.
    pub zero_benchmark: f64,
    pub seed: u64,
}

/// A result together with the datasets behind it.
#[derive(Debug, Clone)]
pub struct TwoStageRun {
    pub result: TwoStageResult,
    /// The set the final model was fitted on.
    pub train: Dataset,
    pub test: Dataset,
}

pub fn run_two_stage(config: &TwoStageConfig, regime: Regime, seed: u64) -> Result<TwoStageResult> {
    run_two_stage_with_data(config, regime, seed).map(|run| run.result)
}

// Sub-seeds. The model and the test users depend only on `seed`, so every
// regime is scored against the same population.
const MODEL: u64 = 0;
const TRAIN: u64 = 1;
const RETRAIN: u64 = 2;
const TEST: u64 = 3;
const FIT: u64 = 4;

fn sub_seed(seed: u64, key: u64) -> u64 {
    RngStream::new(seed, 0).derive(1000 + key).next_u64()
}

pub fn run_two_stage_with_data(config: &TwoStageConfig, regime: Regime, seed: u64) -> Result<TwoStageRun> {
    config.validate()?;
    let mut model_rng = RngStream::new(seed, 0).derive(MODEL);
    match config {
        TwoStageConfig::Ridge(c) => {
            let model = FeatureModel::sample(c.model, &mut model_rng)?;
            let train_plan = SamplingPlan::single(c.observations);
            let test_plan = SamplingPlan::single(c.test_observations.unwrap_or(c.observations));
            let p = c.model.p_dim;
            run_protocol(
                &model,
                &OracleFeatureScore(&model),
                regime,
                seed,
                &train_plan,
                &test_plan,
                false,
                |d| Ok((fit_feature_policy(d, p, c.lambda)?, c.lambda)),
                Experiment::Ridge,
            )
        }
        TwoStageConfig::LowRank(c) => {
            let model = LowRankModel::sample(c.model, &mut model_rng)?;
            let plan = SamplingPlan {
                agents: c.model.n_users,
                picks_per_agent: c.model.ratings_per_user,
                exclusions: None,
            };
            let options = AlsOptions {
                rank: c.rank.unwrap_or(2 * c.model.q),
                lambda: 0.0,
                sweeps: c.sweeps,
                seed: sub_seed(seed, FIT),
            };
            run_protocol(
                &model,
                &OracleLowRankScore(&model),
                regime,
                seed,
                &plan,
                &plan,
                true,
                |d| fit_low_rank(d, c, &options),
                Experiment::LowRank,
            )
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_protocol<E, S, F>(
    env: &E,
    oracle: &dyn ScoreRule<E::Agent>,
    regime: Regime,
    seed: u64,
    train_plan: &SamplingPlan<'_>,
    test_plan: &SamplingPlan<'_>,
    exclude_train: bool,
    fit: F,
    experiment: Experiment,
) -> Result<TwoStageRun>
where
    E: ChoiceEnvironment,
    S: ScoreRule<E::Agent>,
    F: Fn(&Dataset) -> Result<(S, f64)>,
{
    let biased = FeedbackChannel::AbsoluteBiased;
    let train_seed = sub_seed(seed, TRAIN);
    let train = match regime {
        Regime::Oracle => generate_dataset(env, &Policy::Argmax(oracle), train_plan, biased, train_seed)?,
        Regime::OracleUnbiased => {
            generate_dataset(env, &Policy::Argmax(oracle), train_plan, FeedbackChannel::UnbiasedQuality, train_seed)?
        }
        Regime::Random | Regime::Iterated => {
            generate_dataset(env, &Policy::UniformRandom, train_plan, biased, train_seed)?
        }
    };
    let (train, (scores, lambda)) = if regime == Regime::Iterated {
        let (first, _) = fit(&train)?;
        let again = generate_dataset(env, &Policy::Argmax(&first), train_plan, biased, sub_seed(seed, RETRAIN))?;
        let fitted = fit(&again)?;
        (again, fitted)
    } else {
        let fitted = fit(&train)?;
        (train, fitted)
    };

    let seen = exclude_train.then(|| train.pairs());
    let plan = SamplingPlan {
        exclusions: seen.as_ref(),
        ..*test_plan
    };
    let test_seed = sub_seed(seed, TEST);
    let test = generate_dataset(env, &Policy::Argmax(&scores), &plan, biased, test_seed)?;
    let oracle_benchmark = generate_dataset(env, &Policy::Argmax(oracle), &plan, biased, test_seed)?.mean_value();
    let zero = |_: &E::Agent, _: usize| 0.0;
    let zero_benchmark = generate_dataset(env, &Policy::Argmax(&zero), &plan, biased, test_seed)?.mean_value();
    Ok(TwoStageRun {
        result: TwoStageResult {
            experiment,
            regime,
            lambda,
            test_mean_value: test.mean_value(),
            oracle_benchmark,
            zero_benchmark,
            seed,
        },
        train,
        test,
    })
}

fn ratings(data: &Dataset) -> Vec<Rating> {
    data.rows
        .iter()
        .map(|r| Rating {
            user: r.agent,
            item: r.item,
            value: r.feedback,
        })
        .collect()
}

/// Pick λ from the grid by held-out RMSE, then refit on every rating.
fn fit_low_rank(data: &Dataset, config: &LowRankConfig, options: &AlsOptions) -> Result<(AlsFit, f64)> {
    let (nu, ni) = (config.model.n_users, config.model.n_items);
    let mut all = ratings(data);
    let mut rng = RngStream::new(options.seed, 1);
    all.shuffle(&mut rng);
    let n_hold = ((all.len() as f64 * config.holdout_fraction).round() as usize).clamp(1, all.len() - 1);
    let (holdout, fit_part) = all.split_at(n_hold);

    let mut best: Option<(f64, f64)> = None;
    for &lambda in &config.lambda_grid {
        let fit = als_fit(fit_part, nu, ni, &AlsOptions { lambda, ..*options })?;
        let rmse = fit.rmse(holdout);
        log::debug!("als lambda={lambda} holdout rmse={rmse}");
        if best.is_none_or(|(_, b)| rmse < b) {
            best = Some((lambda, rmse));
        }
    }
    let (lambda, _) = best.expect("non-empty grid");
    let fit = als_fit(&all, nu, ni, &AlsOptions { lambda, ..*options })?;
    Ok((fit, lambda))
}
