//! Offline data generation under a frozen scoring rule.
//!
//! Unlike [`run_episode`](super::run_episode), nothing here learns between
//! rows: a fixed [`Policy`] picks items for a sequence of agents and the
//! reported feedback is collected into a [`Dataset`]. Each agent draws from
//! its own stream derived from the seed, so generation runs in parallel and
//! is still reproducible.

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{make_feedback, FeedbackChannel};
use crate::rng::RngStream;

/// A generative model of agents choosing among items.
pub trait ChoiceEnvironment: Sync {
    type Agent: Send;

    fn n_items(&self) -> usize;

    /// Materialize agent `index`, drawing any per-agent randomness from `rng`.
    fn draw_agent(&self, index: usize, rng: &mut RngStream) -> Self::Agent;

    /// The agent's private preference for `item`.
    fn preference(&self, agent: &Self::Agent, item: usize) -> f64;

    /// The part of the value a perfect platform could predict: everything
    /// except the private preference and the noise.
    fn base_value(&self, agent: &Self::Agent, item: usize) -> f64;

    fn noise(&self, rng: &mut RngStream) -> f64;

    /// Observed covariates for `(agent, item)`, if the model has any.
    fn features<'a>(&self, _agent: &'a Self::Agent, _item: usize) -> Option<&'a [f64]> {
        None
    }
}

/// A frozen score function.
pub trait ScoreRule<A>: Sync {
    fn score(&self, agent: &A, item: usize) -> f64;
}

impl<A, F> ScoreRule<A> for F
where
    F: Fn(&A, usize) -> f64 + Sync,
{
    fn score(&self, agent: &A, item: usize) -> f64 {
        self(agent, item)
    }
}

/// How items get picked.
pub enum Policy<'a, A> {
    /// The agent picks `argmax score + preference` (lowest index on ties).
    Argmax(&'a dyn ScoreRule<A>),
    /// The platform assigns an item uniformly at random; preferences play no role.
    UniformRandom,
}

/// `(agent, item)` pairs an agent may not pick.
pub type Exclusions = HashSet<(usize, usize)>;

#[derive(Debug, Clone, Copy)]
pub struct SamplingPlan<'a> {
    pub agents: usize,
    /// Distinct items each agent picks, one after another.
    pub picks_per_agent: usize,
    pub exclusions: Option<&'a Exclusions>,
}

impl SamplingPlan<'_> {
    /// One pick for each of `agents` fresh agents.
    pub fn single(agents: usize) -> Self {
        Self {
            agents,
            picks_per_agent: 1,
            exclusions: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub agent: usize,
    pub item: usize,
    /// Covariates of the chosen item (empty when the model has none).
    pub features: Vec<f64>,
    /// What the platform records.
    pub feedback: f64,
    /// Realized value `V`.
    pub value: f64,
    pub preference: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_items: usize,
    pub channel: FeedbackChannel,
    pub rows: Vec<DatasetRow>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn mean_value(&self) -> f64 {
        self.rows.iter().map(|r| r.value).sum::<f64>() / self.rows.len() as f64
    }

    /// `(agent, item)` pairs present in the dataset.
    pub fn pairs(&self) -> Exclusions {
        self.rows.iter().map(|r| (r.agent, r.item)).collect()
    }
}

pub fn generate_dataset<E: ChoiceEnvironment>(
    env: &E,
    policy: &Policy<'_, E::Agent>,
    plan: &SamplingPlan<'_>,
    channel: FeedbackChannel,
    seed: u64,
) -> Result<Dataset> {
    if plan.agents == 0 || plan.picks_per_agent == 0 {
        return Err(Error::Config("dataset needs at least one agent and one pick".into()));
    }
    let n_items = env.n_items();
    if n_items == 0 {
        return Err(Error::Empty("environment has no items".into()));
    }
    let root = RngStream::new(seed, 0);
    let per_agent: Vec<Result<Vec<DatasetRow>>> = (0..plan.agents)
        .into_par_iter()
        .map(|index| {
            let mut rng = root.derive(index as u64);
            agent_rows(env, policy, plan, channel, index, &mut rng)
        })
        .collect();
    let mut rows = Vec::with_capacity(plan.agents * plan.picks_per_agent);
    for r in per_agent {
        rows.extend(r?);
    }
    Ok(Dataset { n_items, channel, rows })
}

fn agent_rows<E: ChoiceEnvironment>(
    env: &E,
    policy: &Policy<'_, E::Agent>,
    plan: &SamplingPlan<'_>,
    channel: FeedbackChannel,
    index: usize,
    rng: &mut RngStream,
) -> Result<Vec<DatasetRow>> {
    let agent = env.draw_agent(index, rng);
    let mut available: Vec<usize> = (0..env.n_items())
        .filter(|&i| plan.exclusions.is_none_or(|ex| !ex.contains(&(index, i))))
        .collect();
    if available.len() < plan.picks_per_agent {
        return Err(Error::Config(format!(
            "agent {index} has {} eligible items but must pick {}",
            available.len(),
            plan.picks_per_agent
        )));
    }
    // Scores are fixed for the agent's lifetime; compute them once.
    let scores: Vec<f64> = match policy {
        Policy::Argmax(rule) => (0..env.n_items()).map(|i| rule.score(&agent, i)).collect(),
        Policy::UniformRandom => vec![0.0; env.n_items()],
    };

    let mut rows = Vec::with_capacity(plan.picks_per_agent);
    for _ in 0..plan.picks_per_agent {
        let slot = match policy {
            Policy::Argmax(_) => {
                let mut best = 0;
                let mut best_val = f64::NEG_INFINITY;
                for (slot, &i) in available.iter().enumerate() {
                    let v = scores[i] + env.preference(&agent, i);
                    if v > best_val {
                        best = slot;
                        best_val = v;
                    }
                }
                best
            }
            Policy::UniformRandom => rng.random_range(0..available.len()),
        };
        // `remove` keeps the remaining items in index order, so ties still
        // break towards the lowest item index.
        let item = available.remove(slot);
        let preference = env.preference(&agent, item);
        let value = env.base_value(&agent, item) + preference + env.noise(rng);
        let score = scores[item];
        rows.push(DatasetRow {
            agent: index,
            item,
            features: env.features(&agent, item).map(<[f64]>::to_vec).unwrap_or_default(),
            feedback: make_feedback(channel, value, preference, score),
            value,
            preference,
            score,
        });
    }
    Ok(rows)
}

/// Mean realized value of agents following `policy`.
pub fn evaluate_policy<E: ChoiceEnvironment>(
    env: &E,
    policy: &Policy<'_, E::Agent>,
    plan: &SamplingPlan<'_>,
    seed: u64,
) -> Result<f64> {
    let data = generate_dataset(env, policy, plan, FeedbackChannel::AbsoluteBiased, seed)?;
    Ok(data.mean_value())
}
