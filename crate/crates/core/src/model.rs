//! Single-step mechanics: value realization, agent choice, regret, feedback.
//!
//! Items are indexed from 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Ground-truth item qualities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    qualities: Vec<f64>,
}

impl Catalog {
    pub fn new(qualities: Vec<f64>) -> Result<Self> {
        if qualities.is_empty() {
            return Err(Error::Empty("catalog needs at least one item".into()));
        }
        if let Some(q) = qualities.iter().find(|q| !q.is_finite()) {
            return Err(Error::Config(format!("quality {q} is not finite")));
        }
        Ok(Self { qualities })
    }

    /// Number of items `K`.
    pub fn len(&self) -> usize {
        self.qualities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qualities.is_empty()
    }

    pub fn qualities(&self) -> &[f64] {
        &self.qualities
    }

    pub fn quality(&self, item: usize) -> Result<f64> {
        self.qualities.get(item).copied().ok_or(Error::IndexOutOfRange {
            index: item,
            len: self.len(),
        })
    }
}

/// One arriving agent: private preferences and value noise for every item.
/// Noise is drawn for all items even though only the chosen one is realized.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentDraw {
    pub theta: Vec<f64>,
    pub epsilon: Vec<f64>,
}

impl AgentDraw {
    pub fn new(theta: Vec<f64>, epsilon: Vec<f64>) -> Result<Self> {
        if theta.len() != epsilon.len() {
            return Err(Error::Dimension {
                expected: theta.len(),
                actual: epsilon.len(),
            });
        }
        Ok(Self { theta, epsilon })
    }
}

/// What the platform gets to see after a choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackChannel {
    /// The realized value `V`, preference included.
    AbsoluteBiased,
    /// `V - θ`, i.e. quality plus noise.
    UnbiasedQuality,
    /// `V - (s + θ)`: value relative to what the agent expected.
    RelativeToExpectation,
}

/// One row of an episode log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub t: u64,
    pub chosen: usize,
    pub value: f64,
    pub feedback: f64,
    pub score_at_choice: f64,
}

/// `argmax_i scores[i] + theta[i]`, lowest index on ties.
pub fn select_item(scores: &[f64], theta: &[f64]) -> Result<usize> {
    if scores.len() != theta.len() {
        return Err(Error::Dimension {
            expected: scores.len(),
            actual: theta.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::Empty("no items to select from".into()));
    }
    Ok(argmax_sum(scores, theta))
}

pub(crate) fn argmax_sum(a: &[f64], b: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = a[0] + b[0];
    for (i, (x, y)) in a.iter().zip(b).enumerate().skip(1) {
        let v = x + y;
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// `V = Q_i + θ_i + ε_i`.
pub fn realize_value(catalog: &Catalog, draw: &AgentDraw, item: usize) -> Result<f64> {
    let q = catalog.quality(item)?;
    let (theta, eps) = match (draw.theta.get(item), draw.epsilon.get(item)) {
        (Some(t), Some(e)) => (*t, *e),
        _ => {
            return Err(Error::IndexOutOfRange {
                index: item,
                len: draw.theta.len().min(draw.epsilon.len()),
            })
        }
    };
    Ok(q + theta + eps)
}

/// Pseudo-regret of one step: `max_i (Q_i + θ_i) - (Q_c + θ_c)`. Noise does
/// not enter.
pub fn step_regret(catalog: &Catalog, theta: &[f64], chosen: usize) -> Result<f64> {
    if theta.len() != catalog.len() {
        return Err(Error::Dimension {
            expected: catalog.len(),
            actual: theta.len(),
        });
    }
    if chosen >= catalog.len() {
        return Err(Error::IndexOutOfRange {
            index: chosen,
            len: catalog.len(),
        });
    }
    Ok(regret_unchecked(catalog.qualities(), theta, chosen))
}

pub(crate) fn regret_unchecked(q: &[f64], theta: &[f64], chosen: usize) -> f64 {
    let best = q
        .iter()
        .zip(theta)
        .map(|(q, t)| q + t)
        .fold(f64::NEG_INFINITY, f64::max);
    best - (q[chosen] + theta[chosen])
}

pub fn make_feedback(channel: FeedbackChannel, value: f64, theta_chosen: f64, score_chosen: f64) -> f64 {
    match channel {
        FeedbackChannel::AbsoluteBiased => value,
        FeedbackChannel::UnbiasedQuality => value - theta_chosen,
        FeedbackChannel::RelativeToExpectation => value - score_chosen - theta_chosen,
    }
}

/// Helper used by the engine: draw a full agent from per-item preference laws.
pub(crate) fn draw_agent(
    prefs: &[crate::distributions::PreferenceSpec],
    noise: &crate::distributions::NoiseSpec,
    rng: &mut RngStream,
) -> AgentDraw {
    let theta = prefs.iter().map(|p| p.draw(rng)).collect();
    let epsilon = (0..prefs.len()).map(|_| noise.draw(rng)).collect();
    AgentDraw { theta, epsilon }
}
