//! Scoring processes: how the platform turns past feedback into scores.
//!
//! Every scorer here is a function of per-item sufficient statistics
//! (selection count and feedback sum) and the step index only.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Score given to untried items by UCB. Finite, and larger than any
/// realistic score, so untried items are tried first.
pub const UNTRIED_SENTINEL: f64 = f64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScoringAlgorithm {
    /// Plain running average of feedback; 0 before the first observation.
    EmpiricalAverage,
    /// Running average clamped to `[0, 1]`.
    ClippedAverage,
    /// Average plus `sigma * sqrt(2 ln t / n)`.
    Ucb { sigma: f64 },
    /// Draw from `N(average, sigma^2 / (n + 1))`.
    GaussianThompson { sigma: f64 },
    /// Fixed, history-independent scores.
    Oracle { q: Vec<f64> },
    /// All scores zero.
    Zero,
}

impl ScoringAlgorithm {
    pub fn name(&self) -> &'static str {
        match self {
            ScoringAlgorithm::EmpiricalAverage => "empirical_average",
            ScoringAlgorithm::ClippedAverage => "clipped_average",
            ScoringAlgorithm::Ucb { .. } => "ucb",
            ScoringAlgorithm::GaussianThompson { .. } => "gaussian_thompson",
            ScoringAlgorithm::Oracle { .. } => "oracle",
            ScoringAlgorithm::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreState {
    counts: Vec<u64>,
    sums: Vec<f64>,
    algorithm: ScoringAlgorithm,
}

impl ScoreState {
    pub fn new(items: usize, algorithm: ScoringAlgorithm) -> Result<Self> {
        if items == 0 {
            return Err(Error::Empty("scorer needs at least one item".into()));
        }
        match &algorithm {
            ScoringAlgorithm::Oracle { q } if q.len() != items => {
                return Err(Error::Dimension {
                    expected: items,
                    actual: q.len(),
                })
            }
            ScoringAlgorithm::Ucb { sigma } | ScoringAlgorithm::GaussianThompson { sigma }
                if !(*sigma >= 0.0 && sigma.is_finite()) =>
            {
                return Err(crate::error::domain("sigma", format!("{sigma} must be finite and >= 0")))
            }
            _ => {}
        }
        Ok(Self {
            counts: vec![0; items],
            sums: vec![0.0; items],
            algorithm,
        })
    }

    /// Build a state directly from sufficient statistics.
    pub fn from_stats(counts: Vec<u64>, sums: Vec<f64>, algorithm: ScoringAlgorithm) -> Result<Self> {
        if counts.len() != sums.len() {
            return Err(Error::Dimension {
                expected: counts.len(),
                actual: sums.len(),
            });
        }
        let mut state = Self::new(counts.len(), algorithm)?;
        state.counts = counts;
        state.sums = sums;
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn algorithm(&self) -> &ScoringAlgorithm {
        &self.algorithm
    }

    pub fn observe(&mut self, item: usize, feedback: f64) -> Result<()> {
        let len = self.len();
        let (c, s) = match (self.counts.get_mut(item), self.sums.get_mut(item)) {
            (Some(c), Some(s)) => (c, s),
            _ => return Err(Error::IndexOutOfRange { index: item, len }),
        };
        *c += 1;
        *s += feedback;
        Ok(())
    }

    fn mean(&self, i: usize) -> f64 {
        if self.counts[i] == 0 {
            0.0
        } else {
            self.sums[i] / self.counts[i] as f64
        }
    }

    pub fn empirical_scores(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.mean(i)).collect()
    }

    pub fn clipped_scores(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.mean(i).clamp(0.0, 1.0)).collect()
    }

    /// Upper confidence scores at (possibly fractional) time `t >= 1`,
    /// using this state's `Ucb` sigma (0 for other algorithms).
    pub fn ucb_scores(&self, t: f64) -> Vec<f64> {
        let sigma = match self.algorithm {
            ScoringAlgorithm::Ucb { sigma } => sigma,
            _ => 0.0,
        };
        self.ucb_scores_with(sigma, t)
    }

    pub(crate) fn ucb_scores_with(&self, sigma: f64, t: f64) -> Vec<f64> {
        let log_t = t.max(1.0).ln();
        (0..self.len())
            .map(|i| {
                let n = self.counts[i];
                if n == 0 {
                    UNTRIED_SENTINEL
                } else if sigma == 0.0 {
                    self.mean(i)
                } else {
                    self.mean(i) + sigma * (2.0 * log_t / n as f64).sqrt()
                }
            })
            .collect()
    }

    /// Posterior samples under this state's `GaussianThompson` sigma (0 for
    /// other algorithms).
    pub fn thompson_scores(&self, rng: &mut RngStream) -> Vec<f64> {
        let sigma = match self.algorithm {
            ScoringAlgorithm::GaussianThompson { sigma } => sigma,
            _ => 0.0,
        };
        self.thompson_scores_with(sigma, rng)
    }

    pub(crate) fn thompson_scores_with(&self, sigma: f64, rng: &mut RngStream) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let z: f64 = StandardNormal.sample(rng);
                let width = sigma / ((self.counts[i] + 1) as f64).sqrt();
                self.mean(i) + width * z
            })
            .collect()
    }

    pub fn fixed_scores(&self) -> Result<Vec<f64>> {
        match &self.algorithm {
            ScoringAlgorithm::Oracle { q } => Ok(q.clone()),
            ScoringAlgorithm::Zero => Ok(vec![0.0; self.len()]),
            other => Err(Error::Misuse(format!(
                "fixed scores requested from a {} scorer",
                other.name()
            ))),
        }
    }

    /// Scores shown to the agent arriving at step `t` (1-based).
    pub fn scores(&self, t: u64, rng: &mut RngStream) -> Vec<f64> {
        match &self.algorithm {
            ScoringAlgorithm::EmpiricalAverage => self.empirical_scores(),
            ScoringAlgorithm::ClippedAverage => self.clipped_scores(),
            ScoringAlgorithm::Ucb { sigma } => self.ucb_scores_with(*sigma, t as f64),
            ScoringAlgorithm::GaussianThompson { sigma } => self.thompson_scores_with(*sigma, rng),
            ScoringAlgorithm::Oracle { q } => q.clone(),
            ScoringAlgorithm::Zero => vec![0.0; self.len()],
        }
    }
}
