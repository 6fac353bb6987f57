//! Feature-based personalization: `V = Q_i + xᵀw_i + θ + ε` with the private
//! preference itself tilted by the covariates, `θ ~ N(xᵀw̃, σ_θ)`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ridge::{ridge_fit, RidgeFit};
use crate::engine::dataset::{ChoiceEnvironment, Dataset, ScoreRule};
use crate::error::{domain, Error, Result};
use crate::rng::RngStream;

/// How the `1/√p` in the weight prior is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScale {
    /// Entries have variance `1/√p`.
    Variance,
    /// Entries have standard deviation `1/√p`, matching how `σ_θ` is written.
    #[default]
    StdDev,
}

impl WeightScale {
    pub fn std_dev(self, p_dim: usize) -> f64 {
        let s = 1.0 / (p_dim as f64).sqrt();
        match self {
            WeightScale::Variance => s.sqrt(),
            WeightScale::StdDev => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureParams {
    pub n_items: usize,
    pub p_dim: usize,
    pub sigma_theta: f64,
    pub noise_sigma: f64,
    pub weight_scale: WeightScale,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            n_items: 100,
            p_dim: 20,
            sigma_theta: 0.1,
            noise_sigma: 1.0,
            weight_scale: WeightScale::StdDev,
        }
    }
}

impl FeatureParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_items == 0 {
            return Err(domain("n_items", "must be >= 1"));
        }
        if !(self.sigma_theta >= 0.0 && self.sigma_theta.is_finite()) {
            return Err(domain("sigma_theta", format!("{} must be finite and >= 0", self.sigma_theta)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(domain("noise_sigma", format!("{} must be finite and >= 0", self.noise_sigma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureModel {
    pub params: FeatureParams,
    pub qualities: Vec<f64>,
    /// Row `i` is `w_i`.
    pub weights: DMatrix<f64>,
    pub w_tilde: DVector<f64>,
}

/// One user: a feature vector for every item and the matching preferences.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureAgent {
    /// `n_items × p_dim`, row major.
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
}

impl FeatureModel {
    /// Draw `Q ~ N(0, 1)` and the weight vectors.
    pub fn sample(params: FeatureParams, rng: &mut RngStream) -> Result<Self> {
        params.validate()?;
        let (n, p) = (params.n_items, params.p_dim);
        let w = Normal::new(0.0, params.weight_scale.std_dev(p.max(1))).expect("finite scale");
        let qualities = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let weights = DMatrix::from_fn(n, p, |_, _| w.sample(rng));
        let w_tilde = DVector::from_fn(p, |_, _| w.sample(rng));
        Ok(Self {
            params,
            qualities,
            weights,
            w_tilde,
        })
    }

    pub fn p_dim(&self) -> usize {
        self.params.p_dim
    }

    /// The oracle score `Q_i + xᵀw_i`.
    pub fn true_score(&self, x: &[f64], item: usize) -> f64 {
        self.qualities[item] + self.weights.row(item).iter().zip(x).map(|(w, x)| w * x).sum::<f64>()
    }

    fn item_x<'a>(&self, agent: &'a FeatureAgent, item: usize) -> &'a [f64] {
        let p = self.params.p_dim;
        &agent.x[item * p..(item + 1) * p]
    }
}

impl ChoiceEnvironment for FeatureModel {
    type Agent = FeatureAgent;

    fn n_items(&self) -> usize {
        self.params.n_items
    }

    fn draw_agent(&self, _index: usize, rng: &mut RngStream) -> FeatureAgent {
        let (n, p) = (self.params.n_items, self.params.p_dim);
        let x: Vec<f64> = (0..n * p).map(|_| StandardNormal.sample(rng)).collect();
        let theta = (0..n)
            .map(|i| {
                let mean: f64 = x[i * p..(i + 1) * p].iter().zip(self.w_tilde.iter()).map(|(a, b)| a * b).sum();
                let z: f64 = StandardNormal.sample(rng);
                mean + self.params.sigma_theta * z
            })
            .collect();
        FeatureAgent { x, theta }
    }

    fn preference(&self, agent: &FeatureAgent, item: usize) -> f64 {
        agent.theta[item]
    }

    fn base_value(&self, agent: &FeatureAgent, item: usize) -> f64 {
        self.true_score(self.item_x(agent, item), item)
    }

    fn noise(&self, rng: &mut RngStream) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.params.noise_sigma * z
    }

    fn features<'a>(&self, agent: &'a FeatureAgent, item: usize) -> Option<&'a [f64]> {
        Some(self.item_x(agent, item))
    }
}

/// Scores every item with `Q_i + xᵀw_i` from the true parameters.
#[derive(Debug, Clone, Copy)]
pub struct OracleFeatureScore<'a>(pub &'a FeatureModel);

impl ScoreRule<FeatureAgent> for OracleFeatureScore<'_> {
    fn score(&self, agent: &FeatureAgent, item: usize) -> f64 {
        self.0.base_value(agent, item)
    }
}

/// Per-item ridge estimates used as the score `Q̂_i + xᵀŵ_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePolicy {
    pub p_dim: usize,
    /// `None` for items with no training rows; they score 0.
    pub fits: Vec<Option<RidgeFit>>,
}

impl FeaturePolicy {
    pub fn predict(&self, x: &[f64], item: usize) -> f64 {
        self.fits[item].as_ref().map_or(0.0, |f| f.predict(x))
    }
}

impl ScoreRule<FeatureAgent> for FeaturePolicy {
    fn score(&self, agent: &FeatureAgent, item: usize) -> f64 {
        self.predict(&agent.x[item * self.p_dim..(item + 1) * self.p_dim], item)
    }
}

/// Regress the recorded feedback on the chosen item's features, one ridge fit
/// per item.
pub fn fit_feature_policy(train: &Dataset, p_dim: usize, lambda: f64) -> Result<FeaturePolicy> {
    if train.is_empty() {
        return Err(Error::Empty("training set has no rows".into()));
    }
    let mut by_item: Vec<Vec<usize>> = vec![Vec::new(); train.n_items];
    for (k, row) in train.rows.iter().enumerate() {
        if row.item >= train.n_items {
            return Err(Error::IndexOutOfRange {
                index: row.item,
                len: train.n_items,
            });
        }
        if row.features.len() != p_dim {
            return Err(Error::Dimension {
                expected: p_dim,
                actual: row.features.len(),
            });
        }
        by_item[row.item].push(k);
    }
    let fits = by_item
        .par_iter()
        .map(|rows| {
            if rows.is_empty() {
                return Ok(None);
            }
            let x = DMatrix::from_fn(rows.len(), p_dim, |r, c| train.rows[rows[r]].features[c]);
            let y = DVector::from_fn(rows.len(), |r, _| train.rows[rows[r]].feedback);
            ridge_fit(&x, &y, lambda, true).map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeaturePolicy { p_dim, fits })
}
