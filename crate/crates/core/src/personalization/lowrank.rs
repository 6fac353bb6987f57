//! Low-rank personalization: `v(u, i) = a_i + b_u + ⟨u_i, v_u⟩ + ⟨x_i, y_u⟩ + ε`,
//! where the last inner product is the user's private preference.

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::als::AlsFit;
use crate::engine::dataset::{ChoiceEnvironment, ScoreRule};
use crate::error::{domain, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowRankParams {
    pub n_users: usize,
    pub n_items: usize,
    pub q: usize,
    pub noise_sigma: f64,
    pub ratings_per_user: usize,
}

impl Default for LowRankParams {
    fn default() -> Self {
        Self {
            n_users: 2000,
            n_items: 500,
            q: 4,
            noise_sigma: 0.1,
            ratings_per_user: 40,
        }
    }
}

impl LowRankParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_items == 0 {
            return Err(domain("n_users/n_items", "must be >= 1"));
        }
        if self.q == 0 {
            return Err(domain("q", "must be >= 1"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(domain("noise_sigma", format!("{} must be finite and >= 0", self.noise_sigma)));
        }
        if self.ratings_per_user == 0 {
            return Err(domain("ratings_per_user", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowRankModel {
    pub params: LowRankParams,
    pub item_offsets: Vec<f64>,
    pub user_offsets: Vec<f64>,
    /// `n_items × q`.
    pub item_factors: DMatrix<f64>,
    /// `n_users × q`.
    pub user_factors: DMatrix<f64>,
    pub item_pref: DMatrix<f64>,
    pub user_pref: DMatrix<f64>,
}

impl LowRankModel {
    /// Every entry, offsets included, is `N(0, 1/q)`.
    pub fn sample(params: LowRankParams, rng: &mut RngStream) -> Result<Self> {
        params.validate()?;
        let (nu, ni, q) = (params.n_users, params.n_items, params.q);
        let g = Normal::new(0.0, (1.0 / q as f64).sqrt()).expect("finite scale");
        let item_offsets = (0..ni).map(|_| g.sample(rng)).collect();
        let user_offsets = (0..nu).map(|_| g.sample(rng)).collect();
        let item_factors = DMatrix::from_fn(ni, q, |_, _| g.sample(rng));
        let user_factors = DMatrix::from_fn(nu, q, |_, _| g.sample(rng));
        let item_pref = DMatrix::from_fn(ni, q, |_, _| g.sample(rng));
        let user_pref = DMatrix::from_fn(nu, q, |_, _| g.sample(rng));
        Ok(Self {
            params,
            item_offsets,
            user_offsets,
            item_factors,
            user_factors,
            item_pref,
            user_pref,
        })
    }
}

impl ChoiceEnvironment for LowRankModel {
    /// Users are fixed; the agent is just the user index.
    type Agent = usize;

    fn n_items(&self) -> usize {
        self.params.n_items
    }

    fn draw_agent(&self, index: usize, _rng: &mut RngStream) -> usize {
        index
    }

    fn preference(&self, &user: &usize, item: usize) -> f64 {
        self.item_pref.row(item).dot(&self.user_pref.row(user))
    }

    fn base_value(&self, &user: &usize, item: usize) -> f64 {
        self.item_offsets[item] + self.user_offsets[user] + self.item_factors.row(item).dot(&self.user_factors.row(user))
    }

    fn noise(&self, rng: &mut RngStream) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.params.noise_sigma * z
    }
}

/// Scores with the true `a_i + b_u + ⟨u_i, v_u⟩`.
#[derive(Debug, Clone, Copy)]
pub struct OracleLowRankScore<'a>(pub &'a LowRankModel);

impl ScoreRule<usize> for OracleLowRankScore<'_> {
    fn score(&self, user: &usize, item: usize) -> f64 {
        self.0.base_value(user, item)
    }
}

impl ScoreRule<usize> for AlsFit {
    fn score(&self, &user: &usize, item: usize) -> f64 {
        self.predict(user, item)
    }
}
