//! Biased matrix factorization by alternating least squares.
//!
//! The model is `r(u, i) ≈ a_i + b_u + ⟨item_i, user_u⟩` and the objective
//!
//! ```text
//! Σ (r - a_i - b_u - ⟨item_i, user_u⟩)² + λ (Σ a² + Σ b² + Σ ‖item‖² + Σ ‖user‖²)
//! ```
//!
//! Each half-sweep solves every user's `(b_u, user_u)` exactly with the item
//! side fixed, then every item's `(a_i, item_i)` with the user side fixed, so
//! the objective never increases.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlsOptions {
    pub rank: usize,
    pub lambda: f64,
    pub sweeps: usize,
    /// Seeds the `N(0, 1/rank)` factor initialization.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlsFit {
    pub item_offsets: Vec<f64>,
    pub user_offsets: Vec<f64>,
    /// `n_items × rank`.
    pub item_factors: DMatrix<f64>,
    /// `n_users × rank`.
    pub user_factors: DMatrix<f64>,
    pub lambda: f64,
    /// Objective at initialization and after every half-sweep.
    pub objective_trace: Vec<f64>,
}

impl AlsFit {
    pub fn rank(&self) -> usize {
        self.item_factors.ncols()
    }

    pub fn predict(&self, user: usize, item: usize) -> f64 {
        self.item_offsets[item]
            + self.user_offsets[user]
            + self.item_factors.row(item).dot(&self.user_factors.row(user))
    }

    pub fn rmse(&self, ratings: &[Rating]) -> f64 {
        let sse: f64 = ratings.iter().map(|r| (r.value - self.predict(r.user, r.item)).powi(2)).sum();
        (sse / ratings.len() as f64).sqrt()
    }

    fn objective(&self, ratings: &[Rating]) -> f64 {
        let sse: f64 = ratings.iter().map(|r| (r.value - self.predict(r.user, r.item)).powi(2)).sum();
        let penalty = self.item_offsets.iter().chain(&self.user_offsets).map(|x| x * x).sum::<f64>()
            + self.item_factors.norm_squared()
            + self.user_factors.norm_squared();
        sse + self.lambda * penalty
    }
}

/// Fit `ratings` over `n_users × n_items`. Users or items without ratings get
/// zero offsets and factors.
pub fn als_fit(ratings: &[Rating], n_users: usize, n_items: usize, options: &AlsOptions) -> Result<AlsFit> {
    let AlsOptions {
        rank,
        lambda,
        sweeps,
        seed,
    } = *options;
    if rank == 0 {
        return Err(domain("rank", "must be >= 1"));
    }
    if sweeps == 0 {
        return Err(domain("sweeps", "must be >= 1"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(domain("lambda", format!("{lambda} must be finite and >= 0")));
    }
    if ratings.is_empty() {
        return Err(Error::Empty("no ratings".into()));
    }
    for r in ratings {
        if r.user >= n_users {
            return Err(Error::IndexOutOfRange {
                index: r.user,
                len: n_users,
            });
        }
        if r.item >= n_items {
            return Err(Error::IndexOutOfRange {
                index: r.item,
                len: n_items,
            });
        }
        if !r.value.is_finite() {
            return Err(domain("rating", format!("{} is not finite", r.value)));
        }
    }

    let by_user = group(ratings, n_users, |r| r.user);
    let by_item = group(ratings, n_items, |r| r.item);

    let mut rng = RngStream::new(seed, 0);
    let init = Normal::new(0.0, (1.0 / rank as f64).sqrt()).expect("positive scale");
    let item_factors = DMatrix::from_fn(n_items, rank, |i, _| {
        let x = init.sample(&mut rng);
        if by_item[i].is_empty() {
            0.0
        } else {
            x
        }
    });
    let user_factors = DMatrix::from_fn(n_users, rank, |u, _| {
        let x = init.sample(&mut rng);
        if by_user[u].is_empty() {
            0.0
        } else {
            x
        }
    });
    let item_offsets: Vec<f64> = by_item
        .iter()
        .map(|rs| mean(rs.iter().map(|&k| ratings[k].value)))
        .collect();
    let user_offsets: Vec<f64> = by_user
        .iter()
        .map(|rs| mean(rs.iter().map(|&k| ratings[k].value - item_offsets[ratings[k].item])))
        .collect();

    let mut fit = AlsFit {
        item_offsets,
        user_offsets,
        item_factors,
        user_factors,
        lambda,
        objective_trace: Vec::with_capacity(2 * sweeps + 1),
    };
    fit.objective_trace.push(fit.objective(ratings));

    for _ in 0..sweeps {
        let users = solve_side(ratings, &by_user, &fit.item_offsets, &fit.item_factors, lambda, |r| r.item)?;
        apply(&users, &mut fit.user_offsets, &mut fit.user_factors);
        fit.objective_trace.push(fit.objective(ratings));

        let items = solve_side(ratings, &by_item, &fit.user_offsets, &fit.user_factors, lambda, |r| r.user)?;
        apply(&items, &mut fit.item_offsets, &mut fit.item_factors);
        fit.objective_trace.push(fit.objective(ratings));
    }
    Ok(fit)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (n, s) = values.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn group(ratings: &[Rating], len: usize, key: impl Fn(&Rating) -> usize) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); len];
    for (k, r) in ratings.iter().enumerate() {
        groups[key(r)].push(k);
    }
    groups
}

/// For every row of this side, solve the ridge problem over `[offset, factors]`
/// with the other side's offsets subtracted from the targets.
fn solve_side(
    ratings: &[Rating],
    groups: &[Vec<usize>],
    other_offsets: &[f64],
    other_factors: &DMatrix<f64>,
    lambda: f64,
    other: impl Fn(&Rating) -> usize + Sync,
) -> Result<Vec<DVector<f64>>> {
    let dim = other_factors.ncols() + 1;
    groups
        .par_iter()
        .enumerate()
        .map(|(row, members)| {
            if members.is_empty() {
                return Ok(DVector::zeros(dim));
            }
            let mut gram = DMatrix::<f64>::identity(dim, dim) * lambda;
            let mut rhs = DVector::<f64>::zeros(dim);
            let mut z = DVector::<f64>::zeros(dim);
            for &k in members {
                let r = &ratings[k];
                let j = other(r);
                z[0] = 1.0;
                for c in 1..dim {
                    z[c] = other_factors[(j, c - 1)];
                }
                gram.ger(1.0, &z, &z, 1.0);
                rhs.axpy(r.value - other_offsets[j], &z, 1.0);
            }
            let solution = gram
                .cholesky()
                .ok_or_else(|| Error::Singular(format!("row {row} has {} ratings and lambda = {lambda}", members.len())))?
                .solve(&rhs);
            if solution.iter().any(|v| !v.is_finite()) {
                return Err(Error::Singular(format!("row {row} produced a non-finite solution")));
            }
            Ok(solution)
        })
        .collect()
}

fn apply(solutions: &[DVector<f64>], offsets: &mut [f64], factors: &mut DMatrix<f64>) {
    for (row, s) in solutions.iter().enumerate() {
        offsets[row] = s[0];
        for c in 0..factors.ncols() {
            factors[(row, c)] = s[c + 1];
        }
    }
}
