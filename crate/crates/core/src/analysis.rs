//! Closed-form quantities from the bias and free-exploration results, and an
//! empirical classifier for regret growth.

use serde::{Deserialize, Serialize};

use crate::distributions::{tail_above, tail_at_or_below, PreferenceSpec};
use crate::error::{domain, Error, Result};

/// Largest quality gap `Q_1 - Q_2` for which mean-converging scores are
/// provably misled under i.i.d. `Bernoulli(p)` preferences over `K` items:
/// `(1-p)^K / ((1-p)^K + p)`.
pub fn bias_threshold(items: usize, p: f64) -> Result<f64> {
    if items == 0 {
        return Err(domain("K", "must be >= 1"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Degenerate(format!("bias threshold needs 0 < p < 1, got {p}")));
    }
    let stay = (1.0 - p).powi(items as i32);
    Ok(stay / (stay + p))
}

/// How to obtain the exploration constant `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExplorationSource {
    /// `P(θ >= 1) · P(θ <= 0)^(K-1)` from the preference law.
    General { spec: PreferenceSpec },
    /// `p (1-p)^(K-1)`.
    Bernoulli { p: f64 },
    /// Lower bound `γ 2^(1-K)` for laws symmetric about zero with
    /// `P(θ > 1) > γ`.
    Symmetric { gamma: f64 },
}

/// The per-step exploration constant `C = γ' γ^(K-1)`. Returns 0, with a
/// logged warning, when the preference law never reaches 1 or never drops
/// to 0; the regret bound is vacuous in that case.
pub fn exploration_constant(source: &ExplorationSource, items: usize) -> Result<f64> {
    if items == 0 {
        return Err(domain("K", "must be >= 1"));
    }
    let rest = (items - 1) as i32;
    let c = match *source {
        ExplorationSource::General { spec } => {
            let reach = tail_above(&spec, 1.0)?;
            let stay = tail_at_or_below(&spec, 0.0)?;
            reach * stay.powi(rest)
        }
        ExplorationSource::Bernoulli { p } => {
            if !(0.0..=1.0).contains(&p) {
                return Err(domain("p", format!("{p} not in [0, 1]")));
            }
            p * (1.0 - p).powi(rest)
        }
        ExplorationSource::Symmetric { gamma } => {
            if !(0.0..=1.0).contains(&gamma) {
                return Err(domain("gamma", format!("{gamma} not in [0, 1]")));
            }
            gamma * 2f64.powi(-rest)
        }
    };
    if c == 0.0 {
        log::warn!("exploration constant is zero for {source:?}; the regret bound is vacuous");
    }
    Ok(c)
}

/// Inputs of the logarithmic regret bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    pub delta_min: f64,
    pub sigma: f64,
    pub items: usize,
    /// Real valued so the bound can be read between integer horizons.
    pub horizon: f64,
    /// Exploration constant `C`.
    pub c: f64,
    /// Multiplicative constant of the bound's second term. Its value is not
    /// pinned down by the main result, so bounds are reported up to `alpha`;
    /// 1.0 by default.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    1.0
}

/// `(16σ²/Δ + Δ) K + 32 α σ² K (ln T - ln Δ + ln 2) / (Δ² C)`.
pub fn regret_bound(params: &BoundParams) -> Result<f64> {
    let BoundParams {
        delta_min,
        sigma,
        items,
        horizon,
        c,
        alpha,
    } = *params;
    if !(delta_min > 0.0 && delta_min.is_finite()) {
        return Err(domain("delta_min", format!("{delta_min} must be > 0")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(domain("sigma", format!("{sigma} must be >= 0")));
    }
    if items == 0 {
        return Err(domain("items", "must be >= 1"));
    }
    if !(horizon >= 1.0 && horizon.is_finite()) {
        return Err(domain("horizon", format!("{horizon} must be finite and >= 1")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(domain("alpha", format!("{alpha} must be > 0")));
    }
    if c <= 0.0 {
        return Err(Error::VacuousBound(format!("exploration constant C = {c}")));
    }
    if c > 1.0 {
        return Err(domain("C", format!("{c} must be <= 1")));
    }
    let k = items as f64;
    let var = sigma * sigma;
    let head = (16.0 * var / delta_min + delta_min) * k;
    let log_term = horizon.ln() - delta_min.ln() + std::f64::consts::LN_2;
    let tail = 32.0 * alpha * var * k * log_term / (delta_min * delta_min * c);
    Ok(head + tail)
}

/// Smallest pairwise gap between qualities.
pub fn delta_min(qualities: &[f64]) -> Result<f64> {
    if qualities.len() < 2 {
        return Err(domain("qualities", "need at least two items"));
    }
    let mut sorted = qualities.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = f64::INFINITY;
    for w in sorted.windows(2) {
        let gap = w[1] - w[0];
        if gap == 0.0 {
            return Err(Error::ZeroGap(w[0], w[1]));
        }
        best = best.min(gap);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    Linear,
    Logarithmic,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub linear_slope: f64,
    pub linear_r2: f64,
    pub log_coefficient: f64,
    pub log_r2: f64,
    pub classification: Growth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthOptions {
    /// Required r² advantage of the winning model.
    pub margin: f64,
    /// A linear verdict also needs `slope > slope_floor_factor × mean increment`.
    pub slope_floor_factor: f64,
    /// Fraction of the path skipped before fitting.
    pub window_start: f64,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        Self {
            margin: 0.05,
            slope_floor_factor: 1e-3,
            window_start: 0.0,
        }
    }
}

/// Fit the tail of a cumulative regret path against `t` and against `ln t`
/// and decide which describes it. `path[i]` is the regret after `i + 1` steps.
pub fn classify_growth(path: &[f64], options: &GrowthOptions) -> Result<GrowthFit> {
    if path.len() < 100 {
        return Err(domain("path", format!("need at least 100 points, got {}", path.len())));
    }
    if !(0.0..1.0).contains(&options.window_start) {
        return Err(domain("window_start", format!("{} not in [0, 1)", options.window_start)));
    }
    if let Some(i) = path.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::Invariant(format!(
            "regret path decreases at step {} ({} -> {})",
            i + 2,
            path[i],
            path[i + 1]
        )));
    }
    let start = ((path.len() as f64 * options.window_start) as usize).min(path.len() - 2);
    let ts: Vec<f64> = (start..path.len()).map(|i| (i + 1) as f64).collect();
    let ys = &path[start..];
    let log_ts: Vec<f64> = ts.iter().map(|t| t.ln()).collect();

    let (linear_slope, linear_r2) = least_squares(&ts, ys);
    let (log_coefficient, log_r2) = least_squares(&log_ts, ys);

    let mean_increment = path[path.len() - 1] / path.len() as f64;
    let slope_floor = options.slope_floor_factor * mean_increment;
    let classification = if linear_r2 - log_r2 > options.margin && linear_slope > slope_floor {
        Growth::Linear
    } else if log_r2 - linear_r2 > options.margin {
        Growth::Logarithmic
    } else {
        Growth::Indeterminate
    };
    Ok(GrowthFit {
        linear_slope,
        linear_r2,
        log_coefficient,
        log_r2,
        classification,
    })
}

/// Slope and r² of the ordinary least-squares line `y ≈ a x + b`. A
/// constant `y` is fitted perfectly (r² = 1).
fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    if syy == 0.0 {
        return (slope, 1.0);
    }
    let r2 = (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0);
    (slope, r2)
}

/// Everything the analysis side reports about one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub threshold: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub bound: Option<f64>,
    pub classification: Option<Growth>,
    pub slopes: Option<[f64; 2]>,
    pub r2s: Option<[f64; 2]>,
}

impl AnalysisSummary {
    pub fn from_fit(fit: &GrowthFit) -> Self {
        Self {
            threshold: None,
            c: None,
            bound: None,
            classification: Some(fit.classification),
            slopes: Some([fit.linear_slope, fit.log_coefficient]),
            r2s: Some([fit.linear_r2, fit.log_r2]),
        }
    }
}
