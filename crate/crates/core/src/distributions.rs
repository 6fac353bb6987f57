//! Preference and noise distributions.
//!
//! A [`PreferenceSpec`] is the law of one item's private preference signal;
//! a [`NoiseSpec`] is the law of the zero-mean value noise. Both serialize as
//! a `family` string plus named parameters.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{domain, Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PreferenceSpec {
    Bernoulli { p: f64 },
    Normal { mu: f64, sigma: f64 },
    Exponential { rate: f64 },
    /// Pareto type I on `[minimum, ∞)`. Not recentered.
    Pareto { shape: f64, minimum: f64 },
}

impl PreferenceSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PreferenceSpec::Bernoulli { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(domain("p", format!("{p} not in [0, 1]")));
                }
            }
            PreferenceSpec::Normal { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(domain("mu", format!("{mu} is not finite")));
                }
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(domain("sigma", format!("{sigma} must be finite and >= 0")));
                }
            }
            PreferenceSpec::Exponential { rate } => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(domain("rate", format!("{rate} must be finite and > 0")));
                }
            }
            PreferenceSpec::Pareto { shape, minimum } => {
                if !(shape > 1.0 && shape.is_finite()) {
                    return Err(domain("shape", format!("{shape} must be finite and > 1")));
                }
                if !(minimum > 0.0 && minimum.is_finite()) {
                    return Err(domain("minimum", format!("{minimum} must be finite and > 0")));
                }
            }
        }
        Ok(())
    }

    /// One draw. Assumes the spec was validated.
    pub(crate) fn draw(&self, rng: &mut RngStream) -> f64 {
        match *self {
            PreferenceSpec::Bernoulli { p } => {
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            PreferenceSpec::Normal { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                mu + sigma * z
            }
            PreferenceSpec::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
            PreferenceSpec::Pareto { shape, minimum } => {
                // u in (0, 1] keeps the draw finite.
                let u = 1.0 - rng.random::<f64>();
                minimum * u.powf(-1.0 / shape)
            }
        }
    }

    fn is_continuous(&self) -> bool {
        match *self {
            PreferenceSpec::Bernoulli { .. } => false,
            PreferenceSpec::Normal { sigma, .. } => sigma > 0.0,
            PreferenceSpec::Exponential { .. } | PreferenceSpec::Pareto { .. } => true,
        }
    }
}

/// Draw one preference signal from `spec`.
pub fn sample_preference(spec: &PreferenceSpec, rng: &mut RngStream) -> Result<f64> {
    spec.validate()?;
    Ok(spec.draw(rng))
}

/// Analytic mean of `spec`.
pub fn dist_mean(spec: &PreferenceSpec) -> Result<f64> {
    if let PreferenceSpec::Pareto { shape, .. } = *spec {
        if shape <= 1.0 {
            return Err(Error::UndefinedMean(format!("pareto shape {shape} <= 1")));
        }
    }
    spec.validate()?;
    Ok(match *spec {
        PreferenceSpec::Bernoulli { p } => p,
        PreferenceSpec::Normal { mu, .. } => mu,
        PreferenceSpec::Exponential { rate } => 1.0 / rate,
        PreferenceSpec::Pareto { shape, minimum } => shape * minimum / (shape - 1.0),
    })
}

/// Analytic variance of `spec` (infinite for Pareto with shape <= 2).
pub fn dist_variance(spec: &PreferenceSpec) -> Result<f64> {
    spec.validate()?;
    Ok(match *spec {
        PreferenceSpec::Bernoulli { p } => p * (1.0 - p),
        PreferenceSpec::Normal { sigma, .. } => sigma * sigma,
        PreferenceSpec::Exponential { rate } => 1.0 / (rate * rate),
        PreferenceSpec::Pareto { shape, minimum } => {
            if shape <= 2.0 {
                f64::INFINITY
            } else {
                minimum * minimum * shape / ((shape - 1.0).powi(2) * (shape - 2.0))
            }
        }
    })
}

/// `P(θ >= c)`. The closed inequality counts an atom sitting exactly at `c`,
/// so `Bernoulli(p)` at `c = 1` gives `p`.
pub fn tail_above(spec: &PreferenceSpec, c: f64) -> Result<f64> {
    spec.validate()?;
    let indicator = |b: bool| if b { 1.0 } else { 0.0 };
    Ok(match *spec {
        PreferenceSpec::Bernoulli { p } => {
            (p * indicator(1.0 >= c) + (1.0 - p) * indicator(0.0 >= c)).min(1.0)
        }
        PreferenceSpec::Normal { mu, sigma } => {
            if sigma == 0.0 {
                indicator(mu >= c)
            } else {
                0.5 * erfc((c - mu) / (sigma * std::f64::consts::SQRT_2))
            }
        }
        PreferenceSpec::Exponential { rate } => {
            if c <= 0.0 {
                1.0
            } else {
                (-rate * c).exp()
            }
        }
        PreferenceSpec::Pareto { shape, minimum } => {
            if c <= minimum {
                1.0
            } else {
                (minimum / c).powf(shape).min(1.0)
            }
        }
    })
}

/// `P(θ <= c)`. For continuous laws this is exactly `1 - tail_above(c)`;
/// atoms at `c` are counted here as well as in [`tail_above`].
pub fn tail_at_or_below(spec: &PreferenceSpec, c: f64) -> Result<f64> {
    spec.validate()?;
    if spec.is_continuous() {
        return Ok(1.0 - tail_above(spec, c)?);
    }
    let indicator = |b: bool| if b { 1.0 } else { 0.0 };
    Ok(match *spec {
        PreferenceSpec::Bernoulli { p } => {
            ((1.0 - p) * indicator(0.0 <= c) + p * indicator(1.0 <= c)).min(1.0)
        }
        PreferenceSpec::Normal { mu, .. } => indicator(mu <= c),
        _ => unreachable!("continuous families handled above"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseFamily {
    Normal { sigma: f64 },
    None,
}

/// Zero-mean value noise. `sigma_known` is the scale the analysis side
/// assumes (confidence widths, regret bounds); it defaults to the true
/// standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub sigma_known: f64,
}

impl NoiseSpec {
    pub fn normal(sigma: f64) -> Self {
        Self {
            family: NoiseFamily::Normal { sigma },
            sigma_known: sigma,
        }
    }

    pub fn none() -> Self {
        Self {
            family: NoiseFamily::None,
            sigma_known: 0.0,
        }
    }

    pub fn std_dev(&self) -> f64 {
        match self.family {
            NoiseFamily::Normal { sigma } => sigma,
            NoiseFamily::None => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sigma = self.std_dev();
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(domain("noise.sigma", format!("{sigma} must be finite and >= 0")));
        }
        if !(self.sigma_known >= 0.0 && self.sigma_known.is_finite()) {
            return Err(domain(
                "noise.sigma_known",
                format!("{} must be finite and >= 0", self.sigma_known),
            ));
        }
        Ok(())
    }

    pub(crate) fn draw(&self, rng: &mut RngStream) -> f64 {
        match self.family {
            NoiseFamily::Normal { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            NoiseFamily::None => 0.0,
        }
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::none()
    }
}

pub fn sample_noise(spec: &NoiseSpec, rng: &mut RngStream) -> Result<f64> {
    spec.validate()?;
    Ok(spec.draw(rng))
}
