pub mod analysis;
pub mod distributions;
pub mod engine;
pub mod error;
pub mod model;
pub mod personalization;
pub mod rng;
pub mod scoring;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/preferences.md")]
    mod preferences {}
    #[doc = include_str!("../../../book/src/scoring.md")]
    mod scoring {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/personalization.md")]
    mod personalization {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
