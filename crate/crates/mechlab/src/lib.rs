//! Exact-arithmetic laboratory for communication and incentives in auctions.

pub mod bundle;
pub mod equilibrium;
pub mod error;
pub mod experiment;
pub mod fixtures;
pub mod gs;
pub mod matroid;
pub mod multiunit;
pub mod protocol;
pub mod rat;
pub mod rng;
pub mod simultaneous;
pub mod valuation;

pub use bundle::Bundle;
pub use error::{Error, Result};
pub use rat::Rat;
pub use valuation::Valuation;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    pub struct Overview;
    #[doc = include_str!("../../../book/src/protocols.md")]
    pub struct Protocols;
    #[doc = include_str!("../../../book/src/multiunit.md")]
    pub struct Multiunit;
    #[doc = include_str!("../../../book/src/gross-substitutes.md")]
    pub struct GrossSubstitutes;
    #[doc = include_str!("../../../book/src/matroids.md")]
    pub struct Matroids;
    #[doc = include_str!("../../../book/src/simultaneous.md")]
    pub struct Simultaneous;
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub struct Experiments;
}
