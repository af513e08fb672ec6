//! Renormalization numerics for translation flows.

pub mod bv;
pub mod cocycle;
pub mod dioph;
pub mod error;
pub mod iet;
pub mod matrix;
pub mod rng;
pub mod spectral;
pub mod substitution;
pub mod twisted;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/substitutions.md")]
    mod substitutions {}
    #[doc = include_str!("../../../book/src/induction.md")]
    mod induction {}
    #[doc = include_str!("../../../book/src/adic.md")]
    mod adic {}
    #[doc = include_str!("../../../book/src/cocycle.md")]
    mod cocycle {}
    #[doc = include_str!("../../../book/src/twisted.md")]
    mod twisted {}
    #[doc = include_str!("../../../book/src/diophantine.md")]
    mod diophantine {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
