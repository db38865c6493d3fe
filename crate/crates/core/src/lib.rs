//! Random hopping time dynamics of the Random Energy Model on the hypercube.
//!
//! The modules follow the pipeline of an aging experiment: sample a
//! [`landscape`], run the [`walk`]-driven [`clock`], compare with the limit
//! objects in [`limits`] and the [`trap`] model, and check the hypotheses with
//! [`conditions`]. [`experiment`] ties them to config files and CSV output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clock;
pub mod conditions;
pub mod error;
pub mod experiment;
pub mod landscape;
pub mod limits;
pub mod seed;
pub mod special;
pub mod stats;
pub mod trap;
pub mod walk;

pub use error::{Error, Result};

// Book chapters, compiled as doctests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/landscape.md")]
    pub mod landscape {}
    #[doc = include_str!("../../../book/src/walk.md")]
    pub mod walk {}
    #[doc = include_str!("../../../book/src/clock.md")]
    pub mod clock {}
    #[doc = include_str!("../../../book/src/conditions.md")]
    pub mod conditions {}
    #[doc = include_str!("../../../book/src/limits.md")]
    pub mod limits {}
    #[doc = include_str!("../../../book/src/trap.md")]
    pub mod trap {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
}
