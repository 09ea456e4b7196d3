//! The chapters of the guide, compiled as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}

#[doc = include_str!("../../../book/src/dynamics.md")]
pub mod dynamics {}

#[doc = include_str!("../../../book/src/meanfield.md")]
pub mod meanfield {}

#[doc = include_str!("../../../book/src/stochastic.md")]
pub mod stochastic {}

#[doc = include_str!("../../../book/src/lemmas.md")]
pub mod lemmas {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
