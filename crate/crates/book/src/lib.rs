//! The guide in `book/` as doctests: each chapter is included as the docs of
//! its own module, so `cargo test` compiles and runs every listing and a
//! failure names the chapter it came from.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/grids.md")]
pub mod grids {}
#[doc = include_str!("../../../book/src/potentials.md")]
pub mod potentials {}
#[doc = include_str!("../../../book/src/resolvent.md")]
pub mod resolvent {}
#[doc = include_str!("../../../book/src/multipliers.md")]
pub mod multipliers {}
#[doc = include_str!("../../../book/src/identities.md")]
pub mod identities {}
#[doc = include_str!("../../../book/src/spectral.md")]
pub mod spectral {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
