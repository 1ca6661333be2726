//! Chapters of the book in `book/src`, included here so `cargo test` runs
//! every code block in them.

#[doc = include_str!("../../../book/src/overview.md")]
pub mod chapter1 {}

#[doc = include_str!("../../../book/src/problems.md")]
pub mod chapter2 {}

#[doc = include_str!("../../../book/src/escape.md")]
pub mod chapter3 {}

#[doc = include_str!("../../../book/src/subspaces.md")]
pub mod chapter4 {}

#[doc = include_str!("../../../book/src/spectral.md")]
pub mod chapter5 {}

#[doc = include_str!("../../../book/src/combined.md")]
pub mod chapter6 {}

#[doc = include_str!("../../../book/src/instrument.md")]
pub mod chapter7 {}

#[doc = include_str!("../../../book/src/topopt.md")]
pub mod chapter8 {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod chapter9 {}
