//! The guide in `book/` cannot run its listings against this workspace on
//! its own, so each chapter is pulled in here as module docs and
//! `cargo test --doc` runs the listings.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/games.md")]
pub mod games {}
#[doc = include_str!("../../../book/src/shapley.md")]
pub mod shapley {}
#[doc = include_str!("../../../book/src/attention-flow.md")]
pub mod attention_flow {}
#[doc = include_str!("../../../book/src/rollout.md")]
pub mod rollout {}
#[doc = include_str!("../../../book/src/relationships.md")]
pub mod relationships {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
