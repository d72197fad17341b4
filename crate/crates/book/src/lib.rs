//! Every chapter of the guide in `book/src` is included here so that its
//! Rust snippets run under `cargo test`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/precisions.md")]
pub mod precisions {}

#[doc = include_str!("../../../book/src/devices.md")]
pub mod devices {}

#[doc = include_str!("../../../book/src/crossbar.md")]
pub mod crossbar {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/formats.md")]
pub mod formats {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
