//! Each chapter of the guide is attached as documentation, so `cargo test`
//! runs its code blocks as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/theta.md")]
pub mod theta {}

#[doc = include_str!("../../../book/src/absorbed.md")]
pub mod absorbed {}

#[doc = include_str!("../../../book/src/selection.md")]
pub mod selection {}

#[doc = include_str!("../../../book/src/levy.md")]
pub mod levy {}

#[doc = include_str!("../../../book/src/stable_pp.md")]
pub mod stable_pp {}

#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness {}
