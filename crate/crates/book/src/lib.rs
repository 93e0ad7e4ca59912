//! The guide under `book/src`, one module per chapter, so that
//! `cargo test --doc` runs every Rust snippet in it.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/parameters.md")]
pub mod parameters {}
#[doc = include_str!("../../../book/src/diffusion.md")]
pub mod diffusion {}
#[doc = include_str!("../../../book/src/steady-state.md")]
pub mod steady_state {}
#[doc = include_str!("../../../book/src/oracle.md")]
pub mod oracle {}
#[doc = include_str!("../../../book/src/protocols.md")]
pub mod protocols {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
