//! The guide's chapters as doc-tests, so every snippet in `book/` compiles
//! and runs under `cargo test`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}

#[doc = include_str!("../../../book/src/projection.md")]
pub mod projection {}

#[doc = include_str!("../../../book/src/pure-equilibria.md")]
pub mod pure_equilibria {}

#[doc = include_str!("../../../book/src/mixed-equilibria.md")]
pub mod mixed_equilibria {}

#[doc = include_str!("../../../book/src/instances.md")]
pub mod instances {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
