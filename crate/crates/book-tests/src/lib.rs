//! Every chapter of the guide in `book/src` is pulled in as module
//! documentation, so `cargo test` runs its Rust code blocks as doctests and
//! the guide cannot drift from the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/binomial.md")]
pub mod binomial {}
#[doc = include_str!("../../../book/src/tail-bounds.md")]
pub mod tail_bounds {}
#[doc = include_str!("../../../book/src/martingale.md")]
pub mod martingale {}
#[doc = include_str!("../../../book/src/utility.md")]
pub mod utility {}
#[doc = include_str!("../../../book/src/value-functions.md")]
pub mod value_functions {}
#[doc = include_str!("../../../book/src/uniform-integrability.md")]
pub mod uniform_integrability {}
#[doc = include_str!("../../../book/src/numerics.md")]
pub mod numerics {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}
