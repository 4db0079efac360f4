//! The charfol guide. Each module is a chapter of `book/src`, so the code in
//! the chapters runs as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/forms.md")]
pub mod forms {}

#[doc = include_str!("../../../book/src/foliation.md")]
pub mod foliation {}

#[doc = include_str!("../../../book/src/dynamics.md")]
pub mod dynamics {}

#[doc = include_str!("../../../book/src/certificates.md")]
pub mod certificates {}

#[doc = include_str!("../../../book/src/profile.md")]
pub mod profile {}

#[doc = include_str!("../../../book/src/mori.md")]
pub mod mori {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
