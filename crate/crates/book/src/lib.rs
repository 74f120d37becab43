//! The user guide in `book/src`, compiled so that every Rust snippet in it runs
//! as a doctest.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}

#[doc = include_str!("../../../book/src/gig.md")]
pub mod gig {}

#[doc = include_str!("../../../book/src/samplers.md")]
pub mod samplers {}

#[doc = include_str!("../../../book/src/diagnostics.md")]
pub mod diagnostics {}

#[doc = include_str!("../../../book/src/bounds.md")]
pub mod bounds {}

#[doc = include_str!("../../../book/src/certificate.md")]
pub mod certificate {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
