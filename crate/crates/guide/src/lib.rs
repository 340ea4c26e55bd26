//! Compiles and runs the code listings in `book/` as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/autodiff.md")]
pub mod autodiff {}

#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/planning.md")]
pub mod planning {}

#[doc = include_str!("../../../book/src/exploration.md")]
pub mod exploration {}

#[doc = include_str!("../../../book/src/imitation.md")]
pub mod imitation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
