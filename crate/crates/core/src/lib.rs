//! Singular solutions of `Δu + u^p = 0` with prescribed isolated singularities,
//! built by gluing rescaled radial profiles and correcting with a contraction
//! iteration. The guide in `book/` walks through each module.

pub mod cli;
pub mod error;
pub mod fixed_point;
pub mod glue;
pub mod integrate;
pub mod linalg;
pub mod linear_solve;
pub mod ode_family;
pub mod params;
pub mod radial_profile;
pub mod weighted_norms;

pub use error::{Error, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/overview.md")]
mod book_overview {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/parameters.md")]
mod book_parameters {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/profile.md")]
mod book_profile {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/channels.md")]
mod book_channels {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/weighted-norms.md")]
mod book_weighted_norms {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/gluing.md")]
mod book_gluing {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/linear-solve.md")]
mod book_linear_solve {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/fixed-point.md")]
mod book_fixed_point {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
