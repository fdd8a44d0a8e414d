//! Numerical laboratory for periodic orbits of symbolic hyperbolic flows.
//!
//! The crate is organised bottom-up:
//!
//! * [`symbolic`] — suspension flows over edge shifts: pressure, equilibrium
//!   states, prime periodic orbit enumeration and weighted orbit statistics.
//! * [`homology`] — pressure on cohomology, its minimiser, class-restricted
//!   counting asymptotics, equidistribution and large deviations.
//! * [`knots`] — realisation of orbits as polygons on a horseshoe template
//!   in ℝ³ and linking numbers (crossing counts and the Gauss integral).
//! * [`helicity`] — weighted average linking numbers, singular double
//!   integrals of the linking kernel and Beltrami helicity fixtures.
//! * [`runner`] — configuration-driven experiments with reproducible output.
//!
//! Data-parallel loops go through [`exec::Exec`]; with the default `parallel`
//! feature they run on rayon, otherwise sequentially. Every reduction has a
//! fixed order so results do not depend on the thread count.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod fmt;
pub mod helicity;
pub mod homology;
pub mod knots;
pub mod runner;
pub mod symbolic;

pub use error::{Error, Result};
pub use exec::Exec;
