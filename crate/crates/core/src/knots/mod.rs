//! Periodic orbits as closed curves in ℝ³ and their linking numbers.
//!
//! Orbits of the two-symbol shift are drawn on a horseshoe template with two
//! ears. Linking numbers are computed both exactly, from the signed crossings
//! of a generic planar projection, and numerically, from the Gauss integral
//! evaluated in closed form segment pair by segment pair.

mod curve;
mod lambda;
mod linking;
mod template;

pub use curve::{hopf_pair, min_distance, split_pair, Circle, Point, PolylineCurve, SmoothCurve};
pub use lambda::{
    curve_pair_sampler, lambda_bound_scan, lambda_kernel, orbit_pair_integral, DecadeMax, LambdaScan, SampleMeasure,
    LINKING_CONSTANT,
};
pub use linking::{
    crossing_linking, crossing_linking_along, gauss_linking, link, linking_table, projection_directions,
    write_pairs_csv, LinkingResult, PairRecord, GAUSS_FLOOR,
};
pub(crate) use curve::segment_distance;
pub(crate) use lambda::lambda_raw;
pub(crate) use linking::segment_pair;
pub use template::{realize_orbit, TemplateCurve, TemplateSpec};
