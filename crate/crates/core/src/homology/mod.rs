//! Pressure on cohomology and homology-constrained orbit statistics.
//!
//! For a system with integer labels `h(e) ∈ ℤ^b`, the class of an orbit is
//! the sum of its labels, and `β(t)` is the flow pressure of the potential
//! twisted by `t·h` (labels act as point masses along the suspension). `β` is
//! strictly convex when the system is homologically full; its minimiser `ξ`
//! and Hessian enter the class-restricted counting asymptotics.

mod beta;
mod count;
mod equidist;
mod full;

pub use beta::{build_cohomology_pressure, CohomologyPressure, WindingCycleReport, GRADIENT_TOLERANCE, HESSIAN_STEP};
pub use count::{
    class_counts, count_in_class, orbit_homology, predict_in_class, prediction_table, write_prediction_csv,
    ClassCount, ClassCountPrediction,
};
pub use equidist::{equidistribute_in_class, large_deviation_ratio, DecayFit, EquidistPoint, LargeDeviation, LdPoint};
pub use full::{homologically_full_check, min_norm_point, FullCheck, MinNorm};
