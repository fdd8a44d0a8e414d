//! Weighted average linking numbers, singular double integrals of the
//! linking kernel `Λ`, and analytic helicity of Beltrami fields.
//!
//! For two disjoint closed orbits the double integral of `Λ` against their
//! normalised orbital measures equals `lk/(ℓ ℓ')`, so the average linking
//! numbers [`average_linking`] of long orbits approximate `∫∫ Λ d(μ × ν)` for
//! the limiting measures. [`convergence_study`] measures that approach on the
//! template, and [`double_integral_lambda`] evaluates the integral directly
//! for orbital mixtures and for volume measures of torus fields.

mod average;
mod field;
mod integral;
mod study;

pub use average::{average_linking, AverageLinkingEntry, AverageLinkingSeries};
pub use field::{
    helicity_analytic, AnalyticField, FieldCheck, HelicityEstimate, CHECK_GRID, CHECK_TOLERANCE, FD_STEP,
    HELICITY_GRIDS, TORUS_PERIOD,
};
pub use integral::{
    double_integral_ladder, double_integral_lambda, field_pair_sampler, DoubleIntegralEstimate, LambdaMeasure,
    OrbitalComponent, OrbitalMeasure, VolumeMeasure,
};
pub use study::{average_linking_series, convergence_study, write_study_csv, ConvergenceStudy, StudyParams, StudyRow};
