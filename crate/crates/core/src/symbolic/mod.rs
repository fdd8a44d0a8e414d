//! Thermodynamic formalism on suspension flows over edge shifts.
//!
//! A [`MarkovShift`] is a finite directed graph; its symbols are the edges and
//! an edge `f` may follow `e` when `target(e) == source(f)`. Roofs, potentials
//! and observables are locally constant of depth one, i.e. one value per edge
//! ([`EdgeFunction`]). Deeper dependence is handled by [`block_recode`].
//!
//! Conventions used throughout:
//!
//! * the roof `r(e)` is the return time spent over edge `e`;
//! * the symbolic potential `q(e)` is the *integral* of the flow potential
//!   over that time, so a constant flow potential `c` corresponds to `q = c·r`;
//! * observables `ψ` passed to averaging routines are *time densities*:
//!   `∫_γ ψ = Σ ψ(e) r(e)` and the orbit average divides by `ℓ(γ)`;
//! * homology labels are point masses: the label of `e` is collected once per
//!   traversal.

mod counting;
mod fixtures;
mod gibbs;
mod io;
mod orbits;
mod pressure;
mod shift;
mod spectral;
mod stats;
mod system;

pub use counting::{
    fold_orbit_groups, ln_prime_sums_by_word_length, ln_weighted_count, primitive_necklaces_exact, CountMethod, GroupFold,
    OrbitGroup,
};
pub use fixtures::{fixture, fixture_names, load_fixture, parse_fixture, save_fixture, FixtureFile};
pub use gibbs::{calibrate_negative_cohomology, gibbs_ball_bound_check, Calibration, GibbsCheck};
pub use io::{read_orbits_csv, write_orbits_csv};
pub use orbits::{
    enumerate_orbits, enumerate_orbits_with, fold_orbits, format_word, parse_word, necklace_counts, prime_counts_by_word_length,
    trace_counts, EnumerationOptions, OrbitFold, OrbitView, PeriodicOrbit, Window,
};
pub use pressure::{equilibrium_state, flow_equilibrium, flow_pressure, shift_pressure, FlowEquilibrium, MarkovMeasure};
pub use shift::{EdgeFunction, MarkovShift};
pub use spectral::{perron, PerronData};
pub use stats::{growth_rate_estimate, orbit_statistics, GrowthPoint, LogSum, OrbitStatistics, OrbitalMeasure};
pub use system::{block_recode, Lattice, SuspensionSystem};
