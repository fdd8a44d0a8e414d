use serde::{Deserialize, Serialize};

use super::counting::ln_weighted_count;
use super::orbits::{EnumerationOptions, PeriodicOrbit, Window};
use super::shift::EdgeFunction;
use super::system::SuspensionSystem;
use crate::error::Result;
use crate::exec::stable_sum;

/// Streaming `log Σ exp(x_i)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogSum {
    max: f64,
    scaled: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        Self { max: f64::NEG_INFINITY, scaled: 0.0 }
    }
}

impl LogSum {
    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.scaled += (x - self.max).exp();
        }
    }

    pub fn merge(self, other: LogSum) -> LogSum {
        if other.max == f64::NEG_INFINITY {
            return self;
        }
        if self.max == f64::NEG_INFINITY {
            return other;
        }
        let max = self.max.max(other.max);
        LogSum { max, scaled: self.scaled * (self.max - max).exp() + other.scaled * (other.max - max).exp() }
    }

    /// `log Σ exp(x_i)`, or `-∞` for an empty sum.
    pub fn ln(&self) -> f64 {
        if self.scaled == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.scaled == 0.0
    }
}

/// `(1/ℓ) Σ ψ(e) r(e)` for a time density `ψ`.
pub fn orbit_average(sys: &SuspensionSystem, word: &[usize], length: f64, psi: &EdgeFunction) -> f64 {
    word.iter().map(|&e| psi[e] * sys.roof()[e]).sum::<f64>() / length
}

/// Per-orbit averages of an observable together with the weighted sum
/// `π = Σ exp(w_γ)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitStatistics {
    pub averages: Vec<f64>,
    /// `log π`.
    pub log_pi: f64,
    /// `Σ exp(w) · average / Σ exp(w)`; `NaN` when there are no orbits.
    pub weighted_mean: f64,
}

impl OrbitStatistics {
    pub fn pi(&self) -> f64 {
        self.log_pi.exp()
    }
}

pub fn orbit_statistics(sys: &SuspensionSystem, orbits: &[PeriodicOrbit], psi: &EdgeFunction) -> OrbitStatistics {
    let averages: Vec<f64> = orbits.iter().map(|o| orbit_average(sys, &o.word, o.length, psi)).collect();
    let mut log_pi = LogSum::default();
    for o in orbits {
        log_pi.add(o.weight);
    }
    let measure = OrbitalMeasure::weighted(orbits.to_vec());
    OrbitStatistics { weighted_mean: measure.mean_of(&averages), averages, log_pi: log_pi.ln() }
}

/// Convex combination of orbit measures `μ_γ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitalMeasure {
    pub orbits: Vec<PeriodicOrbit>,
    pub weights: Vec<f64>,
    pub normalized: bool,
}

impl OrbitalMeasure {
    /// Weights proportional to `exp(w_γ)`, normalised to sum 1.
    pub fn weighted(orbits: Vec<PeriodicOrbit>) -> Self {
        let wmax = orbits.iter().map(|o| o.weight).fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = orbits.iter().map(|o| (o.weight - wmax).exp()).collect();
        let total = stable_sum(&raw);
        Self { weights: raw.iter().map(|x| x / total).collect(), orbits, normalized: true }
    }

    /// Weighted mean of per-orbit values, summed in a fixed order.
    pub fn mean_of(&self, values: &[f64]) -> f64 {
        if self.orbits.is_empty() {
            return f64::NAN;
        }
        let terms: Vec<f64> = self.weights.iter().zip(values).map(|(w, v)| w * v).collect();
        let s = stable_sum(&terms);
        if self.normalized {
            s
        } else {
            s / stable_sum(&self.weights)
        }
    }

    /// `∫ψ dμ` for a time density `ψ`.
    pub fn integrate_density(&self, sys: &SuspensionSystem, psi: &EdgeFunction) -> f64 {
        let avgs: Vec<f64> = self.orbits.iter().map(|o| orbit_average(sys, &o.word, o.length, psi)).collect();
        self.mean_of(&avgs)
    }

    /// Winding cycle `Σ w_γ h_γ / ℓ_γ`.
    pub fn winding(&self, b: usize) -> Vec<f64> {
        (0..b)
            .map(|i| {
                let v: Vec<f64> = self.orbits.iter().map(|o| o.homology[i] as f64 / o.length).collect();
                self.mean_of(&v)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthPoint {
    pub t: f64,
    pub log_pi: f64,
    /// `(1/T) log π`.
    pub estimate: f64,
    /// Number of orbits in the window (`NaN` when the counting method does
    /// not track it).
    pub orbits: f64,
}

/// `(1/T) log π_φ(T, 𝟙_window)` on a grid of `T`, with the window
/// `(T + offset.0, T + offset.1]`. The potential of `sys` is used; sums are
/// exact, by content counting, trace recursion or enumeration.
pub fn growth_rate_estimate(
    sys: &SuspensionSystem,
    offset: (f64, f64),
    t_grid: &[f64],
    opts: &EnumerationOptions,
) -> Result<Vec<GrowthPoint>> {
    t_grid
        .iter()
        .map(|&t| {
            let (log_pi, orbits) = ln_weighted_count(sys, Window::new(t + offset.0, t + offset.1)?, opts)?;
            Ok(GrowthPoint { t, log_pi, estimate: log_pi / t, orbits })
        })
        .collect()
}
