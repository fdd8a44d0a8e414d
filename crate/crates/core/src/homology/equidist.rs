use serde::{Deserialize, Serialize};

use super::beta::CohomologyPressure;
use crate::error::{Error, Result};
use crate::exec::stable_sum;
use crate::symbolic::{
    fold_orbit_groups, CountMethod, EdgeFunction, EnumerationOptions, GroupFold, LogSum, OrbitGroup,
    Window,
};

/// `(ln weight, time average of ψ, orbit count)` for every group in one class.
struct Terms<'a> {
    alpha: &'a [i64],
    psi: &'a EdgeFunction,
    roof: &'a EdgeFunction,
}

impl GroupFold for Terms<'_> {
    type Acc = Vec<(f64, f64, f64)>;
    fn init(&self) -> Self::Acc {
        Vec::new()
    }
    fn visit(&self, acc: &mut Self::Acc, g: &OrbitGroup<'_>) {
        if g.homology == self.alpha {
            acc.push((g.ln_total_weight(), g.average_density(self.psi, self.roof), g.multiplicity));
        }
    }
    fn merge(&self, mut l: Self::Acc, r: Self::Acc) -> Self::Acc {
        l.extend(r);
        l
    }
}

fn class_terms(
    cp: &CohomologyPressure,
    alpha: &[i64],
    psi: &EdgeFunction,
    window: Window,
    opts: &EnumerationOptions,
    method: CountMethod,
) -> Result<Vec<(f64, f64, f64)>> {
    let sys = cp.system();
    if alpha.len() != sys.betti() || psi.len() != sys.edge_count() {
        return Err(Error::InvalidInput("class or observable has the wrong dimension".into()));
    }
    fold_orbit_groups(sys, window, opts, method, &Terms { alpha, psi, roof: sys.roof() })
}

/// One grid point of the equidistribution study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquidistPoint {
    pub t: f64,
    /// `∫ψ dμ⁰_{φ,T}` over the class-restricted orbital measure.
    pub orbital: f64,
    /// `∫ψ dμ_{φ+f_ξ}`.
    pub reference: f64,
    /// `|orbital − reference|`; NaN when the class is empty in the window.
    pub gap: f64,
    pub orbits: f64,
    pub empty: bool,
}

/// Distance between the class-`α` orbital measure of each window
/// `(T + a, T + b]` and the equilibrium state `μ_{φ+f_ξ}`, tested on `ψ`
/// (a time density).
pub fn equidistribute_in_class(
    cp: &CohomologyPressure,
    alpha: &[i64],
    psi: &EdgeFunction,
    t_grid: &[f64],
    offsets: (f64, f64),
    opts: &EnumerationOptions,
    method: CountMethod,
) -> Result<Vec<EquidistPoint>> {
    let reference = cp.xi_equilibrium()?.average_density(psi);
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let terms = class_terms(cp, alpha, psi, Window::new(t + offsets.0, t + offsets.1)?, opts, method)?;
        let orbits: f64 = terms.iter().map(|x| x.2).sum();
        let point = if terms.is_empty() {
            EquidistPoint { t, orbital: f64::NAN, reference, gap: f64::NAN, orbits: 0.0, empty: true }
        } else {
            let max = terms.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = terms.iter().map(|x| (x.0 - max).exp()).collect();
            let wa: Vec<f64> = terms.iter().zip(&w).map(|(x, w)| x.1 * w).collect();
            let orbital = stable_sum(&wa) / stable_sum(&w);
            EquidistPoint { t, orbital, reference, gap: (orbital - reference).abs(), orbits, empty: false }
        };
        out.push(point);
    }
    Ok(out)
}

/// Ratio `Ξ/π` at one `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdPoint {
    pub t: f64,
    /// `log Ξ`: weighted count of class-`α` orbits whose `ψ`-average is at
    /// least `ε` away from the reference.
    pub ln_xi: f64,
    /// `log π` over the whole class.
    pub ln_pi: f64,
    pub ratio: f64,
}

/// Exponential decay fitted to `log(Ξ/π)` against `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayFit {
    /// Least-squares slope over the grid points with `Ξ > 0`.
    Rate { rate: f64, points: usize },
    /// Every numerator vanished: exact-zero decay.
    AllZero,
    /// Fewer than two nonzero points, but not all zero.
    Insufficient { nonzero: usize },
}

impl DecayFit {
    /// Decay was observed: a negative rate or identically zero numerators.
    pub fn is_decaying(&self) -> bool {
        match self {
            DecayFit::Rate { rate, .. } => *rate < 0.0,
            DecayFit::AllZero => true,
            DecayFit::Insufficient { .. } => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LargeDeviation {
    pub reference: f64,
    pub epsilon: f64,
    pub points: Vec<LdPoint>,
    pub fit: DecayFit,
}

fn fit_decay(points: &[LdPoint]) -> DecayFit {
    let xy: Vec<(f64, f64)> = points.iter().filter(|p| p.ratio > 0.0).map(|p| (p.t, p.ratio.ln())).collect();
    if xy.is_empty() {
        return DecayFit::AllZero;
    }
    if xy.len() < 2 {
        return DecayFit::Insufficient { nonzero: xy.len() };
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xy.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    DecayFit::Rate { rate: sxy / sxx, points: xy.len() }
}

/// Large-deviation ratios for the set `{ν : |∫ψ dν − ∫ψ dμ_{φ+f_ξ}| ≥ ε}`.
#[allow(clippy::too_many_arguments)]
pub fn large_deviation_ratio(
    cp: &CohomologyPressure,
    alpha: &[i64],
    psi: &EdgeFunction,
    epsilon: f64,
    t_grid: &[f64],
    offsets: (f64, f64),
    opts: &EnumerationOptions,
    method: CountMethod,
) -> Result<LargeDeviation> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("margin must be positive, got {epsilon}")));
    }
    let reference = cp.xi_equilibrium()?.average_density(psi);
    let mut points = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let terms = class_terms(cp, alpha, psi, Window::new(t + offsets.0, t + offsets.1)?, opts, method)?;
        let mut pi = LogSum::default();
        let mut xi = LogSum::default();
        for (lw, avg, _) in &terms {
            pi.add(*lw);
            if (avg - reference).abs() >= epsilon {
                xi.add(*lw);
            }
        }
        let (ln_xi, ln_pi) = (xi.ln(), pi.ln());
        let ratio = if pi.is_empty() { f64::NAN } else { (ln_xi - ln_pi).exp() };
        points.push(LdPoint { t, ln_xi, ln_pi, ratio });
    }
    let fit = fit_decay(&points);
    Ok(LargeDeviation { reference, epsilon, points, fit })
}
