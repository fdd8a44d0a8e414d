use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::beta::CohomologyPressure;
use crate::error::{Error, Result};
use crate::fmt::sig12;
use crate::symbolic::{
    fold_orbit_groups, CountMethod, EnumerationOptions, GroupFold, LogSum, OrbitGroup, PeriodicOrbit,
    SuspensionSystem, Window,
};

/// Sum of the edge labels around the orbit.
pub fn orbit_homology(sys: &SuspensionSystem, orbit: &PeriodicOrbit) -> Vec<i64> {
    sys.homology_of(&orbit.word)
}

/// Weighted count `π_φ(T, α, 𝟙_window)` of one homology class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    /// `log Σ exp(∫_γ φ)`, `-∞` for an empty class.
    pub log_pi: f64,
    /// Number of prime orbits (exact while below 2^53).
    pub orbits: f64,
}

impl ClassCount {
    fn empty() -> Self {
        Self { log_pi: f64::NEG_INFINITY, orbits: 0.0 }
    }

    pub fn pi(&self) -> f64 {
        self.log_pi.exp()
    }
}

struct ClassFold<'a> {
    alpha: Option<&'a [i64]>,
}

impl GroupFold for ClassFold<'_> {
    type Acc = BTreeMap<Vec<i64>, (LogSum, f64)>;
    fn init(&self) -> Self::Acc {
        BTreeMap::new()
    }
    fn visit(&self, acc: &mut Self::Acc, g: &OrbitGroup<'_>) {
        if self.alpha.is_some_and(|a| a != g.homology) {
            return;
        }
        let entry = acc.entry(g.homology.to_vec()).or_default();
        entry.0.add(g.ln_total_weight());
        entry.1 += g.multiplicity;
    }
    fn merge(&self, mut l: Self::Acc, r: Self::Acc) -> Self::Acc {
        for (k, (s, n)) in r {
            let e = l.entry(k).or_default();
            e.0 = e.0.merge(s);
            e.1 += n;
        }
        l
    }
}

fn finish(map: BTreeMap<Vec<i64>, (LogSum, f64)>) -> BTreeMap<Vec<i64>, ClassCount> {
    map.into_iter().map(|(k, (s, n))| (k, ClassCount { log_pi: s.ln(), orbits: n })).collect()
}

/// Weighted count of the prime orbits in `window` whose class is `alpha`.
pub fn count_in_class(
    sys: &SuspensionSystem,
    alpha: &[i64],
    window: Window,
    opts: &EnumerationOptions,
    method: CountMethod,
) -> Result<ClassCount> {
    if alpha.len() != sys.betti() {
        return Err(Error::InvalidInput(format!("class has {} components, expected {}", alpha.len(), sys.betti())));
    }
    let map = fold_orbit_groups(sys, window, opts, method, &ClassFold { alpha: Some(alpha) })?;
    Ok(finish(map).remove(alpha).unwrap_or_else(ClassCount::empty))
}

/// Weighted counts of every class attained in `window`.
pub fn class_counts(
    sys: &SuspensionSystem,
    window: Window,
    opts: &EnumerationOptions,
    method: CountMethod,
) -> Result<BTreeMap<Vec<i64>, ClassCount>> {
    Ok(finish(fold_orbit_groups(sys, window, opts, method, &ClassFold { alpha: None })?))
}

/// Observed versus predicted class count for one `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassCountPrediction {
    pub alpha: Vec<i64>,
    pub t: f64,
    /// The window is `(T + offsets.0, T + offsets.1]`.
    pub offsets: (f64, f64),
    pub predicted: f64,
    pub observed: f64,
    pub ratio: f64,
}

impl ClassCountPrediction {
    pub fn with_observed(mut self, observed: f64) -> Self {
        self.observed = observed;
        self.ratio = observed / self.predicted;
        self
    }
}

/// `log ∫ e^{βx} 𝟙_{(a,b]}(x) dx`.
fn ln_window_integral(beta: f64, a: f64, b: f64) -> f64 {
    if beta.abs() < 1e-12 {
        return (b - a).ln();
    }
    // (e^{βb} - e^{βa})/β = e^{βb}(1 - e^{-β(b-a)})/β
    let hi = beta.max(0.0) * b + beta.min(0.0) * a;
    hi + (-(-(beta.abs()) * (b - a)).exp_m1()).ln() - beta.abs().ln()
}

/// Closed-form class-count asymptotics
/// `(2π)^{-b/2} det(∇²β(ξ))^{-1/2} (∫e^{βx}g) e^{-⟨α,ξ⟩} e^{βT} / T^{1+b/2}`
/// for the window indicator `g = 𝟙_{(a,b]}`. The observed count is left NaN.
pub fn predict_in_class(cp: &CohomologyPressure, alpha: &[i64], offsets: (f64, f64), t: f64) -> ClassCountPrediction {
    let b = cp.dimension() as f64;
    let pairing: f64 = alpha.iter().zip(&cp.xi).map(|(a, x)| *a as f64 * x).sum();
    let ln = -0.5 * b * (2.0 * PI).ln() - 0.5 * cp.hessian_det().ln() + ln_window_integral(cp.beta, offsets.0, offsets.1)
        - pairing
        + cp.beta * t
        - (1.0 + 0.5 * b) * t.ln();
    ClassCountPrediction {
        alpha: alpha.to_vec(),
        t,
        offsets,
        predicted: ln.exp(),
        observed: f64::NAN,
        ratio: f64::NAN,
    }
}

/// Predictions with observed counts over a grid of `T`.
pub fn prediction_table(
    cp: &CohomologyPressure,
    alpha: &[i64],
    offsets: (f64, f64),
    t_grid: &[f64],
    opts: &EnumerationOptions,
    method: CountMethod,
) -> Result<Vec<ClassCountPrediction>> {
    t_grid
        .iter()
        .map(|&t| {
            let window = Window::new(t + offsets.0, t + offsets.1)?;
            let observed = count_in_class(cp.system(), alpha, window, opts, method)?.pi();
            Ok(predict_in_class(cp, alpha, offsets, t).with_observed(observed))
        })
        .collect()
}

/// CSV with columns `T, alpha, observed, predicted, ratio`.
pub fn write_prediction_csv<W: Write>(out: W, rows: &[ClassCountPrediction]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["T", "alpha", "observed", "predicted", "ratio"])?;
    for r in rows {
        let alpha = r.alpha.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(";");
        w.write_record([sig12(r.t), alpha, sig12(r.observed), sig12(r.predicted), sig12(r.ratio)])?;
    }
    w.flush()?;
    Ok(())
}
