use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::full::{homologically_full_check, FullCheck};
use crate::error::{Error, Result};
use crate::symbolic::{flow_equilibrium, FlowEquilibrium, OrbitalMeasure, SuspensionSystem};

/// Newton stops once `|∇β(ξ)|` falls below this.
pub const GRADIENT_TOLERANCE: f64 = 1e-9;
/// Central-difference step for the Hessian.
pub const HESSIAN_STEP: f64 = 1e-4;
const MAX_NEWTON_ITERATIONS: usize = 100;

/// `β(t)`: flow pressure of `q + Σ t_i h_i`, with its minimiser and Hessian.
#[derive(Clone, Debug)]
pub struct CohomologyPressure {
    sys: SuspensionSystem,
    /// Minimiser of `β`.
    pub xi: Vec<f64>,
    /// `β(ξ)`.
    pub beta: f64,
    /// `∇²β(ξ)`, symmetrised.
    pub hessian: Vec<Vec<f64>>,
    /// `|∇β(ξ)|` at termination.
    pub gradient_norm: f64,
    pub newton_iterations: usize,
}

impl CohomologyPressure {
    pub fn system(&self) -> &SuspensionSystem {
        &self.sys
    }

    pub fn dimension(&self) -> usize {
        self.sys.betti()
    }

    /// Flow equilibrium state of the twisted potential at `t`.
    pub fn equilibrium_at(&self, t: &[f64]) -> Result<FlowEquilibrium> {
        twisted_equilibrium(&self.sys, t)
    }

    pub fn evaluate(&self, t: &[f64]) -> Result<f64> {
        Ok(self.equilibrium_at(t)?.pressure)
    }

    /// `∇β(t)`: the winding cycle of the equilibrium state at `t`.
    pub fn gradient(&self, t: &[f64]) -> Result<Vec<f64>> {
        gradient(&self.sys, t)
    }

    /// Central differences of the analytic gradient.
    pub fn hessian_at(&self, t: &[f64]) -> Result<Vec<Vec<f64>>> {
        hessian(&self.sys, t)
    }

    pub fn hessian_det(&self) -> f64 {
        let b = self.dimension();
        DMatrix::from_fn(b, b, |i, j| self.hessian[i][j]).determinant()
    }

    /// The equilibrium state `μ_{φ+f_ξ}`.
    pub fn xi_equilibrium(&self) -> Result<FlowEquilibrium> {
        self.equilibrium_at(&self.xi)
    }

    /// Winding cycle of `μ_{φ+f_ξ}`, which vanishes at the minimiser.
    pub fn xi_winding(&self) -> Result<WindingCycleReport> {
        Ok(WindingCycleReport::of_equilibrium(&self.sys, &self.xi_equilibrium()?, "equilibrium at xi"))
    }
}

fn twisted_equilibrium(sys: &SuspensionSystem, t: &[f64]) -> Result<FlowEquilibrium> {
    if t.len() != sys.betti() {
        return Err(Error::InvalidInput(format!("expected {} coordinates, got {}", sys.betti(), t.len())));
    }
    flow_equilibrium(sys.shift(), &sys.twisted_potential(t), sys.roof())
}

fn gradient(sys: &SuspensionSystem, t: &[f64]) -> Result<Vec<f64>> {
    let eq = twisted_equilibrium(sys, t)?;
    Ok((0..sys.betti()).map(|i| eq.average_point(&sys.label_function(i))).collect())
}

#[allow(clippy::needless_range_loop)]
fn hessian(sys: &SuspensionSystem, t: &[f64]) -> Result<Vec<Vec<f64>>> {
    let b = sys.betti();
    let mut h = vec![vec![0.0; b]; b];
    for j in 0..b {
        let mut plus = t.to_vec();
        let mut minus = t.to_vec();
        plus[j] += HESSIAN_STEP;
        minus[j] -= HESSIAN_STEP;
        let (gp, gm) = (gradient(sys, &plus)?, gradient(sys, &minus)?);
        for i in 0..b {
            h[i][j] = (gp[i] - gm[i]) / (2.0 * HESSIAN_STEP);
        }
    }
    for i in 0..b {
        for j in 0..i {
            let s = 0.5 * (h[i][j] + h[j][i]);
            h[i][j] = s;
            h[j][i] = s;
        }
    }
    Ok(h)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimises `β` by damped Newton after checking homological fullness.
pub fn build_cohomology_pressure(sys: &SuspensionSystem) -> Result<CohomologyPressure> {
    match homologically_full_check(sys, None)? {
        FullCheck::Full { .. } => {}
        FullCheck::NotFull { functional } => {
            return Err(Error::NotHomologicallyFull(format!("separating functional {functional:?}")))
        }
        FullCheck::Inconclusive { horizon, required } => {
            return Err(Error::NotHomologicallyFull(format!(
                "inconclusive at horizon {horizon} (need {required})"
            )))
        }
    }
    let b = sys.betti();
    let mut t = vec![0.0; b];
    let mut beta = twisted_equilibrium(sys, &t)?.pressure;
    let mut trace = Vec::new();
    for iteration in 0..=MAX_NEWTON_ITERATIONS {
        let g = gradient(sys, &t)?;
        let gn = norm(&g);
        trace.push(format!("#{iteration}: t={t:?} beta={beta:.15} |grad|={gn:e}"));
        if gn < GRADIENT_TOLERANCE {
            let h = hessian(sys, &t)?;
            return Ok(CohomologyPressure {
                sys: sys.clone(),
                xi: t,
                beta,
                hessian: h,
                gradient_norm: gn,
                newton_iterations: iteration,
            });
        }
        if iteration == MAX_NEWTON_ITERATIONS {
            break;
        }
        let h = hessian(sys, &t)?;
        let hm = DMatrix::from_fn(b, b, |i, j| h[i][j]);
        let gv = DVector::from_column_slice(&g);
        let step: Vec<f64> = match hm.cholesky() {
            Some(c) => c.solve(&(-gv)).iter().copied().collect(),
            None => g.iter().map(|x| -x).collect(),
        };
        let slope: f64 = g.iter().zip(&step).map(|(a, s)| a * s).sum();
        let mut alpha = 1.0;
        loop {
            let cand: Vec<f64> = t.iter().zip(&step).map(|(x, s)| x + alpha * s).collect();
            let value = twisted_equilibrium(sys, &cand)?.pressure;
            if value <= beta + 1e-4 * alpha * slope + 1e-14 * beta.abs().max(1.0) || alpha < 1e-10 {
                t = cand;
                beta = value;
                break;
            }
            alpha *= 0.5;
        }
    }
    Err(Error::Newton { trace: trace.join("; ") })
}

/// Asymptotic cycle `Φ_ν ∈ ℝ^b` of a flow-invariant measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindingCycleReport {
    pub measure: String,
    pub phi: Vec<f64>,
}

impl WindingCycleReport {
    pub fn of_equilibrium(sys: &SuspensionSystem, eq: &FlowEquilibrium, name: &str) -> Self {
        Self {
            measure: name.to_string(),
            phi: (0..sys.betti()).map(|i| eq.average_point(&sys.label_function(i))).collect(),
        }
    }

    /// Weighted average of `h(γ)/ℓ(γ)` over the orbits of the measure.
    pub fn of_orbital(measure: &OrbitalMeasure, b: usize, name: &str) -> Self {
        Self { measure: name.to_string(), phi: measure.winding(b) }
    }

    pub fn norm(&self) -> f64 {
        norm(&self.phi)
    }
}
