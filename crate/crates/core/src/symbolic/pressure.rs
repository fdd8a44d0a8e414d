use super::shift::{EdgeFunction, MarkovShift};
use super::spectral::perron;
use super::system::SuspensionSystem;
use crate::error::{Error, Result};

/// Residual tolerance of the flow-pressure root solve.
pub const ROOT_TOLERANCE: f64 = 1e-12;
const MAX_ROOT_ITERATIONS: usize = 200;

/// Pressure of the shift: `log` of the spectral radius of the weighted
/// transfer matrix.
pub fn shift_pressure(shift: &MarkovShift, q: &EdgeFunction) -> Result<f64> {
    Ok(perron(shift, q)?.log_lambda)
}

/// Equilibrium (Gibbs) state of a depth-one potential: a Markov measure on
/// edges.
#[derive(Clone, Debug)]
pub struct MarkovMeasure {
    pub log_lambda: f64,
    /// Stationary distribution on vertices.
    pub stationary: Vec<f64>,
    /// `p(e) = exp(q(e)) v(t(e)) / (λ v(s(e)))`.
    pub transition: Vec<f64>,
    /// Invariant edge mass `m(e) = π(s(e)) p(e)`.
    pub edge_mass: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    source: Vec<usize>,
    target: Vec<usize>,
}

impl MarkovMeasure {
    /// Metric entropy `-Σ m(e) log p(e)` of the shift map.
    pub fn entropy(&self) -> f64 {
        -self
            .edge_mass
            .iter()
            .zip(&self.transition)
            .filter(|(m, _)| **m > 0.0)
            .map(|(m, p)| m * p.ln())
            .sum::<f64>()
    }

    /// `∫ f dm` for an edge function.
    pub fn integrate(&self, f: &EdgeFunction) -> f64 {
        self.edge_mass.iter().zip(f.values()).map(|(m, v)| m * v).sum()
    }

    /// Largest deviation of a transition row sum from 1.
    pub fn row_sum_defect(&self) -> f64 {
        let mut sums = vec![0.0; self.stationary.len()];
        for (e, p) in self.transition.iter().enumerate() {
            sums[self.source[e]] += p;
        }
        sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Largest deviation of `πP` from `π`.
    pub fn stationarity_defect(&self) -> f64 {
        let mut next = vec![0.0; self.stationary.len()];
        for (e, m) in self.edge_mass.iter().enumerate() {
            next[self.target[e]] += m;
        }
        next.iter().zip(&self.stationary).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Measure of the cylinder of paths starting with `word`.
    pub fn cylinder(&self, word: &[usize]) -> f64 {
        let Some(&first) = word.first() else {
            return 1.0;
        };
        let mut m = self.stationary[self.source[first]];
        for (i, &e) in word.iter().enumerate() {
            if i > 0 && self.target[word[i - 1]] != self.source[e] {
                return 0.0;
            }
            m *= self.transition[e];
        }
        m
    }
}

/// Equilibrium state of `q` on `shift`.
pub fn equilibrium_state(shift: &MarkovShift, q: &EdgeFunction) -> Result<MarkovMeasure> {
    let pd = perron(shift, q)?;
    let lam = pd.scaled_lambda();
    let m = shift.edge_count();
    let transition: Vec<f64> = (0..m)
        .map(|e| {
            (q[e] - pd.offset).max(-700.0).exp() * pd.right[shift.target(e)] / (lam * pd.right[shift.source(e)])
        })
        .collect();
    let raw: Vec<f64> = pd.left.iter().zip(&pd.right).map(|(a, b)| a * b).collect();
    let total: f64 = raw.iter().sum();
    let stationary: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let edge_mass = (0..m).map(|e| stationary[shift.source(e)] * transition[e]).collect();
    Ok(MarkovMeasure {
        log_lambda: pd.log_lambda,
        stationary,
        transition,
        edge_mass,
        left: pd.left,
        right: pd.right,
        source: (0..m).map(|e| shift.source(e)).collect(),
        target: (0..m).map(|e| shift.target(e)).collect(),
    })
}

/// Equilibrium state of a suspension flow: the symbolic measure of
/// `q - P·r` together with the flow pressure `P`.
#[derive(Clone, Debug)]
pub struct FlowEquilibrium {
    pub pressure: f64,
    pub measure: MarkovMeasure,
    roof: EdgeFunction,
    mean_roof: f64,
}

impl FlowEquilibrium {
    /// `Σ m(e) r(e)`: the mean return time.
    pub fn mean_roof(&self) -> f64 {
        self.mean_roof
    }

    /// Flow average of a time density `ψ`: `Σ m ψ r / Σ m r`.
    pub fn average_density(&self, psi: &EdgeFunction) -> f64 {
        self.measure.integrate(&psi.mul(&self.roof)) / self.mean_roof
    }

    /// Flow average of a point-mass observable (collected once per edge
    /// traversal), such as a homology label: `Σ m f / Σ m r`.
    pub fn average_point(&self, f: &EdgeFunction) -> f64 {
        self.measure.integrate(f) / self.mean_roof
    }

    /// Entropy of the flow, `h_σ / ∫r`.
    pub fn entropy(&self) -> f64 {
        self.measure.entropy() / self.mean_roof
    }
}

/// Root `s` of `P_σ(q - s·r) = 0` with its equilibrium state.
///
/// The map is strictly decreasing with derivative `-∫r dm_s`, and
/// `P_σ(q) - s·max r ≤ P_σ(q - s·r) ≤ P_σ(q) - s·min r` for `s ≥ 0` (reversed
/// for `s < 0`), which gives an initial bracket. Newton steps are taken inside
/// the bracket and replaced by bisection whenever they leave it.
pub fn flow_equilibrium(shift: &MarkovShift, q: &EdgeFunction, roof: &EdgeFunction) -> Result<FlowEquilibrium> {
    roof.check_roof()?;
    let p0 = shift_pressure(shift, q)?;
    let (rmin, rmax) = (roof.min(), roof.max());
    let (a, b) = (p0 / rmax, p0 / rmin);
    let mut lo = a.min(b) - 1e-9 * (1.0 + a.abs().max(b.abs()));
    let mut hi = a.max(b) + 1e-9 * (1.0 + a.abs().max(b.abs()));

    let eval = |s: f64| -> Result<(f64, MarkovMeasure)> {
        let m = equilibrium_state(shift, &q.add_scaled(roof, -s))?;
        Ok((m.log_lambda, m))
    };
    let mut f_lo = eval(lo)?.0;
    let mut f_hi = eval(hi)?.0;
    let mut widen = 0;
    while !(f_lo >= 0.0 && f_hi <= 0.0) {
        if widen == 60 {
            return Err(Error::Bracket { lo, hi });
        }
        let w = (hi - lo).max(1.0);
        if f_lo < 0.0 {
            lo -= w;
            f_lo = eval(lo)?.0;
        }
        if f_hi > 0.0 {
            hi += w;
            f_hi = eval(hi)?.0;
        }
        widen += 1;
    }

    let mut s = 0.5 * (lo + hi);
    for _ in 0..MAX_ROOT_ITERATIONS {
        let (f, m) = eval(s)?;
        let mean_roof = m.integrate(roof);
        if f.abs() < ROOT_TOLERANCE {
            return Ok(FlowEquilibrium { pressure: s, measure: m, roof: roof.clone(), mean_roof });
        }
        if f > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let newton = s + f / mean_roof;
        s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < f64::EPSILON * s.abs().max(1.0) {
            let (f, m) = eval(s)?;
            if f.abs() < 1e3 * ROOT_TOLERANCE {
                let mean_roof = m.integrate(roof);
                return Ok(FlowEquilibrium { pressure: s, measure: m, roof: roof.clone(), mean_roof });
            }
            return Err(Error::Bracket { lo, hi });
        }
    }
    Err(Error::Bracket { lo, hi })
}

/// Flow pressure of `scale · potential`: the root of
/// `P_σ(scale·q - s·r) = 0`.
pub fn flow_pressure(sys: &SuspensionSystem, scale: f64) -> Result<f64> {
    Ok(flow_equilibrium(sys.shift(), &sys.potential().scale(scale), sys.roof())?.pressure)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(shift: MarkovShift, roof: Vec<f64>, q: Vec<f64>) -> SuspensionSystem {
        SuspensionSystem::unlabelled(shift, EdgeFunction::new(roof).unwrap(), EdgeFunction::new(q).unwrap()).unwrap()
    }

    #[test]
    fn bernoulli_equilibrium() {
        let s = MarkovShift::full(2).unwrap();
        let q = EdgeFunction::new(vec![0.3f64.ln(), 0.7f64.ln()]).unwrap();
        let m = equilibrium_state(&s, &q).unwrap();
        assert!(m.log_lambda.abs() < 1e-14);
        assert!((m.transition[0] - 0.3).abs() < 1e-14);
        assert!((m.transition[1] - 0.7).abs() < 1e-14);
    }

    #[test]
    fn variational_identity() {
        let g = MarkovShift::golden_mean();
        let q = EdgeFunction::new(vec![0.2, -0.5, 1.1]).unwrap();
        let m = equilibrium_state(&g, &q).unwrap();
        assert!((m.entropy() + m.integrate(&q) - m.log_lambda).abs() < 1e-12);
        assert!(m.row_sum_defect() < 1e-13);
        assert!(m.stationarity_defect() < 1e-13);
    }

    #[test]
    fn flow_pressure_rescaling() {
        for c in [0.5, 2.0, 2f64.sqrt()] {
            let p = flow_pressure(&sys(MarkovShift::full(2).unwrap(), vec![c, c], vec![0.0, 0.0]), 1.0).unwrap();
            assert!((p - 2f64.ln() / c).abs() < 1e-12);
        }
    }

    #[test]
    fn flow_pressure_two_roofs() {
        let p = flow_pressure(&sys(MarkovShift::full(2).unwrap(), vec![1.0, 2.0], vec![0.0, 0.0]), 1.0).unwrap();
        // e^{-s} + e^{-2s} = 1  ⇔  x² + x - 1 = 0 with x = e^{-s}
        let x = (5f64.sqrt() - 1.0) / 2.0;
        assert!((p + x.ln()).abs() < 1e-12);
    }

    #[test]
    fn negative_pressure_root() {
        let s = sys(MarkovShift::full(2).unwrap(), vec![1.0, 3.0], vec![-4.0, -1.0]);
        let eq = flow_equilibrium(s.shift(), s.potential(), s.roof()).unwrap();
        assert!(eq.pressure < 0.0);
        let resid = shift_pressure(s.shift(), &s.potential().add_scaled(s.roof(), -eq.pressure)).unwrap();
        assert!(resid.abs() < ROOT_TOLERANCE);
    }

    #[test]
    fn flow_averages() {
        let s = sys(MarkovShift::full(2).unwrap(), vec![1.0, 1.0], vec![0.0, 0.0]);
        let eq = flow_equilibrium(s.shift(), s.potential(), s.roof()).unwrap();
        assert!((eq.average_density(&EdgeFunction::indicator(2, 0)) - 0.5).abs() < 1e-14);
        assert!((eq.entropy() - 2f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn cylinder_measure() {
        let g = MarkovShift::golden_mean();
        let m = equilibrium_state(&g, &EdgeFunction::zeros(3)).unwrap();
        assert_eq!(m.cylinder(&[2, 2]), 0.0);
        let total: f64 = [[0, 0], [0, 1], [1, 2], [2, 0], [2, 1]].iter().map(|w| m.cylinder(w)).sum();
        assert!((total - 1.0).abs() < 1e-13);
    }
}
