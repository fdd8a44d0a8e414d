use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pressure::{equilibrium_state, flow_equilibrium};
use super::shift::{EdgeFunction, MarkovShift};
use super::system::SuspensionSystem;
use crate::error::Result;

/// Result of comparing cylinder measures against the Gibbs bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GibbsCheck {
    pub word_length: usize,
    pub cylinders: usize,
    /// `max μ(C) / exp(Σq − P·L)` over the sampled cylinders: the fitted
    /// constant `C` of the upper bound.
    pub worst_ratio: f64,
    pub min_ratio: f64,
}

/// Exhaustive when the number of `L`-paths is at most this, sampled otherwise.
const EXHAUSTIVE_LIMIT: usize = 100_000;

/// Measures `μ(cylinder) / exp(Σ_{cyl} q − P·L)` for the equilibrium state
/// of `q`, over all `L`-cylinders or over `samples` random ones.
pub fn gibbs_ball_bound_check(
    shift: &MarkovShift,
    q: &EdgeFunction,
    word_length: usize,
    samples: usize,
    seed: u64,
) -> Result<GibbsCheck> {
    let m = equilibrium_state(shift, q)?;
    let p = m.log_lambda;
    let ratio = |w: &[usize]| m.cylinder(w) / (q.sum_over(w) - p * w.len() as f64).exp();

    let mut count_paths = vec![1usize; shift.vertex_count()];
    for _ in 0..word_length {
        count_paths = (0..shift.vertex_count())
            .map(|v| shift.out_edges(v).iter().map(|&e| count_paths[shift.target(e)]).fold(0usize, usize::saturating_add))
            .collect();
    }
    let total = count_paths.iter().fold(0usize, |a, b| a.saturating_add(*b));

    let mut worst = 0.0f64;
    let mut best = f64::INFINITY;
    let mut seen = 0usize;
    let mut record = |w: &[usize]| {
        let r = ratio(w);
        worst = worst.max(r);
        best = best.min(r);
        seen += 1;
    };
    if total <= EXHAUSTIVE_LIMIT {
        let mut word = Vec::with_capacity(word_length);
        for v in 0..shift.vertex_count() {
            all_paths(shift, v, word_length, &mut word, &mut record);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut word = Vec::with_capacity(word_length);
        for _ in 0..samples {
            word.clear();
            let mut v = rng.gen_range(0..shift.vertex_count());
            for _ in 0..word_length {
                let out = shift.out_edges(v);
                let e = out[rng.gen_range(0..out.len())];
                word.push(e);
                v = shift.target(e);
            }
            record(&word);
        }
    }
    Ok(GibbsCheck { word_length, cylinders: seen, worst_ratio: worst, min_ratio: best })
}

fn all_paths<F: FnMut(&[usize])>(shift: &MarkovShift, v: usize, remaining: usize, word: &mut Vec<usize>, f: &mut F) {
    if remaining == 0 {
        f(word);
        return;
    }
    for &e in shift.out_edges(v) {
        word.push(e);
        all_paths(shift, shift.target(e), remaining - 1, word, f);
        word.pop();
    }
}

/// One-shot calibration of the negative-cohomology bound.
///
/// With `g = q − P·r`, every orbit satisfies `Σ_γ g ≤ λ*·ℓ(γ)` where `λ*` is
/// the maximum cycle ratio `max Σg/Σr < 0`. Taking `ε = −λ*/2`, the function
/// `g + ε·r` has no positive cycle, so longest-path potentials `u` give
/// `g(e) + u(s(e)) − u(t(e)) ≤ −ε·r(e)`: `g` is cohomologous to a function
/// bounded by `−ε·r`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Calibration {
    pub pressure: f64,
    pub max_cycle_ratio: f64,
    pub epsilon: f64,
    /// Transfer function on vertices, centred to minimise `max |u|`.
    pub transfer: Vec<f64>,
    pub transfer_bound: f64,
}

impl Calibration {
    /// Slack of the bound `w − Pℓ ≤ −εℓ + 2 max|u|` for one orbit (≥ 0 when
    /// the bound holds).
    pub fn slack(&self, length: f64, weight: f64) -> f64 {
        -self.epsilon * length + 2.0 * self.transfer_bound - (weight - self.pressure * length)
    }
}

pub fn calibrate_negative_cohomology(sys: &SuspensionSystem) -> Result<Calibration> {
    let shift = sys.shift();
    let r = sys.roof();
    let pressure = flow_equilibrium(shift, sys.potential(), r)?.pressure;
    let g = sys.potential().add_scaled(r, -pressure);

    let (mut lo, mut hi) = (0..g.len()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
        let x = g[e] / r[e];
        (lo.min(x), hi.max(x))
    });
    lo -= 1e-12;
    hi += 1e-12;
    // Positive cycle for weights g − λr  ⇔  λ < λ*.
    for _ in 0..200 {
        if hi - lo < 1e-14 * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if longest_paths(shift, &g.add_scaled(r, -mid)).is_none() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let max_cycle_ratio = hi;
    let epsilon = -max_cycle_ratio / 2.0;
    let mut u = longest_paths(shift, &g.add_scaled(r, epsilon)).expect("no positive cycle below the critical ratio");
    let (umin, umax) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
    let centre = 0.5 * (umin + umax);
    for x in &mut u {
        *x -= centre;
    }
    Ok(Calibration { pressure, max_cycle_ratio, epsilon, transfer_bound: 0.5 * (umax - umin), transfer: u })
}

/// Longest-path potentials from an implicit super-source (all start at 0);
/// `None` when a positive cycle exists.
fn longest_paths(shift: &MarkovShift, w: &EdgeFunction) -> Option<Vec<f64>> {
    let n = shift.vertex_count();
    let mut d = vec![0.0f64; n];
    for round in 0..=n {
        let mut changed = false;
        for e in 0..shift.edge_count() {
            let cand = d[shift.source(e)] + w[e];
            if cand > d[shift.target(e)] + 1e-15 * cand.abs().max(1.0) {
                d[shift.target(e)] = cand;
                changed = true;
            }
        }
        if !changed {
            return Some(d);
        }
        if round == n {
            return None;
        }
    }
    None
}
