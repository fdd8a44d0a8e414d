use super::shift::{EdgeFunction, MarkovShift};
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 200_000;
const EIGENVALUE_TOLERANCE: f64 = 1e-13;
/// Relative gap between the Collatz–Wielandt bounds required on top of the
/// successive-difference test, so slow convergence cannot stop early.
const BOUND_GAP_TOLERANCE: f64 = 1e-10;
/// Largest relative change of an eigenvector component in the last step.
const VECTOR_TOLERANCE: f64 = 1e-14;

/// Leading eigen-data of the vertex transfer matrix
/// `M[u][v] = Σ_{e: u→v} exp(q(e))`.
#[derive(Clone, Debug)]
pub struct PerronData {
    /// `log` of the spectral radius.
    pub log_lambda: f64,
    /// Right eigenvector, normalised to sum 1.
    pub right: Vec<f64>,
    /// Left eigenvector, normalised so that `⟨left, right⟩ = 1`.
    pub left: Vec<f64>,
    pub iterations: usize,
    /// Relative gap between the final Collatz–Wielandt bounds.
    pub residual: f64,
    /// Offset subtracted from `q` before exponentiation; the matrix actually
    /// iterated is `exp(-offset)·M`.
    pub offset: f64,
}

impl PerronData {
    /// Spectral radius of the scaled matrix `exp(-offset)·M`.
    pub fn scaled_lambda(&self) -> f64 {
        (self.log_lambda - self.offset).exp()
    }
}

pub(crate) fn scaled_matrix(shift: &MarkovShift, q: &EdgeFunction) -> (Vec<Vec<f64>>, f64) {
    let n = shift.vertex_count();
    let offset = q.max();
    let mut m = vec![vec![0.0; n]; n];
    for e in 0..shift.edge_count() {
        m[shift.source(e)][shift.target(e)] += (q[e] - offset).max(-700.0).exp();
    }
    (m, offset)
}

/// Power iteration for the Perron eigen-pair.
///
/// Periodic graphs are handled by iterating `M + c·I`, which has the same
/// eigenvectors and a strictly dominant eigenvalue.
pub fn perron(shift: &MarkovShift, q: &EdgeFunction) -> Result<PerronData> {
    if q.len() != shift.edge_count() {
        return Err(Error::InvalidInput(format!(
            "potential has {} values for {} edges",
            q.len(),
            shift.edge_count()
        )));
    }
    let (m, offset) = scaled_matrix(shift, q);
    let n = m.len();
    let shift_c = if shift.is_aperiodic() {
        0.0
    } else {
        m.iter().map(|row| row.iter().sum::<f64>()).fold(0.0, f64::max)
    };
    let (right, lambda, it_r, res_r) = iterate(&m, shift_c, false)?;
    let (mut left, _, it_l, res_l) = iterate(&m, shift_c, true)?;
    let dot: f64 = left.iter().zip(&right).map(|(a, b)| a * b).sum();
    for x in &mut left {
        *x /= dot;
    }
    debug_assert_eq!(left.len(), n);
    Ok(PerronData {
        log_lambda: lambda.ln() + offset,
        right,
        left,
        iterations: it_r.max(it_l),
        residual: res_r.max(res_l),
        offset,
    })
}

fn apply(m: &[Vec<f64>], x: &[f64], transpose: bool) -> Vec<f64> {
    let n = x.len();
    let mut y = vec![0.0; n];
    for u in 0..n {
        for v in 0..n {
            if transpose {
                y[v] += x[u] * m[u][v];
            } else {
                y[u] += m[u][v] * x[v];
            }
        }
    }
    y
}

fn iterate(m: &[Vec<f64>], c: f64, transpose: bool) -> Result<(Vec<f64>, f64, usize, f64)> {
    let n = m.len();
    let mut x = vec![1.0 / n as f64; n];
    let mut prev = f64::NAN;
    let mut gap = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        let mx = apply(m, &x, transpose);
        // Collatz–Wielandt bounds on the spectral radius.
        let (lo, hi) = mx
            .iter()
            .zip(&x)
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), (a, b)| (lo.min(a / b), hi.max(a / b)));
        let estimate: f64 = mx.iter().sum();
        gap = (hi - lo) / estimate;
        let y: Vec<f64> = mx.iter().zip(&x).map(|(a, b)| a + c * b).collect();
        let s: f64 = y.iter().sum();
        if !(s.is_finite() && s > 0.0) || x.iter().any(|v| *v <= 0.0) {
            return Err(Error::Convergence { iterations: it, residual: gap });
        }
        let next: Vec<f64> = y.into_iter().map(|v| v / s).collect();
        let moved = next.iter().zip(&x).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
        x = next;
        if (estimate - prev).abs() < EIGENVALUE_TOLERANCE * estimate
            && gap < BOUND_GAP_TOLERANCE
            && moved < VECTOR_TOLERANCE
        {
            let lambda: f64 = apply(m, &x, transpose).iter().sum();
            return Ok((x, lambda, it, gap));
        }
        prev = estimate;
    }
    Err(Error::Convergence { iterations: MAX_ITERATIONS, residual: gap })
}
