use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::symbolic::{enumerate_orbits_with, EnumerationOptions, SuspensionSystem, Window};

/// Outcome of the homologically-full test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum FullCheck {
    /// `0` lies in the interior of the hull of the winding vectors; the
    /// witness vectors (with their orbit words) contain `0` in the interior
    /// of their own hull.
    Full { witness: Vec<Vec<f64>>, words: Vec<Vec<usize>> },
    /// Every winding vector `v` satisfies `⟨functional, v⟩ ≥ 0`.
    NotFull { functional: Vec<f64> },
    /// No interior witness among cycles up to `horizon` edges, but cycles up
    /// to `required` edges would be needed to rule it out.
    Inconclusive { horizon: usize, required: usize },
}

impl FullCheck {
    pub fn is_full(&self) -> bool {
        matches!(self, FullCheck::Full { .. })
    }
}

/// Nearest point to the origin in the convex hull of `points`.
#[derive(Clone, Debug)]
pub struct MinNorm {
    pub point: Vec<f64>,
    /// Indices of the points carrying the minimiser and their weights.
    pub active: Vec<usize>,
    pub coefficients: Vec<f64>,
}

impl MinNorm {
    pub fn norm(&self) -> f64 {
        self.point.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn combine(points: &[Vec<f64>], idx: &[usize], coeffs: &[f64]) -> Vec<f64> {
    let d = points[0].len();
    let mut x = vec![0.0; d];
    for (&i, &c) in idx.iter().zip(coeffs) {
        for (xk, pk) in x.iter_mut().zip(&points[i]) {
            *xk += c * pk;
        }
    }
    x
}

/// Minimiser of `|Σ μ_i p_i|` subject to `Σ μ_i = 1` over the affine hull.
fn affine_minimiser(points: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    let k = idx.len();
    let mut kkt = DMatrix::<f64>::zeros(k + 1, k + 1);
    for a in 0..k {
        for b in 0..k {
            kkt[(a, b)] = dot(&points[idx[a]], &points[idx[b]]);
        }
        kkt[(a, k)] = 1.0;
        kkt[(k, a)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = kkt
        .clone()
        .lu()
        .solve(&rhs)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .unwrap_or_else(|| kkt.pseudo_inverse(1e-14).expect("pseudo-inverse of a symmetric matrix") * rhs);
    sol.iter().take(k).copied().collect()
}

/// Wolfe's algorithm for the minimum-norm point of a polytope.
pub fn min_norm_point(points: &[Vec<f64>]) -> MinNorm {
    assert!(!points.is_empty(), "min_norm_point needs at least one point");
    let scale = points.iter().map(|p| dot(p, p)).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-12;
    let start = (0..points.len())
        .min_by(|&a, &b| dot(&points[a], &points[a]).total_cmp(&dot(&points[b], &points[b])))
        .expect("non-empty");
    let mut active = vec![start];
    let mut lambda = vec![1.0];
    let mut x = points[start].clone();
    for _ in 0..10_000 {
        let (j, best) = (0..points.len())
            .map(|j| (j, dot(&x, &points[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty");
        if dot(&x, &x) - best <= tol * scale || active.contains(&j) {
            break;
        }
        active.push(j);
        lambda.push(0.0);
        loop {
            let mu = affine_minimiser(points, &active);
            if mu.iter().all(|m| *m > tol) {
                lambda = mu;
                x = combine(points, &active, &lambda);
                break;
            }
            let theta = lambda
                .iter()
                .zip(&mu)
                .filter(|(_, m)| **m <= tol)
                .map(|(l, m)| l / (l - m))
                .fold(1.0f64, f64::min);
            for (l, m) in lambda.iter_mut().zip(&mu) {
                *l = (1.0 - theta) * *l + theta * m;
            }
            let keep: Vec<bool> = lambda.iter().map(|l| *l > tol).collect();
            active = active.iter().zip(&keep).filter(|(_, k)| **k).map(|(a, _)| *a).collect();
            lambda = lambda.iter().zip(&keep).filter(|(_, k)| **k).map(|(l, _)| *l).collect();
            let s: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= s);
        }
    }
    MinNorm { point: x, active, coefficients: lambda }
}

/// Searches `(b+1)`-subsets for a simplex with `0` strictly inside.
fn strict_simplex(points: &[Vec<f64>], max_candidates: usize) -> Option<Vec<usize>> {
    let b = points[0].len();
    let n = points.len().min(max_candidates);
    let mut idx: Vec<usize> = (0..=b).collect();
    if n < b + 1 {
        return None;
    }
    loop {
        let mut m = DMatrix::<f64>::zeros(b + 1, b + 1);
        for (col, &i) in idx.iter().enumerate() {
            for row in 0..b {
                m[(row, col)] = points[i][row];
            }
            m[(b, col)] = 1.0;
        }
        let mut rhs = DVector::<f64>::zeros(b + 1);
        rhs[b] = 1.0;
        if m.determinant().abs() > 1e-12 {
            if let Some(lam) = m.lu().solve(&rhs) {
                if lam.iter().all(|l| *l > 1e-12) {
                    return Some(idx);
                }
            }
        }
        // next combination
        let mut k = b + 1;
        loop {
            if k == 0 {
                return None;
            }
            k -= 1;
            if idx[k] < n - (b + 1 - k) {
                idx[k] += 1;
                for j in k + 1..=b {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Decides whether `0` lies in the interior of the convex hull of the
/// winding vectors `h(γ)/ℓ(γ)` of prime orbits with at most `horizon` edges.
///
/// The hull of all winding vectors equals the hull over simple cycles, which
/// have at most `V` edges, so a horizon of at least the vertex count `V`
/// makes a negative answer conclusive. `horizon = None` uses `V`.
pub fn homologically_full_check(sys: &SuspensionSystem, horizon: Option<usize>) -> Result<FullCheck> {
    let b = sys.betti();
    let required = sys.shift().vertex_count();
    let horizon = horizon.unwrap_or(required);
    if b == 0 {
        return Ok(FullCheck::Full { witness: Vec::new(), words: Vec::new() });
    }
    let opts = EnumerationOptions { max_word_length: Some(horizon), ..EnumerationOptions::default() };
    let hi = horizon as f64 * sys.roof().max() * (1.0 + 1e-9);
    let orbits = enumerate_orbits_with(sys, Window::new(0.0, hi)?, &opts)?;

    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut words: Vec<Vec<usize>> = Vec::new();
    for o in &orbits {
        let v: Vec<f64> = o.homology.iter().map(|h| *h as f64 / o.length).collect();
        if !points.iter().any(|p| p.iter().zip(&v).all(|(a, c)| (a - c).abs() < 1e-12)) {
            points.push(v);
            words.push(o.word.clone());
        }
    }

    let not_full = |functional: Vec<f64>| {
        if horizon >= required {
            FullCheck::NotFull { functional }
        } else {
            FullCheck::Inconclusive { horizon, required }
        }
    };

    let mn = min_norm_point(&points);
    let scale = points.iter().map(|p| dot(p, p).sqrt()).fold(0.0, f64::max);
    if mn.norm() > 1e-9 * scale.max(1e-300) {
        let n = mn.norm();
        return Ok(not_full(mn.point.iter().map(|x| x / n).collect()));
    }

    // 0 is in the hull; it is interior iff small points ±ε·e_i all are.
    let eps = 1e-6 * scale;
    let mut support: Vec<usize> = Vec::new();
    for i in 0..b {
        for sign in [1.0, -1.0] {
            let shifted: Vec<Vec<f64>> = points
                .iter()
                .map(|p| p.iter().enumerate().map(|(k, x)| if k == i { x - sign * eps } else { *x }).collect())
                .collect();
            let m = min_norm_point(&shifted);
            if m.norm() > 1e-12 * scale {
                let n = m.norm();
                return Ok(not_full(m.point.iter().map(|x| x / n).collect()));
            }
            support.extend(&m.active);
        }
    }
    support.sort_unstable();
    support.dedup();

    // Prefer a (b+1)-simplex witness; fall back to the union of supports.
    let mut order: Vec<usize> = support.clone();
    order.extend((0..points.len()).filter(|i| !support.contains(i)));
    let ordered: Vec<Vec<f64>> = order.iter().map(|&i| points[i].clone()).collect();
    let chosen: Vec<usize> = match strict_simplex(&ordered, 24) {
        Some(s) => s.into_iter().map(|k| order[k]).collect(),
        None => support,
    };
    Ok(FullCheck::Full {
        witness: chosen.iter().map(|&i| points[i].clone()).collect(),
        words: chosen.iter().map(|&i| words[i].clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::fixture;

    #[test]
    fn min_norm_of_segment() {
        let m = min_norm_point(&[vec![1.0, 1.0], vec![1.0, -1.0]]);
        assert!((m.point[0] - 1.0).abs() < 1e-12 && m.point[1].abs() < 1e-12);
        let m = min_norm_point(&[vec![2.0, 0.0], vec![0.0, 2.0], vec![3.0, 3.0]]);
        assert!((m.point[0] - 1.0).abs() < 1e-12 && (m.point[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn min_norm_inside() {
        let m = min_norm_point(&[vec![1.0, 0.0], vec![-1.0, 1.0], vec![-1.0, -1.0]]);
        assert!(m.norm() < 1e-12);
    }

    #[test]
    fn positive_labels_are_not_full() {
        match homologically_full_check(&fixture("pos1").unwrap(), None).unwrap() {
            FullCheck::NotFull { functional } => assert!((functional[0] - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn symmetric_fixtures_are_full() {
        for name in ["sym2", "sym4", "asym3", "b2-full4"] {
            let c = homologically_full_check(&fixture(name).unwrap(), None).unwrap();
            assert!(c.is_full(), "{name}: {c:?}");
        }
    }

    #[test]
    fn b2_witness_contains_origin() {
        let FullCheck::Full { witness, .. } = homologically_full_check(&fixture("b2-full4").unwrap(), None).unwrap()
        else {
            panic!("not full")
        };
        assert!(witness.len() >= 3);
        assert!(min_norm_point(&witness).norm() < 1e-12);
    }

    #[test]
    fn boundary_origin_is_not_full() {
        // labels (1,0), (-1,0), (0,1): 0 is on the boundary of the hull.
        let sys = crate::symbolic::SuspensionSystem::new(
            crate::symbolic::MarkovShift::full(3).unwrap(),
            crate::symbolic::EdgeFunction::constant(3, 1.0),
            crate::symbolic::EdgeFunction::zeros(3),
            vec![vec![1, 0], vec![-1, 0], vec![0, 1]],
        )
        .unwrap();
        match homologically_full_check(&sys, None).unwrap() {
            FullCheck::NotFull { functional } => {
                assert!(functional[0].abs() < 1e-6 && functional[1] > 0.99);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn short_horizon_is_inconclusive() {
        // Two-vertex graph whose only cycles through vertex 1 have length 2.
        let sys = crate::symbolic::SuspensionSystem::new(
            crate::symbolic::MarkovShift::golden_mean(),
            crate::symbolic::EdgeFunction::constant(3, 1.0),
            crate::symbolic::EdgeFunction::zeros(3),
            vec![vec![1], vec![-1], vec![-1]],
        )
        .unwrap();
        assert_eq!(
            homologically_full_check(&sys, Some(1)).unwrap(),
            FullCheck::Inconclusive { horizon: 1, required: 2 }
        );
        assert!(homologically_full_check(&sys, None).unwrap().is_full());
    }
}
