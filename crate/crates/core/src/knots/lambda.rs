use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::curve::{joint_diameter, min_distance, Point, PolylineCurve, SmoothCurve};
use super::linking::GAUSS_FLOOR;
use super::template::TemplateCurve;
use crate::error::{Error, Result};
use crate::exec::{stable_sum, Exec};

/// Normalisation of the Gauss linking kernel.
pub const LINKING_CONSTANT: f64 = 1.0 / (4.0 * PI);

fn key(p: &Point, v: &Point) -> [u64; 6] {
    [p.x, p.y, p.z, v.x, v.y, v.z].map(f64::to_bits)
}

#[inline]
pub(crate) fn lambda_raw(x: &Point, y: &Point, vx: &Point, vy: &Point) -> f64 {
    // Evaluate in a canonical order so that swapping the arguments is exact.
    let (x, y, vx, vy) = if key(x, vx) <= key(y, vy) { (x, y, vx, vy) } else { (y, x, vy, vx) };
    let d = x - y;
    let r2 = d.dot(&d);
    LINKING_CONSTANT * vx.cross(vy).dot(&d) / (r2 * r2.sqrt())
}

/// `Λ(x, y) = (X(x) × X(y))·(x − y) / (4π |x − y|³)`.
pub fn lambda_kernel(x: &Point, y: &Point, vx: &Point, vy: &Point) -> Result<f64> {
    if x == y {
        return Err(Error::Coincident);
    }
    Ok(lambda_raw(x, y, vx, vy))
}

/// A probability measure given by weighted sample points carrying the
/// velocity of the flow.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleMeasure {
    pub points: Vec<Point>,
    pub velocities: Vec<Point>,
    pub weights: Vec<f64>,
}

impl SampleMeasure {
    pub fn new(points: Vec<Point>, velocities: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != velocities.len() || points.len() != weights.len() {
            return Err(Error::InvalidInput("sample arrays differ in length".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidInput("sample weights must be non-negative".into()));
        }
        Ok(Self { points, velocities, weights })
    }

    /// Arc-length measure of a polygon with unit tangents: segment
    /// midpoints weighted by relative length.
    pub fn from_polyline(c: &PolylineCurve) -> Self {
        let total = c.arc_length();
        let mut out = Self::default();
        for i in 0..c.len() {
            let (a, b) = c.segment(i);
            let d = b - a;
            let len = d.norm();
            out.points.push((a + b) * 0.5);
            out.velocities.push(d / len);
            out.weights.push(len / total);
        }
        out
    }

    /// Normalised flow-time measure of a template orbit: midpoints of its
    /// polygon with flow velocities (segment vector over flow time).
    pub fn from_template(curve: &TemplateCurve, samples_per_symbol: usize) -> Result<Self> {
        let poly = curve.polyline(samples_per_symbol)?;
        let m = samples_per_symbol;
        let period = curve.period();
        let mut out = Self::default();
        for i in 0..poly.len() {
            let (a, b) = poly.segment(i);
            let dt = curve.duration(i / m) / m as f64;
            out.points.push((a + b) * 0.5);
            out.velocities.push((b - a) / dt);
            out.weights.push(dt / period);
        }
        Ok(out)
    }

    /// Mixture `Σ e^{w_k} ν_k / Σ e^{w_k}` from log-weights.
    pub fn mixture(parts: &[(SampleMeasure, f64)]) -> Self {
        let max = parts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = parts.iter().map(|p| (p.1 - max).exp()).collect();
        let total = stable_sum(&raw);
        let mut out = Self::default();
        for ((m, _), r) in parts.iter().zip(&raw) {
            let scale = r / total;
            out.points.extend_from_slice(&m.points);
            out.velocities.extend_from_slice(&m.velocities);
            out.weights.extend(m.weights.iter().map(|w| w * scale));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        stable_sum(&self.weights)
    }
}

/// `∫∫ Λ d(a × b)` by the product rule of the two sample sets.
pub(crate) fn pair_sum(a: &SampleMeasure, b: &SampleMeasure, exec: Exec) -> f64 {
    let rows = exec.map_range(a.len(), |i| {
        let (x, vx, wx) = (&a.points[i], &a.velocities[i], a.weights[i]);
        let mut s = 0.0;
        for j in 0..b.len() {
            s += b.weights[j] * lambda_raw(x, &b.points[j], vx, &b.velocities[j]);
        }
        wx * s
    });
    rows.iter().sum()
}

/// `∫∫ Λ d(μ_γ × μ_γ')` for the normalised arc-length measures of two
/// polygons with unit-speed velocities (midpoint rule per segment). For
/// closed curves this approaches `lk/(ℓ ℓ')`.
pub fn orbit_pair_integral(c1: &PolylineCurve, c2: &PolylineCurve) -> Result<f64> {
    let dist = min_distance(c1, c2);
    let floor = GAUSS_FLOOR * joint_diameter(c1, c2);
    if dist < floor {
        return Err(Error::TooClose { distance: dist, floor });
    }
    Ok(pair_sum(&SampleMeasure::from_polyline(c1), &SampleMeasure::from_polyline(c2), Exec::Parallel))
}

/// Largest `r·|Λ|` among sampled pairs with `lo ≤ r < hi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecadeMax {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub max: f64,
}

/// Empirical constant in `|Λ(x, y)| ≤ K / r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaScan {
    pub samples: usize,
    /// `max r·|Λ|` over all sampled pairs.
    pub k_emp: f64,
    pub min_r: f64,
    pub decades: Vec<DecadeMax>,
    /// Least-squares slope of `log max` against `log r` over the decades;
    /// negative values mean growth as `r → 0`.
    pub trend_slope: f64,
    /// Every decade is populated and the slope is not below
    /// `−TREND_TOLERANCE` (NaN when fewer than two decades have a nonzero
    /// maximum, which shows no trend either).
    pub bounded: bool,
}

/// Slack on the fitted slope before a trend counts as upward.
pub const TREND_TOLERANCE: f64 = 0.1;
const BLOCK: usize = 4096;

/// Samples `samples` pairs from `sampler` and bins `r·|Λ|` by decade of `r`,
/// for the decades `[10^k, 10^{k+1})` with `lowest ≤ k < lowest + decades`.
///
/// Blocks of pairs draw from independent streams of one seeded generator,
/// so the result does not depend on the thread count.
pub fn lambda_bound_scan<F>(samples: usize, seed: u64, lowest: i32, decades: usize, sampler: F, exec: Exec) -> LambdaScan
where
    F: Fn(&mut ChaCha8Rng) -> (Point, Point, Point, Point) + Sync,
{
    let blocks = samples.div_ceil(BLOCK);
    let values: Vec<Vec<(f64, f64)>> = exec.map_range(blocks, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let n = BLOCK.min(samples - b * BLOCK);
        (0..n)
            .filter_map(|_| {
                let (x, y, vx, vy) = sampler(&mut rng);
                let r = (x - y).norm();
                (r > 0.0).then(|| (r, r * lambda_raw(&x, &y, &vx, &vy).abs()))
            })
            .collect()
    });
    let mut bins: Vec<DecadeMax> = (0..decades)
        .map(|k| {
            let e = lowest + k as i32;
            DecadeMax { lo: 10f64.powi(e), hi: 10f64.powi(e + 1), count: 0, max: 0.0 }
        })
        .collect();
    let mut k_emp = 0.0f64;
    let mut min_r = f64::INFINITY;
    for &(r, v) in values.iter().flatten() {
        k_emp = k_emp.max(v);
        min_r = min_r.min(r);
        if let Some(bin) = bins.iter_mut().find(|d| d.lo <= r && r < d.hi) {
            bin.count += 1;
            bin.max = bin.max.max(v);
        }
    }
    let pts: Vec<(f64, f64)> =
        bins.iter().filter(|d| d.count > 0 && d.max > 0.0).map(|d| ((d.lo * d.hi).sqrt().ln(), d.max.ln())).collect();
    let trend_slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / pts.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>()
    } else {
        f64::NAN
    };
    let bounded = k_emp.is_finite() && bins.iter().all(|d| d.count > 0) && !(trend_slope < -TREND_TOLERANCE);
    LambdaScan { samples, k_emp, min_r, decades: bins, trend_slope, bounded }
}

/// Pairs on a family of curves: half are independent uniform points on
/// random curves, half are points on one curve at a log-uniform parameter
/// offset between `10⁻⁵` and `10^{-0.5}` of its period, which populates small
/// distances.
pub fn curve_pair_sampler<C: SmoothCurve>(
    curves: &[C],
) -> impl Fn(&mut ChaCha8Rng) -> (Point, Point, Point, Point) + Sync + '_ {
    move |rng| {
        let i = rng.gen_range(0..curves.len());
        let ci = &curves[i];
        let s = rng.gen::<f64>() * ci.period();
        let (cj, t) = if rng.gen_bool(0.5) {
            let cj = &curves[rng.gen_range(0..curves.len())];
            (cj, rng.gen::<f64>() * cj.period())
        } else {
            let h = ci.period() * 10f64.powf(rng.gen_range(-5.0..-0.5));
            (ci, s + if rng.gen_bool(0.5) { h } else { -h })
        };
        (ci.point(s), cj.point(t), ci.velocity(s), cj.velocity(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knots::curve::{hopf_pair, split_pair};
    use crate::knots::template::TemplateSpec;
    use crate::knots::{crossing_linking, realize_orbit};

    #[test]
    fn kernel_examples() {
        let o = Point::zeros();
        assert_eq!(lambda_kernel(&o, &Point::x(), &Point::y(), &Point::y()).unwrap(), 0.0);
        let v = lambda_kernel(&Point::z(), &o, &Point::x(), &Point::y()).unwrap();
        assert!((v.abs() - 1.0 / (4.0 * PI)).abs() < 1e-16);
        assert!(matches!(lambda_kernel(&o, &o, &Point::x(), &Point::y()), Err(Error::Coincident)));
    }

    #[test]
    fn swap_symmetry_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = || Point::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        for _ in 0..1000 {
            let (x, y, vx, vy) = (p(), p(), p(), p());
            assert_eq!(
                lambda_kernel(&x, &y, &vx, &vy).unwrap().to_bits(),
                lambda_kernel(&y, &x, &vy, &vx).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn hopf_pair_integral() {
        let (a, b) = hopf_pair();
        let pa = PolylineCurve::from_smooth(&a, 400, "a").unwrap();
        let pb = PolylineCurve::from_smooth(&b, 400, "b").unwrap();
        let target = 1.0 / (pa.arc_length() * pb.arc_length());
        let v = orbit_pair_integral(&pa, &pb).unwrap();
        assert!((v - target).abs() < 1e-4, "{v} vs {target}");
        assert!((v - 1.0 / (4.0 * PI * PI)).abs() < 1e-4);
    }

    #[test]
    fn second_order_convergence() {
        let (a, b) = hopf_pair();
        let err = |n: usize| {
            let pa = PolylineCurve::from_smooth(&a, n, "a").unwrap();
            let pb = PolylineCurve::from_smooth(&b, n, "b").unwrap();
            (orbit_pair_integral(&pa, &pb).unwrap() - 1.0 / (pa.arc_length() * pb.arc_length())).abs()
        };
        let order = (err(100) / err(200)).log2();
        assert!(order > 1.8 && order < 2.2, "{order}");
    }

    #[test]
    fn split_and_scaling() {
        let (a, b) = split_pair();
        let pa = PolylineCurve::from_smooth(&a, 200, "a").unwrap();
        let pb = PolylineCurve::from_smooth(&b, 200, "b").unwrap();
        assert!(orbit_pair_integral(&pa, &pb).unwrap().abs() < 1e-6);
        let (a, b) = hopf_pair();
        let pa = PolylineCurve::from_smooth(&a, 100, "a").unwrap();
        let pb = PolylineCurve::from_smooth(&b, 100, "b").unwrap();
        let v = orbit_pair_integral(&pa, &pb).unwrap() * pa.arc_length() * pb.arc_length();
        let s = 3.7;
        let (qa, qb) = (pa.scaled(s), pb.scaled(s));
        let w = orbit_pair_integral(&qa, &qb).unwrap() * qa.arc_length() * qb.arc_length();
        assert!((v - w).abs() < 1e-12);
    }

    #[test]
    fn template_flow_measure_matches_linking() {
        let spec = TemplateSpec::default();
        let (wa, wb) = (vec![0, 1], vec![0, 0, 1, 1]);
        let ca = TemplateCurve::unit(&spec, &wa).unwrap();
        let cb = TemplateCurve::unit(&spec, &wb).unwrap();
        let lk = crossing_linking(&realize_orbit(&spec, &wa, 32).unwrap(), &realize_orbit(&spec, &wb, 32).unwrap()).unwrap();
        let ma = SampleMeasure::from_template(&ca, 200).unwrap();
        let mb = SampleMeasure::from_template(&cb, 200).unwrap();
        assert!((ma.total_mass() - 1.0).abs() < 1e-12, "{}", ma.total_mass());
        let v = pair_sum(&ma, &mb, Exec::Serial);
        assert!((v - lk as f64 / (2.0 * 4.0)).abs() < 2e-3, "{v} vs lk {lk}");
    }

    #[test]
    fn mixture_normalises() {
        let (a, b) = hopf_pair();
        let ma = SampleMeasure::from_polyline(&PolylineCurve::from_smooth(&a, 10, "").unwrap());
        let mb = SampleMeasure::from_polyline(&PolylineCurve::from_smooth(&b, 20, "").unwrap());
        let m = SampleMeasure::mixture(&[(ma, 1000.0), (mb, 1000.0 + 2f64.ln())]);
        assert_eq!(m.len(), 30);
        assert!((m.total_mass() - 1.0).abs() < 1e-14, "{}", m.total_mass());
        let first = stable_sum(&m.weights[..10]);
        assert!((first - 1.0 / 3.0).abs() < 1e-13, "{first}");
    }

    #[test]
    fn template_lambda_scan_is_bounded_and_deterministic() {
        let spec = TemplateSpec::default();
        let curves: Vec<TemplateCurve> =
            [vec![0, 1], vec![0, 0, 1], vec![0, 1, 1, 0, 1]].iter().map(|w| TemplateCurve::unit(&spec, w).unwrap()).collect();
        let s1 = lambda_bound_scan(20_000, 7, -3, 3, curve_pair_sampler(&curves), Exec::Parallel);
        let s2 = lambda_bound_scan(20_000, 7, -3, 3, curve_pair_sampler(&curves), Exec::Serial);
        assert_eq!(s1, s2);
        assert!(s1.bounded, "{s1:?}");
        assert!(s1.decades.iter().all(|d| d.max <= s1.k_emp));
    }
}
