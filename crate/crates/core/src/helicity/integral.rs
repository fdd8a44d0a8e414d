//! `∫∫ Λ d(μ × ν)` with the near-diagonal region `{r < δ}` cut out and
//! bounded instead of evaluated.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{stable_sum, Exec};
use crate::knots::{
    lambda_raw, segment_distance, segment_pair, Point, PolylineCurve, SmoothCurve, TemplateCurve,
    GAUSS_FLOOR,
};

use super::field::AnalyticField;

/// One closed orbit as a polygon together with the share of flow time spent
/// on each of its segments.
#[derive(Clone, Debug)]
pub struct OrbitalComponent {
    curve: PolylineCurve,
    segment_mass: Vec<f64>,
    period: f64,
}

impl OrbitalComponent {
    /// Arc-length parametrisation: period = length, mass ∝ segment length.
    pub fn from_polyline(curve: PolylineCurve) -> Self {
        let period = curve.arc_length();
        let segment_mass = (0..curve.len())
            .map(|i| {
                let (a, b) = curve.segment(i);
                (b - a).norm() / period
            })
            .collect();
        Self { curve, segment_mass, period }
    }

    /// Flow-time parametrisation of a template orbit sampled with
    /// `samples_per_symbol` points per symbol. The polygon is checked to be
    /// simple.
    pub fn from_template(curve: &TemplateCurve, samples_per_symbol: usize) -> Result<Self> {
        let poly = curve.polyline(samples_per_symbol)?;
        let (lo, hi) = poly.bounding_box();
        poly.check_simple(1e-9 * (hi - lo).norm())?;
        let m = samples_per_symbol as f64;
        let period = curve.period();
        let segment_mass = (0..poly.len()).map(|i| curve.duration(i / samples_per_symbol) / m / period).collect();
        Ok(Self { curve: poly, segment_mass, period })
    }

    pub fn curve(&self) -> &PolylineCurve {
        &self.curve
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn segment_mass(&self) -> &[f64] {
        &self.segment_mass
    }
}

/// A probability measure that is a finite mixture of normalised orbital
/// measures.
#[derive(Clone, Debug)]
pub struct OrbitalMeasure {
    components: Vec<OrbitalComponent>,
    weights: Vec<f64>,
}

impl OrbitalMeasure {
    /// Mixture `Σ e^{w_k} μ_k / Σ e^{w_k}` from log-weights `w_k`.
    pub fn new(parts: Vec<(OrbitalComponent, f64)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidInput("an orbital measure needs at least one orbit".into()));
        }
        if parts.iter().any(|p| !p.1.is_finite()) {
            return Err(Error::InvalidInput("orbit log-weights must be finite".into()));
        }
        let max = parts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = parts.iter().map(|p| (p.1 - max).exp()).collect();
        let total = stable_sum(&raw);
        let weights = raw.iter().map(|r| r / total).collect();
        Ok(Self { components: parts.into_iter().map(|p| p.0).collect(), weights })
    }

    pub fn single(component: OrbitalComponent) -> Self {
        Self { components: vec![component], weights: vec![1.0] }
    }

    pub fn components(&self) -> &[OrbitalComponent] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn bounding_box(&self) -> (Point, Point) {
        let mut boxes = self.components.iter().map(|c| c.curve.bounding_box());
        let first = boxes.next().expect("non-empty");
        boxes.fold(first, |(lo, hi), (l, h)| (lo.inf(&l), hi.sup(&h)))
    }
}

/// Weighted samples of a volume measure on the flat torus of side `period`,
/// each carrying the field value at the sample.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeMeasure {
    points: Vec<Point>,
    velocities: Vec<Point>,
    weights: Vec<f64>,
    period: f64,
}

impl VolumeMeasure {
    pub fn new(points: Vec<Point>, velocities: Vec<Point>, weights: Vec<f64>, period: f64) -> Result<Self> {
        if points.is_empty() || points.len() != velocities.len() || points.len() != weights.len() {
            return Err(Error::InvalidInput("volume samples must be non-empty arrays of equal length".into()));
        }
        if !(period > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidInput("period must be positive and weights non-negative".into()));
        }
        Ok(Self { points, velocities, weights, period })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn velocities(&self) -> &[Point] {
        &self.velocities
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Displacement from `y` to `x` in the minimum-image convention.
    fn displacement(&self, x: &Point, y: &Point) -> Point {
        (x - y).map(|d| d - self.period * (d / self.period).round())
    }
}

#[derive(Clone, Debug)]
pub enum LambdaMeasure {
    Orbital(OrbitalMeasure),
    Volume(VolumeMeasure),
}

impl From<OrbitalMeasure> for LambdaMeasure {
    fn from(m: OrbitalMeasure) -> Self {
        LambdaMeasure::Orbital(m)
    }
}

impl From<VolumeMeasure> for LambdaMeasure {
    fn from(m: VolumeMeasure) -> Self {
        LambdaMeasure::Volume(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleIntegralEstimate {
    /// Integral over the pairs at distance `≥ δ`.
    pub value: f64,
    pub delta: f64,
    /// Hard floor below which pairs are not resolvable at all.
    pub floor: f64,
    /// Kernel constant `K` in `|Λ| ≤ K/r` used for the tail bound.
    pub k_bound: f64,
    /// `Σ_n K·2^{n+1}/δ · mass(δ/2^{n+1} ≤ r < δ/2^n)`.
    pub tail_bound: f64,
    pub quadrature_error: f64,
    /// `quadrature_error + tail_bound`.
    pub error: f64,
    /// Number of elementary pairs (segment pairs or sample pairs) evaluated.
    pub pairs: u64,
    pub excluded_pairs: u64,
    /// Product mass of the excluded pairs, including those below the floor.
    pub excluded_mass: f64,
    /// Pairs below the floor; their contribution is not covered by the tail
    /// bound.
    pub below_floor: u64,
}

#[derive(Clone)]
struct Acc {
    value: Vec<f64>,
    abs: Vec<f64>,
    tail: Vec<f64>,
    excluded_mass: Vec<f64>,
    excluded_pairs: Vec<u64>,
    pairs: Vec<u64>,
    below_floor: u64,
    below_mass: f64,
}

impl Acc {
    fn new(n: usize) -> Self {
        Self {
            value: vec![0.0; n],
            abs: vec![0.0; n],
            tail: vec![0.0; n],
            excluded_mass: vec![0.0; n],
            excluded_pairs: vec![0; n],
            pairs: vec![0; n],
            below_floor: 0,
            below_mass: 0.0,
        }
    }

    fn merge(&mut self, other: &Acc) {
        for k in 0..self.value.len() {
            self.value[k] += other.value[k];
            self.abs[k] += other.abs[k];
            self.tail[k] += other.tail[k];
            self.excluded_mass[k] += other.excluded_mass[k];
            self.excluded_pairs[k] += other.excluded_pairs[k];
            self.pairs[k] += other.pairs[k];
        }
        self.below_floor += other.below_floor;
        self.below_mass += other.below_mass;
    }
}

/// Dyadic annulus factor `2^{n+1}/δ` for `δ/2^{n+1} ≤ r < δ/2^n`.
fn annulus_factor(r: f64, delta: f64) -> f64 {
    let mut n = (delta / r).log2().floor().max(0.0);
    while delta / 2f64.powf(n + 1.0) > r {
        n += 1.0;
    }
    2f64.powf(n + 1.0) / delta
}

struct Ladder<'a> {
    deltas: &'a [f64],
    floor: f64,
    k: f64,
}

impl Ladder<'_> {
    /// Records one elementary pair at distance `r` with product mass `mass`
    /// and kernel contribution `term` (already weighted).
    #[inline]
    fn record(&self, acc: &mut Acc, r: f64, mass: f64, term: impl Fn() -> f64) {
        if r < self.floor {
            acc.below_floor += 1;
            acc.below_mass += mass;
            return;
        }
        let mut t = None;
        for (k, &delta) in self.deltas.iter().enumerate() {
            if r < delta {
                acc.excluded_pairs[k] += 1;
                acc.excluded_mass[k] += mass;
                acc.tail[k] += self.k * annulus_factor(r, delta) * mass;
            } else {
                let v = match t {
                    Some(v) => v,
                    None => *t.insert(term()),
                };
                acc.value[k] += v;
                acc.abs[k] += v.abs();
                acc.pairs[k] += 1;
            }
        }
    }
}

fn orbital_rows(a: &OrbitalMeasure, b: &OrbitalMeasure, ladder: &Ladder, exec: Exec) -> Vec<Acc> {
    let n = ladder.deltas.len();
    let dmax = ladder.deltas.iter().copied().fold(ladder.floor, f64::max);
    let chunks_b: Vec<_> = b.components.iter().map(|c| c.curve.chunks()).collect();
    exec.map_range(a.components.len(), |ia| {
        let ca = &a.components[ia];
        let chunks_a = ca.curve.chunks();
        let mut acc = Acc::new(n);
        for (ib, cb) in b.components.iter().enumerate() {
            let w = a.weights[ia] * b.weights[ib];
            let scale = w / (ca.period * cb.period);
            // Far chunk pairs are included at every rung; sum them once.
            let mut far = 0.0;
            let mut far_abs = 0.0;
            let mut far_pairs = 0u64;
            let mut near = Acc::new(n);
            for xa in &chunks_a {
                for xb in &chunks_b[ib] {
                    let far_apart = xa.distance(xb) >= dmax;
                    for s in xa.start..xa.end {
                        let (p1, p2) = ca.curve.segment(s);
                        for t in xb.start..xb.end {
                            let (p3, p4) = cb.curve.segment(t);
                            if far_apart {
                                let g = segment_pair(&p1, &p2, &p3, &p4);
                                far += g;
                                far_abs += g.abs();
                                far_pairs += 1;
                            } else {
                                let r = segment_distance(&p1, &p2, &p3, &p4);
                                let mass = w * ca.segment_mass[s] * cb.segment_mass[t];
                                ladder.record(&mut near, r, mass, || segment_pair(&p1, &p2, &p3, &p4));
                            }
                        }
                    }
                }
            }
            for k in 0..n {
                near.value[k] = scale * (near.value[k] + far);
                near.abs[k] = scale * (near.abs[k] + far_abs);
                near.pairs[k] += far_pairs;
            }
            acc.merge(&near);
        }
        acc
    })
}

fn volume_rows(a: &VolumeMeasure, b: &VolumeMeasure, ladder: &Ladder, exec: Exec) -> Vec<Acc> {
    let n = ladder.deltas.len();
    exec.map_range(a.len(), |i| {
        let (x, vx, wx) = (&a.points[i], &a.velocities[i], a.weights[i]);
        let mut acc = Acc::new(n);
        for j in 0..b.len() {
            let d = a.displacement(x, &b.points[j]);
            let r = d.norm();
            let mass = wx * b.weights[j];
            ladder.record(&mut acc, r, mass, || mass * lambda_raw(x, &(x - d), vx, &b.velocities[j]));
        }
        acc
    })
}

/// Estimates `∫∫ Λ d(a × b)` for every cutoff in `deltas` from one pass over
/// the pairs.
///
/// Orbital measures are integrated exactly segment pair by segment pair (the
/// closed-form Gauss integral of two straight segments), so the only error
/// is the excluded near-diagonal region. Volume measures use the product of
/// their samples with minimum-image distances on the torus; the quadrature
/// error is the standard error over rows.
///
/// Pairs closer than `δ` are excluded and bounded by `|Λ| ≤ k_bound / r`
/// over dyadic annuli. Pairs below the hard floor are counted separately.
pub fn double_integral_ladder(
    a: &LambdaMeasure,
    b: &LambdaMeasure,
    deltas: &[f64],
    k_bound: f64,
    exec: Exec,
) -> Result<Vec<DoubleIntegralEstimate>> {
    if deltas.is_empty() {
        return Err(Error::InvalidInput("at least one cutoff is required".into()));
    }
    if !(k_bound >= 0.0) || !k_bound.is_finite() {
        return Err(Error::InvalidInput(format!("kernel bound must be finite and non-negative, got {k_bound}")));
    }
    let floor = match (a, b) {
        (LambdaMeasure::Orbital(x), LambdaMeasure::Orbital(y)) => {
            let (la, ha) = x.bounding_box();
            let (lb, hb) = y.bounding_box();
            GAUSS_FLOOR * (ha.sup(&hb) - la.inf(&lb)).norm()
        }
        (LambdaMeasure::Volume(x), LambdaMeasure::Volume(y)) => {
            if x.period != y.period {
                return Err(Error::InvalidInput("volume measures live on different tori".into()));
            }
            GAUSS_FLOOR * x.period * 3f64.sqrt()
        }
        _ => return Err(Error::InvalidInput("cannot pair an orbital measure with a volume measure".into())),
    };
    if let Some(d) = deltas.iter().find(|d| !(**d > floor) || !d.is_finite()) {
        return Err(Error::InvalidInput(format!("cutoff {d} must exceed the hard floor {floor:e}")));
    }
    let ladder = Ladder { deltas, floor, k: k_bound };
    let n = deltas.len();
    let (rows, volume_rows_count) = match (a, b) {
        (LambdaMeasure::Orbital(x), LambdaMeasure::Orbital(y)) => (orbital_rows(x, y, &ladder, exec), None),
        (LambdaMeasure::Volume(x), LambdaMeasure::Volume(y)) => (volume_rows(x, y, &ladder, exec), Some(x.len())),
        _ => unreachable!(),
    };
    let mut total = Acc::new(n);
    for r in &rows {
        total.merge(r);
    }
    Ok((0..n)
        .map(|k| {
            let quadrature_error = match volume_rows_count {
                Some(m) if m > 1 => {
                    let mf = m as f64;
                    let mean = total.value[k];
                    let ss: f64 = rows.iter().map(|r| (mf * r.value[k] - mean).powi(2)).sum();
                    (ss / (mf * (mf - 1.0))).sqrt()
                }
                Some(_) => f64::INFINITY,
                None => f64::EPSILON * (total.pairs[k].max(1) as f64).sqrt() * total.abs[k],
            };
            DoubleIntegralEstimate {
                value: total.value[k],
                delta: deltas[k],
                floor,
                k_bound,
                tail_bound: total.tail[k],
                quadrature_error,
                error: quadrature_error + total.tail[k],
                pairs: total.pairs[k],
                excluded_pairs: total.excluded_pairs[k] + total.below_floor,
                excluded_mass: total.excluded_mass[k] + total.below_mass,
                below_floor: total.below_floor,
            }
        })
        .collect())
}

/// Single-cutoff form of [`double_integral_ladder`].
pub fn double_integral_lambda(
    a: &LambdaMeasure,
    b: &LambdaMeasure,
    delta: f64,
    k_bound: f64,
    exec: Exec,
) -> Result<DoubleIntegralEstimate> {
    Ok(double_integral_ladder(a, b, &[delta], k_bound, exec)?.remove(0))
}

/// Pairs for a Λ-bound scan of a torus field: a uniform point and a second
/// point at a log-uniform distance in `[10⁻⁴, 1]` in a uniform direction.
pub fn field_pair_sampler(field: &AnalyticField) -> impl Fn(&mut ChaCha8Rng) -> (Point, Point, Point, Point) + Sync + '_ {
    move |rng| {
        let x = Point::new(rng.gen(), rng.gen(), rng.gen()) * super::field::TORUS_PERIOD;
        let r = 10f64.powf(rng.gen_range(-4.0..0.0));
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let s = (1.0 - z * z).sqrt();
        let y = x + Point::new(s * phi.cos(), s * phi.sin(), z) * r;
        (x, y, field.value(&x), field.value(&y))
    }
}

/// Minimum distance between orbits drawn from two families.
pub(crate) fn family_min_distance(a: &[PolylineCurve], b: &[PolylineCurve], exec: Exec) -> f64 {
    exec.map(a, |x| b.iter().map(|y| crate::knots::min_distance(x, y)).fold(f64::INFINITY, f64::min))
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}
