use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::curve::{joint_diameter, min_distance, Point, PolylineCurve};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fmt::sig12;

/// Curves closer than this multiple of their joint diameter are refused.
pub const GAUSS_FLOOR: f64 = 1e-6;
const MAX_PROJECTIONS: usize = 16;
const PROJECTION_SEED: u64 = 0x6c69_6e6b;
const DEGENERACY: f64 = 1e-10;

/// `count` pseudo-random unit vectors; the first is a fixed generic
/// direction, the rest come from a seeded generator.
pub fn projection_directions(seed: u64, count: usize) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Point::new(0.2718281828, 0.1414213562, 0.9527361213).normalize()];
    while out.len() < count {
        let v = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            out.push(v / n);
        }
    }
    out.truncate(count);
    out
}

struct Projected {
    uv: Vec<(f64, f64)>,
    lo: Vec<(f64, f64)>,
    hi: Vec<(f64, f64)>,
}

const CHUNK: usize = 16;

fn project(c: &PolylineCurve, u: &Point, v: &Point) -> Projected {
    let uv: Vec<(f64, f64)> = c.points().iter().map(|p| (p.dot(u), p.dot(v))).collect();
    let n = uv.len();
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for start in (0..n).step_by(CHUNK) {
        let end = (start + CHUNK).min(n);
        let mut l = uv[start];
        let mut h = l;
        for i in start..=end {
            let p = uv[i % n];
            l = (l.0.min(p.0), l.1.min(p.1));
            h = (h.0.max(p.0), h.1.max(p.1));
        }
        lo.push(l);
        hi.push(h);
    }
    Projected { uv, lo, hi }
}

fn cross2(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

/// Twice the linking number, or `None` for a degenerate projection.
fn signed_crossings(c1: &PolylineCurve, c2: &PolylineCurve, d: &Point) -> Option<i64> {
    let d = d.normalize();
    let helper = if d.x.abs() < 0.9 { Point::x() } else { Point::y() };
    let u = d.cross(&helper).normalize();
    let v = d.cross(&u);
    let (p1, p2) = (project(c1, &u, &v), project(c2, &u, &v));
    let (n1, n2) = (p1.uv.len(), p2.uv.len());
    let mut total = 0i64;
    for a in 0..p1.lo.len() {
        for b in 0..p2.lo.len() {
            if p1.hi[a].0 < p2.lo[b].0 || p2.hi[b].0 < p1.lo[a].0 || p1.hi[a].1 < p2.lo[b].1 || p2.hi[b].1 < p1.lo[a].1 {
                continue;
            }
            for i in a * CHUNK..((a + 1) * CHUNK).min(n1) {
                let (s0, s1) = (p1.uv[i], p1.uv[(i + 1) % n1]);
                let r = (s1.0 - s0.0, s1.1 - s0.1);
                for j in b * CHUNK..((b + 1) * CHUNK).min(n2) {
                    let (t0, t1) = (p2.uv[j], p2.uv[(j + 1) % n2]);
                    let w = (t1.0 - t0.0, t1.1 - t0.1);
                    if s0.0.max(s1.0) < t0.0.min(t1.0)
                        || t0.0.max(t1.0) < s0.0.min(s1.0)
                        || s0.1.max(s1.1) < t0.1.min(t1.1)
                        || t0.1.max(t1.1) < s0.1.min(s1.1)
                    {
                        continue;
                    }
                    let q = (t0.0 - s0.0, t0.1 - s0.1);
                    let denom = cross2(r, w);
                    let scale = (r.0.hypot(r.1) * w.0.hypot(w.1)).max(f64::MIN_POSITIVE);
                    if denom.abs() <= DEGENERACY * scale {
                        // Parallel in projection: degenerate only if collinear.
                        if cross2(q, r).abs() <= DEGENERACY * scale.sqrt() * q.0.hypot(q.1).max(1.0) {
                            return None;
                        }
                        continue;
                    }
                    let s = cross2(q, w) / denom;
                    let t = cross2(q, r) / denom;
                    if !(-DEGENERACY..=1.0 + DEGENERACY).contains(&s) || !(-DEGENERACY..=1.0 + DEGENERACY).contains(&t) {
                        continue;
                    }
                    if !(DEGENERACY..=1.0 - DEGENERACY).contains(&s) || !(DEGENERACY..=1.0 - DEGENERACY).contains(&t) {
                        return None;
                    }
                    let (a0, a1) = c1.segment(i);
                    let (b0, b1) = c2.segment(j);
                    let (ta, tb) = (a1 - a0, b1 - b0);
                    let ha = (a0 + ta * s).dot(&d);
                    let hb = (b0 + tb * t).dot(&d);
                    if (ha - hb).abs() <= DEGENERACY {
                        return None;
                    }
                    // Sign of det(over tangent, under tangent, d).
                    let det = ta.cross(&tb).dot(&d);
                    let sign = if ha > hb { det.signum() } else { -det.signum() };
                    total += sign as i64;
                }
            }
        }
    }
    (total % 2 == 0).then_some(total)
}

/// Linking number from the crossings seen along direction `d`.
pub fn crossing_linking_along(c1: &PolylineCurve, c2: &PolylineCurve, d: &Point) -> Result<i64> {
    signed_crossings(c1, c2, d).map(|t| t / 2).ok_or(Error::DegenerateProjection { attempts: 1 })
}

/// Linking number as half the signed crossing count of a generic planar
/// projection. Degenerate projections are retried with fresh directions.
pub fn crossing_linking(c1: &PolylineCurve, c2: &PolylineCurve) -> Result<i64> {
    for d in projection_directions(PROJECTION_SEED, MAX_PROJECTIONS) {
        if let Some(t) = signed_crossings(c1, c2, &d) {
            return Ok(t / 2);
        }
    }
    Err(Error::DegenerateProjection { attempts: MAX_PROJECTIONS })
}

/// Signed solid angle of the triangle `a, b, c` seen from the origin.
fn triangle_solid_angle(a: &Point, b: &Point, c: &Point) -> f64 {
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let num = a.dot(&b.cross(c));
    let den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
    2.0 * num.atan2(den)
}

/// Gauss integral over one pair of segments `[p1, p2]`, `[p3, p4]`.
///
/// The difference vectors `x − y` sweep the parallelogram with corners
/// `p1 − p3, p2 − p3, p2 − p4, p1 − p4`; the integral is its signed solid
/// angle over 4π, evaluated as two triangles.
pub(crate) fn segment_pair(p1: &Point, p2: &Point, p3: &Point, p4: &Point) -> f64 {
    let c1 = p1 - p3;
    let c2 = p2 - p3;
    let c3 = p2 - p4;
    let c4 = p1 - p4;
    -(triangle_solid_angle(&c1, &c2, &c3) + triangle_solid_angle(&c1, &c3, &c4)) / (4.0 * PI)
}

fn check_separation(c1: &PolylineCurve, c2: &PolylineCurve) -> Result<f64> {
    let dist = min_distance(c1, c2);
    let floor = GAUSS_FLOOR * joint_diameter(c1, c2);
    if dist < floor {
        return Err(Error::TooClose { distance: dist, floor });
    }
    Ok(dist)
}

fn gauss_sum(c1: &PolylineCurve, c2: &PolylineCurve, exec: Exec) -> f64 {
    let rows = exec.map_range(c1.len(), |i| {
        let (a, b) = c1.segment(i);
        (0..c2.len())
            .map(|j| {
                let (c, d) = c2.segment(j);
                segment_pair(&a, &b, &c, &d)
            })
            .sum::<f64>()
    });
    rows.iter().sum()
}

/// Gauss linking integral of two closed polygons, summed exactly over
/// segment pairs.
pub fn gauss_linking(c1: &PolylineCurve, c2: &PolylineCurve) -> Result<f64> {
    check_separation(c1, c2)?;
    Ok(gauss_sum(c1, c2, Exec::Parallel))
}

/// Both linking computations for one pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkingResult {
    pub exact: i64,
    pub numeric: f64,
    /// `|numeric − exact|`.
    pub error: f64,
    pub min_distance: f64,
}

impl LinkingResult {
    /// Rounded Gauss value agrees with the crossing count.
    pub fn is_consistent(&self, tolerance: f64) -> bool {
        self.numeric.round() as i64 == self.exact && (self.numeric - self.numeric.round()).abs() < tolerance
    }
}

pub fn link(c1: &PolylineCurve, c2: &PolylineCurve) -> Result<LinkingResult> {
    let min_distance = check_separation(c1, c2)?;
    let exact = crossing_linking(c1, c2)?;
    let numeric = gauss_sum(c1, c2, Exec::Serial);
    Ok(LinkingResult { exact, numeric, error: (numeric - exact as f64).abs(), min_distance })
}

/// Crossing linking numbers for all pairs `(a[i], b[j])`.
pub fn linking_table(a: &[PolylineCurve], b: &[PolylineCurve], exec: Exec) -> Result<Vec<Vec<i64>>> {
    exec.map(a, |ca| b.iter().map(|cb| crossing_linking(ca, cb)).collect::<Result<Vec<_>>>()).into_iter().collect()
}

/// One row of the pair table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub orbit1: String,
    pub orbit2: String,
    pub lk: i64,
    pub gauss: f64,
    pub min_dist: f64,
}

/// CSV with columns `orbit1, orbit2, lk, gauss, min_dist`.
pub fn write_pairs_csv<W: Write>(out: W, rows: &[PairRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["orbit1", "orbit2", "lk", "gauss", "min_dist"])?;
    for r in rows {
        w.write_record([r.orbit1.clone(), r.orbit2.clone(), r.lk.to_string(), sig12(r.gauss), sig12(r.min_dist)])?;
    }
    w.flush()?;
    Ok(())
}
