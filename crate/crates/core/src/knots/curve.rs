use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::{Rotation3, Vector3};

use crate::error::{Error, Result};
use crate::fmt::sig12;

pub type Point = Vector3<f64>;

/// A closed parametrised curve with its velocity field.
pub trait SmoothCurve: Sync {
    /// Length of the parameter interval (the curve closes after it).
    fn period(&self) -> f64;
    fn point(&self, s: f64) -> Point;
    /// Derivative of [`point`](SmoothCurve::point) with respect to `s`.
    fn velocity(&self, s: f64) -> Point;
}

/// Round circle parametrised by arc length.
#[derive(Clone, Debug, PartialEq)]
pub struct Circle {
    pub centre: Point,
    e1: Point,
    e2: Point,
    pub radius: f64,
}

impl Circle {
    /// Circle `centre + radius (cos θ e1 + sin θ e2)`; `e1`, `e2` are
    /// orthonormalised.
    pub fn new(centre: Point, e1: Point, e2: Point, radius: f64) -> Result<Self> {
        let e1 = e1.try_normalize(1e-12).ok_or_else(|| Error::InvalidInput("zero axis".into()))?;
        let e2 = (e2 - e1 * e1.dot(&e2))
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidInput("parallel axes".into()))?;
        if !(radius > 0.0) {
            return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
        }
        Ok(Self { centre, e1, e2, radius })
    }
}

impl SmoothCurve for Circle {
    fn period(&self) -> f64 {
        2.0 * PI * self.radius
    }
    fn point(&self, s: f64) -> Point {
        let t = s / self.radius;
        self.centre + (self.e1 * t.cos() + self.e2 * t.sin()) * self.radius
    }
    fn velocity(&self, s: f64) -> Point {
        let t = s / self.radius;
        -self.e1 * t.sin() + self.e2 * t.cos()
    }
}

/// The Hopf fixture: the unit circle in the xy-plane about the origin and
/// the unit circle in the xz-plane about `(1, 0, 0)`, oriented so that the
/// linking number is `+1`.
pub fn hopf_pair() -> (Circle, Circle) {
    let a = Circle::new(Point::zeros(), Point::x(), Point::y(), 1.0).expect("valid circle");
    let b = Circle::new(Point::x(), Point::x(), -Point::z(), 1.0).expect("valid circle");
    (a, b)
}

/// Two unit circles in the xy-plane, three units apart.
pub fn split_pair() -> (Circle, Circle) {
    let a = Circle::new(Point::zeros(), Point::x(), Point::y(), 1.0).expect("valid circle");
    let b = Circle::new(Point::new(3.0, 0.0, 0.0), Point::x(), Point::y(), 1.0).expect("valid circle");
    (a, b)
}

/// Closed polygon; the last vertex connects back to the first.
#[derive(Clone, Debug, PartialEq)]
pub struct PolylineCurve {
    points: Vec<Point>,
    label: String,
}

const CHUNK: usize = 16;

/// Axis-aligned box around a run of consecutive segments.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Chunk {
    pub start: usize,
    pub end: usize,
    pub min: Point,
    pub max: Point,
}

impl Chunk {
    pub fn distance(&self, other: &Chunk) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let gap = (other.min[k] - self.max[k]).max(self.min[k] - other.max[k]).max(0.0);
            d2 += gap * gap;
        }
        d2.sqrt()
    }
}

impl PolylineCurve {
    pub fn new(points: Vec<Point>, label: impl Into<String>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidInput(format!("a closed curve needs at least 3 points, got {}", points.len())));
        }
        if points.iter().any(|p| !p.iter().all(|x| x.is_finite())) {
            return Err(Error::InvalidInput("non-finite vertex".into()));
        }
        let n = points.len();
        if let Some(i) = (0..n).find(|&i| points[i] == points[(i + 1) % n]) {
            return Err(Error::InvalidInput(format!("repeated consecutive vertex at index {i}")));
        }
        Ok(Self { points, label: label.into() })
    }

    /// Samples `n` equally spaced parameter values of a smooth curve.
    pub fn from_smooth(curve: &dyn SmoothCurve, n: usize, label: impl Into<String>) -> Result<Self> {
        let h = curve.period() / n as f64;
        Self::new((0..n).map(|i| curve.point(i as f64 * h)).collect(), label)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of vertices, which equals the number of segments.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn segment(&self, i: usize) -> (Point, Point) {
        (self.points[i], self.points[(i + 1) % self.points.len()])
    }

    pub fn arc_length(&self) -> f64 {
        (0..self.len()).map(|i| {
            let (a, b) = self.segment(i);
            (b - a).norm()
        }).sum()
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    pub(crate) fn chunks(&self) -> Vec<Chunk> {
        let n = self.len();
        (0..n)
            .step_by(CHUNK)
            .map(|start| {
                let end = (start + CHUNK).min(n);
                let mut min = self.points[start];
                let mut max = min;
                for i in start..=end {
                    let p = &self.points[i % n];
                    min = min.inf(p);
                    max = max.sup(p);
                }
                Chunk { start, end, min, max }
            })
            .collect()
    }

    /// Fails when two non-adjacent segments come closer than `tolerance`.
    pub fn check_simple(&self, tolerance: f64) -> Result<()> {
        let n = self.len();
        let chunks = self.chunks();
        for (a, ca) in chunks.iter().enumerate() {
            for cb in &chunks[a..] {
                if ca.distance(cb) > tolerance {
                    continue;
                }
                for i in ca.start..ca.end {
                    for j in cb.start.max(i + 2)..cb.end {
                        if (j + 1) % n == i {
                            continue;
                        }
                        let (p0, p1) = self.segment(i);
                        let (q0, q1) = self.segment(j);
                        let d = segment_distance(&p0, &p1, &q0, &q1);
                        if d <= tolerance {
                            return Err(Error::SelfIntersection {
                                word: self.label.clone(),
                                detail: format!("segments {i} and {j} are {d:e} apart"),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Image under `x ↦ R x + t`.
    pub fn transformed(&self, rotation: &Rotation3<f64>, translation: &Point) -> Self {
        Self { points: self.points.iter().map(|p| rotation * p + translation).collect(), label: self.label.clone() }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { points: self.points.iter().map(|p| p * s).collect(), label: self.label.clone() }
    }

    /// CSV with one `x,y,z` row per vertex.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "z"])?;
        for p in &self.points {
            w.write_record([sig12(p.x), sig12(p.y), sig12(p.z)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, label: impl Into<String>) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut points = Vec::new();
        for row in r.deserialize() {
            let (x, y, z): (f64, f64, f64) = row?;
            points.push(Point::new(x, y, z));
        }
        Self::new(points, label)
    }
}

/// Diagonal of the bounding box of both curves.
pub(crate) fn joint_diameter(a: &PolylineCurve, b: &PolylineCurve) -> f64 {
    let (la, ha) = a.bounding_box();
    let (lb, hb) = b.bounding_box();
    (ha.sup(&hb) - la.inf(&lb)).norm()
}

/// Minimum distance between two polylines.
pub fn min_distance(a: &PolylineCurve, b: &PolylineCurve) -> f64 {
    let ca = a.chunks();
    let cb = b.chunks();
    let mut pairs: Vec<(f64, usize, usize)> =
        ca.iter().enumerate().flat_map(|(i, x)| cb.iter().enumerate().map(move |(j, y)| (x.distance(y), i, j))).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut best = f64::INFINITY;
    for (lower, i, j) in pairs {
        if lower >= best {
            break;
        }
        for s in ca[i].start..ca[i].end {
            let (p0, p1) = a.segment(s);
            for t in cb[j].start..cb[j].end {
                let (q0, q1) = b.segment(t);
                best = best.min(segment_distance(&p0, &p1, &q0, &q1));
            }
        }
    }
    best
}

/// Distance between segments `[p0, p1]` and `[q0, q1]`.
pub(crate) fn segment_distance(p0: &Point, p1: &Point, q0: &Point, q1: &Point) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let (s, t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return r.norm();
    }
    if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    ((p0 + d1 * s) - (q0 + d2 * t)).norm()
}
