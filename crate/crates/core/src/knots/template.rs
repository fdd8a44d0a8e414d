use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::curve::{Point, PolylineCurve, SmoothCurve};
use crate::error::{Error, Result};
use crate::symbolic::format_word;

/// Embedding of a two-eared horseshoe template.
///
/// The branch line is the segment `|x| ≤ branch_length/2` on the x-axis. The
/// strip of symbol 0 leaves from its left half, turns clockwise around the
/// ear centred at `(−ear_radius, 0)` and returns stretched over the whole
/// branch line; symbol 1 does the same counter-clockwise around
/// `(ear_radius, 0)`. Along the branch line a point carries an unstable
/// coordinate `x` (doubling map, determined by the future of the word) and a
/// stable coordinate `z ∈ [−w, w]` (contraction by `contraction`, determined
/// by the past), with `w = strip_half_width`. Because each coordinate
/// determines a periodic word, distinct periodic points never meet.
///
/// During the lower half of a turn the strand keeps its radius and moves to
/// its new height; during the upper half it keeps its height and moves to
/// its new radius. Both moves use a smoothstep, so curves are C¹.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemplateSpec {
    pub ear_radius: f64,
    pub strip_half_width: f64,
    pub branch_length: f64,
    pub contraction: f64,
}

impl Default for TemplateSpec {
    fn default() -> Self {
        Self { ear_radius: 1.0, strip_half_width: 0.1, branch_length: 1.0, contraction: 0.25 }
    }
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn smoothstep_slope(t: f64) -> f64 {
    6.0 * t * (1.0 - t)
}

impl TemplateSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.ear_radius > 0.0
            && self.strip_half_width > 0.0
            && self.branch_length > 0.0
            && self.branch_length < 2.0 * self.ear_radius
            && self.contraction > 0.0
            && self.contraction < 0.5;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "template needs positive sizes, branch_length < 2·ear_radius and contraction in (0, 1/2): {self:?}"
            )))
        }
    }

    fn check_word(&self, word: &[usize]) -> Result<()> {
        self.validate()?;
        if word.is_empty() || word.iter().any(|&s| s > 1) {
            return Err(Error::InvalidInput(format!("template words use symbols 0 and 1, got {word:?}")));
        }
        Ok(())
    }

    /// Branch-line coordinates `(x_k, z_k)` of the periodic point before each
    /// symbol of `word`.
    pub fn branch_coordinates(&self, word: &[usize]) -> Result<Vec<(f64, f64)>> {
        self.check_word(word)?;
        let n = word.len();
        let half = 0.5 * self.branch_length;
        let kappa = self.contraction;
        let c = self.strip_half_width * (1.0 - kappa);
        // x' = 2x + s(e) with s(0) = +half, s(1) = −half; z' = κz + c·σ(e).
        let shift = |e: usize| if e == 0 { half } else { -half };
        let sigma = |e: usize| if e == 0 { 1.0 } else { -1.0 };
        let xscale = 1.0 / (1.0 - 0.5f64.powi(n as i32));
        let zscale = 1.0 / (1.0 - kappa.powi(n as i32));
        Ok((0..n)
            .map(|k| {
                let x: f64 = (0..n).map(|j| -shift(word[(k + j) % n]) * 0.5f64.powi(j as i32 + 1)).sum::<f64>() * xscale;
                let z: f64 =
                    (1..=n).map(|j| c * kappa.powi(j as i32 - 1) * sigma(word[(k + n - j) % n])).sum::<f64>() * zscale;
                (x, z)
            })
            .collect())
    }
}

/// Smooth closed curve of one periodic word on the template, parametrised
/// by flow time: symbol `k` takes `durations[k]` units of time.
#[derive(Clone, Debug)]
pub struct TemplateCurve {
    spec: TemplateSpec,
    word: Vec<usize>,
    branch: Vec<(f64, f64)>,
    starts: Vec<f64>,
    durations: Vec<f64>,
    period: f64,
}

impl TemplateCurve {
    pub fn new(spec: &TemplateSpec, word: &[usize], durations: &[f64]) -> Result<Self> {
        let branch = spec.branch_coordinates(word)?;
        if durations.len() != word.len() || durations.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::InvalidInput("one positive duration per symbol required".into()));
        }
        let mut starts = Vec::with_capacity(word.len());
        let mut t = 0.0;
        for d in durations {
            starts.push(t);
            t += d;
        }
        Ok(Self { spec: spec.clone(), word: word.to_vec(), branch, starts, durations: durations.to_vec(), period: t })
    }

    /// Unit duration per symbol.
    pub fn unit(spec: &TemplateSpec, word: &[usize]) -> Result<Self> {
        Self::new(spec, word, &vec![1.0; word.len()])
    }

    pub fn word(&self) -> &[usize] {
        &self.word
    }

    pub fn symbols(&self) -> usize {
        self.word.len()
    }

    pub fn duration(&self, k: usize) -> f64 {
        self.durations[k]
    }

    fn ear(&self, symbol: usize) -> (f64, f64) {
        // (centre x, angular direction)
        if symbol == 0 {
            (-self.spec.ear_radius, -1.0)
        } else {
            (self.spec.ear_radius, 1.0)
        }
    }

    /// Position and `d/du` at fraction `u ∈ [0, 1]` of symbol `k`.
    pub fn symbol_point(&self, k: usize, u: f64) -> (Point, Point) {
        let n = self.word.len();
        let e = self.word[k];
        let (x0, z0) = self.branch[k];
        let (x1, z1) = self.branch[(k + 1) % n];
        let (cx, dir) = self.ear(e);
        let radius = |x: f64| (x - cx).abs();
        let (r0, r1) = (radius(x0), radius(x1));
        let base = if e == 0 { 0.0 } else { PI };
        let theta = base + dir * 2.0 * PI * u;
        let dtheta = dir * 2.0 * PI;
        let (rho, drho, z, dz) = if u <= 0.5 {
            let t = 2.0 * u;
            (r0, 0.0, z0 + (z1 - z0) * smoothstep(t), 2.0 * (z1 - z0) * smoothstep_slope(t))
        } else {
            let t = 2.0 * u - 1.0;
            (r0 + (r1 - r0) * smoothstep(t), 2.0 * (r1 - r0) * smoothstep_slope(t), z1, 0.0)
        };
        let (s, c) = theta.sin_cos();
        let p = Point::new(cx + rho * c, rho * s, z);
        let v = Point::new(drho * c - rho * dtheta * s, drho * s + rho * dtheta * c, dz);
        (p, v)
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let s = s.rem_euclid(self.period);
        let k = self.starts.partition_point(|&t| t <= s).saturating_sub(1);
        (k, ((s - self.starts[k]) / self.durations[k]).clamp(0.0, 1.0))
    }

    /// Polygon through `samples_per_symbol` equally spaced points of each
    /// symbol, starting at the branch line.
    pub fn polyline(&self, samples_per_symbol: usize) -> Result<PolylineCurve> {
        if samples_per_symbol < 4 {
            return Err(Error::InvalidInput("at least 4 samples per symbol are required".into()));
        }
        let m = samples_per_symbol;
        let points = (0..self.word.len())
            .flat_map(|k| (0..m).map(move |j| (k, j as f64 / m as f64)))
            .map(|(k, u)| self.symbol_point(k, u).0)
            .collect();
        PolylineCurve::new(points, format_word(&self.word))
    }
}

impl SmoothCurve for TemplateCurve {
    fn period(&self) -> f64 {
        self.period
    }
    fn point(&self, s: f64) -> Point {
        let (k, u) = self.locate(s);
        self.symbol_point(k, u).0
    }
    fn velocity(&self, s: f64) -> Point {
        let (k, u) = self.locate(s);
        self.symbol_point(k, u).1 / self.durations[k]
    }
}

/// Realises a periodic word as a checked simple closed polygon.
pub fn realize_orbit(spec: &TemplateSpec, word: &[usize], samples_per_symbol: usize) -> Result<PolylineCurve> {
    let curve = TemplateCurve::unit(spec, word)?.polyline(samples_per_symbol)?;
    let (lo, hi) = curve.bounding_box();
    curve.check_simple(1e-9 * (hi - lo).norm())?;
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knots::curve::min_distance;

    #[test]
    fn fixed_points() {
        let spec = TemplateSpec::default();
        let b = spec.branch_coordinates(&[0]).unwrap();
        assert!((b[0].0 + 0.5).abs() < 1e-15 && (b[0].1 - 0.1).abs() < 1e-15);
        let b = spec.branch_coordinates(&[1]).unwrap();
        assert!((b[0].0 - 0.5).abs() < 1e-15 && (b[0].1 + 0.1).abs() < 1e-15);
    }

    #[test]
    fn branch_coordinates_are_periodic_points() {
        let spec = TemplateSpec::default();
        let word = [0, 1, 1, 0, 1];
        let b = spec.branch_coordinates(&word).unwrap();
        for k in 0..word.len() {
            let (x, z) = b[k];
            let (xn, zn) = b[(k + 1) % word.len()];
            let (s, sigma) = if word[k] == 0 { (0.5, 1.0) } else { (-0.5, -1.0) };
            assert!((2.0 * x + s - xn).abs() < 1e-14);
            assert!((0.25 * z + 0.075 * sigma - zn).abs() < 1e-14);
            // The symbol's strip starts on its own half of the branch line.
            assert!(if word[k] == 0 { x <= 0.0 } else { x >= 0.0 });
        }
    }

    #[test]
    fn single_symbol_loop() {
        let c = realize_orbit(&TemplateSpec::default(), &[0], 32).unwrap();
        // A flat circle of radius 1/2 about the left ear.
        for p in c.points() {
            assert!(((p.x + 1.0).hypot(p.y) - 0.5).abs() < 1e-14);
            assert!((p.z - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn two_symbol_word_visits_branch_twice() {
        let spec = TemplateSpec::default();
        let c = TemplateCurve::unit(&spec, &[0, 1]).unwrap();
        let m = 64;
        let poly = c.polyline(m).unwrap();
        let on_branch = poly.points().iter().filter(|p| p.y.abs() < 1e-12 && p.x.abs() <= 0.5).count();
        assert_eq!(on_branch, 2);
    }

    #[test]
    fn analytic_velocity() {
        let c = TemplateCurve::new(&TemplateSpec::default(), &[0, 0, 1], &[1.0, 2.0f64.sqrt(), 0.7]).unwrap();
        for k in 0..40 {
            let s = 0.013 + k as f64 * c.period() / 40.0;
            let fd = (c.point(s + 1e-7) - c.point(s - 1e-7)) / 2e-7;
            assert!((fd - c.velocity(s)).norm() < 1e-5 * (1.0 + fd.norm()), "{s}");
        }
    }

    #[test]
    fn continuity_at_symbol_boundaries() {
        let c = TemplateCurve::unit(&TemplateSpec::default(), &[0, 1, 1]).unwrap();
        for k in 0..3 {
            let (end, vend) = c.symbol_point(k, 1.0);
            let (start, vstart) = c.symbol_point((k + 1) % 3, 0.0);
            assert!((end - start).norm() < 1e-14);
            // Tangents point in the same direction (speeds may differ).
            assert!(vend.normalize().dot(&vstart.normalize()) > 1.0 - 1e-12);
        }
    }

    #[test]
    fn refinement_keeps_vertices_and_shape() {
        let spec = TemplateSpec::default();
        let word = [0, 0, 1, 0, 1, 1];
        for m in [128, 256] {
            let coarse = realize_orbit(&spec, &word, m).unwrap();
            let fine = realize_orbit(&spec, &word, 2 * m).unwrap();
            let bound = spec.strip_half_width / m as f64;
            for (i, p) in coarse.points().iter().enumerate() {
                assert!((p - fine.points()[2 * i]).norm() <= bound);
            }
            // Sup distance from fine vertices to the coarse polygon.
            let sup = (0..fine.len())
                .map(|j| {
                    let q = fine.points()[j];
                    let i = j / 2;
                    let (a, b) = coarse.segment(i);
                    super::super::curve::segment_distance(&a, &b, &q, &q)
                })
                .fold(0.0, f64::max);
            assert!(sup < bound, "m={m}: {sup} vs {bound}");
        }
    }

    #[test]
    fn distinct_orbits_are_disjoint() {
        let spec = TemplateSpec::default();
        let words: Vec<Vec<usize>> = vec![vec![0], vec![1], vec![0, 1], vec![0, 0, 1], vec![0, 1, 1], vec![0, 0, 1, 1]];
        let curves: Vec<_> = words.iter().map(|w| realize_orbit(&spec, w, 32).unwrap()).collect();
        for i in 0..curves.len() {
            for j in i + 1..curves.len() {
                assert!(min_distance(&curves[i], &curves[j]) > 1e-3);
            }
        }
    }

    #[test]
    fn rejects_bad_words() {
        let spec = TemplateSpec::default();
        assert!(realize_orbit(&spec, &[0, 2], 8).is_err());
        assert!(realize_orbit(&spec, &[], 8).is_err());
        assert!(realize_orbit(&spec, &[0, 1], 2).is_err());
    }
}
