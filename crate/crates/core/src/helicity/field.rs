use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::integral::VolumeMeasure;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::knots::Point;

/// Side length of the flat torus on which the fields live.
pub const TORUS_PERIOD: f64 = 2.0 * PI;
/// Grid points per axis for the divergence and curl checks.
pub const CHECK_GRID: usize = 20;
/// Central-difference step of the checks.
pub const FD_STEP: f64 = 1e-4;
/// Largest acceptable residual of the checks.
pub const CHECK_TOLERANCE: f64 = 1e-6;

/// The ABC family `X = (A sin kz + C cos ky, B sin kx + A cos kz, C sin ky + B cos kx)`
/// on the torus `(ℝ/2πℤ)³`.
///
/// Every member is divergence free with `curl X = k X`; only `k = 1` is a
/// Beltrami field. The wavenumber exists so that non-Beltrami members can be
/// represented and rejected.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticField {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    #[serde(default = "unit_wavenumber")]
    pub wavenumber: u32,
}

fn unit_wavenumber() -> u32 {
    1
}

/// Residuals of the finite-difference field checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldCheck {
    pub max_divergence: f64,
    pub max_curl_residual: f64,
}

impl FieldCheck {
    pub fn is_beltrami(&self) -> bool {
        self.max_divergence < CHECK_TOLERANCE && self.max_curl_residual < CHECK_TOLERANCE
    }
}

impl AnalyticField {
    pub fn abc(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::with_wavenumber(a, b, c, 1)
    }

    pub fn with_wavenumber(a: f64, b: f64, c: f64, wavenumber: u32) -> Result<Self> {
        if ![a, b, c].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("field coefficients must be finite".into()));
        }
        Ok(Self { a, b, c, wavenumber })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { a: s * self.a, b: s * self.b, c: s * self.c, ..*self }
    }

    pub fn value(&self, p: &Point) -> Point {
        let k = self.wavenumber as f64;
        let (sx, cx) = (k * p.x).sin_cos();
        let (sy, cy) = (k * p.y).sin_cos();
        let (sz, cz) = (k * p.z).sin_cos();
        Point::new(self.a * sz + self.c * cy, self.b * sx + self.a * cz, self.c * sy + self.b * cx)
    }

    /// Jacobian column `∂X/∂x_axis` by central differences.
    fn partial(&self, p: &Point, axis: usize, h: f64) -> Point {
        let mut e = Point::zeros();
        e[axis] = h;
        (self.value(&(p + e)) - self.value(&(p - e))) / (2.0 * h)
    }

    pub fn divergence_fd(&self, p: &Point, h: f64) -> f64 {
        (0..3).map(|i| self.partial(p, i, h)[i]).sum()
    }

    pub fn curl_fd(&self, p: &Point, h: f64) -> Point {
        let (dx, dy, dz) = (self.partial(p, 0, h), self.partial(p, 1, h), self.partial(p, 2, h));
        Point::new(dy.z - dz.y, dz.x - dx.z, dx.y - dy.x)
    }

    /// Maximum `|div X|` and `|curl X − X|` over a `20³` grid.
    pub fn check(&self) -> FieldCheck {
        let h = TORUS_PERIOD / CHECK_GRID as f64;
        let mut out = FieldCheck { max_divergence: 0.0, max_curl_residual: 0.0 };
        for p in grid_points(CHECK_GRID, h) {
            out.max_divergence = out.max_divergence.max(self.divergence_fd(&p, FD_STEP).abs());
            out.max_curl_residual = out.max_curl_residual.max((self.curl_fd(&p, FD_STEP) - self.value(&p)).norm());
        }
        out
    }

    /// Fails with [`Error::NotBeltrami`] unless the checks pass.
    pub fn require_beltrami(&self) -> Result<FieldCheck> {
        let check = self.check();
        if !check.is_beltrami() {
            return Err(Error::NotBeltrami { residual: check.max_curl_residual.max(check.max_divergence) });
        }
        Ok(check)
    }

    /// Stratified jittered sample of the normalised volume measure: one
    /// uniform point in each of the `strata³` cells, carrying the field
    /// value as velocity. `stream` selects an independent random stream.
    pub fn stratified_sample(&self, strata: usize, seed: u64, stream: u64) -> Result<VolumeMeasure> {
        if strata == 0 {
            return Err(Error::InvalidInput("at least one stratum per axis is required".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let h = TORUS_PERIOD / strata as f64;
        let n = strata * strata * strata;
        let mut points = Vec::with_capacity(n);
        for i in 0..strata {
            for j in 0..strata {
                for k in 0..strata {
                    let u: [f64; 3] = rng.gen();
                    points.push(Point::new((i as f64 + u[0]) * h, (j as f64 + u[1]) * h, (k as f64 + u[2]) * h));
                }
            }
        }
        let velocities = points.iter().map(|p| self.value(p)).collect();
        VolumeMeasure::new(points, velocities, vec![1.0 / n as f64; n], TORUS_PERIOD)
    }
}

fn grid_points(n: usize, h: f64) -> impl Iterator<Item = Point> {
    (0..n * n * n).map(move |idx| {
        let (i, j, k) = (idx / (n * n), (idx / n) % n, idx % n);
        Point::new(i as f64 * h, j as f64 * h, k as f64 * h)
    })
}

/// Mean of `|X|²` over the cell-centred `n³` grid.
fn mean_square(field: &AnalyticField, n: usize, exec: Exec) -> f64 {
    let h = TORUS_PERIOD / n as f64;
    let planes = exec.map_range(n, |i| {
        let x = (i as f64 + 0.5) * h;
        let mut s = 0.0;
        for j in 0..n {
            for k in 0..n {
                let p = Point::new(x, (j as f64 + 0.5) * h, (k as f64 + 0.5) * h);
                s += field.value(&p).norm_squared();
            }
        }
        s
    });
    planes.iter().sum::<f64>() / (n * n * n) as f64
}

/// Grid sizes of the helicity quadrature ladder.
pub const HELICITY_GRIDS: [usize; 3] = [20, 40, 80];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HelicityEstimate {
    /// Richardson-extrapolated helicity.
    pub value: f64,
    /// `|extrapolated − finest|`.
    pub error: f64,
    /// `(grid size, value)` for each rung of the ladder.
    pub grids: Vec<(usize, f64)>,
    /// `log₂` of the ratio of successive differences; infinite when the
    /// differences are already at rounding level.
    pub observed_order: f64,
}

impl HelicityEstimate {
    pub fn at_grid(&self, n: usize) -> Option<f64> {
        self.grids.iter().find(|g| g.0 == n).map(|g| g.1)
    }
}

/// Helicity `∫ ⟨X, α♯⟩ dm` of a Beltrami field, for which the potential is
/// `α♯ = X`, so the helicity is the mean of `|X|²` (`A² + B² + C²`).
pub fn helicity_analytic(field: &AnalyticField, exec: Exec) -> Result<HelicityEstimate> {
    field.require_beltrami()?;
    let grids: Vec<(usize, f64)> = HELICITY_GRIDS.iter().map(|&n| (n, mean_square(field, n, exec))).collect();
    let (v1, v2, v3) = (grids[0].1, grids[1].1, grids[2].1);
    let (d1, d2) = ((v2 - v1).abs(), (v3 - v2).abs());
    let scale = v3.abs().max(f64::MIN_POSITIVE);
    let noise = 1e3 * f64::EPSILON * scale;
    let (observed_order, value) = if d1 <= noise && d2 <= noise {
        // Trigonometric polynomials are integrated exactly by these grids.
        (f64::INFINITY, v3)
    } else {
        let p = (d1 / d2).log2();
        let q = 2f64.powf(p);
        (p, v3 + (v3 - v2) / (q - 1.0))
    };
    Ok(HelicityEstimate { value, error: (value - v3).abs(), grids, observed_order })
}
