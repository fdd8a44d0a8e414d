use std::io::Write;

use serde::{Deserialize, Serialize};

use super::average::{average_linking, AverageLinkingSeries};
use super::integral::{double_integral_lambda, family_min_distance, DoubleIntegralEstimate, OrbitalComponent, OrbitalMeasure};
use crate::error::{Error, Result};
use crate::exec::{stable_sum, Exec};
use crate::fmt::sig12;
use crate::knots::{curve_pair_sampler, lambda_bound_scan, linking_table, PolylineCurve, TemplateCurve, TemplateSpec};
use crate::symbolic::{enumerate_orbits_with, EnumerationOptions, PeriodicOrbit, SuspensionSystem, Window};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyParams {
    /// Window ends `T`; each row pairs `(T−1, T]` with `(T, T+1]`.
    pub t_grid: Vec<f64>,
    /// Window end of the reference measures; defaults to the largest grid
    /// value plus one.
    pub reference_t: Option<f64>,
    pub samples_per_symbol: usize,
    /// Near-diagonal cutoff of the reference integral.
    pub delta: f64,
    /// Pairs in the Λ-bound scan that calibrates the tail bound.
    pub scan_samples: usize,
    pub seed: u64,
    /// Restrict the partner family to the zero homology class as well.
    pub partner_class_zero: bool,
    pub template: TemplateSpec,
}

impl Default for StudyParams {
    fn default() -> Self {
        Self {
            t_grid: (6..=10).map(f64::from).collect(),
            reference_t: None,
            samples_per_symbol: 4,
            delta: 1e-5,
            scan_samples: 20_000,
            seed: 0,
            partner_class_zero: false,
            template: TemplateSpec::default(),
        }
    }
}

impl StudyParams {
    pub fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() {
            return Err(Error::Config("study grid is empty".into()));
        }
        if self.t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) || self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("study grid must be positive and strictly increasing".into()));
        }
        if let Some(r) = self.reference_t {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::Config(format!("reference window end {r} must be positive")));
            }
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config("study cutoff must be positive".into()));
        }
        if self.scan_samples == 0 {
            return Err(Error::Config("Λ scan needs at least one sample".into()));
        }
        self.template.validate()
    }

    pub fn reference_window_end(&self) -> f64 {
        self.reference_t.unwrap_or_else(|| self.t_grid.last().copied().unwrap_or(0.0) + 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub t: f64,
    pub value: Option<f64>,
    pub reference: f64,
    pub gap: Option<f64>,
    pub pairs: usize,
    /// Weighted share of orbit pairs closer than the study cutoff.
    pub excluded_mass: f64,
    pub min_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<StudyRow>,
    pub series: AverageLinkingSeries,
    pub reference_t: f64,
    pub reference: DoubleIntegralEstimate,
    pub k_emp: f64,
    /// Minimum distance between the two reference families.
    pub reference_min_distance: f64,
    /// Whether the gap is non-increasing over the final three rows; `None`
    /// for grids with fewer than three rows.
    pub monotone_tail: Option<bool>,
}

impl ConvergenceStudy {
    pub fn first_gap(&self) -> Option<f64> {
        self.rows.first().and_then(|r| r.gap)
    }

    pub fn last_gap(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.gap)
    }
}

struct Family {
    orbits: Vec<PeriodicOrbit>,
    curves: Vec<TemplateCurve>,
    components: Vec<OrbitalComponent>,
}

impl Family {
    fn polylines(&self) -> Vec<PolylineCurve> {
        self.components.iter().map(|c| c.curve().clone()).collect()
    }
}

fn family(sys: &SuspensionSystem, window: Window, class_zero: bool, params: &StudyParams, exec: Exec) -> Result<Family> {
    let mut orbits = enumerate_orbits_with(sys, window, &EnumerationOptions::with_exec(exec))?;
    if class_zero {
        orbits.retain(|o| o.homology.iter().all(|&h| h == 0));
    }
    let curves = orbits
        .iter()
        .map(|o| {
            let durations: Vec<f64> = o.word.iter().map(|&e| sys.roof().get(e)).collect();
            TemplateCurve::new(&params.template, &o.word, &durations)
        })
        .collect::<Result<Vec<_>>>()?;
    let components = exec
        .map(&curves, |c| OrbitalComponent::from_template(c, params.samples_per_symbol))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(Family { orbits, curves, components })
}

/// `ℒ_φ(T)` for every `T` of `params.t_grid`, without the reference
/// integral.
pub fn average_linking_series(
    sys: &SuspensionSystem,
    params: &StudyParams,
    exec: Exec,
) -> Result<AverageLinkingSeries> {
    params.validate()?;
    check_two_symbols(sys)?;
    let mut series = AverageLinkingSeries::default();
    for &t in &params.t_grid {
        let a = family(sys, Window::trailing(t), true, params, exec)?;
        let b = family(sys, Window::leading(t), params.partner_class_zero, params, exec)?;
        let table = linking_table(&a.polylines(), &b.polylines(), exec)?;
        series.entries.push(average_linking(t, &a.orbits, &b.orbits, &table)?);
    }
    Ok(series)
}

fn check_two_symbols(sys: &SuspensionSystem) -> Result<()> {
    if sys.edge_count() != 2 {
        return Err(Error::InvalidInput(format!(
            "the template realises two-symbol systems, got {} edges",
            sys.edge_count()
        )));
    }
    Ok(())
}

/// Weighted average linking `ℒ_φ(T)` on a template-realised system over a
/// grid of `T`, compared with the reference `∫Λ d(ν × ν')` of the orbital
/// measures of the windows ending at the reference `T`.
///
/// The first family at each `T` is restricted to the zero homology class.
/// Orbit weights are `∫_γ φ` for the system's potential.
pub fn convergence_study(sys: &SuspensionSystem, params: &StudyParams, exec: Exec) -> Result<ConvergenceStudy> {
    params.validate()?;
    check_two_symbols(sys)?;
    let mut series = AverageLinkingSeries::default();
    let mut partial = Vec::new();
    for &t in &params.t_grid {
        let a = family(sys, Window::trailing(t), true, params, exec)?;
        let b = family(sys, Window::leading(t), params.partner_class_zero, params, exec)?;
        let (pa, pb) = (a.polylines(), b.polylines());
        let table = linking_table(&pa, &pb, exec)?;
        let entry = average_linking(t, &a.orbits, &b.orbits, &table)?;
        let distances: Vec<Vec<f64>> =
            exec.map(&pa, |x| pb.iter().map(|y| crate::knots::min_distance(x, y)).collect());
        let min_distance = distances.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let excluded_mass = if entry.is_empty() {
            0.0
        } else {
            let ma = a.orbits.iter().map(|o| o.weight).fold(f64::NEG_INFINITY, f64::max);
            let mb = b.orbits.iter().map(|o| o.weight).fold(f64::NEG_INFINITY, f64::max);
            let mut all = Vec::new();
            let mut near = Vec::new();
            for (g, row) in a.orbits.iter().zip(&distances) {
                for (h, &d) in b.orbits.iter().zip(row) {
                    let w = ((g.weight - ma) + (h.weight - mb)).exp();
                    all.push(w);
                    if d < params.delta {
                        near.push(w);
                    }
                }
            }
            stable_sum(&near) / stable_sum(&all)
        };
        partial.push((t, entry.value, entry.pairs, excluded_mass, min_distance));
        series.entries.push(entry);
    }

    let reference_t = params.reference_window_end();
    let a = family(sys, Window::trailing(reference_t), true, params, exec)?;
    let b = family(sys, Window::leading(reference_t), params.partner_class_zero, params, exec)?;
    if a.orbits.is_empty() || b.orbits.is_empty() {
        return Err(Error::InvalidInput(format!("reference windows at T = {reference_t} are empty")));
    }
    let mut scan_curves = a.curves.clone();
    scan_curves.extend(b.curves.iter().cloned());
    let scan = lambda_bound_scan(params.scan_samples, params.seed, -4, 4, curve_pair_sampler(&scan_curves), exec);
    let reference_min_distance = family_min_distance(&a.polylines(), &b.polylines(), exec);
    let measure = |f: Family| {
        OrbitalMeasure::new(f.components.into_iter().zip(f.orbits.iter().map(|o| o.weight)).collect())
    };
    let (ma, mb) = (measure(a)?, measure(b)?);
    let reference = double_integral_lambda(&ma.into(), &mb.into(), params.delta, 2.0 * scan.k_emp, exec)?;

    let rows: Vec<StudyRow> = partial
        .into_iter()
        .map(|(t, value, pairs, excluded_mass, min_distance)| StudyRow {
            t,
            value,
            reference: reference.value,
            gap: value.map(|v| (v - reference.value).abs()),
            pairs,
            excluded_mass,
            min_distance,
        })
        .collect();
    let monotone_tail = (rows.len() >= 3).then(|| {
        let tail: Vec<Option<f64>> = rows[rows.len() - 3..].iter().map(|r| r.gap).collect();
        tail.windows(2).all(|w| matches!((w[0], w[1]), (Some(x), Some(y)) if y <= x))
    });
    Ok(ConvergenceStudy {
        rows,
        series,
        reference_t,
        reference,
        k_emp: scan.k_emp,
        reference_min_distance,
        monotone_tail,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(sig12).unwrap_or_default()
}

/// Columns `T,value,reference,gap,pairs,excluded_mass`.
pub fn write_study_csv<W: Write>(out: W, study: &ConvergenceStudy) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["T", "value", "reference", "gap", "pairs", "excluded_mass"])?;
    for r in &study.rows {
        w.write_record([
            sig12(r.t),
            opt(r.value),
            sig12(r.reference),
            opt(r.gap),
            r.pairs.to_string(),
            sig12(r.excluded_mass),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::fixture;

    fn small(grid: &[f64]) -> StudyParams {
        StudyParams { t_grid: grid.to_vec(), scan_samples: 2000, delta: 1e-4, ..StudyParams::default() }
    }

    #[test]
    fn single_row_has_no_verdict() {
        let sys = fixture("template").unwrap();
        let s = convergence_study(&sys, &small(&[3.0]), Exec::Serial).unwrap();
        assert_eq!(s.rows.len(), 1);
        assert_eq!(s.monotone_tail, None);
        assert_eq!(s.reference_t, 4.0);
        assert!(s.reference.below_floor == 0 && s.reference.excluded_pairs == 0);
    }

    #[test]
    fn reference_equals_exact_average_linking() {
        // The orbital reference is integrated exactly, so it reproduces the
        // average linking number at the reference window.
        let sys = fixture("template").unwrap();
        let s = convergence_study(&sys, &small(&[2.0, 3.0, 4.0, 5.0]), Exec::Parallel).unwrap();
        let at_ref = convergence_study(&sys, &small(&[6.0]), Exec::Parallel).unwrap();
        let exact = at_ref.rows[0].value.unwrap();
        assert!((s.reference.value - exact).abs() < 1e-12, "{} vs {exact}", s.reference.value);
        assert!(s.monotone_tail.is_some());
        assert!(s.rows.iter().all(|r| r.excluded_mass == 0.0 && r.min_distance > 1e-4));
    }

    #[test]
    fn constant_weight_shift_is_invariant() {
        let base = fixture("template").unwrap();
        let p = small(&[3.0, 4.0, 5.0]);
        let s0 = convergence_study(&base, &p, Exec::Serial).unwrap();
        let s1 = convergence_study(&base.add_constant_potential(0.7), &p, Exec::Parallel).unwrap();
        assert_eq!(s0.rows, s1.rows);
        assert_eq!(s0.reference, s1.reference);
        let series = average_linking_series(&base, &p, Exec::Serial).unwrap();
        assert_eq!(series, s0.series);
    }

    #[test]
    fn csv_and_validation() {
        let sys = fixture("template").unwrap();
        let s = convergence_study(&sys, &small(&[3.0, 4.0]), Exec::Serial).unwrap();
        let mut buf = Vec::new();
        write_study_csv(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("T,value,reference,gap,pairs,excluded_mass\n"));
        assert_eq!(text.lines().count(), 3);
        assert!(convergence_study(&sys, &small(&[4.0, 3.0]), Exec::Serial).is_err());
        assert!(convergence_study(&fixture("full3").unwrap(), &small(&[3.0]), Exec::Serial).is_err());
    }
}
