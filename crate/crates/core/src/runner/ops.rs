//! One function per operation. Each renders its tables in memory and
//! reports named scalar quantities for assertions.

use std::time::Instant;

use super::config::{ClassParams, ExperimentConfig, Operation};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fmt::sig12;
use crate::helicity::{
    average_linking_series, convergence_study, double_integral_ladder, field_pair_sampler, helicity_analytic,
    write_study_csv, AnalyticField, LambdaMeasure, StudyParams,
};
use crate::homology::{
    build_cohomology_pressure, equidistribute_in_class, homologically_full_check, large_deviation_ratio,
    prediction_table, write_prediction_csv, DecayFit, FullCheck,
};
use crate::knots::{curve_pair_sampler, lambda_bound_scan, link, PairRecord, TemplateCurve, TemplateSpec};
use crate::knots::{realize_orbit, write_pairs_csv};
use crate::symbolic::{
    enumerate_orbits_with, flow_pressure, write_orbits_csv, EdgeFunction, EnumerationOptions, PeriodicOrbit,
    SuspensionSystem, Window,
};

const EXEC: Exec = Exec::Parallel;

/// Files and quantities produced by one operation.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Vec<(String, f64)>,
    pub stages: Vec<(String, f64)>,
}

impl Outcome {
    fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn put(&mut self, name: &str, value: f64) {
        self.summary.push((name.to_string(), value));
    }

    fn flag(&mut self, name: &str, value: bool) {
        self.put(name, if value { 1.0 } else { 0.0 });
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.stages.push((stage.to_string(), start.elapsed().as_secs_f64()));
        out
    }
}

/// Minimal CSV writer for rows that are already formatted.
fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Whether `|x|` is non-increasing over the last three entries.
fn tail_non_increasing(values: &[f64]) -> bool {
    values.len() >= 3 && values[values.len() - 3..].windows(2).all(|w| w[1].abs() <= w[0].abs())
}

pub fn execute(cfg: &ExperimentConfig, op: Operation) -> Result<Outcome> {
    let mut out = Outcome::default();
    let sys = out.timed("fixture", || cfg.system())?;
    let label = cfg
        .fixture_file
        .as_ref()
        .map(|p| p.display().to_string())
        .or_else(|| cfg.fixture.clone())
        .unwrap_or_default();
    match op {
        Operation::Pressure => pressure(cfg, &sys, &label, &mut out)?,
        Operation::Orbits => orbits(cfg, &sys, &mut out)?,
        Operation::Beta => beta(cfg, &sys, &mut out)?,
        Operation::Count => count(&cfg.count.clone().unwrap_or_default(), &sys, &mut out)?,
        Operation::Equidistribute => equidistribute(&cfg.equidistribute.clone().unwrap_or_default(), &sys, &mut out)?,
        Operation::Ld => ld(&cfg.ld.clone().unwrap_or_default(), &sys, &mut out)?,
        Operation::Link => link_pairs(cfg, &sys, &mut out)?,
        Operation::LambdaScan => lambda_scan(cfg, &sys, &mut out)?,
        Operation::Helicity => helicity(cfg, &mut out)?,
        Operation::AverageLink => average_link(cfg, &sys, &mut out)?,
        Operation::Study => study(cfg, &sys, &mut out)?,
    }
    let summary = table(&["quantity", "value"], out.summary.iter().map(|(k, v)| vec![k.clone(), sig12(*v)]))?;
    out.file("summary.csv", summary);
    Ok(out)
}

fn pressure(cfg: &ExperimentConfig, sys: &SuspensionSystem, label: &str, out: &mut Outcome) -> Result<()> {
    let scale = cfg.pressure.clone().unwrap_or_default().potential_scale;
    let p = out.timed("pressure", || flow_pressure(sys, scale))?;
    out.file("pressure.csv", table(&["fixture", "pressure"], [vec![label.to_string(), sig12(p)]])?);
    out.put("pressure", p);
    Ok(())
}

fn window(w: [f64; 2]) -> Result<Window> {
    Window::new(w[0], w[1])
}

fn orbits(cfg: &ExperimentConfig, sys: &SuspensionSystem, out: &mut Outcome) -> Result<()> {
    let p = cfg.orbits.clone().unwrap_or_default();
    let opts = EnumerationOptions { budget: p.budget, ..EnumerationOptions::with_exec(EXEC) };
    let orbits = out.timed("enumerate", || enumerate_orbits_with(sys, window(p.window)?, &opts))?;
    let mut buf = Vec::new();
    write_orbits_csv(&mut buf, &orbits)?;
    out.file("orbits.csv", buf);
    out.put("orbits", orbits.len() as f64);
    Ok(())
}

fn beta(cfg: &ExperimentConfig, sys: &SuspensionSystem, out: &mut Outcome) -> Result<()> {
    let horizon = cfg.beta.clone().unwrap_or_default().horizon;
    let check = out.timed("full-check", || homologically_full_check(sys, horizon))?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let verdict = match &check {
        FullCheck::Full { .. } => "full",
        FullCheck::NotFull { .. } => "not_full",
        FullCheck::Inconclusive { .. } => "inconclusive",
    };
    rows.push(vec!["verdict".into(), verdict.into()]);
    out.flag("full", check.is_full());
    if check.is_full() {
        let cp = out.timed("newton", || build_cohomology_pressure(sys))?;
        let mut put = |rows: &mut Vec<Vec<String>>, name: String, v: f64| {
            rows.push(vec![name.clone(), sig12(v)]);
            out.put(&name, v);
        };
        put(&mut rows, "beta".into(), cp.beta);
        for (i, x) in cp.xi.iter().enumerate() {
            put(&mut rows, format!("xi.{i}"), *x);
        }
        for (i, row) in cp.hessian.iter().enumerate() {
            for (j, h) in row.iter().enumerate() {
                put(&mut rows, format!("hessian.{i}.{j}"), *h);
            }
        }
        put(&mut rows, "hessian_det".into(), cp.hessian_det());
        put(&mut rows, "gradient_norm".into(), cp.gradient_norm);
        put(&mut rows, "newton_iterations".into(), cp.newton_iterations as f64);
    }
    out.file("beta.csv", table(&["quantity", "value"], rows)?);
    Ok(())
}

fn offsets(p: &ClassParams) -> (f64, f64) {
    (p.offsets[0], p.offsets[1])
}

fn count(p: &ClassParams, sys: &SuspensionSystem, out: &mut Outcome) -> Result<()> {
    let cp = out.timed("newton", || build_cohomology_pressure(sys))?;
    let opts = EnumerationOptions::with_exec(EXEC);
    let rows = out.timed("count", || prediction_table(&cp, &p.alpha, offsets(p), &p.t_grid, &opts, p.method))?;
    let mut buf = Vec::new();
    write_prediction_csv(&mut buf, &rows)?;
    out.file("count.csv", buf);
    let last = rows.last().expect("non-empty grid");
    out.put("ratio_last", last.ratio);
    out.put("observed_last", last.observed);
    out.put("predicted_last", last.predicted);
    let dev: Vec<f64> = rows.iter().map(|r| r.ratio - 1.0).collect();
    out.flag("deviation_non_increasing", tail_non_increasing(&dev));
    Ok(())
}

fn indicator(sys: &SuspensionSystem, edge: usize) -> Result<EdgeFunction> {
    if edge >= sys.edge_count() {
        return Err(Error::Config(format!("psi_edge: edge {edge} out of range ({} edges)", sys.edge_count())));
    }
    Ok(EdgeFunction::indicator(sys.edge_count(), edge))
}

fn equidistribute(p: &ClassParams, sys: &SuspensionSystem, out: &mut Outcome) -> Result<()> {
    let psi = indicator(sys, p.psi_edge)?;
    let cp = out.timed("newton", || build_cohomology_pressure(sys))?;
    let opts = EnumerationOptions::with_exec(EXEC);
    let points = out.timed("equidistribute", || {
        equidistribute_in_class(&cp, &p.alpha, &psi, &p.t_grid, offsets(p), &opts, p.method)
    })?;
    let rows = points.iter().map(|q| vec![sig12(q.t), sig12(q.orbital), sig12(q.reference), sig12(q.gap), sig12(q.orbits)]);
    out.file("equidistribute.csv", table(&["T", "orbital", "reference", "gap", "orbits"], rows)?);
    let last = points.last().expect("non-empty grid");
    out.put("reference", last.reference);
    out.put("gap_last", last.gap);
    let gaps: Vec<f64> = points.iter().map(|q| q.gap).collect();
    out.flag("gap_non_increasing", tail_non_increasing(&gaps));
    Ok(())
}

fn ld(p: &ClassParams, sys: &SuspensionSystem, out: &mut Outcome) -> Result<()> {
    let psi = indicator(sys, p.psi_edge)?;
    let cp = out.timed("newton", || build_cohomology_pressure(sys))?;
    let opts = EnumerationOptions::with_exec(EXEC);
    let result = out.timed("large-deviation", || {
        large_deviation_ratio(&cp, &p.alpha, &psi, p.epsilon, &p.t_grid, offsets(p), &opts, p.method)
    })?;
    let rows = result.points.iter().map(|q| vec![sig12(q.t), sig12(q.ln_xi), sig12(q.ln_pi), sig12(q.ratio)]);
    out.file("ld.csv", table(&["T", "ln_xi", "ln_pi", "ratio"], rows)?);
    out.put("reference", result.reference);
    out.put("rate", if let DecayFit::Rate { rate, .. } = result.fit { rate } else { f64::NAN });
    out.flag("decaying", result.fit.is_decaying());
    Ok(())
}

fn template_curves(sys: &SuspensionSystem, spec: &TemplateSpec, orbits: &[PeriodicOrbit]) -> Result<Vec<TemplateCurve>> {
    orbits
        .iter()
        .map(|o| {
            let durations: Vec<f64> = o.word.iter().map(|&e| sys.roof().get(e)).collect();
            TemplateCurve::new(spec, &o.word, &durations)
        })
        .collect()
}

fn link_pairs(cfg: &ExperimentConfig, sys: &SuspensionSystem, out: &mut Outcome) -> Result<()> {
    let p = cfg.link.clone().unwrap_or_default();
    let orbits = enumerate_orbits_with(sys, window(p.window)?, &EnumerationOptions::with_exec(EXEC))?;
    let curves = out.timed("realise", || {
        EXEC.map(&orbits, |o| realize_orbit(&p.template, &o.word, p.samples_per_symbol)).into_iter().collect::<Result<Vec<_>>>()
    })?;
    let pairs: Vec<(usize, usize)> = (0..curves.len()).flat_map(|i| (i + 1..curves.len()).map(move |j| (i, j))).collect();
    let records = out.timed("link", || {
        EXEC.map(&pairs, |&(i, j)| {
            let r = link(&curves[i], &curves[j])?;
            Ok(PairRecord {
                orbit1: orbits[i].word_string(),
                orbit2: orbits[j].word_string(),
                lk: r.exact,
                gauss: r.numeric,
                min_dist: r.min_distance,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()
    })?;
    let mut buf = Vec::new();
    write_pairs_csv(&mut buf, &records)?;
    out.file("link.csv", buf);
    let separated: Vec<&PairRecord> = records.iter().filter(|r| r.min_dist > 1e-2).collect();
    let worst = separated.iter().map(|r| (r.gauss - r.gauss.round()).abs()).fold(0.0, f64::max);
    out.put("pairs", records.len() as f64);
    out.put("separated_pairs", separated.len() as f64);
    out.put("max_integrality_error", worst);
    out.flag("crossing_agrees", separated.iter().all(|r| r.gauss.round() as i64 == r.lk));
    out.put("min_distance", records.iter().map(|r| r.min_dist).fold(f64::INFINITY, f64::min));
    Ok(())
}

fn lambda_scan(cfg: &ExperimentConfig, sys: &SuspensionSystem, out: &mut Outcome) -> Result<()> {
    let p = cfg.lambda_scan.clone().unwrap_or_default();
    let orbits = enumerate_orbits_with(sys, window(p.window)?, &EnumerationOptions::with_exec(EXEC))?;
    if orbits.is_empty() {
        return Err(Error::Config("lambda-scan.window: no orbits in the window".into()));
    }
    let curves = template_curves(sys, &p.template, &orbits)?;
    let scan = out.timed("scan", || {
        Ok(lambda_bound_scan(p.samples, cfg.seed, p.lowest, p.decades, curve_pair_sampler(&curves), EXEC))
    })?;
    let rows = scan.decades.iter().map(|d| vec![sig12(d.lo), sig12(d.hi), d.count.to_string(), sig12(d.max)]);
    out.file("lambda_scan.csv", table(&["r_lo", "r_hi", "count", "max_r_lambda"], rows)?);
    out.put("k_emp", scan.k_emp);
    out.put("min_r", scan.min_r);
    out.put("trend_slope", scan.trend_slope);
    out.flag("bounded", scan.bounded);
    Ok(())
}

fn helicity(cfg: &ExperimentConfig, out: &mut Outcome) -> Result<()> {
    let p = cfg.helicity.clone().unwrap_or_default();
    let field = AnalyticField::with_wavenumber(p.a, p.b, p.c, p.wavenumber)?;
    let check = field.check();
    out.put("max_divergence", check.max_divergence);
    out.put("max_curl_residual", check.max_curl_residual);
    let est = out.timed("helicity", || helicity_analytic(&field, EXEC))?;
    let mut rows: Vec<Vec<String>> = est.grids.iter().map(|(n, v)| vec![n.to_string(), sig12(*v)]).collect();
    rows.push(vec!["richardson".into(), sig12(est.value)]);
    out.file("helicity.csv", table(&["grid", "value"], rows)?);
    out.put("helicity", est.value);
    out.put("helicity_error", est.error);
    out.put("observed_order", est.observed_order);
    for (n, v) in &est.grids {
        out.put(&format!("helicity_grid{n}"), *v);
    }
    let s = 2.0;
    let scaled = helicity_analytic(&field.scaled(s), EXEC)?.value;
    out.put("scaling_defect", (scaled - s * s * est.value).abs());
    if p.deltas.is_empty() {
        return Ok(());
    }
    let ladder = out.timed("double-integral", || {
        let scan = lambda_bound_scan(p.scan_samples, cfg.seed, -4, 4, field_pair_sampler(&field), EXEC);
        let a: LambdaMeasure = field.stratified_sample(p.strata, cfg.seed, 0)?.into();
        let b: LambdaMeasure = field.stratified_sample(p.strata, cfg.seed, 1)?.into();
        double_integral_ladder(&a, &b, &p.deltas, 2.0 * scan.k_emp, EXEC)
    })?;
    let rows = ladder.iter().map(|e| {
        vec![
            sig12(e.delta),
            sig12(e.value),
            sig12(e.tail_bound),
            sig12(e.quadrature_error),
            sig12(e.excluded_mass),
            e.excluded_pairs.to_string(),
        ]
    });
    out.file(
        "double_integral.csv",
        table(&["delta", "value", "tail_bound", "quadrature_error", "excluded_mass", "excluded_pairs"], rows)?,
    );
    let consistent = ladder.windows(2).all(|w| (w[1].value - w[0].value).abs() <= w[0].tail_bound);
    let halving = ladder.windows(2).all(|w| w[1].excluded_mass <= 0.5 * w[0].excluded_mass);
    out.flag("ladder_consistent", consistent);
    out.flag("excluded_mass_halves", halving);
    out.put("k_bound", ladder[0].k_bound);
    Ok(())
}

fn study_params(cfg: &ExperimentConfig) -> StudyParams {
    // The experiment seed is authoritative so that `--seed` reaches the scan.
    StudyParams { seed: cfg.seed, ..cfg.study.clone().unwrap_or_default() }
}

fn average_link(cfg: &ExperimentConfig, sys: &SuspensionSystem, out: &mut Outcome) -> Result<()> {
    let a = cfg.average_link.clone().unwrap_or_default();
    let params = StudyParams {
        t_grid: a.t_grid,
        samples_per_symbol: a.samples_per_symbol,
        partner_class_zero: a.partner_class_zero,
        template: a.template,
        ..StudyParams::default()
    };
    let series = out.timed("average-link", || average_linking_series(sys, &params, EXEC))?;
    let opt = |x: Option<f64>| x.map(sig12).unwrap_or_default();
    let rows = series.entries.iter().map(|e| {
        vec![sig12(e.t), sig12(e.numerator), sig12(e.denominator), sig12(e.log_scale), e.pairs.to_string(), opt(e.value)]
    });
    out.file("average_link.csv", table(&["T", "numerator", "denominator", "log_scale", "pairs", "value"], rows)?);
    out.put("value_last", series.entries.last().and_then(|e| e.value).unwrap_or(f64::NAN));
    out.put("empty_windows", series.gaps().len() as f64);
    Ok(())
}

fn study(cfg: &ExperimentConfig, sys: &SuspensionSystem, out: &mut Outcome) -> Result<()> {
    let params = study_params(cfg);
    let s = out.timed("study", || convergence_study(sys, &params, EXEC))?;
    let mut buf = Vec::new();
    write_study_csv(&mut buf, &s)?;
    out.file("study.csv", buf);
    let (first, last) = (s.first_gap().unwrap_or(f64::NAN), s.last_gap().unwrap_or(f64::NAN));
    out.put("reference", s.reference.value);
    out.put("reference_t", s.reference_t);
    out.put("reference_tail_bound", s.reference.tail_bound);
    out.put("reference_excluded_mass", s.reference.excluded_mass);
    out.put("reference_min_distance", s.reference_min_distance);
    out.put("k_emp", s.k_emp);
    out.put("gap_first", first);
    out.put("gap_last", last);
    out.flag("gap_improves", last < first);
    out.put("monotone_tail", s.monotone_tail.map_or(f64::NAN, |m| if m { 1.0 } else { 0.0 }));
    Ok(())
}
