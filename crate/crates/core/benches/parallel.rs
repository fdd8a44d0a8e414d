//! Serial against parallel execution of the data-parallel kernels.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use orbitlink::helicity::{double_integral_lambda, LambdaMeasure, OrbitalComponent, OrbitalMeasure};
use orbitlink::knots::{linking_table, realize_orbit, PolylineCurve, TemplateCurve, TemplateSpec};
use orbitlink::symbolic::{enumerate_orbits, fixture, prime_counts_by_word_length, MarkovShift, Window};
use orbitlink::Exec;

const MODES: [(&str, Exec); 2] = [("serial", Exec::Serial), ("parallel", Exec::Parallel)];

fn template_words(hi: f64) -> Vec<Vec<usize>> {
    enumerate_orbits(&fixture("template").unwrap(), Window::new(0.0, hi).unwrap())
        .unwrap()
        .into_iter()
        .map(|o| o.word)
        .collect()
}

fn enumeration(c: &mut Criterion) {
    let shift = MarkovShift::full(3).unwrap();
    let mut g = c.benchmark_group("prime_counts_full3_n14");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| prime_counts_by_word_length(black_box(&shift), 14, exec).unwrap())
        });
    }
    g.finish();
}

fn linking(c: &mut Criterion) {
    let spec = TemplateSpec::default();
    let curves = |words: &[Vec<usize>]| -> Vec<PolylineCurve> {
        words.iter().map(|w| realize_orbit(&spec, w, 8).unwrap()).collect()
    };
    let (short, long): (Vec<_>, Vec<_>) = template_words(6.0).into_iter().partition(|w| w.len() <= 4);
    let (first, second) = (curves(&short), curves(&long));
    let mut g = c.benchmark_group("linking_table_template_T6");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| linking_table(black_box(&first), black_box(&second), exec).unwrap())
        });
    }
    g.finish();
}

fn double_integral(c: &mut Criterion) {
    let spec = TemplateSpec::default();
    let measure = |words: &[Vec<usize>]| {
        let parts = words
            .iter()
            .map(|w| (OrbitalComponent::from_template(&TemplateCurve::unit(&spec, w).unwrap(), 4).unwrap(), 0.0))
            .collect();
        OrbitalMeasure::new(parts).unwrap()
    };
    let words = template_words(5.0);
    let (short, long): (Vec<_>, Vec<_>) = words.into_iter().partition(|w| w.len() <= 4);
    let (a, b): (LambdaMeasure, LambdaMeasure) = (measure(&short).into(), measure(&long).into());
    let mut g = c.benchmark_group("double_integral_template_T5");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |bn| {
            bn.iter(|| double_integral_lambda(black_box(&a), black_box(&b), 1e-3, 40.0, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, enumeration, linking, double_integral);
criterion_main!(benches);
