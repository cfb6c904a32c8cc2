use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use nonsimplify_core::estimators::{cond_kendall_tau, default_design, estimate_measure, CopulaMeasures};
use nonsimplify_core::oracle::{self, OracleMeasure, OracleSpec};
use nonsimplify_core::vines::enumerate_vines;
use nonsimplify_core::{bvn_cdf, sample, AveVariant, BuiltinModel, EstimatorMeasure, EstimatorSpec, KernelSpec};

fn normal(c: &mut Criterion) {
    c.bench_function("bvn_cdf", |b| {
        b.iter(|| bvn_cdf(black_box(0.3), black_box(-0.7), black_box(0.64)).unwrap())
    });
}

fn oracles(c: &mut Criterion) {
    let model = BuiltinModel::Gauss08z.model();
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    for m in [
        OracleMeasure::Psi1Cvm,
        OracleMeasure::Psi1Ks,
        OracleMeasure::Psi0Cvm,
        OracleMeasure::Psi0Ks,
    ] {
        let spec = OracleSpec::new(m);
        g.bench_function(m.name(), |b| b.iter(|| oracle::compute(&model, &spec).unwrap()));
    }
    g.finish();
}

fn estimators(c: &mut Criterion) {
    let model = BuiltinModel::Gauss08z.model();
    let mut g = c.benchmark_group("ckt");
    for n in [500usize, 2000, 8000] {
        let data = sample(&model, n, 1).unwrap();
        let k = KernelSpec::epanechnikov(0.2).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, d| {
            b.iter(|| cond_kendall_tau(d, &[0.5], &k, false).unwrap())
        });
    }
    g.finish();

    let data = sample(&model, 2000, 2).unwrap();
    let k = KernelSpec::epanechnikov(0.1).unwrap();
    let mut g = c.benchmark_group("estimate_n2000");
    g.sample_size(10);
    g.bench_function("psi1_cvm_cs3", |b| {
        let spec = EstimatorSpec::new(EstimatorMeasure::Psi1Cvm, AveVariant::Cs3);
        b.iter(|| estimate_measure(&data, &spec, &k).unwrap())
    });
    g.bench_function("all_copula_measures", |b| {
        let design = default_design(&data, 20).unwrap();
        b.iter(|| CopulaMeasures::compute(&data, &k, 50, &design, true, &[AveVariant::Cs3, AveVariant::Cs4]).unwrap())
    });
    g.finish();
}

fn vines(c: &mut Criterion) {
    c.bench_function("enumerate_vines_d5", |b| {
        b.iter(|| enumerate_vines(black_box(5)).unwrap())
    });
}

criterion_group!(benches, normal, oracles, estimators, vines);
criterion_main!(benches);
