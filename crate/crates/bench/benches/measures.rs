use std::hint::black_box;

use bns_emm::esscher::solve_theta;
use bns_emm::mc::{expect_density, McOptions, PreparedMeasure};
use bns_emm::model::simulate_path;
use bns_emm::rng::path_rng;
use bns_emm::{MeasureSpec, ThetaKind, ThetaSolution};
use bns_emm_bench::{drivers, reference};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn theta_roots(c: &mut Criterion) {
    let mut g = c.benchmark_group("theta_root");
    for model in drivers() {
        let ctx = reference(model);
        for kind in [ThetaKind::Sharp, ThetaKind::Star] {
            g.bench_with_input(BenchmarkId::new(format!("{kind:?}"), model.name()), &ctx, |b, ctx| {
                b.iter(|| solve_theta(ctx, kind, black_box(1.3)).unwrap())
            });
        }
    }
    g.finish();
}

fn theta_tables(c: &mut Criterion) {
    let mut g = c.benchmark_group("theta_table");
    g.sample_size(10);
    for model in drivers() {
        let ctx = reference(model);
        g.bench_with_input(BenchmarkId::new("Star", model.name()), &ctx, |b, ctx| {
            b.iter(|| ThetaSolution::new(ctx, ThetaKind::Star).unwrap())
        });
    }
    g.finish();
}

fn paths_and_densities(c: &mut Criterion) {
    let mut g = c.benchmark_group("path");
    for model in drivers() {
        let ctx = reference(model);
        g.bench_function(BenchmarkId::new("simulate", model.name()), |b| {
            let mut i = 0;
            b.iter(|| {
                i += 1;
                simulate_path(&ctx.params, 252, i, &mut path_rng(1, i))
            })
        });
        let path = simulate_path(&ctx.params, 252, 0, &mut path_rng(1, 0));
        for spec in [MeasureSpec::ExpEsscher, MeasureSpec::LinEsscher, MeasureSpec::Minimal] {
            let m = PreparedMeasure::new(&ctx, &spec, &McOptions::default()).unwrap();
            g.bench_function(BenchmarkId::new(spec.label(), model.name()), |b| {
                b.iter(|| m.log_density(black_box(&path)).unwrap())
            });
        }
    }
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let ctx = reference(drivers()[1]);
    let opts = McOptions {
        n_paths: 10_000,
        ..McOptions::default()
    };
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(10);
    g.bench_function("exp_esscher_10k", |b| {
        b.iter(|| expect_density(&ctx, &MeasureSpec::ExpEsscher, &opts).unwrap())
    });
    g.finish();
}

criterion_group!(benches, theta_roots, theta_tables, paths_and_densities, monte_carlo);
criterion_main!(benches);
