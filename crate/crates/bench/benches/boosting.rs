use std::hint::black_box;

use anglecs::boost::{fit, BoostConfig};
use anglecs::data::{gen_four_class, gen_waveform};
use anglecs::eval::sim1_cost;
use anglecs::{
    fit_tree, minimize_conditional_risk, Algorithm, Booster, ClassDistribution, CostMatrix,
    MarginLoss, SimplexCode, WeightTable,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn tree(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_tree");
    for n in [300, 3000] {
        let data = gen_waveform(n, 1).unwrap();
        let w = WeightTable::new(n, 3, vec![1.0 / (3 * n) as f64; 3 * n]).unwrap();
        for leaves in [4, 16] {
            group.bench_with_input(
                BenchmarkId::new(format!("leaves{leaves}"), n),
                &leaves,
                |b, &leaves| b.iter(|| fit_tree(black_box(data.x()), &w, leaves).unwrap()),
            );
        }
    }
    group.finish();
}

fn rounds(c: &mut Criterion) {
    let data = gen_waveform(300, 2).unwrap();
    let cost = sim1_cost();
    let mut group = c.benchmark_group("boosting");
    for alg in [Algorithm::AdaBoost, Algorithm::LogitBoost] {
        group.bench_function(format!("{}_round", alg.name()), |b| {
            b.iter_batched(
                || {
                    Booster::new(alg, data.x(), data.labels(), &cost, BoostConfig::default())
                        .unwrap()
                },
                |mut booster| booster.step().unwrap(),
                criterion::BatchSize::SmallInput,
            )
        });
    }
    let four = gen_four_class(300, 3).unwrap();
    let zo = CostMatrix::zero_one(4).unwrap();
    let cfg = BoostConfig { rounds: 50, ..Default::default() };
    group.bench_function("adaboost_fit_50_rounds", |b| {
        b.iter(|| fit(Algorithm::AdaBoost, black_box(&four), &zo, &cfg).unwrap())
    });
    group.finish();
}

fn risk(c: &mut Criterion) {
    let mut group = c.benchmark_group("minimize_conditional_risk");
    for k in [3, 7] {
        let code = SimplexCode::new(k).unwrap();
        let zo = CostMatrix::zero_one(k).unwrap();
        let p: Vec<f64> = (1..=k).map(|j| j as f64).collect();
        let total: f64 = p.iter().sum();
        let p = ClassDistribution::new(p.iter().map(|v| v / total).collect()).unwrap();
        group.bench_with_input(BenchmarkId::new("logit", k), &p, |b, p| {
            b.iter(|| minimize_conditional_risk(&code, &zo, &MarginLoss::Logit, p, 1e-9).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, tree, rounds, risk);
criterion_main!(benches);
