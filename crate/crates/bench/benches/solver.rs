//! Benchmarks for the hot paths: convolution, the scale solve, the simplex,
//! rounding, and one end-to-end solve at desk scale.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use lpbal_core::balance::{self, FractionalAssignment, LbInstance, SolverConfig};
use lpbal_core::dist::{DiscreteDist, PNorm};
use lpbal_core::gap::{round_st, GapInstance};
use lpbal_core::instance::gen_random;
use lpbal_core::lp::{LinearProgram, Relation, Sense};
use lpbal_core::moment::{expected_lp_norm_exact, load_dist, solve_epsilon_star, MachineLoads};

fn random_dist(rng: &mut ChaCha8Rng, support: usize) -> DiscreteDist {
    let values: Vec<f64> = (0..support).map(|_| rng.random_range(0.0..10.0)).collect();
    let mut ws: Vec<f64> = (0..support).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = ws.iter().sum();
    ws.iter_mut().for_each(|w| *w /= total);
    DiscreteDist::new(values.into_iter().zip(ws)).unwrap()
}

fn bench_convolution(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let family: Vec<DiscreteDist> = (0..9).map(|_| random_dist(&mut rng, 4)).collect();
    c.bench_function("convolve_9x4_chain", |b| {
        b.iter(|| load_dist(black_box(&family), 1_000_000).unwrap())
    });
}

fn bench_epsilon_star(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let family: Vec<DiscreteDist> = (0..20).map(|_| random_dist(&mut rng, 4)).collect();
    let p = PNorm::new(3.0).unwrap();
    c.bench_function("epsilon_star_20_vars", |b| {
        b.iter(|| solve_epsilon_star(black_box(&family), p).unwrap())
    });
}

fn bench_exact_norm(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let loads = MachineLoads::new(
        (0..3)
            .map(|_| (0..4).map(|_| random_dist(&mut rng, 3)).collect())
            .collect(),
    )
    .unwrap();
    let p = PNorm::new(2.0).unwrap();
    c.bench_function("exact_norm_3x4", |b| {
        b.iter(|| expected_lp_norm_exact(black_box(&loads), p).unwrap())
    });
}

fn bench_simplex(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut build = move || {
        let mut lp = LinearProgram::new();
        let ids: Vec<_> = (0..20)
            .map(|j| lp.add_var(format!("x{j}"), 0.0, 2.0).unwrap())
            .collect();
        for _ in 0..15 {
            let coeffs: Vec<_> = ids
                .iter()
                .map(|&id| (id, rng.random_range(0.0..1.5)))
                .collect();
            lp.add_constraint(coeffs, Relation::Le, rng.random_range(2.0..8.0))
                .unwrap();
        }
        lp.set_objective(Sense::Maximize, ids.iter().map(|&id| (id, 1.0)).collect());
        lp
    };
    let lp = build();
    c.bench_function("simplex_20v_15c", |b| {
        b.iter(|| black_box(&lp).solve().unwrap())
    });
}

fn bench_rounding(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = 4;
    let n = 12;
    let a: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let b: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let mut x = vec![vec![0.0; n]; m];
    for j in 0..n {
        let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
        let tot: f64 = w.iter().sum();
        for i in 0..m {
            x[i][j] = w[i] / tot;
        }
    }
    let x = FractionalAssignment::new(x).unwrap();
    let budgets: Vec<f64> = (0..m)
        .map(|i| (0..n).map(|j| a[i][j] * x.value(i, j)).sum())
        .collect();
    let cost: f64 = (0..m)
        .map(|i| (0..n).map(|j| b[i][j] * x.value(i, j)).sum::<f64>())
        .sum();
    let gap = GapInstance::new(a, b, budgets, cost).unwrap();
    c.bench_function("round_st_4x12", |bch| {
        bch.iter_batched(
            || (gap.clone(), x.clone()),
            |(g, xf)| round_st(&g, &xf).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_end_to_end(c: &mut Criterion) {
    let inst: LbInstance = gen_random(3, 6, PNorm::new(2.0).unwrap(), 3, 99);
    let cfg = SolverConfig::default();
    let p = PNorm::new(2.0).unwrap();
    c.bench_function("solve_3x6_p2", |b| {
        b.iter(|| balance::solve(black_box(&inst), p, &cfg).unwrap())
    });
}

criterion_group!(
    benches,
    bench_convolution,
    bench_epsilon_star,
    bench_exact_norm,
    bench_simplex,
    bench_rounding,
    bench_end_to_end
);
criterion_main!(benches);
