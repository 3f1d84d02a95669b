// temporary diagnosis harness
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use lpbal_core::balance::{solve, LbInstance, SolverConfig};
use lpbal_core::brute::brute_force_opt;
use lpbal_core::dist::{DiscreteDist, PNorm};
use lpbal_core::instance::write_instance;

fn heavy_tailed_instance(rng: &mut ChaCha8Rng, m: usize, n: usize) -> LbInstance {
    let dists: Vec<Vec<DiscreteDist>> = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let k = rng.random_range(1..=3);
                    let mut pairs: Vec<(f64, f64)> = (0..k)
                        .map(|_| (rng.random_range(0.0..6.0), rng.random_range(0.05..1.0)))
                        .collect();
                    if rng.random_bool(0.25) {
                        pairs.push((rng.random_range(20.0..60.0), rng.random_range(0.01..0.08)));
                    }
                    let total: f64 = pairs.iter().map(|p| p.1).sum();
                    DiscreteDist::new(pairs.into_iter().map(|(v, w)| (v, w / total))).unwrap()
                })
                .collect()
        })
        .collect();
    LbInstance::new(dists).unwrap()
}

#[test]
fn repro() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBA77E);
    let configs = [
        SolverConfig::default(),
        SolverConfig { alpha: 0.05, big_c: 4.0, ..SolverConfig::default() },
        SolverConfig { big_c: 16.0, v_grid_ratio: 3.0, bisection_rel_tol: 0.02, ..SolverConfig::default() },
    ];
    let ps = [1.1, 1.5, 2.0, 3.0, 4.0, 6.0];
    let mut solved = 0;
    while solved < 200 {
        let m = rng.random_range(2..4);
        let n = rng.random_range(3..8);
        let inst = heavy_tailed_instance(&mut rng, m, n);
        let p = PNorm::new(ps[solved % ps.len()]).unwrap();
        let cfg = &configs[solved % configs.len()];
        let brute = brute_force_opt(&inst, p, 20_000, 1).unwrap();
        if !brute.exact || brute.value <= 1e-9 {
            continue;
        }
        match solve(&inst, p, cfg) {
            Ok(_) => {}
            Err(e) => {
                eprintln!("FAILURE at solved={solved}: {e}");
                eprintln!("p = {}, cfg idx = {}", p.value(), solved % configs.len());
                eprintln!("{}", write_instance(&inst, p));
                panic!("repro found");
            }
        }
        solved += 1;
    }
}
