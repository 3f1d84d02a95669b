//! Build a small stochastic instance, solve it, and compare against the
//! brute-force optimum.
//!
//! ```sh
//! cargo run -p lpbal-core --example quickstart
//! ```

use lpbal_core::balance::{solve, LbInstance, SolverConfig};
use lpbal_core::brute::brute_force_opt;
use lpbal_core::dist::{DiscreteDist, PNorm};

fn main() -> lpbal_core::Result<()> {
    // two machines, four jobs; each entry is the load distribution of a job
    // on a machine
    let spike = DiscreteDist::new([(0.0, 0.9), (8.0, 0.1)])?;
    let steady = DiscreteDist::new([(1.0, 0.5), (2.0, 0.5)])?;
    let light = DiscreteDist::bernoulli(0.4, 1.0)?;
    let inst = LbInstance::new(vec![
        vec![spike.clone(), steady.clone(), light.clone(), steady.clone()],
        vec![steady.clone(), spike, steady, light],
    ])?;

    let p = PNorm::new(2.0)?;
    let cfg = SolverConfig::default();
    let (assignment, report) = solve(&inst, p, &cfg)?;
    println!("assignment: {:?}", assignment.machine_of());
    println!(
        "achieved E||S||_p = {:.6} ({:?})",
        report.norm.value, report.norm.method
    );
    println!("load estimate from bisection: {:.6}", report.final_t);

    let optimum = brute_force_opt(&inst, p, cfg.mc_samples, cfg.mc_seed)?;
    println!("brute-force optimum: {:.6}", optimum.value);
    println!("ratio: {:.4}", report.norm.value / optimum.value);
    Ok(())
}
