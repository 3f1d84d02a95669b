//! Brute-force baselines: the exact optimum by enumerating all assignments.

use crate::balance::{IntegralAssignment, LbInstance, NormMethod, NormReport};
use crate::dist::PNorm;
use crate::error::{Error, Result};
use crate::moment;

/// Cap on `m^n` enumerated assignments.
pub const BRUTE_FORCE_CAP: u64 = 1_000_000;

#[derive(Debug, Clone)]
pub struct BruteForceResult {
    pub assignment: IntegralAssignment,
    pub value: f64,
    /// False when the per-assignment evaluation fell back to Monte Carlo.
    pub exact: bool,
}

/// Exact optimum of `E ||loads||_p` over all `m^n` assignments, enumerated
/// lexicographically (ties keep the lexicographically first optimum). When
/// a joint support is too large for exact evaluation, every assignment is
/// instead scored by common-random-number Monte Carlo and the result is
/// flagged approximate.
pub fn brute_force_opt(
    inst: &LbInstance,
    p: PNorm,
    mc_samples: usize,
    mc_seed: u64,
) -> Result<BruteForceResult> {
    let m = inst.machines();
    let n = inst.jobs();
    let total = (m as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
    if total > BRUTE_FORCE_CAP {
        return Err(Error::SupportCapExceeded {
            needed: total.min(usize::MAX as u64) as usize,
            cap: BRUTE_FORCE_CAP as usize,
        });
    }
    let mut machine_of = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut exact = true;
    loop {
        let asg = IntegralAssignment::new(machine_of.clone(), m)?;
        let loads = inst.loads_under(&asg);
        let value = match moment::expected_lp_norm_exact(&loads, p) {
            Ok(v) => v,
            Err(Error::SupportCapExceeded { .. }) => {
                exact = false;
                moment::expected_lp_norm_mc(&loads, p, mc_samples, mc_seed)?.mean
            }
            Err(e) => return Err(e),
        };
        match &best {
            Some((bv, _)) if *bv <= value => {}
            _ => best = Some((value, machine_of.clone())),
        }
        // next assignment in lexicographic order
        let mut pos = n;
        loop {
            if pos == 0 {
                let (value, machine_of) = best.expect("at least one assignment");
                return Ok(BruteForceResult {
                    assignment: IntegralAssignment::new(machine_of, m)?,
                    value,
                    exact,
                });
            }
            pos -= 1;
            machine_of[pos] += 1;
            if machine_of[pos] < m {
                break;
            }
            machine_of[pos] = 0;
        }
    }
}

/// Evaluation of a specific assignment, exact when enumerable.
pub fn evaluate_assignment(
    inst: &LbInstance,
    asg: &IntegralAssignment,
    p: PNorm,
    mc_samples: usize,
    mc_seed: u64,
) -> Result<NormReport> {
    let loads = inst.loads_under(asg);
    match moment::expected_lp_norm_exact(&loads, p) {
        Ok(value) => Ok(NormReport {
            method: NormMethod::Exact,
            value,
            stderr: None,
            seed: None,
            samples: None,
        }),
        Err(Error::SupportCapExceeded { .. }) => {
            let est = moment::expected_lp_norm_mc(&loads, p, mc_samples, mc_seed)?;
            Ok(NormReport {
                method: NormMethod::Mc,
                value: est.mean,
                stderr: Some(est.stderr),
                seed: Some(est.seed),
                samples: Some(est.samples),
            })
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DiscreteDist;

    fn p(v: f64) -> PNorm {
        PNorm::new(v).unwrap()
    }

    #[test]
    fn single_machine_unique_assignment() {
        let inst = LbInstance::new(vec![vec![
            DiscreteDist::point_mass(1.0),
            DiscreteDist::point_mass(2.0),
        ]])
        .unwrap();
        let res = brute_force_opt(&inst, p(2.0), 100, 1).unwrap();
        assert_eq!(res.assignment.machine_of(), &[0, 0]);
        assert!((res.value - 3.0).abs() < 1e-12);
        assert!(res.exact);
    }

    #[test]
    fn deterministic_makespan_matches_exhaustive_max() {
        // two machines, three deterministic jobs, p = inf minimizes makespan
        let sizes = [3.0, 2.0, 2.0];
        let rows: Vec<Vec<DiscreteDist>> = (0..2)
            .map(|_| sizes.iter().map(|&s| DiscreteDist::point_mass(s)).collect())
            .collect();
        let inst = LbInstance::new(rows).unwrap();
        let res = brute_force_opt(&inst, PNorm::INFINITY, 100, 1).unwrap();
        // exhaustive check over all 8 assignments
        let mut opt = f64::INFINITY;
        for mask in 0..8u32 {
            let mut loads = [0.0f64; 2];
            for (j, &s) in sizes.iter().enumerate() {
                loads[(mask >> j & 1) as usize] += s;
            }
            opt = opt.min(loads[0].max(loads[1]));
        }
        assert!((res.value - opt).abs() < 1e-12);
        assert_eq!(res.value, 4.0);
    }

    #[test]
    fn cap_breach_reported() {
        let dist = DiscreteDist::point_mass(1.0);
        let rows = vec![vec![dist; 25]; 4]; // 4^25 >> cap
        let inst = LbInstance::new(rows).unwrap();
        assert!(matches!(
            brute_force_opt(&inst, p(2.0), 100, 1),
            Err(Error::SupportCapExceeded { .. })
        ));
    }

    #[test]
    fn stochastic_2x4_oracle_value() {
        let b = DiscreteDist::bernoulli(0.5, 2.0).unwrap();
        let inst = LbInstance::new(vec![vec![b.clone(); 4], vec![b; 4]]).unwrap();
        let res = brute_force_opt(&inst, p(2.0), 100, 1).unwrap();
        assert!(res.exact);
        // symmetric instance: optimum splits 2/2; check against direct eval
        let asg = IntegralAssignment::new(vec![0, 0, 1, 1], 2).unwrap();
        let direct = moment::expected_lp_norm_exact(&inst.loads_under(&asg), p(2.0)).unwrap();
        assert!((res.value - direct).abs() < 1e-12);
    }
}
