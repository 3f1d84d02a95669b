//! Stochastic lp load balancing on unrelated machines.
//!
//! The pipeline: split each job at `alpha T` into truncated and exceptional
//! parts, write the multi-scale starting relaxation (capped-nu rows over a
//! geometric scale grid, effective-size subset rows via separation, an
//! exceptional-mass budget and a coarse p-moment budget), bisect the load
//! estimate `T` on relaxation feasibility, pick one nu-scale and one
//! effective-size scale per machine from the fractional solution, merge the
//! reduced relaxation into a generalized-assignment instance, and round it.

mod relax;

use serde::{Deserialize, Serialize};

use crate::dist::{DiscreteDist, PNorm};
use crate::error::{Error, Result};
use crate::gap;
use crate::lp;
use crate::moment::{self, MachineLoads};

pub use relax::{
    build_reduced_lp, build_starting_lp, compute_l_bar, compute_v_bar, cut_to_constraint,
    linf_separation, merge_to_gap, v_grid, LinfCut, Relaxation, StartingLp, SCALE_DOWN,
    SEPARATION_TOL,
};

/// Tolerance for the assignment-polytope column sums.
pub const POLYTOPE_TOL: f64 = 1e-7;

/// An m x n matrix of job-size distributions: `dist(i, j)` is the load on
/// machine `i` if job `j` runs there.
#[derive(Debug, Clone)]
pub struct LbInstance {
    dists: Vec<Vec<DiscreteDist>>,
}

impl LbInstance {
    pub fn new(dists: Vec<Vec<DiscreteDist>>) -> Result<Self> {
        if dists.is_empty() || dists[0].is_empty() {
            return Err(Error::InvalidParameter(
                "instance needs at least one machine and one job".into(),
            ));
        }
        let n = dists[0].len();
        if dists.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidParameter("ragged job matrix".into()));
        }
        Ok(LbInstance { dists })
    }

    pub fn machines(&self) -> usize {
        self.dists.len()
    }

    pub fn jobs(&self) -> usize {
        self.dists[0].len()
    }

    pub fn dist(&self, machine: usize, job: usize) -> &DiscreteDist {
        &self.dists[machine][job]
    }

    pub fn rows(&self) -> &[Vec<DiscreteDist>] {
        &self.dists
    }

    /// The loads induced by an integral assignment.
    pub fn loads_under(&self, asg: &IntegralAssignment) -> MachineLoads {
        let mut per_machine: Vec<Vec<DiscreteDist>> = vec![Vec::new(); self.machines()];
        for (j, &i) in asg.machine_of().iter().enumerate() {
            per_machine[i].push(self.dists[i][j].clone());
        }
        MachineLoads::new(per_machine).expect("instance has at least one machine")
    }
}

/// Fractional job shares: `x[i][j]` of job `j` on machine `i`, each job's
/// shares summing to one.
#[derive(Debug, Clone)]
pub struct FractionalAssignment {
    x: Vec<Vec<f64>>,
}

impl FractionalAssignment {
    pub fn new(x: Vec<Vec<f64>>) -> Result<Self> {
        if x.is_empty() || x[0].is_empty() {
            return Err(Error::InvalidParameter("empty assignment".into()));
        }
        let n = x[0].len();
        if x.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidParameter("ragged assignment".into()));
        }
        for j in 0..n {
            let mut total = 0.0;
            for row in &x {
                let v = row[j];
                if !(-POLYTOPE_TOL..=1.0 + POLYTOPE_TOL).contains(&v) {
                    return Err(Error::InvalidParameter(format!(
                        "share x[{j}] = {v} outside [0, 1]"
                    )));
                }
                total += v;
            }
            if (total - 1.0).abs() > POLYTOPE_TOL {
                return Err(Error::InvalidParameter(format!(
                    "job {j} has share total {total}, expected 1"
                )));
            }
        }
        Ok(FractionalAssignment { x })
    }

    pub fn machines(&self) -> usize {
        self.x.len()
    }

    pub fn jobs(&self) -> usize {
        self.x[0].len()
    }

    pub fn value(&self, machine: usize, job: usize) -> f64 {
        self.x[machine][job].clamp(0.0, 1.0)
    }
}

/// A total job -> machine map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralAssignment {
    machine_of: Vec<usize>,
}

impl IntegralAssignment {
    pub fn new(machine_of: Vec<usize>, machines: usize) -> Result<Self> {
        if machine_of.is_empty() {
            return Err(Error::InvalidParameter("empty assignment".into()));
        }
        if let Some(&bad) = machine_of.iter().find(|&&i| i >= machines) {
            return Err(Error::InvalidParameter(format!(
                "machine index {bad} out of range (m = {machines})"
            )));
        }
        Ok(IntegralAssignment { machine_of })
    }

    pub fn machine_of(&self) -> &[usize] {
        &self.machine_of
    }

    pub fn to_fractional(&self, machines: usize) -> FractionalAssignment {
        let n = self.machine_of.len();
        let mut x = vec![vec![0.0; n]; machines];
        for (j, &i) in self.machine_of.iter().enumerate() {
            x[i][j] = 1.0;
        }
        FractionalAssignment { x }
    }
}

/// All constants the method leaves as "sufficiently small/large", plus
/// tolerances and seeds. Defaults are the values the acceptance suite pins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Truncation constant; jobs are split at `alpha * T`. `1/alpha` integral.
    pub alpha: f64,
    /// Budget constant of the effective-size subset constraints.
    pub big_c: f64,
    /// Ratio of the geometric scale grid.
    pub v_grid_ratio: f64,
    /// Bisection stops when `upper/lower <= 1 + bisection_rel_tol`.
    pub bisection_rel_tol: f64,
    pub max_bisection_iters: usize,
    pub separation_max_rounds: usize,
    pub mc_samples: usize,
    pub mc_seed: u64,
    /// Empirical guard on the achieved-norm / brute-force-optimum ratio.
    pub ratio_guard: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: 0.1,
            big_c: 8.0,
            v_grid_ratio: 2.0,
            bisection_rel_tol: 0.05,
            max_bisection_iters: 40,
            separation_max_rounds: 200,
            mc_samples: 20_000,
            mc_seed: 12345,
            ratio_guard: 20.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        let inv = 1.0 / self.alpha;
        if (inv - inv.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "1/alpha must be integral, got {inv}"
            )));
        }
        if !(self.big_c > 0.0) {
            return Err(Error::InvalidParameter("C must be positive".into()));
        }
        if !(self.v_grid_ratio > 1.0) {
            return Err(Error::InvalidParameter("v_grid_ratio must exceed 1".into()));
        }
        if !(self.bisection_rel_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "bisection_rel_tol must be positive".into(),
            ));
        }
        if self.max_bisection_iters == 0 || self.separation_max_rounds == 0 {
            return Err(Error::InvalidParameter(
                "iteration caps must be positive".into(),
            ));
        }
        if self.mc_samples < 2 {
            return Err(Error::InvalidParameter(
                "mc_samples must be at least 2".into(),
            ));
        }
        if !(self.ratio_guard > 0.0) {
            return Err(Error::InvalidParameter(
                "ratio_guard must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Smallest admissible scale: `max(ceil((1/alpha)^p), 100)`.
    pub fn v_min(&self, p: PNorm) -> f64 {
        ((1.0 / self.alpha).powf(p.value()).ceil()).max(100.0)
    }
}

/// One scale per machine selected from the fractional solution: `v_bar` for
/// the nu rows (integral values, stored as f64 so `(1/alpha)^p` fits for
/// large p), `l_bar` for the effective-size rows, and the set `I` of
/// machines whose nu scale exists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedParams {
    pub v_bar: Vec<f64>,
    pub l_bar: Vec<usize>,
    pub in_set: Vec<bool>,
}

/// How the achieved norm was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMethod {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormReport {
    pub method: NormMethod,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BisectionProbe {
    pub t: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BisectionReport {
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub grew_upper: bool,
    /// False if some probed T was feasible while a larger probed T was not.
    pub monotone: bool,
    pub probes: Vec<BisectionProbe>,
}

/// LHS/RHS factors of the reduced-relaxation rows at the rounded assignment;
/// the rounding guarantees keep each within a small constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintAudit {
    /// exceptional-mass row vs 2T
    pub exceptional_factor: f64,
    /// per machine in I: capped-nu row vs 2
    pub lfunc_factors: Vec<Option<f64>>,
    /// per machine: effective-size row vs C
    pub beta_factors: Vec<f64>,
    /// coarse p-moment row vs (4T)^p
    pub coarse_factor: f64,
    pub max_factor: f64,
}

/// Everything needed to replay and audit one solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub p: f64,
    pub final_t: f64,
    pub assignment: Vec<usize>,
    pub norm: NormReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<ConstraintAudit>,
    pub v_bar: Vec<f64>,
    pub l_bar: Vec<usize>,
    pub in_set: Vec<bool>,
    pub inv_v_bar_sum: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bisection: Option<BisectionReport>,
    /// Largest violation of the reduced relaxation by the fractional input.
    pub reduced_lp_max_violation: f64,
    pub timing_ms: f64,
    pub config: SolverConfig,
}

/// `p = 1`: assign each job to the machine with the smallest expected size
/// (ties to the smallest machine index). Exact by linearity of expectation.
pub fn greedy_p1(inst: &LbInstance) -> IntegralAssignment {
    let machine_of = (0..inst.jobs())
        .map(|j| {
            let mut best = 0;
            let mut best_mean = inst.dist(0, j).expectation();
            for i in 1..inst.machines() {
                let mean = inst.dist(i, j).expectation();
                if mean < best_mean {
                    best = i;
                    best_mean = mean;
                }
            }
            best
        })
        .collect();
    IntegralAssignment { machine_of }
}

/// Evaluates `E ||loads||_p` for an assignment: exactly when the joint
/// support is enumerable, otherwise by seeded Monte Carlo.
pub fn evaluate_norm(
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

fn feasibility_probe(
    inst: &LbInstance,
    t: f64,
    p: PNorm,
    cfg: &SolverConfig,
) -> Result<Option<FractionalAssignment>> {
    let rel = Relaxation::new(inst, t, p, cfg)?;
    let mut starting = build_starting_lp(&rel)?;
    let xids = starting.x_ids.clone();
    let rel_ref = &rel;
    let outcome = lp::solve_with_separation(
        &mut starting.lp,
        |sol| {
            let x = extract_fractional(&xids, sol);
            linf_separation(rel_ref, &x)
                .iter()
                .map(|cut| cut_to_constraint(rel_ref, cut, &xids))
                .collect()
        },
        cfg.separation_max_rounds,
    )?;
    match outcome.solution.status {
        lp::LpStatus::Optimal => Ok(Some(extract_fractional(&starting.x_ids, &outcome.solution))),
        lp::LpStatus::Infeasible => Ok(None),
        lp::LpStatus::RoundLimit => Err(Error::NoConvergence(format!(
            "separation hit the round limit ({}) at T = {t}",
            cfg.separation_max_rounds
        ))),
        lp::LpStatus::IterationLimit => Err(Error::NoConvergence(format!(
            "simplex hit the pivot cap at T = {t}"
        ))),
        lp::LpStatus::Unbounded => Err(Error::Numerical(
            "feasibility relaxation reported unbounded".into(),
        )),
    }
}

fn extract_fractional(xids: &[Vec<lp::VarId>], sol: &lp::LpSolution) -> FractionalAssignment {
    let x: Vec<Vec<f64>> = xids
        .iter()
        .map(|row| {
            row.iter()
                .map(|&id| sol.value(id).clamp(0.0, 1.0))
                .collect()
        })
        .collect();
    FractionalAssignment { x }
}

/// Full solve: bisection over the load estimate, reduced relaxation, merge,
/// rounding, audit.
pub fn solve(
    inst: &LbInstance,
    p: PNorm,
    cfg: &SolverConfig,
) -> Result<(IntegralAssignment, SolveReport)> {
    cfg.validate()?;
    if p.is_infinite() {
        return Err(Error::InvalidParameter(
            "p = inf is not supported by this solver".into(),
        ));
    }
    let start = std::time::Instant::now();
    let pv = p.value();

    let greedy = greedy_p1(inst);
    if pv == 1.0 {
        // expectation is linear, so the greedy assignment is exactly optimal
        let norm = evaluate_norm(inst, &greedy, p, cfg.mc_samples, cfg.mc_seed)?;
        let report = SolveReport {
            p: pv,
            final_t: norm.value,
            assignment: greedy.machine_of().to_vec(),
            norm,
            audit: None,
            v_bar: Vec::new(),
            l_bar: Vec::new(),
            in_set: Vec::new(),
            inv_v_bar_sum: 0.0,
            bisection: None,
            reduced_lp_max_violation: 0.0,
            timing_ms: start.elapsed().as_secs_f64() * 1e3,
            config: cfg.clone(),
        };
        return Ok((greedy, report));
    }

    let lower_init: f64 = (0..inst.jobs())
        .map(|j| {
            (0..inst.machines())
                .map(|i| inst.dist(i, j).expectation())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    if lower_init <= 0.0 {
        // every job has a machine where it is identically zero; the greedy
        // assignment places it there and the optimum is zero
        let norm = evaluate_norm(inst, &greedy, p, cfg.mc_samples, cfg.mc_seed)?;
        let report = SolveReport {
            p: pv,
            final_t: 0.0,
            assignment: greedy.machine_of().to_vec(),
            norm,
            audit: None,
            v_bar: Vec::new(),
            l_bar: Vec::new(),
            in_set: Vec::new(),
            inv_v_bar_sum: 0.0,
            bisection: None,
            reduced_lp_max_violation: 0.0,
            timing_ms: start.elapsed().as_secs_f64() * 1e3,
            config: cfg.clone(),
        };
        return Ok((greedy, report));
    }

    let greedy_norm = evaluate_norm(inst, &greedy, p, cfg.mc_samples, cfg.mc_seed)?;
    let mut upper = match greedy_norm.method {
        NormMethod::Exact => greedy_norm.value,
        NormMethod::Mc => greedy_norm.value + 4.0 * greedy_norm.stderr.unwrap_or(0.0),
    };
    let mut lower = lower_init.min(upper);
    let mut probes = Vec::new();
    let mut grew_upper = false;

    let mut best: Option<(f64, FractionalAssignment)> = None;
    for attempt in 0..64 {
        match feasibility_probe(inst, upper, p, cfg)? {
            Some(x) => {
                probes.push(BisectionProbe {
                    t: upper,
                    feasible: true,
                });
                best = Some((upper, x));
                break;
            }
            None => {
                probes.push(BisectionProbe {
                    t: upper,
                    feasible: false,
                });
                lower = lower.max(upper);
                upper *= 2.0;
                grew_upper = true;
                if attempt == 63 {
                    return Err(Error::BracketFailure(format!(
                        "starting relaxation infeasible up to T = {upper}"
                    )));
                }
            }
        }
    }
    let mut iterations = 0;
    while upper / lower > 1.0 + cfg.bisection_rel_tol && iterations < cfg.max_bisection_iters {
        iterations += 1;
        let mid = (lower * upper).sqrt();
        match feasibility_probe(inst, mid, p, cfg)? {
            Some(x) => {
                probes.push(BisectionProbe {
                    t: mid,
                    feasible: true,
                });
                upper = mid;
                best = Some((mid, x));
            }
            None => {
                probes.push(BisectionProbe {
                    t: mid,
                    feasible: false,
                });
                lower = mid;
            }
        }
    }
    let (final_t, x_bar) = best.expect("upper bracket was made feasible");
    let monotone = probes.iter().all(|a| {
        probes
            .iter()
            .all(|b| !(a.feasible && !b.feasible && b.t > a.t))
    });

    // reduced relaxation from the fractional solution
    let rel = Relaxation::new(inst, final_t, p, cfg)?;
    let (v_bar, in_set) = compute_v_bar(&rel, &x_bar);
    let l_bar = compute_l_bar(&rel, &x_bar)?;
    let params = ReducedParams {
        v_bar,
        l_bar,
        in_set,
    };

    let (reduced, red_xids) = build_reduced_lp(&rel, &params)?;
    let mut red_values = vec![0.0; reduced.num_vars()];
    for (i, row) in red_xids.iter().enumerate() {
        for (j, &id) in row.iter().enumerate() {
            red_values[id.index()] = x_bar.value(i, j);
        }
    }
    let reduced_lp_max_violation = reduced.max_violation(&red_values);
    if reduced_lp_max_violation > POLYTOPE_TOL {
        return Err(Error::Numerical(format!(
            "fractional solution violates the reduced relaxation by {reduced_lp_max_violation}"
        )));
    }

    let gap_inst = merge_to_gap(&rel, &params)?;
    let rounded = gap::round_st(&gap_inst, &x_bar)?;

    let audit = audit_constraints(&rel, &params, &rounded);
    let norm = evaluate_norm(inst, &rounded, p, cfg.mc_samples, cfg.mc_seed)?;
    let inv_v_bar_sum: f64 = params.v_bar.iter().map(|v| 1.0 / v).sum();

    let report = SolveReport {
        p: pv,
        final_t,
        assignment: rounded.machine_of().to_vec(),
        norm,
        audit: Some(audit),
        v_bar: params.v_bar.clone(),
        l_bar: params.l_bar.clone(),
        in_set: params.in_set.clone(),
        inv_v_bar_sum,
        bisection: Some(BisectionReport {
            lower,
            upper,
            iterations,
            grew_upper,
            monotone,
            probes,
        }),
        reduced_lp_max_violation,
        timing_ms: start.elapsed().as_secs_f64() * 1e3,
        config: cfg.clone(),
    };
    Ok((rounded, report))
}

/// Factors of the reduced-relaxation rows at an integral assignment.
pub fn audit_constraints(
    rel: &Relaxation,
    params: &ReducedParams,
    asg: &IntegralAssignment,
) -> ConstraintAudit {
    let m = rel.machines();
    let t = rel.t();
    let pv = rel.p().value();
    let big_c = rel.big_c();
    let mut exceptional = 0.0;
    let mut coarse = 0.0;
    let mut nu_sums = vec![0.0; m];
    let mut beta_sums = vec![0.0; m];
    for (j, &i) in asg.machine_of().iter().enumerate() {
        exceptional += rel.exceptional_mean(i, j);
        coarse += rel.raw_moment(i, j);
        nu_sums[i] += rel.nu_hat(i, j, params.v_bar[i]);
        beta_sums[i] += rel.beta(i, j, params.l_bar[i] as f64);
    }
    let exceptional_factor = exceptional / (2.0 * t);
    let coarse_factor = coarse / (4.0 * t).powf(pv);
    let lfunc_factors: Vec<Option<f64>> = (0..m)
        .map(|i| params.in_set[i].then(|| nu_sums[i] / 2.0))
        .collect();
    let beta_factors: Vec<f64> = (0..m).map(|i| beta_sums[i] / big_c).collect();
    let mut max_factor = exceptional_factor.max(coarse_factor);
    for f in lfunc_factors.iter().flatten() {
        max_factor = max_factor.max(*f);
    }
    for f in &beta_factors {
        max_factor = max_factor.max(*f);
    }
    ConstraintAudit {
        exceptional_factor,
        lfunc_factors,
        beta_factors,
        coarse_factor,
        max_factor,
    }
}
