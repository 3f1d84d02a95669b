//! Relaxation machinery: truncation caches, the starting relaxation, the
//! subset separation oracle, per-machine scale selection, the reduced
//! relaxation, and the merge into a generalized-assignment instance.

use crate::balance::{FractionalAssignment, ReducedParams, SolverConfig};
use crate::dist::{DiscreteDist, PNorm};
use crate::error::{Error, Result};
use crate::gap::GapInstance;
use crate::lp::{Constraint, LinearProgram, Relation, Sense, VarId};

use super::LbInstance;

/// Truncated parts enter the nu rows scaled down by this constant.
pub const SCALE_DOWN: f64 = 44.0;

/// Separation tolerance: a subset row must be violated by more than this to
/// be cut, and scale selection accepts sums within it.
pub const SEPARATION_TOL: f64 = 1e-7;

/// Precomputed per-(machine, job) pieces of the relaxation at a fixed load
/// estimate `t`: exceptional means, truncated parts (raw, scaled down, and
/// over `t`), raw p-moments, the scale grid.
#[derive(Debug, Clone)]
pub struct Relaxation {
    t: f64,
    p: PNorm,
    big_c: f64,
    v_min: f64,
    v_grid: Vec<f64>,
    exceptional_mean: Vec<Vec<f64>>,
    trunc_scaled: Vec<Vec<DiscreteDist>>,
    trunc_over_t: Vec<Vec<DiscreteDist>>,
    raw_moment: Vec<Vec<f64>>,
    coarse_div: f64,
}

/// Geometric scale grid `{v_min, v_min r, v_min r^2, ...}` clipped to
/// `[v_min, max(m, v_min)]`, rounded to integers, deduplicated, and always
/// containing both endpoints.
pub fn v_grid(m: usize, v_min: f64, ratio: f64) -> Vec<f64> {
    let cap = (m as f64).max(v_min);
    let mut grid = vec![v_min.round()];
    let mut v = v_min;
    loop {
        v *= ratio;
        if v >= cap {
            break;
        }
        grid.push(v.round());
    }
    grid.push(cap.round());
    grid.dedup();
    grid
}

impl Relaxation {
    pub fn new(inst: &LbInstance, t: f64, p: PNorm, cfg: &SolverConfig) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "load estimate must be positive and finite, got {t}"
            )));
        }
        if !p.is_finite() {
            return Err(Error::InvalidParameter("p must be finite".into()));
        }
        let theta = cfg.alpha * t;
        let coarse_div = (4.0 * t).powf(p.value());
        if !coarse_div.is_finite() {
            return Err(Error::Overflow(format!(
                "(4 * {t})^{} overflows",
                p.value()
            )));
        }
        let m = inst.machines();
        let n = inst.jobs();
        let mut exceptional_mean = vec![vec![0.0; n]; m];
        let mut trunc_scaled = vec![Vec::with_capacity(n); m];
        let mut trunc_over_t = vec![Vec::with_capacity(n); m];
        let mut raw_moment = vec![vec![0.0; n]; m];
        for i in 0..m {
            for j in 0..n {
                let d = inst.dist(i, j);
                let (trunc, exc) = d.truncate_split(theta)?;
                exceptional_mean[i][j] = exc.expectation();
                trunc_scaled[i].push(trunc.scale(1.0 / SCALE_DOWN)?);
                trunc_over_t[i].push(trunc.scale(1.0 / t)?);
                raw_moment[i][j] = d.raw_moment(p)?;
            }
        }
        let v_min = cfg.v_min(p);
        Ok(Relaxation {
            t,
            p,
            big_c: cfg.big_c,
            v_min,
            v_grid: v_grid(m, v_min, cfg.v_grid_ratio),
            exceptional_mean,
            trunc_scaled,
            trunc_over_t,
            raw_moment,
            coarse_div,
        })
    }

    pub fn machines(&self) -> usize {
        self.exceptional_mean.len()
    }

    pub fn jobs(&self) -> usize {
        self.exceptional_mean[0].len()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn p(&self) -> PNorm {
        self.p
    }

    pub fn big_c(&self) -> f64 {
        self.big_c
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    pub fn grid(&self) -> &[f64] {
        &self.v_grid
    }

    pub fn exceptional_mean(&self, i: usize, j: usize) -> f64 {
        self.exceptional_mean[i][j]
    }

    pub fn raw_moment(&self, i: usize, j: usize) -> f64 {
        self.raw_moment[i][j]
    }

    /// `(4t)^p`, the coarse-row denominator.
    pub fn coarse_div(&self) -> f64 {
        self.coarse_div
    }

    /// Capped L-function of the scaled-down truncated part at scale
    /// `eps = t / v^{1/p}`.
    pub fn nu_hat(&self, i: usize, j: usize, v: f64) -> f64 {
        let eps = self.t / v.powf(1.0 / self.p.value());
        self.trunc_scaled[i][j]
            .capped_l_function(eps, self.p)
            .expect("eps positive by construction")
    }

    /// Effective size of the truncated part over `t` at scale `ell`.
    pub fn beta(&self, i: usize, j: usize, ell: f64) -> f64 {
        self.trunc_over_t[i][j]
            .effective_size(ell)
            .expect("ell >= 1 by construction")
    }
}

/// The starting relaxation plus its variable handles.
#[derive(Debug)]
pub struct StartingLp {
    pub lp: LinearProgram,
    pub x_ids: Vec<Vec<VarId>>,
    pub z_ids: Vec<VarId>,
}

/// Builds the starting relaxation at the load estimate of `rel`:
/// an exceptional-mass budget, one capped-nu row per (machine, grid scale)
/// folded through per-machine auxiliaries `z_i` with `sum z_i <= 3`, a
/// coarse p-moment budget, and the assignment polytope. The subset rows are
/// left to [`linf_separation`].
pub fn build_starting_lp(rel: &Relaxation) -> Result<StartingLp> {
    let m = rel.machines();
    let n = rel.jobs();
    let mut lp = LinearProgram::new();
    let mut x_ids = vec![Vec::with_capacity(n); m];
    for (i, row) in x_ids.iter_mut().enumerate() {
        for j in 0..n {
            row.push(lp.add_var(format!("x_{i}_{j}"), 0.0, 1.0)?);
        }
    }
    // z_i >= -1/v_min is implied by the v = v_min row at x = 0; the upper
    // bound 3 is slack wherever sum z_i <= 3 binds first
    let mut z_ids = Vec::with_capacity(m);
    for i in 0..m {
        z_ids.push(lp.add_var(format!("z_{i}"), -1.0 / rel.v_min(), 3.0)?);
    }

    let t2 = 2.0 * rel.t();
    let mut exceptional = Vec::new();
    let mut coarse = Vec::new();
    for i in 0..m {
        for j in 0..n {
            let em = rel.exceptional_mean(i, j) / t2;
            if em != 0.0 {
                exceptional.push((x_ids[i][j], em));
            }
            let rm = rel.raw_moment(i, j) / rel.coarse_div();
            if rm != 0.0 {
                coarse.push((x_ids[i][j], rm));
            }
        }
    }
    lp.add_constraint(exceptional, Relation::Le, 1.0)?;

    for i in 0..m {
        for &v in rel.grid() {
            let mut coeffs = Vec::with_capacity(n + 1);
            for j in 0..n {
                let c = rel.nu_hat(i, j, v) / v;
                if c != 0.0 {
                    coeffs.push((x_ids[i][j], c));
                }
            }
            coeffs.push((z_ids[i], -1.0));
            lp.add_constraint(coeffs, Relation::Le, 1.0 / v)?;
        }
    }
    lp.add_constraint(
        z_ids.iter().map(|&id| (id, 1.0)).collect(),
        Relation::Le,
        3.0,
    )?;
    lp.add_constraint(coarse, Relation::Le, 1.0)?;

    for j in 0..n {
        lp.add_constraint(
            (0..m).map(|i| (x_ids[i][j], 1.0)).collect(),
            Relation::Eq,
            1.0,
        )?;
    }
    lp.set_objective(Sense::Feasibility, Vec::new());
    Ok(StartingLp { lp, x_ids, z_ids })
}

/// A violated subset row: the `k` highest-mass machines at scale `k`.
#[derive(Debug, Clone)]
pub struct LinfCut {
    pub k: usize,
    pub machines: Vec<usize>,
    pub lhs: f64,
}

/// Separation for the effective-size subset family: for each cardinality
/// `k`, the top-`k` machines by `sum_j beta_k(trunc_ij / t) x_ij` maximize
/// the left side over all subsets of size `k`, so checking that one subset
/// is sound and complete.
pub fn linf_separation(rel: &Relaxation, x: &FractionalAssignment) -> Vec<LinfCut> {
    let m = rel.machines();
    let n = rel.jobs();
    let mut cuts = Vec::new();
    for k in 1..=m {
        let mut scores: Vec<(usize, f64)> = (0..m)
            .map(|i| {
                let s: f64 = (0..n)
                    .map(|j| rel.beta(i, j, k as f64) * x.value(i, j))
                    .sum();
                (i, s)
            })
            .collect();
        scores.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let top: Vec<(usize, f64)> = scores.into_iter().take(k).collect();
        let lhs: f64 = top.iter().map(|&(_, s)| s).sum();
        if lhs > rel.big_c() * k as f64 + SEPARATION_TOL {
            let mut machines: Vec<usize> = top.into_iter().map(|(i, _)| i).collect();
            machines.sort_unstable();
            cuts.push(LinfCut { k, machines, lhs });
        }
    }
    cuts
}

/// Largest grid scale per machine whose capped-nu mass at `x` stays within 2
/// (the mass is nondecreasing in the scale). Machines where even the
/// smallest scale fails are excluded from the set `I` and pinned at `v_min`.
pub fn compute_v_bar(rel: &Relaxation, x: &FractionalAssignment) -> (Vec<f64>, Vec<bool>) {
    let n = rel.jobs();
    let mut v_bar = Vec::with_capacity(rel.machines());
    let mut in_set = Vec::with_capacity(rel.machines());
    for i in 0..rel.machines() {
        let mass_at = |v: f64| -> f64 { (0..n).map(|j| rel.nu_hat(i, j, v) * x.value(i, j)).sum() };
        let mut chosen = None;
        for &v in rel.grid().iter().rev() {
            if mass_at(v) <= 2.0 + 1e-9 {
                chosen = Some(v);
                break;
            }
        }
        match chosen {
            Some(v) => {
                v_bar.push(v);
                in_set.push(true);
            }
            None => {
                v_bar.push(rel.v_min());
                in_set.push(false);
            }
        }
    }
    (v_bar, in_set)
}

/// Largest `ell in [m]` per machine whose effective-size mass at `x` stays
/// within `C` (nondecreasing in `ell`). `ell = 1` always qualifies for any
/// `x` satisfying the subset rows; if it does not, `x` was infeasible.
pub fn compute_l_bar(rel: &Relaxation, x: &FractionalAssignment) -> Result<Vec<usize>> {
    let m = rel.machines();
    let n = rel.jobs();
    let mut l_bar = Vec::with_capacity(m);
    for i in 0..m {
        let mass_at = |ell: usize| -> f64 {
            (0..n)
                .map(|j| rel.beta(i, j, ell as f64) * x.value(i, j))
                .sum()
        };
        if mass_at(1) > rel.big_c() + SEPARATION_TOL {
            return Err(Error::InvalidInput(format!(
                "machine {i}: even scale 1 violates the effective-size budget; \
                 the fractional input does not satisfy the subset rows"
            )));
        }
        let mut chosen = 1;
        for ell in (1..=m).rev() {
            if mass_at(ell) <= rel.big_c() + SEPARATION_TOL {
                chosen = ell;
                break;
            }
        }
        l_bar.push(chosen);
    }
    Ok(l_bar)
}

/// The reduced relaxation: one capped-nu row per machine in `I` at its
/// selected scale, one effective-size row per machine at its selected scale,
/// the exceptional and coarse budgets, and the polytope. The fractional
/// solution that produced the scales is feasible for it by construction.
pub fn build_reduced_lp(
    rel: &Relaxation,
    params: &ReducedParams,
) -> Result<(LinearProgram, Vec<Vec<VarId>>)> {
    let m = rel.machines();
    let n = rel.jobs();
    let mut lp = LinearProgram::new();
    let mut x_ids = vec![Vec::with_capacity(n); m];
    for (i, row) in x_ids.iter_mut().enumerate() {
        for j in 0..n {
            row.push(lp.add_var(format!("x_{i}_{j}"), 0.0, 1.0)?);
        }
    }

    let t2 = 2.0 * rel.t();
    let mut exceptional = Vec::new();
    let mut coarse = Vec::new();
    for i in 0..m {
        for j in 0..n {
            let em = rel.exceptional_mean(i, j) / t2;
            if em != 0.0 {
                exceptional.push((x_ids[i][j], em));
            }
            let rm = rel.raw_moment(i, j) / rel.coarse_div();
            if rm != 0.0 {
                coarse.push((x_ids[i][j], rm));
            }
        }
    }
    lp.add_constraint(exceptional, Relation::Le, 1.0)?;
    for i in 0..m {
        if params.in_set[i] {
            let mut coeffs = Vec::with_capacity(n);
            for j in 0..n {
                let c = rel.nu_hat(i, j, params.v_bar[i]);
                if c != 0.0 {
                    coeffs.push((x_ids[i][j], c));
                }
            }
            lp.add_constraint(coeffs, Relation::Le, 2.0)?;
        }
    }
    for i in 0..m {
        let mut coeffs = Vec::with_capacity(n);
        for j in 0..n {
            let c = rel.beta(i, j, params.l_bar[i] as f64);
            if c != 0.0 {
                coeffs.push((x_ids[i][j], c));
            }
        }
        lp.add_constraint(coeffs, Relation::Le, rel.big_c())?;
    }
    lp.add_constraint(coarse, Relation::Le, 1.0)?;
    for j in 0..n {
        lp.add_constraint(
            (0..m).map(|i| (x_ids[i][j], 1.0)).collect(),
            Relation::Eq,
            1.0,
        )?;
    }
    lp.set_objective(Sense::Feasibility, Vec::new());
    Ok((lp, x_ids))
}

/// Folds the reduced relaxation into one generalized-assignment instance:
/// cost `b_ij = E exc_ij / 2t + E J_ij^p / (4t)^p` with budget 2, and time
/// `a_ij = nu_hat/2 + beta/C` with budget 2 on machines in `I` (just
/// `beta/C` with budget 1 elsewhere). Capping keeps `max_j a_ij <= A_i`.
pub fn merge_to_gap(rel: &Relaxation, params: &ReducedParams) -> Result<GapInstance> {
    let m = rel.machines();
    let n = rel.jobs();
    let t2 = 2.0 * rel.t();
    let mut a = vec![vec![0.0; n]; m];
    let mut b = vec![vec![0.0; n]; m];
    let mut budgets = vec![0.0; m];
    for i in 0..m {
        budgets[i] = if params.in_set[i] { 2.0 } else { 1.0 };
        for j in 0..n {
            b[i][j] = rel.exceptional_mean(i, j) / t2 + rel.raw_moment(i, j) / rel.coarse_div();
            let beta_term = rel.beta(i, j, params.l_bar[i] as f64) / rel.big_c();
            a[i][j] = if params.in_set[i] {
                0.5 * rel.nu_hat(i, j, params.v_bar[i]) + beta_term
            } else {
                beta_term
            };
            debug_assert!(a[i][j] <= budgets[i] + 1e-9);
        }
    }
    GapInstance::new(a, b, budgets, 2.0)
}

/// Turns a [`LinfCut`] into a constraint over the given variable handles.
pub fn cut_to_constraint(rel: &Relaxation, cut: &LinfCut, x_ids: &[Vec<VarId>]) -> Constraint {
    Constraint {
        coeffs: cut
            .machines
            .iter()
            .flat_map(|&i| {
                (0..rel.jobs()).map(move |j| (x_ids[i][j], rel.beta(i, j, cut.k as f64)))
            })
            .collect(),
        relation: Relation::Le,
        rhs: rel.big_c() * cut.k as f64,
    }
}
