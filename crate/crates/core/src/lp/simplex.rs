//! Two-phase bounded-variable primal simplex.
//!
//! Phase 1 starts from an all-artificial basis and minimizes the artificial
//! mass; its duals double as the infeasibility certificate. Phase 2 runs the
//! real objective. Dantzig pricing switches to Bland's rule after a stall,
//! which guarantees termination. The basis is refactorized from scratch at
//! every iteration, trading speed for numerical transparency at desk scale.

use super::{Error, LinearProgram, LpSolution, LpStatus, Relation, Result, Sense, SolveOptions};

const PIVOT_EPS: f64 = 1e-9;
const RATIO_TIE: f64 = 1e-10;
const SINGULAR_EPS: f64 = 1e-12;
const STALL_EPS: f64 = 1e-12;

/// Dense LU with partial pivoting (LAPACK-style pivot list).
struct DenseLu {
    n: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    fn factorize(mut a: Vec<f64>, n: usize) -> Result<DenseLu> {
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let mut best = k;
            let mut best_abs = a[k * n + k].abs();
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > best_abs {
                    best = i;
                    best_abs = v;
                }
            }
            if best_abs <= SINGULAR_EPS {
                return Err(Error::Numerical("singular basis matrix".into()));
            }
            piv[k] = best;
            if best != k {
                for j in 0..n {
                    a.swap(k * n + j, best * n + j);
                }
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let factor = a[i * n + k] / pivot;
                a[i * n + k] = factor;
                if factor != 0.0 {
                    for j in k + 1..n {
                        a[i * n + j] -= factor * a[k * n + j];
                    }
                }
            }
        }
        Ok(DenseLu { n, a, piv })
    }

    /// Solves `B x = b`.
    fn solve(&self, mut b: Vec<f64>) -> Vec<f64> {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.piv[k]);
        }
        for i in 1..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.a[i * n + j] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.a[i * n + j] * b[j];
            }
            b[i] = s / self.a[i * n + i];
        }
        b
    }

    /// Solves `B^T y = c`.
    fn solve_transpose(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = vec![0.0; n];
        // U^T z = c (forward, U^T lower-triangular with real diagonal)
        for i in 0..n {
            let mut s = c[i];
            for j in 0..i {
                s -= self.a[j * n + i] * z[j];
            }
            z[i] = s / self.a[i * n + i];
        }
        // L^T w = z (backward, unit diagonal)
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in i + 1..n {
                s -= self.a[j * n + i] * z[j];
            }
            z[i] = s;
        }
        // y = P^{-1} w: undo the row swaps in reverse order
        for k in (0..n).rev() {
            z.swap(k, self.piv[k]);
        }
        z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    FreeZero,
}

/// The normalized equality form: structural columns, one slack per row
/// (bounded by the relation), then one artificial per row.
struct Tableau {
    nrows: usize,
    nstruct: usize,
    /// structural + slack column count; artificials start here
    ncore: usize,
    ncols: usize,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    row_scale: Vec<f64>,
    art_sign: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Tableau {
    fn coeff(&self, r: usize, j: usize) -> f64 {
        if j < self.ncore {
            self.rows[r][j]
        } else if j - self.ncore == r {
            self.art_sign[r]
        } else {
            0.0
        }
    }
}

fn build_tableau(lp: &LinearProgram) -> Tableau {
    let nstruct = lp.num_vars();
    let nrows = lp.num_constraints();
    let ncore = nstruct + nrows;
    let ncols = ncore + nrows;
    let mut rows = vec![vec![0.0; ncore]; nrows];
    let mut rhs = vec![0.0; nrows];
    let mut row_scale = vec![1.0; nrows];
    let mut lower = Vec::with_capacity(ncols);
    let mut upper = Vec::with_capacity(ncols);
    for j in 0..nstruct {
        let (lo, up) = lp.var_bounds(super::VarId(j));
        lower.push(lo);
        upper.push(up);
    }
    for (r, con) in lp.constraints().iter().enumerate() {
        let mut scale: f64 = 0.0;
        for &(_, c) in &con.coeffs {
            scale = scale.max(c.abs());
        }
        if scale == 0.0 {
            scale = 1.0;
        }
        row_scale[r] = scale;
        for &(id, c) in &con.coeffs {
            rows[r][id.0] += c / scale;
        }
        rows[r][nstruct + r] = 1.0;
        rhs[r] = con.rhs / scale;
        let (lo, up) = match con.relation {
            Relation::Le => (0.0, f64::INFINITY),
            Relation::Ge => (f64::NEG_INFINITY, 0.0),
            Relation::Eq => (0.0, 0.0),
        };
        lower.push(lo);
        upper.push(up);
    }
    // artificial columns
    for _ in 0..nrows {
        lower.push(0.0);
        upper.push(f64::INFINITY);
    }
    Tableau {
        nrows,
        nstruct,
        ncore,
        ncols,
        rows,
        rhs,
        row_scale,
        art_sign: vec![1.0; nrows],
        lower,
        upper,
    }
}

struct Worker<'a> {
    t: &'a mut Tableau,
    opts: &'a SolveOptions,
    c: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    x: Vec<f64>,
    duals: Vec<f64>,
    pivots: usize,
    bland: bool,
    stall: usize,
    last_obj: f64,
}

enum StepResult {
    Pivoted,
    Optimal,
    Unbounded,
}

impl<'a> Worker<'a> {
    fn objective(&self) -> f64 {
        self.c
            .iter()
            .zip(&self.x)
            .map(|(&c, &x)| if c != 0.0 { c * x } else { 0.0 })
            .sum()
    }

    /// One simplex iteration: refactorize, price, ratio test, pivot.
    fn step(&mut self) -> Result<StepResult> {
        let t = &*self.t;
        let n = t.nrows;
        // basis matrix, column-major into row-major n x n
        let mut bmat = vec![0.0; n * n];
        for (k, &j) in self.basis.iter().enumerate() {
            for r in 0..n {
                bmat[r * n + k] = t.coeff(r, j);
            }
        }
        let lu = DenseLu::factorize(bmat, n)?;

        // refresh basic values: x_B = B^{-1} (rhs - N x_N)
        let mut adj = t.rhs.clone();
        for j in 0..t.ncols {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                for r in 0..n {
                    let a = t.coeff(r, j);
                    if a != 0.0 {
                        adj[r] -= a * self.x[j];
                    }
                }
            }
        }
        let xb = lu.solve(adj);
        for (k, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[k];
        }

        // duals and pricing
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.c[j]).collect();
        let pi = lu.solve_transpose(&cb);
        self.duals = pi.clone();

        let mut entering: Option<(usize, f64, f64)> = None; // (col, direction, score)
        for j in 0..t.ncols {
            if self.state[j] == VarState::Basic || t.lower[j] == t.upper[j] {
                continue;
            }
            let mut d = self.c[j];
            for r in 0..n {
                let a = t.coeff(r, j);
                if a != 0.0 {
                    d -= pi[r] * a;
                }
            }
            let dir = match self.state[j] {
                VarState::AtLower if d < -self.opts.opt_tol => 1.0,
                VarState::AtUpper if d > self.opts.opt_tol => -1.0,
                VarState::FreeZero if d.abs() > self.opts.opt_tol => -d.signum(),
                _ => continue,
            };
            if self.bland {
                entering = Some((j, dir, d.abs()));
                break;
            }
            match entering {
                Some((_, _, score)) if score >= d.abs() => {}
                _ => entering = Some((j, dir, d.abs())),
            }
        }
        let Some((e, dir, _)) = entering else {
            return Ok(StepResult::Optimal);
        };

        // ratio test: x_B changes by -t * dir * w
        let col_e: Vec<f64> = (0..n).map(|r| t.coeff(r, e)).collect();
        let w = lu.solve(col_e);
        let own_span = t.upper[e] - t.lower[e];
        let mut t_max = own_span; // may be +inf
        let mut leaving: Option<(usize, VarState)> = None;
        for r in 0..n {
            let g = dir * w[r];
            let bj = self.basis[r];
            if g > PIVOT_EPS {
                let slack = (self.x[bj] - t.lower[bj]).max(0.0);
                let ratio = slack / g;
                if ratio < t_max - RATIO_TIE
                    || (ratio < t_max + RATIO_TIE
                        && leaving.is_some_and(|(lr, _)| bj < self.basis[lr]))
                {
                    t_max = ratio.min(t_max);
                    leaving = Some((r, VarState::AtLower));
                }
            } else if g < -PIVOT_EPS {
                let slack = (t.upper[bj] - self.x[bj]).max(0.0);
                let ratio = slack / (-g);
                if ratio < t_max - RATIO_TIE
                    || (ratio < t_max + RATIO_TIE
                        && leaving.is_some_and(|(lr, _)| bj < self.basis[lr]))
                {
                    t_max = ratio.min(t_max);
                    leaving = Some((r, VarState::AtUpper));
                }
            }
        }
        if leaving.is_none() && !own_span.is_finite() {
            return Ok(StepResult::Unbounded);
        }

        let step = t_max.max(0.0);
        self.x[e] += dir * step;
        for r in 0..n {
            let bj = self.basis[r];
            self.x[bj] -= dir * step * w[r];
        }
        match leaving {
            None => {
                // bound flip: the entering variable crossed its own span
                self.state[e] = if dir > 0.0 {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                };
                self.x[e] = if dir > 0.0 { t.upper[e] } else { t.lower[e] };
            }
            Some((r, to)) => {
                let out = self.basis[r];
                self.state[out] = to;
                self.x[out] = match to {
                    VarState::AtLower => t.lower[out],
                    VarState::AtUpper => t.upper[out],
                    _ => unreachable!(),
                };
                self.basis[r] = e;
                self.state[e] = VarState::Basic;
            }
        }

        self.pivots += 1;
        let obj = self.objective();
        if self.last_obj - obj > STALL_EPS * (1.0 + self.last_obj.abs()) {
            self.stall = 0;
        } else {
            self.stall += 1;
            if self.stall > 5 * (t.nrows + t.ncols) {
                self.bland = true;
            }
        }
        self.last_obj = obj;
        Ok(StepResult::Pivoted)
    }

    /// Runs to optimality / unboundedness / pivot cap.
    fn run(&mut self) -> Result<LpStatus> {
        loop {
            if self.pivots >= self.opts.pivot_cap {
                return Ok(LpStatus::IterationLimit);
            }
            match self.step()? {
                StepResult::Optimal => return Ok(LpStatus::Optimal),
                StepResult::Unbounded => return Ok(LpStatus::Unbounded),
                StepResult::Pivoted => {}
            }
        }
    }
}

pub(super) fn solve(lp: &LinearProgram, opts: &SolveOptions) -> Result<LpSolution> {
    let mut tableau = build_tableau(lp);
    let nrows = tableau.nrows;
    let nstruct = tableau.nstruct;
    let ncore = tableau.ncore;
    let ncols = tableau.ncols;

    // start: non-basic columns at the finite bound nearest zero
    let mut x = vec![0.0; ncols];
    let mut state = vec![VarState::FreeZero; ncols];
    for j in 0..ncore {
        let (lo, up) = (tableau.lower[j], tableau.upper[j]);
        if lo.is_finite() && (lo >= 0.0 || !up.is_finite() || lo.abs() <= up.abs()) {
            x[j] = lo;
            state[j] = VarState::AtLower;
        } else if up.is_finite() {
            x[j] = up;
            state[j] = VarState::AtUpper;
        } else {
            x[j] = 0.0;
            state[j] = VarState::FreeZero;
        }
    }
    // artificial basis absorbing the residual of each row
    let mut basis = Vec::with_capacity(nrows);
    for r in 0..nrows {
        let mut residual = tableau.rhs[r];
        for j in 0..ncore {
            let a = tableau.rows[r][j];
            if a != 0.0 {
                residual -= a * x[j];
            }
        }
        tableau.art_sign[r] = if residual >= 0.0 { 1.0 } else { -1.0 };
        let aj = ncore + r;
        x[aj] = residual.abs();
        state[aj] = VarState::Basic;
        basis.push(aj);
    }

    // phase 1: minimize total artificial mass
    let mut c = vec![0.0; ncols];
    for j in ncore..ncols {
        c[j] = 1.0;
    }
    let mut worker = Worker {
        t: &mut tableau,
        opts,
        c,
        basis,
        state,
        x,
        duals: vec![0.0; nrows],
        pivots: 0,
        bland: false,
        stall: 0,
        last_obj: f64::INFINITY,
    };
    worker.last_obj = worker.objective();
    let phase1 = worker.run()?;
    if phase1 == LpStatus::IterationLimit {
        return Ok(LpSolution {
            status: LpStatus::IterationLimit,
            values: worker.x[..nstruct].to_vec(),
            objective_value: f64::NAN,
            duals: vec![0.0; nrows],
            infeasibility_certificate: None,
        });
    }
    if phase1 == LpStatus::Unbounded {
        // the artificial mass is bounded below by zero, so this can only be
        // numerical breakdown
        return Err(Error::Numerical("phase 1 reported an unbounded ray".into()));
    }
    let art_mass: f64 = worker.x[ncore..ncols].iter().sum();
    if art_mass > opts.feas_tol {
        // infeasible: negated phase-1 duals, rescaled to the original rows,
        // combine the constraints into a contradiction
        let certificate: Vec<f64> = worker
            .duals
            .iter()
            .zip(&worker.t.row_scale)
            .map(|(&pi, &s)| -pi / s)
            .collect();
        debug_assert!(
            super::infeasibility_gap(lp, &certificate) > 0.0,
            "phase-1 certificate failed its audit"
        );
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            values: worker.x[..nstruct].to_vec(),
            objective_value: f64::NAN,
            duals: vec![0.0; nrows],
            infeasibility_certificate: Some(certificate),
        });
    }

    // pin artificials to zero
    for j in ncore..ncols {
        worker.t.upper[j] = 0.0;
        worker.x[j] = 0.0;
        worker.c[j] = 0.0;
        if worker.state[j] != VarState::Basic {
            worker.state[j] = VarState::AtLower;
        }
    }

    let sense = lp.sense_or_feasibility();
    let mut status = LpStatus::Optimal;
    if sense != Sense::Feasibility && !lp.objective.is_empty() {
        let sign = match sense {
            Sense::Minimize | Sense::Feasibility => 1.0,
            Sense::Maximize => -1.0,
        };
        for j in 0..nstruct {
            worker.c[j] = 0.0;
        }
        for &(id, coef) in &lp.objective {
            worker.c[id.0] += sign * coef;
        }
        worker.bland = false;
        worker.stall = 0;
        worker.last_obj = worker.objective();
        status = worker.run()?;
    } else {
        // make the reported duals reflect the trivial objective
        worker.duals = vec![0.0; nrows];
    }

    let values = worker.x[..nstruct].to_vec();
    if status == LpStatus::Optimal {
        let violation = lp.max_violation(&values);
        if violation > opts.feas_tol {
            return Err(Error::Numerical(format!(
                "optimal basis violates constraints by {violation}"
            )));
        }
    }
    let duals: Vec<f64> = worker
        .duals
        .iter()
        .zip(&worker.t.row_scale)
        .map(|(&pi, &s)| pi / s)
        .collect();
    let objective_value = if status == LpStatus::Optimal {
        lp.objective_at(&values)
    } else {
        f64::NAN
    };
    let solution = LpSolution {
        status,
        values,
        objective_value,
        duals,
        infeasibility_certificate: None,
    };
    #[cfg(debug_assertions)]
    if solution.status == LpStatus::Optimal {
        let audit = super::dual_audit_gap(lp, &solution);
        debug_assert!(audit <= 1e-6, "dual-feasibility audit gap {audit}");
    }
    Ok(solution)
}
