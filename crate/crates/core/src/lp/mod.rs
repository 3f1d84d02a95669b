//! A small linear-programming engine: bounded-variable primal simplex with
//! a Bland's-rule fallback, plus a cutting-plane loop for constraint
//! families handled by separation oracles.
//!
//! Built for auditability at desk scale rather than speed: the basis is
//! refactorized every iteration, infeasible solves carry a certificate, and
//! optimal solves are re-checked against every constraint before they are
//! returned.

mod simplex;

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Handle for a variable of a [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Constraint relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// Objective sense. `Feasibility` solves for any feasible point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
    Feasibility,
}

/// A linear constraint `sum coeffs . x  (relation)  rhs`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
struct VarDef {
    name: String,
    lower: f64,
    upper: f64,
}

/// Solve status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The simplex hit its pivot cap.
    IterationLimit,
    /// The cutting-plane loop hit its round cap.
    RoundLimit,
}

/// Result of a solve. `values` is indexed by [`VarId`].
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective_value: f64,
    /// Per-constraint dual multipliers of the final basis (optimal solves).
    pub duals: Vec<f64>,
    /// For infeasible solves: multipliers combining the constraints into a
    /// contradiction over the variable bounds; see [`infeasibility_gap`].
    pub infeasibility_certificate: Option<Vec<f64>>,
}

impl LpSolution {
    pub fn value(&self, id: VarId) -> f64 {
        self.values[id.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Knobs for the simplex; the defaults match the crate-wide tolerances.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Hard cap on simplex pivots before `IterationLimit`.
    pub pivot_cap: usize,
    /// Feasibility tolerance, absolute on rows normalized by their largest
    /// coefficient magnitude.
    pub feas_tol: f64,
    /// Reduced-cost tolerance for optimality.
    pub opt_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            pivot_cap: 1_000_000,
            feas_tol: 1e-7,
            opt_tol: 1e-9,
        }
    }
}

/// A linear program over bounded variables.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    vars: Vec<VarDef>,
    constraints: Vec<Constraint>,
    objective: Vec<(VarId, f64)>,
    sense: Option<Sense>,
}

impl LinearProgram {
    pub fn new() -> Self {
        LinearProgram::default()
    }

    /// Adds a variable with bounds `lower <= x <= upper` (infinite bounds
    /// allowed).
    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<VarId> {
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(Error::InvalidParameter(format!(
                "variable bounds must satisfy lower <= upper, got [{lower}, {upper}]"
            )));
        }
        self.vars.push(VarDef {
            name: name.into(),
            lower,
            upper,
        });
        Ok(VarId(self.vars.len() - 1))
    }

    /// Adds `coeffs . x (relation) rhs`; coefficients and rhs must be finite.
    pub fn add_constraint(
        &mut self,
        coeffs: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> Result<usize> {
        if !rhs.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "constraint rhs must be finite, got {rhs}"
            )));
        }
        for &(id, c) in &coeffs {
            if id.0 >= self.vars.len() {
                return Err(Error::InvalidParameter(format!(
                    "constraint references unknown variable {}",
                    id.0
                )));
            }
            if !c.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "constraint coefficient must be finite, got {c}"
                )));
            }
        }
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        Ok(self.constraints.len() - 1)
    }

    pub fn set_objective(&mut self, sense: Sense, coeffs: Vec<(VarId, f64)>) {
        self.sense = Some(sense);
        self.objective = coeffs;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn var_name(&self, id: VarId) -> &str {
        &self.vars[id.0].name
    }

    pub fn var_bounds(&self, id: VarId) -> (f64, f64) {
        (self.vars[id.0].lower, self.vars[id.0].upper)
    }

    fn sense_or_feasibility(&self) -> Sense {
        self.sense.unwrap_or(Sense::Feasibility)
    }

    /// Largest constraint violation of `values`, measured on rows normalized
    /// by their largest coefficient magnitude.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for con in &self.constraints {
            let mut lhs = 0.0;
            let mut scale: f64 = 0.0;
            for &(id, c) in &con.coeffs {
                lhs += c * values[id.0];
                scale = scale.max(c.abs());
            }
            if scale == 0.0 {
                scale = 1.0;
            }
            let gap = match con.relation {
                Relation::Le => lhs - con.rhs,
                Relation::Ge => con.rhs - lhs,
                Relation::Eq => (lhs - con.rhs).abs(),
            };
            worst = worst.max(gap / scale);
        }
        for (j, var) in self.vars.iter().enumerate() {
            worst = worst.max(var.lower - values[j]);
            worst = worst.max(values[j] - var.upper);
        }
        worst
    }

    /// Objective value of `values` under the stated sense.
    pub fn objective_at(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(id, c)| c * values[id.0]).sum()
    }

    /// Solves with default options.
    pub fn solve(&self) -> Result<LpSolution> {
        self.solve_with_options(&SolveOptions::default())
    }

    /// Two-phase bounded-variable primal simplex.
    pub fn solve_with_options(&self, opts: &SolveOptions) -> Result<LpSolution> {
        simplex::solve(self, opts)
    }
}

/// Margin by which multipliers `y` (one per constraint) prove the program
/// infeasible over its variable bounds: a positive return value means the
/// aggregated constraint `sum_r y_r (a_r . x)` cannot reach `sum_r y_r b_r`
/// for any `x` within bounds, i.e. a non-negative combination of the
/// constraints reads `0 >= positive`.
pub fn infeasibility_gap(lp: &LinearProgram, y: &[f64]) -> f64 {
    let sign_tol = 1e-9;
    let mut agg = vec![0.0; lp.num_vars()];
    let mut yb = 0.0;
    for (r, con) in lp.constraints.iter().enumerate() {
        // multiplier signs must respect the relation directions
        match con.relation {
            Relation::Le if y[r] < -sign_tol => return f64::NEG_INFINITY,
            Relation::Ge if y[r] > sign_tol => return f64::NEG_INFINITY,
            _ => {}
        }
        for &(id, c) in &con.coeffs {
            agg[id.0] += y[r] * c;
        }
        yb += y[r] * con.rhs;
    }
    let mut min_lhs = 0.0;
    for (j, var) in lp.vars.iter().enumerate() {
        let g = agg[j];
        if g.abs() <= sign_tol {
            continue;
        }
        let contrib = if g > 0.0 {
            g * var.lower
        } else {
            g * var.upper
        };
        if !contrib.is_finite() {
            return f64::NEG_INFINITY;
        }
        min_lhs += contrib;
    }
    min_lhs - yb
}

/// Largest dual-feasibility / complementary-slackness discrepancy of an
/// optimal solution, re-derived from the returned duals: multiplier signs
/// must match the relations, nonzero multipliers demand tight rows, and the
/// reduced cost of each variable must point away from its active bound.
pub fn dual_audit_gap(lp: &LinearProgram, sol: &LpSolution) -> f64 {
    let sense = lp.sense_or_feasibility();
    let sign = match sense {
        Sense::Minimize | Sense::Feasibility => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut c = vec![0.0; lp.num_vars()];
    for &(id, coef) in &lp.objective {
        c[id.0] += sign * coef;
    }
    // the stored duals live in the internal minimization convention, which
    // the sign flip above already applies to the objective
    let mut gap: f64 = 0.0;
    let mut reduced = c;
    for (r, con) in lp.constraints.iter().enumerate() {
        let y = sol.duals[r];
        let mut lhs = 0.0;
        let mut scale: f64 = 1.0;
        for &(id, coef) in &con.coeffs {
            lhs += coef * sol.values[id.0];
            reduced[id.0] -= y * coef;
            scale = scale.max(coef.abs());
        }
        // sign conditions for a minimization over `a x (rel) b`
        match con.relation {
            Relation::Le => gap = gap.max(y * scale),
            Relation::Ge => gap = gap.max(-y * scale),
            Relation::Eq => {}
        }
        // complementary slackness: nonzero multiplier needs a tight row
        if y.abs() > 1e-9 {
            gap = gap.max((lhs - con.rhs).abs() / scale);
        }
    }
    for (j, var) in lp.vars.iter().enumerate() {
        let x = sol.values[j];
        let d = reduced[j];
        let at_lower = x - var.lower <= 1e-6;
        let at_upper = var.upper - x <= 1e-6;
        if at_lower && !at_upper {
            gap = gap.max(-d);
        } else if at_upper && !at_lower {
            gap = gap.max(d);
        } else if !at_lower && !at_upper {
            gap = gap.max(d.abs());
        }
    }
    gap
}

/// Outcome of the cutting-plane loop.
#[derive(Debug, Clone)]
pub struct SeparationOutcome {
    pub solution: LpSolution,
    pub rounds: usize,
    pub constraints_added: usize,
}

/// Solves `lp`, repeatedly asking `oracle` for constraints violated by the
/// current solution and re-solving with them added, until the oracle returns
/// none or `max_rounds` is hit (status [`LpStatus::RoundLimit`], distinct
/// from infeasibility). Every added constraint stays recorded in `lp`.
pub fn solve_with_separation<F>(
    lp: &mut LinearProgram,
    mut oracle: F,
    max_rounds: usize,
) -> Result<SeparationOutcome>
where
    F: FnMut(&LpSolution) -> Vec<Constraint>,
{
    if max_rounds == 0 {
        return Err(Error::InvalidParameter(
            "max_rounds must be positive".into(),
        ));
    }
    let mut added = 0;
    let mut last: Option<LpSolution> = None;
    for round in 1..=max_rounds {
        let sol = lp.solve()?;
        if sol.status != LpStatus::Optimal {
            return Ok(SeparationOutcome {
                solution: sol,
                rounds: round,
                constraints_added: added,
            });
        }
        let cuts = oracle(&sol);
        if cuts.is_empty() {
            return Ok(SeparationOutcome {
                solution: sol,
                rounds: round,
                constraints_added: added,
            });
        }
        for cut in cuts {
            lp.add_constraint(cut.coeffs, cut.relation, cut.rhs)?;
            added += 1;
        }
        last = Some(sol);
    }
    let mut solution = last.expect("at least one round ran");
    solution.status = LpStatus::RoundLimit;
    Ok(SeparationOutcome {
        solution,
        rounds: max_rounds,
        constraints_added: added,
    })
}

/// Variable values keyed by name, for reports and debugging dumps.
pub fn named_values(lp: &LinearProgram, sol: &LpSolution) -> BTreeMap<String, f64> {
    lp.vars
        .iter()
        .enumerate()
        .map(|(j, v)| (v.name.clone(), sol.values[j]))
        .collect()
}

/// Human-readable equation dump of the program, for debugging.
pub fn dump_lp(lp: &LinearProgram) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    match lp.sense_or_feasibility() {
        Sense::Minimize => out.push_str("minimize"),
        Sense::Maximize => out.push_str("maximize"),
        Sense::Feasibility => out.push_str("find feasible"),
    }
    out.push('\n');
    if !lp.objective.is_empty() {
        out.push_str("  ");
        for (k, &(id, c)) in lp.objective.iter().enumerate() {
            if k > 0 {
                out.push_str(" + ");
            }
            let _ = write!(out, "{c} {}", lp.vars[id.0].name);
        }
        out.push('\n');
    }
    out.push_str("subject to\n");
    for con in &lp.constraints {
        out.push_str("  ");
        for (k, &(id, c)) in con.coeffs.iter().enumerate() {
            if k > 0 {
                out.push_str(" + ");
            }
            let _ = write!(out, "{c} {}", lp.vars[id.0].name);
        }
        let rel = match con.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        let _ = writeln!(out, " {rel} {}", con.rhs);
    }
    out.push_str("bounds\n");
    for v in &lp.vars {
        let _ = writeln!(out, "  {} <= {} <= {}", v.lower, v.name, v.upper);
    }
    out
}

#[cfg(test)]
mod tests;
