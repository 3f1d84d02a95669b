//! Generalized-assignment rounding.
//!
//! [`round_st`] turns a fractional assignment that respects per-machine time
//! budgets and a global cost budget into an integral one, keeping the cost
//! budget exactly and each time budget up to one extra job: jobs are poured
//! into unit slots per machine in nonincreasing processing-time order, and an
//! exact min-cost matching picks one job per slot.

use crate::balance::{FractionalAssignment, IntegralAssignment};
use crate::error::{Error, Result};

const DUST_TOL: f64 = 1e-12;
const MASS_TOL: f64 = 1e-9;
const BUDGET_TOL: f64 = 1e-7;

/// A feasibility-style generalized assignment instance: processing times
/// `a`, costs `b`, per-machine budgets `A`, global cost budget `B`.
#[derive(Debug, Clone)]
pub struct GapInstance {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub machine_budgets: Vec<f64>,
    pub cost_budget: f64,
}

impl GapInstance {
    pub fn new(
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        machine_budgets: Vec<f64>,
        cost_budget: f64,
    ) -> Result<Self> {
        let m = a.len();
        if m == 0 || machine_budgets.len() != m || b.len() != m {
            return Err(Error::InvalidInput(
                "times, costs and budgets must cover the same machines".into(),
            ));
        }
        let n = a[0].len();
        for row in a.iter().chain(b.iter()) {
            if row.len() != n {
                return Err(Error::InvalidInput("ragged matrix".into()));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidInput(
                    "times and costs must be finite and non-negative".into(),
                ));
            }
        }
        if machine_budgets.iter().any(|v| !v.is_finite() || *v < 0.0)
            || !cost_budget.is_finite()
            || cost_budget < 0.0
        {
            return Err(Error::InvalidInput(
                "budgets must be finite and non-negative".into(),
            ));
        }
        Ok(GapInstance {
            a,
            b,
            machine_budgets,
            cost_budget,
        })
    }

    pub fn machines(&self) -> usize {
        self.a.len()
    }

    pub fn jobs(&self) -> usize {
        self.a.first().map(|r| r.len()).unwrap_or(0)
    }

    pub fn cost_of(&self, x: &FractionalAssignment) -> f64 {
        let mut total = 0.0;
        for (i, row) in self.b.iter().enumerate() {
            for (j, &bij) in row.iter().enumerate() {
                total += bij * x.value(i, j);
            }
        }
        total
    }

    pub fn load_of(&self, i: usize, x: &FractionalAssignment) -> f64 {
        self.a[i]
            .iter()
            .enumerate()
            .map(|(j, &aij)| aij * x.value(i, j))
            .sum()
    }
}

/// One edge of the slot/job bipartite graph carrying poured mass.
#[derive(Debug, Clone, Copy)]
struct SlotEdge {
    slot: usize,
    job: usize,
    fraction: f64,
    cost: f64,
}

/// Exact minimum-cost matching that saturates every job, as successive
/// shortest augmenting paths (Bellman-Ford) on the residual graph.
///
/// `edges` lists admissible (slot, job) pairs; `n_slots` slots each hold at
/// most one job. Errors if some job cannot be matched.
pub fn min_cost_perfect_matching(
    n_slots: usize,
    n_jobs: usize,
    edges: &[(usize, usize, f64)],
) -> Result<Vec<usize>> {
    // nodes: 0 = source, 1..=n_jobs jobs, then slots, last = sink
    let jobs_base = 1;
    let slots_base = jobs_base + n_jobs;
    let sink = slots_base + n_slots;
    let n_nodes = sink + 1;

    #[derive(Clone)]
    struct Arc {
        to: usize,
        cap: i32,
        cost: f64,
        rev: usize,
    }
    let mut graph: Vec<Vec<Arc>> = vec![Vec::new(); n_nodes];
    let add_arc = |graph: &mut Vec<Vec<Arc>>, u: usize, v: usize, cap: i32, cost: f64| {
        let ru = graph[v].len();
        let rv = graph[u].len();
        graph[u].push(Arc {
            to: v,
            cap,
            cost,
            rev: ru,
        });
        graph[v].push(Arc {
            to: u,
            cap: 0,
            cost: -cost,
            rev: rv,
        });
    };
    for j in 0..n_jobs {
        add_arc(&mut graph, 0, jobs_base + j, 1, 0.0);
    }
    for &(slot, job, cost) in edges {
        if slot >= n_slots || job >= n_jobs {
            return Err(Error::InvalidInput("edge endpoint out of range".into()));
        }
        add_arc(&mut graph, jobs_base + job, slots_base + slot, 1, cost);
    }
    for s in 0..n_slots {
        add_arc(&mut graph, slots_base + s, sink, 1, 0.0);
    }

    let mut matched = 0;
    while matched < n_jobs {
        // Bellman-Ford shortest path in the residual graph
        let mut dist = vec![f64::INFINITY; n_nodes];
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n_nodes];
        dist[0] = 0.0;
        for _ in 0..n_nodes {
            let mut changed = false;
            for u in 0..n_nodes {
                if !dist[u].is_finite() {
                    continue;
                }
                for (k, arc) in graph[u].iter().enumerate() {
                    if arc.cap > 0 && dist[u] + arc.cost < dist[arc.to] - 1e-15 {
                        dist[arc.to] = dist[u] + arc.cost;
                        parent[arc.to] = Some((u, k));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if !dist[sink].is_finite() {
            return Err(Error::MatchingInfeasible(format!(
                "only {matched} of {n_jobs} jobs can be matched"
            )));
        }
        // augment one unit along the path
        let mut v = sink;
        while v != 0 {
            let (u, k) = parent[v].expect("path to source");
            let rev = graph[u][k].rev;
            graph[u][k].cap -= 1;
            graph[v][rev].cap += 1;
            v = u;
        }
        matched += 1;
    }

    let mut assignment = vec![usize::MAX; n_jobs];
    for j in 0..n_jobs {
        for arc in &graph[jobs_base + j] {
            if arc.to >= slots_base && arc.to < sink && arc.cap == 0 {
                assignment[j] = arc.to - slots_base;
            }
        }
        if assignment[j] == usize::MAX {
            return Err(Error::MatchingInfeasible(format!("job {j} left unmatched")));
        }
    }
    Ok(assignment)
}

/// Slot construction: machine of each slot plus the poured (slot, job, cost)
/// edges. Kept separate from the matching so both can be tested.
fn pour_slots(gap: &GapInstance, x: &FractionalAssignment) -> (Vec<usize>, Vec<SlotEdge>) {
    let m = gap.machines();
    let n = gap.jobs();
    let mut slot_machine = Vec::new();
    let mut edges = Vec::new();

    // drop numeric dust, then renormalize each job's remaining mass to one
    let mut frac = vec![vec![0.0; n]; m];
    for j in 0..n {
        let mut total = 0.0;
        for i in 0..m {
            let v = x.value(i, j);
            if v > DUST_TOL {
                frac[i][j] = v;
                total += v;
            }
        }
        for i in 0..m {
            frac[i][j] /= total;
        }
    }

    for i in 0..m {
        // jobs with positive mass, by processing time nonincreasing, ties by index
        let mut jobs: Vec<usize> = (0..n).filter(|&j| frac[i][j] > 0.0).collect();
        jobs.sort_by(|&ja, &jb| {
            gap.a[i][jb]
                .partial_cmp(&gap.a[i][ja])
                .unwrap()
                .then(ja.cmp(&jb))
        });
        let total: f64 = jobs.iter().map(|&j| frac[i][j]).sum();
        let n_slots = (total - 1e-9).ceil().max(1.0) as usize;
        let base = slot_machine.len();
        if jobs.is_empty() {
            continue;
        }
        for _ in 0..n_slots {
            slot_machine.push(i);
        }
        let mut slot = 0usize;
        let mut room = 1.0f64;
        for &j in &jobs {
            let mut remain = frac[i][j];
            while remain > DUST_TOL {
                let poured = remain.min(room);
                if poured > DUST_TOL {
                    edges.push(SlotEdge {
                        slot: base + slot,
                        job: j,
                        fraction: poured,
                        cost: gap.b[i][j],
                    });
                }
                remain -= poured;
                room -= poured;
                if room <= DUST_TOL && slot + 1 < n_slots {
                    slot += 1;
                    room = 1.0;
                } else if room <= DUST_TOL {
                    // last slot absorbs terminal rounding dust
                    room = DUST_TOL;
                }
            }
        }
    }
    (slot_machine, edges)
}

/// Shmoys-Tardos rounding of `x` against `gap`.
///
/// Requires `x` in the assignment polytope with cost within the budget.
/// The result assigns every job once, its cost is at most the fractional
/// cost (hence at most `B`), and each machine whose fractional load is
/// within `A_i` ends within `A_i + max_j a_ij`.
pub fn round_st(gap: &GapInstance, x: &FractionalAssignment) -> Result<IntegralAssignment> {
    if x.machines() != gap.machines() || x.jobs() != gap.jobs() {
        return Err(Error::InvalidInput("assignment shape mismatch".into()));
    }
    let frac_cost = gap.cost_of(x);
    if frac_cost > gap.cost_budget + BUDGET_TOL {
        return Err(Error::InvalidInput(format!(
            "fractional cost {frac_cost} exceeds budget {}",
            gap.cost_budget
        )));
    }
    let (slot_machine, edges) = pour_slots(gap, x);
    let n = gap.jobs();
    debug_assert!(pour_conservation_error(n, slot_machine.len(), &edges) <= MASS_TOL);

    let edge_list: Vec<(usize, usize, f64)> =
        edges.iter().map(|e| (e.slot, e.job, e.cost)).collect();
    let slot_of = min_cost_perfect_matching(slot_machine.len(), n, &edge_list)?;
    let machine_of: Vec<usize> = slot_of.iter().map(|&s| slot_machine[s]).collect();
    IntegralAssignment::new(machine_of, gap.machines())
}

/// Audit report for one rounding.
#[derive(Debug, Clone)]
pub struct GapAudit {
    /// integral cost / B
    pub cost_ratio: f64,
    /// per machine: integral load / (A_i + max_{j assigned-able} a_ij)
    pub load_ratios: Vec<f64>,
    /// per machine: integral load - (A_i + max a_ij), positive = violation
    pub load_slack: Vec<f64>,
    pub cost_within_budget: bool,
    pub loads_within_guarantee: bool,
}

/// Checks the rounding guarantees of `x_int` against the fractional `x_frac`.
pub fn verify_gap_guarantees(
    gap: &GapInstance,
    x_frac: &FractionalAssignment,
    x_int: &IntegralAssignment,
) -> GapAudit {
    let xf = x_frac;
    let xi = x_int.to_fractional(gap.machines());
    let cost = gap.cost_of(&xi);
    let cost_ratio = if gap.cost_budget > 0.0 {
        cost / gap.cost_budget
    } else if cost > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let mut load_ratios = Vec::new();
    let mut load_slack = Vec::new();
    let mut loads_ok = true;
    for i in 0..gap.machines() {
        let frac_load = gap.load_of(i, xf);
        let int_load = gap.load_of(i, &xi);
        let max_a = (0..gap.jobs())
            .filter(|&j| xf.value(i, j) > DUST_TOL)
            .map(|j| gap.a[i][j])
            .fold(0.0f64, f64::max);
        let bound = gap.machine_budgets[i].max(frac_load) + max_a;
        load_slack.push(int_load - bound);
        load_ratios.push(if bound > 0.0 {
            int_load / bound
        } else if int_load > 0.0 {
            f64::INFINITY
        } else {
            0.0
        });
        if frac_load <= gap.machine_budgets[i] + BUDGET_TOL
            && int_load > gap.machine_budgets[i] + max_a + BUDGET_TOL
        {
            loads_ok = false;
        }
    }
    GapAudit {
        cost_ratio,
        load_ratios,
        load_slack,
        cost_within_budget: cost <= gap.cost_budget + BUDGET_TOL,
        loads_within_guarantee: loads_ok,
    }
}

/// Largest deviation of poured mass from one per job (and from at most one
/// per slot); the slot graph must carry a fractional perfect matching.
fn pour_conservation_error(n_jobs: usize, n_slots: usize, edges: &[SlotEdge]) -> f64 {
    let mut job_mass = vec![0.0; n_jobs];
    let mut slot_mass = vec![0.0; n_slots];
    for e in edges {
        job_mass[e.job] += e.fraction;
        slot_mass[e.slot] += e.fraction;
    }
    let mut worst: f64 = 0.0;
    for &m in &job_mass {
        worst = worst.max((m - 1.0).abs());
    }
    for &m in &slot_mass {
        worst = worst.max(m - (1.0 + MASS_TOL));
    }
    worst
}

/// Poured-mass conservation for `x` against `gap`; exposed for tests.
pub fn poured_mass_check(gap: &GapInstance, x: &FractionalAssignment) -> f64 {
    let (slot_machine, edges) = pour_slots(gap, x);
    pour_conservation_error(gap.jobs(), slot_machine.len(), &edges)
}
