use super::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn solve_gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let mut best = k;
        for i in k + 1..n {
            if a[i][k].abs() > a[best][k].abs() {
                best = i;
            }
        }
        if a[best][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, best);
        b.swap(k, best);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    Some(x)
}

/// Brute-force LP oracle: enumerate every basis of active hyperplanes
/// (constraints as equalities plus finite variable bounds), keep feasible
/// intersection points, return the best objective. Only for small LPs with
/// bounded feasible regions.
fn vertex_enumeration_optimum(lp: &LinearProgram) -> Option<(f64, Vec<f64>)> {
    let n = lp.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for con in lp.constraints() {
        let mut row = vec![0.0; n];
        for &(id, c) in &con.coeffs {
            row[id.0] += c;
        }
        planes.push((row, con.rhs));
    }
    for j in 0..n {
        let (lo, up) = lp.var_bounds(VarId(j));
        for b in [lo, up] {
            if b.is_finite() {
                let mut row = vec![0.0; n];
                row[j] = 1.0;
                planes.push((row, b));
            }
        }
    }
    let sense = match lp.sense {
        Some(Sense::Maximize) => 1.0,
        _ => -1.0,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut index = vec![0usize; n];
    fn recurse(
        lp: &LinearProgram,
        planes: &[(Vec<f64>, f64)],
        index: &mut [usize],
        depth: usize,
        start: usize,
        sense: f64,
        best: &mut Option<(f64, Vec<f64>)>,
    ) {
        let n = index.len();
        if depth == n {
            let a: Vec<Vec<f64>> = index.iter().map(|&i| planes[i].0.clone()).collect();
            let b: Vec<f64> = index.iter().map(|&i| planes[i].1).collect();
            let Some(x) = solve_gauss(a, b) else { return };
            if lp.max_violation(&x) > 1e-7 {
                return;
            }
            let obj = lp.objective_at(&x);
            match best {
                Some((v, _)) if sense * obj <= sense * *v => {}
                _ => *best = Some((obj, x)),
            }
            return;
        }
        for i in start..planes.len() {
            index[depth] = i;
            recurse(lp, planes, index, depth + 1, i + 1, sense, best);
        }
    }
    recurse(lp, &planes, &mut index, 0, 0, sense, &mut best);
    best
}

#[test]
fn maximize_simple_box() {
    let mut lp = LinearProgram::new();
    let x = lp.add_var("x", 0.0, f64::INFINITY).unwrap();
    lp.add_constraint(vec![(x, 1.0)], Relation::Le, 3.0)
        .unwrap();
    lp.set_objective(Sense::Maximize, vec![(x, 1.0)]);
    let sol = lp.solve().unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.value(x) - 3.0).abs() < 1e-9);
    assert!((sol.objective_value - 3.0).abs() < 1e-9);
}

#[test]
fn infeasible_with_certificate() {
    let mut lp = LinearProgram::new();
    let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY).unwrap();
    lp.add_constraint(vec![(x, 1.0)], Relation::Ge, 1.0)
        .unwrap();
    lp.add_constraint(vec![(x, 1.0)], Relation::Le, 0.0)
        .unwrap();
    let sol = lp.solve().unwrap();
    assert_eq!(sol.status, LpStatus::Infeasible);
    let cert = sol.infeasibility_certificate.expect("certificate");
    assert!(infeasibility_gap(&lp, &cert) > 1e-9);
}

#[test]
fn unbounded_detected() {
    let mut lp = LinearProgram::new();
    let x = lp.add_var("x", 0.0, f64::INFINITY).unwrap();
    lp.set_objective(Sense::Maximize, vec![(x, 1.0)]);
    let sol = lp.solve().unwrap();
    assert_eq!(sol.status, LpStatus::Unbounded);
}

#[test]
fn equality_and_two_phase() {
    // min x + y  s.t.  x + y = 2, x - y >= -1, 0 <= x,y <= 5
    let mut lp = LinearProgram::new();
    let x = lp.add_var("x", 0.0, 5.0).unwrap();
    let y = lp.add_var("y", 0.0, 5.0).unwrap();
    lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Eq, 2.0)
        .unwrap();
    lp.add_constraint(vec![(x, 1.0), (y, -1.0)], Relation::Ge, -1.0)
        .unwrap();
    lp.set_objective(Sense::Minimize, vec![(x, 1.0), (y, 1.0)]);
    let sol = lp.solve().unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective_value - 2.0).abs() < 1e-9);
    assert!(lp.max_violation(&sol.values) <= 1e-7);
}

#[test]
fn degenerate_lp_terminates() {
    // many redundant constraints through the same vertex
    let mut lp = LinearProgram::new();
    let x = lp.add_var("x", 0.0, 10.0).unwrap();
    let y = lp.add_var("y", 0.0, 10.0).unwrap();
    for k in 1..12 {
        let k = k as f64;
        lp.add_constraint(vec![(x, k), (y, 1.0)], Relation::Le, k)
            .unwrap();
    }
    lp.set_objective(Sense::Maximize, vec![(x, 1.0), (y, 1.0)]);
    let sol = lp.solve().unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    // vertex (1, 0) or (0, 1): objective 1... the binding line x*k + y = k
    // passes through (1,0) for all k and (0,1) for k=1; optimum is 1.
    assert!((sol.objective_value - 1.0).abs() < 1e-7);
}

#[test]
fn iteration_limit_status() {
    let mut lp = LinearProgram::new();
    let x = lp.add_var("x", 0.0, 5.0).unwrap();
    let y = lp.add_var("y", 0.0, 5.0).unwrap();
    lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Le, 4.0)
        .unwrap();
    lp.set_objective(Sense::Maximize, vec![(x, 1.0), (y, 2.0)]);
    let opts = SolveOptions {
        pivot_cap: 0,
        ..SolveOptions::default()
    };
    let sol = lp.solve_with_options(&opts).unwrap();
    assert_eq!(sol.status, LpStatus::IterationLimit);
}

#[test]
fn feasibility_sense_finds_point() {
    let mut lp = LinearProgram::new();
    let x = lp.add_var("x", 0.0, 1.0).unwrap();
    let y = lp.add_var("y", 0.0, 1.0).unwrap();
    lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Eq, 1.0)
        .unwrap();
    let sol = lp.solve().unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!(lp.max_violation(&sol.values) <= 1e-7);
}

fn random_lp(rng: &mut ChaCha8Rng, nvars: usize, ncons: usize) -> LinearProgram {
    let mut lp = LinearProgram::new();
    let ids: Vec<VarId> = (0..nvars)
        .map(|j| {
            let up = rng.random_range(0.5..3.0);
            lp.add_var(format!("x{j}"), 0.0, up).unwrap()
        })
        .collect();
    for _ in 0..ncons {
        let coeffs: Vec<(VarId, f64)> = ids
            .iter()
            .map(|&id| (id, rng.random_range(-2.0..2.0)))
            .collect();
        let rhs = rng.random_range(-1.5..3.0);
        let rel = match rng.random_range(0..3) {
            0 => Relation::Le,
            1 => Relation::Ge,
            _ => Relation::Eq,
        };
        lp.add_constraint(coeffs, rel, rhs).unwrap();
    }
    let obj: Vec<(VarId, f64)> = ids
        .iter()
        .map(|&id| (id, rng.random_range(-1.0..1.0)))
        .collect();
    let sense = if rng.random_bool(0.5) {
        Sense::Minimize
    } else {
        Sense::Maximize
    };
    lp.set_objective(sense, obj);
    lp
}

#[test]
fn random_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut optimal_seen = 0;
    let mut infeasible_seen = 0;
    for _ in 0..240 {
        let nvars = rng.random_range(2..6);
        let ncons = rng.random_range(1..6);
        let lp = random_lp(&mut rng, nvars, ncons);
        let sol = lp.solve().unwrap();
        let oracle = vertex_enumeration_optimum(&lp);
        match (&sol.status, oracle) {
            (LpStatus::Optimal, Some((obj, _))) => {
                optimal_seen += 1;
                assert!(
                    (sol.objective_value - obj).abs() <= 1e-6 * (1.0 + obj.abs()),
                    "objective mismatch: simplex {} vs enumeration {}\n{}",
                    sol.objective_value,
                    obj,
                    dump_lp(&lp)
                );
            }
            (LpStatus::Infeasible, None) => {
                infeasible_seen += 1;
                let cert = sol.infeasibility_certificate.as_ref().expect("certificate");
                assert!(
                    infeasibility_gap(&lp, cert) > 0.0,
                    "bad certificate\n{}",
                    dump_lp(&lp)
                );
            }
            (status, oracle) => panic!(
                "status disagreement: simplex {:?}, oracle feasible = {}\n{}",
                status,
                oracle.is_some(),
                dump_lp(&lp)
            ),
        }
    }
    // the generator must exercise both outcomes
    assert!(optimal_seen > 20, "only {optimal_seen} optimal instances");
    assert!(
        infeasible_seen > 10,
        "only {infeasible_seen} infeasible instances"
    );
}

#[test]
fn optimal_solutions_pass_dual_audit() {
    let mut rng = ChaCha8Rng::seed_from_u64(314);
    let mut audited = 0;
    for _ in 0..80 {
        let nvars = rng.random_range(2..5);
        let ncons = rng.random_range(1..5);
        let lp = random_lp(&mut rng, nvars, ncons);
        let sol = lp.solve().unwrap();
        if sol.status == LpStatus::Optimal {
            let gap = dual_audit_gap(&lp, &sol);
            assert!(gap <= 1e-6, "dual audit gap {gap}\n{}", dump_lp(&lp));
            audited += 1;
        }
    }
    assert!(audited > 20);
}

#[test]
fn feasibility_monotone_under_added_constraints() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..60 {
        let nvars = rng.random_range(2..4);
        let ncons = rng.random_range(1..4);
        let mut lp = random_lp(&mut rng, nvars, ncons);
        let before = lp.solve().unwrap().status;
        let coeffs: Vec<(VarId, f64)> = (0..nvars)
            .map(|j| (VarId(j), rng.random_range(-1.0..1.0)))
            .collect();
        lp.add_constraint(coeffs, Relation::Le, rng.random_range(-0.5..2.0))
            .unwrap();
        let after = lp.solve().unwrap().status;
        if before == LpStatus::Infeasible {
            assert_eq!(after, LpStatus::Infeasible);
        }
    }
}

#[test]
fn separation_with_empty_oracle_equals_plain_solve() {
    let mut lp = LinearProgram::new();
    let x = lp.add_var("x", 0.0, 2.0).unwrap();
    lp.set_objective(Sense::Maximize, vec![(x, 1.0)]);
    let plain = lp.solve().unwrap();
    let out = solve_with_separation(&mut lp, |_| Vec::new(), 10).unwrap();
    assert_eq!(out.solution.status, LpStatus::Optimal);
    assert_eq!(out.rounds, 1);
    assert_eq!(out.constraints_added, 0);
    assert!((out.solution.objective_value - plain.objective_value).abs() < 1e-12);
}

#[test]
fn separation_converges_in_two_rounds() {
    // box maximization cut down by x1 + x2 <= 1
    let mut lp = LinearProgram::new();
    let x1 = lp.add_var("x1", 0.0, 1.0).unwrap();
    let x2 = lp.add_var("x2", 0.0, 1.0).unwrap();
    lp.set_objective(Sense::Maximize, vec![(x1, 1.0), (x2, 1.0)]);
    let out = solve_with_separation(
        &mut lp,
        |sol| {
            if sol.values[0] + sol.values[1] > 1.0 + 1e-7 {
                vec![Constraint {
                    coeffs: vec![(x1, 1.0), (x2, 1.0)],
                    relation: Relation::Le,
                    rhs: 1.0,
                }]
            } else {
                Vec::new()
            }
        },
        10,
    )
    .unwrap();
    assert_eq!(out.solution.status, LpStatus::Optimal);
    assert!(out.rounds <= 2);
    assert_eq!(out.constraints_added, 1);
    assert!((out.solution.objective_value - 1.0).abs() < 1e-9);
}

#[test]
fn separation_round_limit_distinct_from_infeasible() {
    let mut lp = LinearProgram::new();
    let x = lp.add_var("x", 0.0, 1.0).unwrap();
    lp.set_objective(Sense::Maximize, vec![(x, 1.0)]);
    // an oracle that always cuts a bit more off keeps the loop going
    let mut k = 0;
    let out = solve_with_separation(
        &mut lp,
        |_| {
            k += 1;
            vec![Constraint {
                coeffs: vec![(x, 1.0)],
                relation: Relation::Le,
                rhs: 1.0 / (k + 1) as f64,
            }]
        },
        5,
    )
    .unwrap();
    assert_eq!(out.solution.status, LpStatus::RoundLimit);
    assert_eq!(out.rounds, 5);
}

#[test]
fn separation_result_equals_full_family_solve() {
    // materialize a small cut family up front and compare with lazily
    // separating the same family
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let nvars = 3;
        let mut family = Vec::new();
        for _ in 0..6 {
            let coeffs: Vec<f64> = (0..nvars).map(|_| rng.random_range(0.0..1.5)).collect();
            let rhs = rng.random_range(0.5..2.0);
            family.push((coeffs, rhs));
        }
        let build = |with_family: bool| {
            let mut lp = LinearProgram::new();
            let ids: Vec<VarId> = (0..nvars)
                .map(|j| lp.add_var(format!("x{j}"), 0.0, 2.0).unwrap())
                .collect();
            lp.set_objective(Sense::Maximize, ids.iter().map(|&id| (id, 1.0)).collect());
            if with_family {
                for (coeffs, rhs) in &family {
                    let c: Vec<(VarId, f64)> =
                        ids.iter().zip(coeffs).map(|(&id, &c)| (id, c)).collect();
                    lp.add_constraint(c, Relation::Le, *rhs).unwrap();
                }
            }
            (lp, ids)
        };
        let (full_lp, _) = build(true);
        let full = full_lp.solve().unwrap();

        let (mut lazy_lp, ids) = build(false);
        let fam = family.clone();
        let out = solve_with_separation(
            &mut lazy_lp,
            move |sol| {
                let mut cuts = Vec::new();
                for (coeffs, rhs) in &fam {
                    let lhs: f64 = coeffs
                        .iter()
                        .enumerate()
                        .map(|(j, c)| c * sol.values[j])
                        .sum();
                    if lhs > rhs + 1e-7 {
                        cuts.push(Constraint {
                            coeffs: ids.iter().zip(coeffs).map(|(&id, &c)| (id, c)).collect(),
                            relation: Relation::Le,
                            rhs: *rhs,
                        });
                    }
                }
                cuts
            },
            50,
        )
        .unwrap();
        assert_eq!(out.solution.status, LpStatus::Optimal);
        assert!(
            (out.solution.objective_value - full.objective_value).abs() <= 1e-7,
            "lazy {} vs full {}",
            out.solution.objective_value,
            full.objective_value
        );
    }
}
