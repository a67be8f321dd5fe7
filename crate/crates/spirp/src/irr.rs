//! The IRR relaxation: the inventory-routing model with the routing part
//! replaced by a per-period surrogate — objective (23) over constraints
//! (9)–(15) and (24)–(27), optionally strengthened by (28).
//!
//! Solving IRR yields a valid lower bound for IR and an elite pool of partial
//! solutions that the construction stage turns into routed solutions.

use std::collections::HashSet;

use thiserror::Error;

use crate::instance::Instance;
use crate::milp::{
    solve_milp, MilpError, MilpModel, ObjSense, RowSense, SolveParams, SolveStatus, VarId,
    VarKind,
};
use crate::solution::{ceil_div, PartialSolution, SolutionError};

/// Default elite-pool width δ in percent.
pub const DEFAULT_DELTA: f64 = 5.0;

#[derive(Debug, Error)]
pub enum IrrError {
    #[error(
        "IRR solve ended {status:?} without an incumbent; purchasing alone is always \
         feasible, so the instance data are inconsistent"
    )]
    NoIncumbent { status: SolveStatus },
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Solution(#[from] SolutionError),
}

/// Handles into a model built by [`build_irr`]; index `[i][t]` refers to
/// collection node `i+1` in period `t+1`.
pub struct IrrVars {
    pub y: Vec<Vec<VarId>>,
    pub z: Vec<VarId>,
    pub w: Vec<Vec<VarId>>,
    /// Inventories `[i][t] = I[i][t+1]` for nodes `0..=n` (0 = depot); the
    /// cyclic condition (12) is built in by aliasing `I[i][0] = I[i][tau]`.
    pub inv: Vec<Vec<VarId>>,
    pub s: Vec<VarId>,
    pub v: Vec<VarId>,
    pub r: Vec<VarId>,
}

/// Shortest depot-out and depot-return legs, the coefficients of R[t] in the
/// surrogate.
fn min_legs(instance: &Instance) -> (f64, f64) {
    let out = (1..=instance.n)
        .map(|i| instance.d(0, i))
        .fold(f64::INFINITY, f64::min);
    let back = (1..=instance.n)
        .map(|i| instance.d(i, 0))
        .fold(f64::INFINITY, f64::min);
    (out, back)
}

/// Builds the IRR model. With `with_valid_inequality`, adds the redundant
/// strengthening rows (28) Σ_i W[i][t] ≤ Q·V[t].
pub fn build_irr(instance: &Instance, with_valid_inequality: bool) -> (MilpModel, IrrVars) {
    let (n, tau, q) = (instance.n, instance.tau, instance.capacity);
    let c = instance.traveling_cost;
    let total = instance.total_accumulation();
    let (min_out, min_back) = min_legs(instance);
    let mut m = MilpModel::new(format!("irr-{}", instance.name), ObjSense::Minimize);

    let y: Vec<Vec<VarId>> = (1..=n)
        .map(|i| (1..=tau).map(|t| m.add_binary(format!("Y_{i}_{t}"), 0.0)).collect())
        .collect();
    let z: Vec<VarId> = (1..=n).map(|i| m.add_binary(format!("Z_{i}"), 0.0)).collect();
    let w: Vec<Vec<VarId>> = (1..=n)
        .map(|i| {
            (1..=tau)
                .map(|t| {
                    let coef = c * (instance.d(0, i) + instance.d(i, 0)) / q;
                    m.add_var(format!("W_{i}_{t}"), VarKind::Continuous, 0.0, total[i].min(q), coef)
                })
                .collect()
        })
        .collect();
    let inv: Vec<Vec<VarId>> = (0..=n)
        .map(|i| {
            (1..=tau)
                .map(|t| {
                    let coef = if i == 0 { instance.holding_cost } else { 0.0 };
                    m.add_var(format!("I_{i}_{t}"), VarKind::Continuous, 0.0, f64::INFINITY, coef)
                })
                .collect()
        })
        .collect();
    let s: Vec<VarId> = (1..=tau)
        .map(|t| {
            m.add_var(format!("S_{t}"), VarKind::Continuous, 0.0, f64::INFINITY, instance.purchase_cost)
        })
        .collect();
    // V[t] needs finite integer bounds; no period can require more vehicles
    // than full collection everywhere plus the R[t] slack.
    let vmax = ((1..=n).map(|i| total[i].min(q)).sum::<f64>() / q).ceil() + 1.0;
    let v: Vec<VarId> = (1..=tau)
        .map(|t| m.add_var(format!("V_{t}"), VarKind::Integer, 0.0, vmax, instance.vehicle_cost))
        .collect();
    let r: Vec<VarId> = (1..=tau)
        .map(|t| {
            m.add_var(format!("R_{t}"), VarKind::Continuous, 0.0, 1.0, c * (min_out + min_back))
        })
        .collect();

    for i in 0..n {
        let a_total = total[i + 1];
        for t in 0..tau {
            let node = i + 1;
            let period = t + 1;
            // (25) W ≤ Q·Y and (9) W ≤ A_i·Y.
            m.add_row(
                format!("c25_{node}_{period}"),
                &[(w[i][t], 1.0), (y[i][t], -q)],
                RowSense::Le,
                0.0,
            );
            m.add_row(
                format!("c9_{node}_{period}"),
                &[(w[i][t], 1.0), (y[i][t], -a_total)],
                RowSense::Le,
                0.0,
            );
            // (10) full collection on visit.
            m.add_row(
                format!("c10_{node}_{period}"),
                &[(inv[node][t], 1.0), (y[i][t], a_total)],
                RowSense::Le,
                a_total,
            );
            // (11) node inventory balance, cyclic via the t=0 ↦ tau alias.
            let prev = (t + tau - 1) % tau;
            m.add_row(
                format!("c11_{node}_{period}"),
                &[
                    (inv[node][t], 1.0),
                    (inv[node][prev], -1.0),
                    (z[i], -instance.a(node, t)),
                    (w[i][t], 1.0),
                ],
                RowSense::Eq,
                0.0,
            );
            // (15) a visit forces selection.
            m.add_row(
                format!("c15_{node}_{period}"),
                &[(y[i][t], 1.0), (z[i], -1.0)],
                RowSense::Le,
                0.0,
            );
        }
        // (14) selection requires at least one visit.
        let mut coeffs: Vec<(VarId, f64)> = vec![(z[i], 1.0)];
        coeffs.extend((0..tau).map(|t| (y[i][t], -1.0)));
        m.add_row(format!("c14_{}", i + 1), &coeffs, RowSense::Le, 0.0);
    }
    for t in 0..tau {
        let period = t + 1;
        let prev = (t + tau - 1) % tau;
        // (13) depot inventory balance.
        let mut coeffs: Vec<(VarId, f64)> = vec![(inv[0][t], 1.0), (inv[0][prev], -1.0), (s[t], -1.0)];
        coeffs.extend((0..n).map(|i| (w[i][t], -1.0)));
        m.add_row(format!("c13_{period}"), &coeffs, RowSense::Eq, -instance.r(t));
        // (24) vehicle count = load fraction + slack fraction.
        let mut coeffs: Vec<(VarId, f64)> = vec![(v[t], 1.0), (r[t], -1.0)];
        coeffs.extend((0..n).map(|i| (w[i][t], -1.0 / q)));
        m.add_row(format!("c24_{period}"), &coeffs, RowSense::Eq, 0.0);
        if with_valid_inequality {
            // (28) optional strengthening.
            let mut coeffs: Vec<(VarId, f64)> = vec![(v[t], -q)];
            coeffs.extend((0..n).map(|i| (w[i][t], 1.0)));
            m.add_row(format!("c28_{period}"), &coeffs, RowSense::Le, 0.0);
        }
    }

    // Branch vehicle counts first (their integrality moves the bound by whole
    // vehicle costs), then site selection, then the visit schedule.
    for &vt in &v {
        m.set_branch_priority(vt, 3);
    }
    for &zi in &z {
        m.set_branch_priority(zi, 2);
    }
    for row in &y {
        for &yit in row {
            m.set_branch_priority(yit, 1);
        }
    }

    (m, IrrVars { y, z, w, inv, s, v, r })
}

/// IRR objective value of a canonical partial solution, with the implied
/// optimal V[t] = ⌈ΣW/Q⌉ and R[t] = V[t] − ΣW/Q.
pub fn irr_objective(instance: &Instance, partial: &PartialSolution) -> f64 {
    let q = instance.capacity;
    let (min_out, min_back) = min_legs(instance);
    let mut per_period_routing = 0.0;
    let mut vehicles = 0.0;
    for t in 0..instance.tau {
        let load = partial.collected(t);
        let v_t = f64::from(ceil_div(load, q));
        let r_t = v_t - load / q;
        let legs: f64 = (1..=instance.n)
            .map(|i| (instance.d(0, i) + instance.d(i, 0)) * partial.w[i][t] / q)
            .sum();
        per_period_routing += legs + (min_out + min_back) * r_t;
        vehicles += v_t;
    }
    let holding: f64 = (1..=instance.tau).map(|t| partial.inventory[0][t]).sum();
    let purchases: f64 = partial.purchase.iter().sum();
    instance.traveling_cost * per_period_routing
        + instance.vehicle_cost * vehicles
        + instance.holding_cost * holding
        + instance.purchase_cost * purchases
}

/// Elite pool and lower bound harvested from one IRR solve.
#[derive(Debug)]
pub struct IrrResult {
    /// Canonical partial solutions within δ% of the best, cheapest first,
    /// deduplicated on (Y, W).
    pub pool: Vec<PartialSolution>,
    /// IRR objective of each pool member (same order).
    pub pool_objectives: Vec<f64>,
    /// Final dual bound of the solve — a valid lower bound for IR.
    pub lower_bound: f64,
    /// Virtual seconds spent in the solve.
    pub solve_seconds: f64,
}

/// Solves IRR, recording every improving incumbent. `params.pool_callback`
/// is ignored (the pool recorder takes its place); `delta` is the pool width
/// in percent.
pub fn solve_irr(
    instance: &Instance,
    params: SolveParams<'_>,
    delta: f64,
) -> Result<IrrResult, IrrError> {
    assert!(delta >= 0.0, "delta is a percentage width, got {delta}");
    let (n, tau) = (instance.n, instance.tau);
    let (model, vars) = build_irr(instance, true);
    let mut recorded: Vec<Vec<f64>> = Vec::new();
    let outcome = {
        let mut recorder = |x: &[f64], _obj: f64| recorded.push(x.to_vec());
        solve_milp(
            &model,
            SolveParams {
                time_limit: params.time_limit,
                rel_gap: params.rel_gap,
                warm_start: params.warm_start,
                pool_callback: Some(&mut recorder),
            },
        )?
    };
    if outcome.assignment.is_none() {
        return Err(IrrError::NoIncumbent { status: outcome.status });
    }

    // Decode each incumbent's visit pattern and canonicalize: full collection
    // and just-in-time purchasing are implied by Y, so the canonical member
    // is feasible and never costlier than the raw incumbent.
    let mut pool: Vec<(PartialSolution, f64)> = Vec::new();
    let mut seen: HashSet<(Vec<u8>, Vec<i64>)> = HashSet::new();
    for x in &recorded {
        let mut pattern = vec![vec![0u8; tau]; n + 1];
        for i in 0..n {
            for t in 0..tau {
                pattern[i + 1][t] = u8::from(x[vars.y[i][t].index()] >= 0.5);
            }
        }
        let partial = PartialSolution::from_visits(instance, &pattern)?;
        let key = (
            partial.y.iter().flatten().copied().collect::<Vec<u8>>(),
            partial
                .w
                .iter()
                .flatten()
                .map(|&wv| (wv * 1e6).round() as i64)
                .collect::<Vec<i64>>(),
        );
        if seen.insert(key) {
            let objective = irr_objective(instance, &partial);
            pool.push((partial, objective));
        }
    }

    let best = pool.iter().map(|(_, o)| *o).fold(f64::INFINITY, f64::min);
    pool.retain(|(_, o)| *o <= (1.0 + delta / 100.0) * best + 1e-9);
    pool.sort_by(|a, b| a.1.total_cmp(&b.1));

    // Canonicalization can shave float dust off the solver incumbent; clamp
    // so the advertised bound never exceeds the best member.
    let lower_bound = outcome.dual_bound.min(best);
    let (pool, pool_objectives) = pool.into_iter().unzip();
    Ok(IrrResult {
        pool,
        pool_objectives,
        lower_bound,
        solve_seconds: outcome.work_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::solve_lp;

    fn tiny(
        q: f64,
        requirements: Vec<f64>,
        accumulation: Vec<Vec<f64>>,
        distances: Vec<Vec<f64>>,
    ) -> Instance {
        Instance::from_parts("tiny", q, 0.24, 90.0, 0.02, 2.5, requirements, accumulation, distances)
            .unwrap()
    }

    #[test]
    fn dimension_contract_one_node_one_period() {
        let inst = tiny(550.0, vec![200.0], vec![vec![150.0]], vec![vec![0.0, 7.0], vec![7.0, 0.0]]);
        let (model, vars) = build_irr(&inst, false);
        assert_eq!(vars.y.len(), 1);
        assert_eq!(vars.y[0].len(), 1);
        assert_eq!(vars.z.len(), 1);
        assert_eq!(vars.w.len(), 1);
        assert_eq!(vars.inv.len(), 2); // node + depot
        assert_eq!(vars.inv[0].len(), 1);
        assert_eq!(vars.s.len(), 1);
        assert_eq!(vars.v.len(), 1);
        assert_eq!(vars.r.len(), 1);
        assert_eq!(model.num_vars(), 8);
    }

    #[test]
    fn surrogate_contribution_matches_objective() {
        // A full vehicle's worth from a node at distance 10 contributes
        // c·(d0i+di0)·W/Q = 0.24·20·550/550 = 4.8.
        let inst = tiny(
            550.0,
            vec![550.0],
            vec![vec![550.0]],
            vec![vec![0.0, 10.0], vec![10.0, 0.0]],
        );
        let (model, vars) = build_irr(&inst, false);
        let mut x = vec![0.0; model.num_vars()];
        let base = model.objective_value(&x);
        x[vars.w[0][0].index()] = 550.0;
        assert!((model.objective_value(&x) - base - 4.8).abs() < 1e-12);
    }

    #[test]
    fn valid_inequality_adds_tau_rows() {
        let inst = tiny(
            550.0,
            vec![100.0, 100.0, 100.0],
            vec![vec![50.0, 60.0, 70.0]],
            vec![vec![0.0, 3.0], vec![3.0, 0.0]],
        );
        let (plain, _) = build_irr(&inst, false);
        let (strong, _) = build_irr(&inst, true);
        assert_eq!(strong.num_rows(), plain.num_rows() + inst.tau);
    }

    #[test]
    fn zero_accumulation_forces_purchase_only() {
        let inst = tiny(
            550.0,
            vec![100.0, 200.0],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![
                vec![0.0, 4.0, 6.0],
                vec![4.0, 0.0, 3.0],
                vec![6.0, 3.0, 0.0],
            ],
        );
        let out = solve_irr(&inst, SolveParams::default(), DEFAULT_DELTA).unwrap();
        assert_eq!(out.pool.len(), 1);
        assert_eq!(out.pool_objectives[0], 2.5 * 300.0);
        assert_eq!(out.lower_bound, 2.5 * 300.0);
        let member = &out.pool[0];
        assert!(member.y.iter().flatten().all(|&b| b == 0));
        assert_eq!(member.purchase, vec![100.0, 200.0]);
    }

    #[test]
    fn zero_requirements_cost_nothing() {
        let inst = tiny(
            550.0,
            vec![0.0, 0.0],
            vec![vec![120.0, 80.0]],
            vec![vec![0.0, 5.0], vec![5.0, 0.0]],
        );
        let out = solve_irr(&inst, SolveParams::default(), DEFAULT_DELTA).unwrap();
        assert_eq!(out.pool_objectives[0], 0.0);
        assert!(out.lower_bound.abs() <= 1e-9);
        assert!(out.pool[0].y.iter().flatten().all(|&b| b == 0));
    }

    /// LP-free oracle: enumerate visit patterns, canonicalize, keep those
    /// whose collections respect (25), and take the cheapest IRR objective.
    fn enumeration_best(inst: &Instance) -> f64 {
        let (n, tau) = (inst.n, inst.tau);
        let cells = n * tau;
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << cells) {
            let mut pattern = vec![vec![0u8; tau]; n + 1];
            for cell in 0..cells {
                if (mask >> cell) & 1 == 1 {
                    pattern[cell / tau + 1][cell % tau] = 1;
                }
            }
            let Ok(partial) = PartialSolution::from_visits(inst, &pattern) else {
                continue; // over-collection: IRR-infeasible pattern
            };
            let fits = partial
                .w
                .iter()
                .flatten()
                .all(|&wv| wv <= inst.capacity + 1e-9);
            if fits {
                best = best.min(irr_objective(inst, &partial));
            }
        }
        best
    }

    #[test]
    fn matches_enumeration_on_two_by_two() {
        let inst = tiny(
            550.0,
            vec![400.0, 300.0],
            vec![vec![300.0, 200.0], vec![250.0, 100.0]],
            vec![
                vec![0.0, 6.0, 8.0],
                vec![6.0, 0.0, 5.0],
                vec![8.0, 5.0, 0.0],
            ],
        );
        let out = solve_irr(&inst, SolveParams::default(), DEFAULT_DELTA).unwrap();
        let oracle = enumeration_best(&inst);
        assert!(
            (out.pool_objectives[0] - oracle).abs() < 1e-9,
            "solver {} vs enumeration {}",
            out.pool_objectives[0],
            oracle
        );
        assert!(out.lower_bound <= out.pool_objectives[0] + 1e-9);
    }

    #[test]
    fn valid_inequality_preserves_optimum() {
        let inst = tiny(
            500.0,
            vec![350.0, 250.0],
            vec![vec![200.0, 150.0], vec![180.0, 120.0]],
            vec![
                vec![0.0, 7.0, 4.0],
                vec![7.0, 0.0, 3.0],
                vec![4.0, 3.0, 0.0],
            ],
        );
        let (plain, _) = build_irr(&inst, false);
        let (strong, _) = build_irr(&inst, true);
        let a = solve_milp(&plain, SolveParams::default()).unwrap();
        let b = solve_milp(&strong, SolveParams::default()).unwrap();
        let (oa, ob) = (a.objective.unwrap(), b.objective.unwrap());
        assert!((oa - ob).abs() <= 2e-6 * oa.abs().max(1.0), "{oa} vs {ob}");
        // (28) is implied at integer points, so even the LP bound with (28)
        // stays below the integer optimum.
        let lp = solve_lp(&strong).unwrap();
        assert!(lp.objective.unwrap() <= ob + 1e-9);
    }

    #[test]
    fn pool_respects_delta_and_dedup() {
        let inst = tiny(
            550.0,
            vec![260.0, 180.0, 240.0],
            vec![vec![150.0, 90.0, 120.0], vec![80.0, 200.0, 60.0]],
            vec![
                vec![0.0, 9.0, 4.0],
                vec![9.0, 0.0, 6.0],
                vec![4.0, 6.0, 0.0],
            ],
        );
        let delta = 25.0;
        let out = solve_irr(&inst, SolveParams::default(), delta).unwrap();
        assert!(!out.pool.is_empty());
        let best = out.pool_objectives[0];
        for window in out.pool_objectives.windows(2) {
            assert!(window[0] <= window[1]);
        }
        for &obj in &out.pool_objectives {
            assert!(obj <= (1.0 + delta / 100.0) * best + 1e-9);
        }
        let mut keys = HashSet::new();
        for member in &out.pool {
            let key: Vec<u8> = member.y.iter().flatten().copied().collect();
            assert!(keys.insert(key), "duplicate visit pattern in pool");
        }
        assert!(out.lower_bound <= best + 1e-9);
    }
}
