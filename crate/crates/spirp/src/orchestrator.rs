//! Algorithm 2, MIP-BASED-HEURISTIC: solve the IRR relaxation for an elite
//! pool Γ of collection plans and a lower bound, complete every member into
//! routed vehicles, keep the cheapest `elite_complete_k` solutions, and (in
//! the MH+ variant) re-optimize their routes period by period.
//!
//! Also hosts [`solve_ir_exact`], the full formulation (1)–(22) used as the
//! optimality oracle on small instances.
//!
//! All reported phase times are virtual solver seconds, so a report is a
//! pure function of (instance, variant, parameters, seed).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::construction::{routes_construction_metered, PartitionStats};
use crate::instance::Instance;
use crate::irr::{build_irr, solve_irr, IrrError};
use crate::milp::{
    solve_milp, MilpError, MilpModel, ObjSense, RowSense, SolveOutcome, SolveParams, VarId,
    VarKind,
};
use crate::mip_search::{improve_routes_metered, LbMode, MipSearchParams};
use crate::solution::{
    evaluate_cost, optimality_gap, CompleteSolution, CostBreakdown, Route, SolutionError,
};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Irr(#[from] IrrError),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Solution(#[from] SolutionError),
    #[error(
        "exact IR solve refused: n={n}, tau={tau} exceeds the n<=8, tau<=3 guard \
         (pass allow_large to override)"
    )]
    SizeGuard { n: usize, tau: usize },
}

/// Which heuristic to run: with or without the MIP-search phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "MH")]
    Mh,
    #[serde(rename = "MH+")]
    MhPlus,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Mh => "MH",
            Variant::MhPlus => "MH+",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunParams {
    /// Elite pool width in percent (members within δ% of the best).
    pub delta: f64,
    /// How many constructed solutions survive into Γ′.
    pub elite_complete_k: usize,
    /// Virtual-seconds budget for the IRR solve.
    pub irr_time_limit: f64,
    /// Virtual-seconds budget per MIP-search period solve (also caps each
    /// bin-packing repair).
    pub mip_time_limit: f64,
    pub lb_mode: LbMode,
    /// Echoed in the report; the pipeline itself is deterministic.
    pub seed: u64,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            delta: 5.0,
            elite_complete_k: 1,
            irr_time_limit: 60.0,
            mip_time_limit: 60.0,
            lb_mode: LbMode::Literal,
            seed: 0,
        }
    }
}

/// Virtual seconds spent per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub irr: f64,
    pub construction: f64,
    pub mip_search: f64,
    pub total: f64,
}

/// Benchmark-table shape columns: vehicles per period and collection nodes
/// per vehicle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ShapeStats {
    pub veh_min: u32,
    pub veh_avg: f64,
    pub veh_max: u32,
    pub col_min: u32,
    pub col_avg: f64,
    pub col_max: u32,
}

/// Recomputes the shape columns from routes (used both for reporting and for
/// the consistency check against solution files).
pub fn shape_stats(routes: &[Vec<Route>]) -> ShapeStats {
    let mut stats = ShapeStats::default();
    if routes.is_empty() {
        return stats;
    }
    let veh: Vec<u32> = routes.iter().map(|r| r.len() as u32).collect();
    stats.veh_min = veh.iter().copied().min().unwrap_or(0);
    stats.veh_max = veh.iter().copied().max().unwrap_or(0);
    stats.veh_avg = f64::from(veh.iter().sum::<u32>()) / veh.len() as f64;
    let cols: Vec<u32> =
        routes.iter().flatten().map(|r| r.interior().len() as u32).collect();
    if !cols.is_empty() {
        stats.col_min = cols.iter().copied().min().unwrap();
        stats.col_max = cols.iter().copied().max().unwrap();
        stats.col_avg = f64::from(cols.iter().sum::<u32>()) / cols.len() as f64;
    }
    stats
}

/// Everything one heuristic run produces.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub instance: String,
    pub variant: Variant,
    pub seed: u64,
    pub params: ParamsEcho,
    pub best: CompleteSolution,
    pub cost: CostBreakdown,
    /// z̄: objective of `best`.
    pub upper_bound: f64,
    /// z̲: IRR dual bound, valid for IR.
    pub lower_bound: f64,
    /// A-posteriori gap 100·(z̄ − z̲)/z̄, 0 when both bounds vanish.
    pub gap: f64,
    pub times: PhaseTimes,
    pub stats: PartitionStats,
    pub shape: ShapeStats,
    /// Visit patterns of the elite pool Γ (collection rows only), enough to
    /// replay construction and recount `stats`.
    pub pool_y: Vec<Vec<Vec<u8>>>,
}

/// Parameter echo embedded in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsEcho {
    pub delta: f64,
    pub elite_complete_k: usize,
    pub irr_time_limit: f64,
    pub mip_time_limit: f64,
    pub lb_mode: String,
}

impl ParamsEcho {
    fn new(params: &RunParams) -> ParamsEcho {
        ParamsEcho {
            delta: params.delta,
            elite_complete_k: params.elite_complete_k,
            irr_time_limit: params.irr_time_limit,
            mip_time_limit: params.mip_time_limit,
            lb_mode: match params.lb_mode {
                LbMode::Literal => "literal".into(),
                LbMode::Ceiling => "ceiling".into(),
            },
        }
    }
}

/// The purchase-only IRR assignment (no visits, buy everything): always
/// feasible, so the solve is guaranteed an incumbent under any budget.
fn purchase_only_irr_warm(instance: &Instance) -> Vec<f64> {
    let (model, vars) = build_irr(instance, true);
    let mut warm = vec![0.0; model.num_vars()];
    for t in 0..instance.tau {
        warm[vars.s[t].index()] = instance.r(t);
    }
    warm
}

fn gap_percent(upper: f64, lower: f64) -> Result<f64, SolutionError> {
    if upper.abs() <= 1e-9 && lower.abs() <= 1e-9 {
        return Ok(0.0);
    }
    optimality_gap(upper, lower)
}

/// Algorithm 2. Runs the full pipeline and reports bounds, gap, timing, and
/// table statistics. Deterministic: equal inputs give equal reports.
pub fn run(
    instance: &Instance,
    variant: Variant,
    params: &RunParams,
) -> Result<RunReport, OrchestratorError> {
    let k = params.elite_complete_k.max(1);

    // Line 1: elite partial solutions + lower bound from the relaxation.
    let irr = solve_irr(
        instance,
        SolveParams {
            time_limit: params.irr_time_limit,
            warm_start: Some(purchase_only_irr_warm(instance)),
            ..SolveParams::default()
        },
        params.delta,
    )?;

    // Lines 2–3: complete every pool member.
    let mut stats = PartitionStats::default();
    let mut construction_time = 0.0;
    let mut constructed: Vec<(CompleteSolution, f64)> = Vec::with_capacity(irr.pool.len());
    for partial in &irr.pool {
        let (complete, member_stats, _, work) =
            routes_construction_metered(partial, instance, params.mip_time_limit);
        stats += member_stats;
        construction_time += work;
        let cost = evaluate_cost(&complete, instance)?.total;
        constructed.push((complete, cost));
    }

    // Line 4: Γ′ = the k cheapest complete solutions (stable on ties).
    let mut order: Vec<usize> = (0..constructed.len()).collect();
    order.sort_by(|&a, &b| constructed[a].1.total_cmp(&constructed[b].1).then(a.cmp(&b)));
    order.truncate(k);

    // Lines 5–6: MIP-search on each finalist (MH+ only).
    let mut mip_time = 0.0;
    let mut best: Option<(CompleteSolution, f64)> = None;
    for &idx in &order {
        let candidate = match variant {
            Variant::Mh => constructed[idx].0.clone(),
            Variant::MhPlus => {
                let (improved, work) = improve_routes_metered(
                    &constructed[idx].0,
                    instance,
                    &MipSearchParams {
                        time_limit: params.mip_time_limit,
                        lb_mode: params.lb_mode,
                    },
                );
                mip_time += work;
                improved
            }
        };
        let cost = evaluate_cost(&candidate, instance)?.total;
        if best.as_ref().is_none_or(|(_, c)| cost < *c) {
            best = Some((candidate, cost));
        }
    }
    let (best, upper_bound) = best.expect("pool is never empty");

    let lower_bound = irr.lower_bound.min(upper_bound);
    let gap = gap_percent(upper_bound, lower_bound)?;
    let cost = evaluate_cost(&best, instance)?;
    let shape = shape_stats(&best.routes);
    let times = PhaseTimes {
        irr: irr.solve_seconds,
        construction: construction_time,
        mip_search: mip_time,
        total: irr.solve_seconds + construction_time + mip_time,
    };
    let pool_y = irr.pool.iter().map(|p| p.y[1..].to_vec()).collect();

    Ok(RunReport {
        instance: instance.name.clone(),
        variant,
        seed: params.seed,
        params: ParamsEcho::new(params),
        best,
        cost,
        upper_bound,
        lower_bound,
        gap,
        times,
        stats,
        shape,
        pool_y,
    })
}

/// Variable handles of the exact IR model (1)–(22). Arc matrices are over
/// all nodes 0..=n with unused diagonals; node matrices use rows 1..=n.
pub struct IrVars {
    pub x: Vec<Vec<Vec<Option<VarId>>>>,
    pub f: Vec<Vec<Vec<Option<VarId>>>>,
    /// y[i-1][t] for collection node i.
    pub y: Vec<Vec<VarId>>,
    pub z: Vec<VarId>,
    pub w: Vec<Vec<VarId>>,
    /// inv[i][t] models I[i][t+1]; the cyclic alias I[i][0] = I[i][tau] is
    /// by indexing, matching `PartialSolution::inventory[i][t+1]`.
    pub inv: Vec<Vec<VarId>>,
    pub s: Vec<VarId>,
}

/// Builds the complete SPIRP formulation: objective (1), routing and flow
/// constraints (2)–(8), collection and inventory constraints (9)–(15), and
/// the variable domains (19)–(25).
pub fn build_ir(instance: &Instance) -> (MilpModel, IrVars) {
    let (n, tau, q) = (instance.n, instance.tau, instance.capacity);
    let m = n + 1;
    let total = instance.total_accumulation();
    let mut model = MilpModel::new(format!("ir-{}", instance.name), ObjSense::Minimize);

    let y: Vec<Vec<VarId>> = (1..=n)
        .map(|i| (0..tau).map(|t| model.add_binary(format!("Y{i}_{t}"), 0.0)).collect())
        .collect();
    let z: Vec<VarId> = (1..=n).map(|i| model.add_binary(format!("Z{i}"), 0.0)).collect();
    let w: Vec<Vec<VarId>> = (1..=n)
        .map(|i| {
            (0..tau)
                .map(|t| {
                    model.add_var(
                        format!("W{i}_{t}"),
                        VarKind::Continuous,
                        0.0,
                        total[i].min(q),
                        0.0,
                    )
                })
                .collect()
        })
        .collect();
    let inv: Vec<Vec<VarId>> = (0..=n)
        .map(|i| {
            (0..tau)
                .map(|t| {
                    let (ub, cost) = if i == 0 {
                        (f64::INFINITY, instance.holding_cost)
                    } else {
                        (total[i], 0.0)
                    };
                    model.add_var(format!("I{i}_{t}"), VarKind::Continuous, 0.0, ub, cost)
                })
                .collect()
        })
        .collect();
    let s: Vec<VarId> = (0..tau)
        .map(|t| {
            model.add_var(
                format!("S{t}"),
                VarKind::Continuous,
                0.0,
                f64::INFINITY,
                instance.purchase_cost,
            )
        })
        .collect();
    let mut x = vec![vec![vec![None; tau]; m]; m];
    let mut f = vec![vec![vec![None; tau]; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            for t in 0..tau {
                let cost = instance.traveling_cost * instance.d(i, j)
                    + if i == 0 { instance.vehicle_cost } else { 0.0 };
                x[i][j][t] = Some(model.add_binary(format!("X{i}_{j}_{t}"), cost));
                f[i][j][t] = Some(model.add_var(
                    format!("F{i}_{j}_{t}"),
                    VarKind::Continuous,
                    0.0,
                    q,
                    0.0,
                ));
            }
        }
    }

    for t in 0..tau {
        let prev = (t + tau - 1) % tau;
        // (2) flow balance at collection nodes.
        for i in 1..=n {
            let mut coeffs = vec![(w[i - 1][t], -1.0)];
            for j in 0..m {
                if j != i {
                    coeffs.push((f[i][j][t].unwrap(), 1.0));
                    coeffs.push((f[j][i][t].unwrap(), -1.0));
                }
            }
            model.add_row(format!("bal{i}_{t}"), &coeffs, RowSense::Eq, 0.0);
        }
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                // (3) arc flow only when the arc is traveled.
                model.add_row(
                    format!("cap{i}_{j}_{t}"),
                    &[
                        (f[i][j][t].unwrap(), 1.0),
                        (x[i][j][t].unwrap(), -(q - instance.a(j, t))),
                    ],
                    RowSense::Le,
                    0.0,
                );
                // (4) room for the next collection.
                if j >= 1 {
                    model.add_row(
                        format!("room{i}_{j}_{t}"),
                        &[(f[i][j][t].unwrap(), 1.0), (w[j - 1][t], 1.0)],
                        RowSense::Le,
                        q,
                    );
                }
                // (5) departing flow carries the collected load.
                if i >= 1 {
                    model.add_row(
                        format!("carry{i}_{j}_{t}"),
                        &[
                            (f[i][j][t].unwrap(), 1.0),
                            (w[i - 1][t], -1.0),
                            (x[i][j][t].unwrap(), -total[i]),
                        ],
                        RowSense::Ge,
                        -total[i],
                    );
                }
            }
        }
        // (6)–(7) degree constraints tie arcs to visits.
        for i in 1..=n {
            let mut inbound: Vec<(VarId, f64)> =
                (0..m).filter(|&j| j != i).map(|j| (x[j][i][t].unwrap(), 1.0)).collect();
            inbound.push((y[i - 1][t], -1.0));
            model.add_row(format!("in{i}_{t}"), &inbound, RowSense::Eq, 0.0);
            let mut outbound: Vec<(VarId, f64)> =
                (0..m).filter(|&j| j != i).map(|j| (x[i][j][t].unwrap(), 1.0)).collect();
            outbound.push((y[i - 1][t], -1.0));
            model.add_row(format!("out{i}_{t}"), &outbound, RowSense::Eq, 0.0);
        }
        // (8) vehicles leaving the depot return.
        let mut depot: Vec<(VarId, f64)> =
            (1..=n).map(|i| (x[i][0][t].unwrap(), 1.0)).collect();
        depot.extend((1..=n).map(|i| (x[0][i][t].unwrap(), -1.0)));
        model.add_row(format!("return{t}"), &depot, RowSense::Eq, 0.0);

        for i in 1..=n {
            // (9) collect only on visits; (10) visits empty the node store.
            model.add_row(
                format!("c9_{i}_{t}"),
                &[(w[i - 1][t], 1.0), (y[i - 1][t], -total[i])],
                RowSense::Le,
                0.0,
            );
            model.add_row(
                format!("c10_{i}_{t}"),
                &[(inv[i][t], 1.0), (y[i - 1][t], total[i])],
                RowSense::Le,
                total[i],
            );
            // (11)+(12) cyclic node inventory balance.
            model.add_row(
                format!("c11_{i}_{t}"),
                &[
                    (inv[i][t], 1.0),
                    (inv[i][prev], -1.0),
                    (z[i - 1], -instance.a(i, t)),
                    (w[i - 1][t], 1.0),
                ],
                RowSense::Eq,
                0.0,
            );
            // (15) visiting in any period marks the node as selected.
            model.add_row(
                format!("c15_{i}_{t}"),
                &[(y[i - 1][t], 1.0), (z[i - 1], -1.0)],
                RowSense::Le,
                0.0,
            );
        }
        // (13)+(12) cyclic depot balance.
        let mut depot_bal = vec![(inv[0][t], 1.0), (inv[0][prev], -1.0), (s[t], -1.0)];
        depot_bal.extend((1..=n).map(|i| (w[i - 1][t], -1.0)));
        model.add_row(format!("c13_{t}"), &depot_bal, RowSense::Eq, -instance.r(t));
    }
    // (14) selected nodes are visited at least once.
    for i in 1..=n {
        let mut coeffs = vec![(z[i - 1], 1.0)];
        coeffs.extend((0..tau).map(|t| (y[i - 1][t], -1.0)));
        model.add_row(format!("c14_{i}"), &coeffs, RowSense::Le, 0.0);
    }

    // Branch on plan structure before individual arcs.
    for i in 1..=n {
        model.set_branch_priority(z[i - 1], 3);
        for t in 0..tau {
            model.set_branch_priority(y[i - 1][t], 2);
        }
    }

    (model, IrVars { x, f, y, z, w, inv, s })
}

/// Encodes a complete solution as an IR assignment for warm starting.
pub fn encode_ir_warm(
    solution: &CompleteSolution,
    instance: &Instance,
    model: &MilpModel,
    vars: &IrVars,
) -> Vec<f64> {
    let mut warm = vec![0.0; model.num_vars()];
    let partial = &solution.partial;
    for i in 1..=instance.n {
        warm[vars.z[i - 1].index()] = f64::from(partial.z[i]);
        for t in 0..instance.tau {
            warm[vars.y[i - 1][t].index()] = f64::from(partial.y[i][t]);
            warm[vars.w[i - 1][t].index()] = partial.w[i][t];
            warm[vars.inv[i][t].index()] = partial.inventory[i][t + 1];
        }
    }
    for t in 0..instance.tau {
        warm[vars.s[t].index()] = partial.purchase[t];
        warm[vars.inv[0][t].index()] = partial.inventory[0][t + 1];
        for route in &solution.routes[t] {
            let mut prev = 0usize;
            let mut cum = 0.0;
            for &i in route.interior() {
                warm[vars.x[prev][i][t].unwrap().index()] = 1.0;
                warm[vars.f[prev][i][t].unwrap().index()] = cum;
                cum += partial.w[i][t];
                prev = i;
            }
            warm[vars.x[prev][0][t].unwrap().index()] = 1.0;
            warm[vars.f[prev][0][t].unwrap().index()] = cum;
        }
    }
    warm
}

/// Solves the exact IR formulation; the acceptance oracle. Refuses instances
/// beyond n=8, tau=3 unless `allow_large` (branch-and-bound over the full
/// arc formulation grows steeply). An optional warm start (typically the
/// heuristic's best) prunes the search.
pub fn solve_ir_exact(
    instance: &Instance,
    warm: Option<&CompleteSolution>,
    time_limit: f64,
    allow_large: bool,
) -> Result<SolveOutcome, OrchestratorError> {
    if !allow_large && (instance.n > 8 || instance.tau > 3) {
        return Err(OrchestratorError::SizeGuard { n: instance.n, tau: instance.tau });
    }
    let (model, vars) = build_ir(instance);
    let warm_start = warm.map(|sol| encode_ir_warm(sol, instance, &model, &vars));
    let outcome = solve_milp(
        &model,
        SolveParams { time_limit, warm_start, ..SolveParams::default() },
    )?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::SolveStatus;
    use crate::solution::check_feasibility;

    fn toy(
        requirements: Vec<f64>,
        accumulation: Vec<Vec<f64>>,
        distances: Vec<Vec<f64>>,
    ) -> Instance {
        Instance::from_parts(
            "toy",
            550.0,
            0.24,
            90.0,
            0.02,
            2.5,
            requirements,
            accumulation,
            distances,
        )
        .unwrap()
    }

    fn zero_accum_instance() -> Instance {
        toy(
            vec![100.0, 200.0],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![
                vec![0.0, 4.0, 5.0],
                vec![4.0, 0.0, 3.0],
                vec![5.0, 3.0, 0.0],
            ],
        )
    }

    #[test]
    fn zero_accumulation_is_purchase_only() {
        let inst = zero_accum_instance();
        for variant in [Variant::Mh, Variant::MhPlus] {
            let report = run(&inst, variant, &RunParams::default()).unwrap();
            let expect = 2.5 * 300.0;
            assert!((report.upper_bound - expect).abs() < 1e-9);
            assert!((report.lower_bound - expect).abs() < 1e-9);
            assert_eq!(report.gap, 0.0);
            assert!(report.best.routes.iter().all(|r| r.is_empty()));
            assert_eq!(report.shape, ShapeStats::default());
        }
    }

    #[test]
    fn zero_requirements_cost_nothing() {
        let inst = toy(
            vec![0.0, 0.0],
            vec![vec![30.0, 30.0], vec![60.0, 60.0]],
            vec![
                vec![0.0, 4.0, 5.0],
                vec![4.0, 0.0, 3.0],
                vec![5.0, 3.0, 0.0],
            ],
        );
        let report = run(&inst, Variant::MhPlus, &RunParams::default()).unwrap();
        assert_eq!(report.upper_bound, 0.0);
        assert_eq!(report.gap, 0.0);
        let exact = solve_ir_exact(&inst, None, 60.0, false).unwrap();
        assert_eq!(exact.status, SolveStatus::Optimal);
        assert!(exact.objective.unwrap().abs() < 1e-9);
    }

    fn collecting_instance() -> Instance {
        // Two nodes accumulating enough that visiting beats purchasing.
        toy(
            vec![420.0, 380.0],
            vec![vec![200.0, 180.0], vec![150.0, 160.0]],
            vec![
                vec![0.0, 4.0, 5.0],
                vec![4.0, 0.0, 3.0],
                vec![5.0, 3.0, 0.0],
            ],
        )
    }

    #[test]
    fn mh_plus_dominates_mh_and_pools_match() {
        let inst = collecting_instance();
        let params = RunParams::default();
        let mh = run(&inst, Variant::Mh, &params).unwrap();
        let plus = run(&inst, Variant::MhPlus, &params).unwrap();
        assert!(plus.upper_bound <= mh.upper_bound + 1e-12);
        assert_eq!(mh.pool_y, plus.pool_y);
        assert_eq!(mh.lower_bound, plus.lower_bound);
        assert!(check_feasibility(&mh.best, &inst).is_feasible());
        assert!(check_feasibility(&plus.best, &inst).is_feasible());
    }

    /// Exhaustive IR optimum: every visit pattern, completed with full
    /// collection + just-in-time purchasing, routed optimally by brute
    /// force over partitions and orders.
    fn ir_oracle(instance: &Instance) -> f64 {
        let (n, tau, q) = (instance.n, instance.tau, instance.capacity);
        let patterns = 1u32 << (n * tau);
        let mut best = f64::INFINITY;
        for mask in 0..patterns {
            let mut y = vec![vec![0u8; tau]; n + 1];
            for i in 0..n {
                for t in 0..tau {
                    y[i + 1][t] = ((mask >> (i * tau + t)) & 1) as u8;
                }
            }
            let Ok(partial) = crate::solution::PartialSolution::from_visits(instance, &y)
            else {
                continue;
            };
            if partial.w.iter().flatten().any(|&wv| wv > q + 1e-9) {
                continue; // a single visit cannot exceed one vehicle here
            }
            let mut cost = instance.purchase_cost * partial.purchase.iter().sum::<f64>()
                + instance.holding_cost
                    * (1..=tau).map(|t| partial.inventory[0][t]).sum::<f64>();
            for t in 0..tau {
                let visited = partial.visited(t);
                if visited.is_empty() {
                    continue;
                }
                cost += routing_oracle(&visited, &partial.w, t, instance);
            }
            best = best.min(cost);
        }
        best
    }

    fn routing_oracle(
        visited: &[usize],
        w: &[Vec<f64>],
        t: usize,
        instance: &Instance,
    ) -> f64 {
        // Partition into capacity-feasible groups; optimal order per group.
        fn go(
            k: usize,
            visited: &[usize],
            w: &[Vec<f64>],
            t: usize,
            parts: &mut Vec<(Vec<usize>, f64)>,
            instance: &Instance,
            best: &mut f64,
        ) {
            if k == visited.len() {
                let mut cost = instance.vehicle_cost * parts.len() as f64;
                for (part, _) in parts.iter() {
                    let mut tour_best = f64::INFINITY;
                    let mut perm = part.clone();
                    perms(&mut perm, 0, &mut |p| {
                        let mut len = instance.d(0, p[0]);
                        for win in p.windows(2) {
                            len += instance.d(win[0], win[1]);
                        }
                        len += instance.d(p[p.len() - 1], 0);
                        tour_best = tour_best.min(len);
                    });
                    cost += instance.traveling_cost * tour_best;
                }
                *best = best.min(cost);
                return;
            }
            let node = visited[k];
            for b in 0..parts.len() {
                if parts[b].1 + w[node][t] <= instance.capacity + 1e-9 {
                    parts[b].0.push(node);
                    parts[b].1 += w[node][t];
                    go(k + 1, visited, w, t, parts, instance, best);
                    parts[b].1 -= w[node][t];
                    parts[b].0.pop();
                }
            }
            parts.push((vec![node], w[node][t]));
            go(k + 1, visited, w, t, parts, instance, best);
            parts.pop();
        }
        fn perms(items: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
            if k == items.len() {
                f(items);
                return;
            }
            for i in k..items.len() {
                items.swap(k, i);
                perms(items, k + 1, f);
                items.swap(k, i);
            }
        }
        let mut best = f64::INFINITY;
        go(0, visited, w, t, &mut Vec::new(), instance, &mut best);
        best
    }

    #[test]
    fn exact_ir_matches_enumeration() {
        let inst = collecting_instance();
        let oracle = ir_oracle(&inst);
        let outcome = solve_ir_exact(&inst, None, 300.0, false).unwrap();
        assert_eq!(outcome.status, SolveStatus::Optimal);
        assert!(
            (outcome.objective.unwrap() - oracle).abs() < 1e-6,
            "exact {} vs oracle {}",
            outcome.objective.unwrap(),
            oracle
        );
    }

    #[test]
    fn bounds_sandwich_the_exact_optimum() {
        let inst = collecting_instance();
        let report = run(&inst, Variant::MhPlus, &RunParams::default()).unwrap();
        let exact = solve_ir_exact(&inst, Some(&report.best), 300.0, false).unwrap();
        assert_eq!(exact.status, SolveStatus::Optimal);
        let opt = exact.objective.unwrap();
        assert!(report.lower_bound <= opt + 1e-6, "z_lb {} opt {}", report.lower_bound, opt);
        assert!(opt <= report.upper_bound + 1e-6, "opt {} z_ub {}", opt, report.upper_bound);
    }

    #[test]
    fn size_guard_refuses_large_exact_solves() {
        let n = 9;
        let dist = vec![vec![1.0; n + 1]; n + 1];
        let mut d = dist;
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        let inst = toy(vec![100.0], vec![vec![10.0]; n], d);
        let err = solve_ir_exact(&inst, None, 10.0, false).unwrap_err();
        assert!(matches!(err, OrchestratorError::SizeGuard { n: 9, tau: 1 }));
    }

    #[test]
    fn stats_are_replayable_from_pool_patterns() {
        let inst = collecting_instance();
        let report = run(&inst, Variant::MhPlus, &RunParams::default()).unwrap();
        let mut replayed = PartitionStats::default();
        for y_rows in &report.pool_y {
            let mut y = vec![vec![0u8; inst.tau]];
            y.extend(y_rows.iter().cloned());
            let partial =
                crate::solution::PartialSolution::from_visits(&inst, &y).unwrap();
            let (_, stats, _) = crate::construction::routes_construction(
                &partial,
                &inst,
                report.params.mip_time_limit,
            );
            replayed += stats;
        }
        assert_eq!(replayed, report.stats);
        assert_eq!(shape_stats(&report.best.routes), report.shape);
    }

    #[test]
    fn runs_are_deterministic() {
        let inst = collecting_instance();
        let a = run(&inst, Variant::MhPlus, &RunParams::default()).unwrap();
        let b = run(&inst, Variant::MhPlus, &RunParams::default()).unwrap();
        assert_eq!(a.upper_bound.to_bits(), b.upper_bound.to_bits());
        assert_eq!(a.lower_bound.to_bits(), b.lower_bound.to_bits());
        assert_eq!(a.times, b.times);
        assert_eq!(a.pool_y, b.pool_y);
        assert_eq!(a.best.partial.y, b.best.partial.y);
    }
}
