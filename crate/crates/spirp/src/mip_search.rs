//! MIP-search: post-construction route improvement. Each period's routes
//! define a capacitated vehicle routing problem over the visited nodes; the
//! one-commodity-flow formulation (37)–(48) is solved exactly with the
//! current routes as warm start, so the routing cost can only decrease.

use crate::instance::Instance;
use crate::milp::{
    solve_milp, MilpModel, ObjSense, RowSense, SolveParams, VarId, VarKind,
};
use crate::solution::{ceil_div, CompleteSolution, Route};

/// How the vehicle floor lb_t of constraint (44) is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LbMode {
    /// Route count of the warm-start solution: the fleet size is fixed and
    /// the search only resequences (the paper observed exactly such
    /// "reorganizations of the routes").
    #[default]
    Literal,
    /// ⌈Σ Ŵ / Q⌉: permits reducing the fleet below the constructed count.
    Ceiling,
}

#[derive(Debug, Clone)]
pub struct MipSearchParams {
    /// Virtual-seconds budget per period solve.
    pub time_limit: f64,
    pub lb_mode: LbMode,
}

impl Default for MipSearchParams {
    fn default() -> Self {
        MipSearchParams { time_limit: 60.0, lb_mode: LbMode::Literal }
    }
}

/// One period's CVRP data: the visited nodes, their fixed collection
/// amounts, and the vehicle floor.
#[derive(Debug, Clone)]
pub struct CvrpInput {
    pub period: usize,
    /// Visited node ids, ascending.
    pub visited: Vec<usize>,
    /// Ŵ[i][t] aligned with `visited`.
    pub amounts: Vec<f64>,
    /// Vehicle floor lb_t for constraint (44).
    pub lb: u32,
}

/// Variable handles of a CVRP model: position 0 is the depot, positions
/// 1.. map to `CvrpInput::visited`. Diagonal entries are unused.
pub struct CvrpVars {
    /// x[i][j]: arc i→j traveled.
    pub x: Vec<Vec<Option<VarId>>>,
    /// f[i][j]: load carried on arc i→j.
    pub f: Vec<Vec<Option<VarId>>>,
}

/// Builds the one-commodity-flow CVRP (37)–(48) for one period.
pub fn build_cvrp(input: &CvrpInput, instance: &Instance) -> (MilpModel, CvrpVars) {
    assert_eq!(input.visited.len(), input.amounts.len());
    let m = input.visited.len() + 1;
    let node = |pos: usize| if pos == 0 { 0 } else { input.visited[pos - 1] };
    let amount = |pos: usize| if pos == 0 { 0.0 } else { input.amounts[pos - 1] };
    let q = instance.capacity;

    let mut model = MilpModel::new(format!("cvrp-t{}", input.period), ObjSense::Minimize);
    let mut x = vec![vec![None; m]; m];
    let mut f = vec![vec![None; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let dist = instance.d(node(i), node(j));
            let cost = instance.traveling_cost * dist
                + if i == 0 { instance.vehicle_cost } else { 0.0 };
            x[i][j] = Some(model.add_binary(format!("x{}_{}", node(i), node(j)), cost));
            f[i][j] = Some(model.add_var(
                format!("f{}_{}", node(i), node(j)),
                VarKind::Continuous,
                0.0,
                f64::INFINITY,
                0.0,
            ));
        }
    }

    // (38) flow balance: collected load joins the flow at each node.
    for i in 1..m {
        let mut coeffs = Vec::with_capacity(2 * (m - 1));
        for j in 0..m {
            if j != i {
                coeffs.push((f[i][j].unwrap(), 1.0));
                coeffs.push((f[j][i].unwrap(), -1.0));
            }
        }
        model.add_row(format!("bal{}", node(i)), &coeffs, RowSense::Eq, amount(i));
    }
    // (39) f ≤ (Q − Ŵ_j)·x and (40) f ≥ Ŵ_i·x.
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            model.add_row(
                format!("cap{}_{}", node(i), node(j)),
                &[(f[i][j].unwrap(), 1.0), (x[i][j].unwrap(), -(q - amount(j)))],
                RowSense::Le,
                0.0,
            );
            if i > 0 {
                model.add_row(
                    format!("min{}_{}", node(i), node(j)),
                    &[(f[i][j].unwrap(), 1.0), (x[i][j].unwrap(), -amount(i))],
                    RowSense::Ge,
                    0.0,
                );
            }
        }
    }
    // (41)–(42) degree constraints on collection nodes.
    for i in 1..m {
        let inbound: Vec<(VarId, f64)> =
            (0..m).filter(|&j| j != i).map(|j| (x[j][i].unwrap(), 1.0)).collect();
        model.add_row(format!("in{}", node(i)), &inbound, RowSense::Eq, 1.0);
        let outbound: Vec<(VarId, f64)> =
            (0..m).filter(|&j| j != i).map(|j| (x[i][j].unwrap(), 1.0)).collect();
        model.add_row(format!("out{}", node(i)), &outbound, RowSense::Eq, 1.0);
    }
    // (43) every departing vehicle returns.
    let mut depot: Vec<(VarId, f64)> = (1..m).map(|i| (x[i][0].unwrap(), 1.0)).collect();
    depot.extend((1..m).map(|i| (x[0][i].unwrap(), -1.0)));
    model.add_row("return", &depot, RowSense::Eq, 0.0);
    // (44) vehicle floor.
    let leaving: Vec<(VarId, f64)> = (1..m).map(|i| (x[0][i].unwrap(), 1.0)).collect();
    model.add_row("floor", &leaving, RowSense::Ge, f64::from(input.lb));

    (model, CvrpVars { x, f })
}

/// Encodes routes as a feasible (x, f) assignment: f on each arc is the
/// load collected so far along the route.
fn encode_warm(
    routes: &[Route],
    input: &CvrpInput,
    vars: &CvrpVars,
    num_vars: usize,
) -> Vec<f64> {
    let pos_of = |id: usize| -> usize {
        input.visited.iter().position(|&v| v == id).expect("route node not in CvrpInput") + 1
    };
    let mut warm = vec![0.0; num_vars];
    for route in routes {
        let mut prev = 0usize;
        let mut cum = 0.0;
        for &id in route.interior() {
            let pos = pos_of(id);
            warm[vars.x[prev][pos].unwrap().index()] = 1.0;
            warm[vars.f[prev][pos].unwrap().index()] = cum;
            cum += input.amounts[pos - 1];
            prev = pos;
        }
        warm[vars.x[prev][0].unwrap().index()] = 1.0;
        warm[vars.f[prev][0].unwrap().index()] = cum;
    }
    warm
}

/// Follows x-arcs from the depot to reconstruct routes. Returns None if the
/// arcs do not form depot-anchored tours covering every node exactly once
/// (possible only for degenerate zero-collection nodes, where (38) no longer
/// forbids subtours).
fn decode_routes(
    assignment: &[f64],
    input: &CvrpInput,
    vars: &CvrpVars,
) -> Option<Vec<Route>> {
    let m = input.visited.len() + 1;
    let arc = |i: usize, j: usize| assignment[vars.x[i][j].unwrap().index()] >= 0.5;
    let mut seen = vec![false; m];
    let mut routes = Vec::new();
    for start in 1..m {
        if !arc(0, start) {
            continue;
        }
        let mut nodes = vec![0usize];
        let mut load = 0.0;
        let mut cur = start;
        let mut closed = false;
        for _ in 0..m {
            if seen[cur] {
                return None; // node reached twice
            }
            seen[cur] = true;
            nodes.push(input.visited[cur - 1]);
            load += input.amounts[cur - 1];
            let next = (0..m).find(|&k| k != cur && arc(cur, k))?;
            if next == 0 {
                closed = true;
                break;
            }
            cur = next;
        }
        if !closed {
            return None; // walk never returned to the depot
        }
        nodes.push(0);
        routes.push(Route { period: input.period, nodes, load });
    }
    if seen[1..].iter().all(|&s| s) {
        Some(routes)
    } else {
        None // subtour disconnected from the depot
    }
}

fn period_cost(routes: &[Route], instance: &Instance) -> f64 {
    instance.traveling_cost * routes.iter().map(|r| r.length(instance)).sum::<f64>()
        + instance.vehicle_cost * routes.len() as f64
}

/// Algorithm 2 line 6: re-optimizes every period's routes with the exact
/// CVRP, warm-started from the current routes. Inventory, purchase, and
/// collection decisions are untouched; each period's routing + vehicle cost
/// never increases. Periods whose solve yields nothing better (or whose
/// incumbent cannot be decoded) keep their original routes.
pub fn improve_routes(
    solution: &CompleteSolution,
    instance: &Instance,
    params: &MipSearchParams,
) -> CompleteSolution {
    improve_routes_metered(solution, instance, params).0
}

/// As [`improve_routes`], also reporting the virtual seconds spent.
pub(crate) fn improve_routes_metered(
    solution: &CompleteSolution,
    instance: &Instance,
    params: &MipSearchParams,
) -> (CompleteSolution, f64) {
    let mut spent = 0.0;
    let mut improved = solution.clone();
    for t in 0..instance.tau {
        let routes = &solution.routes[t];
        if routes.is_empty() {
            continue;
        }
        let mut visited: Vec<usize> =
            routes.iter().flat_map(|r| r.interior().iter().copied()).collect();
        visited.sort_unstable();
        let amounts: Vec<f64> = visited.iter().map(|&i| solution.partial.w[i][t]).collect();
        let lb = match params.lb_mode {
            LbMode::Literal => routes.len() as u32,
            LbMode::Ceiling => ceil_div(amounts.iter().sum(), instance.capacity),
        };
        let input = CvrpInput { period: t, visited, amounts, lb };
        let (model, vars) = build_cvrp(&input, instance);
        let warm = encode_warm(routes, &input, &vars, model.num_vars());
        let outcome = solve_milp(
            &model,
            SolveParams {
                time_limit: params.time_limit,
                warm_start: Some(warm),
                ..SolveParams::default()
            },
        );
        let Ok(outcome) = outcome else {
            continue; // warm-start rejection: keep the period as constructed
        };
        spent += outcome.work_seconds;
        let Some(assignment) = outcome.assignment else {
            continue;
        };
        let Some(candidate) = decode_routes(&assignment, &input, &vars) else {
            continue;
        };
        if period_cost(&candidate, instance) < period_cost(routes, instance) - 1e-9 {
            improved.routes[t] = candidate;
        }
    }
    (improved, spent)
}
