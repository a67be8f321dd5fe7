//! Partial and complete solutions, cost evaluation, and the feasibility
//! checker for formulation IR.
//!
//! Arrays indexed by node use `n + 1` rows with row 0 for the depot (all
//! zero for Y/W); period-indexed arrays use `0..tau` except inventories,
//! which carry `tau + 1` entries so the cyclic condition I[i][0] = I[i][tau]
//! is stored explicitly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;

/// Absolute tolerance for equality constraints, matching the solver's
/// relative optimality tolerance of 1e-6.
pub const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SolutionError {
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("malformed route in period {t}: {reason}")]
    MalformedRoute { t: usize, reason: String },
    #[error("visit pattern collects {collected} liters but the cycle only requires {required}")]
    OverCollection { collected: f64, required: f64 },
    #[error("upper bound must be positive, got {0}")]
    NonPositiveUpper(f64),
    #[error("lower bound {lower} exceeds upper bound {upper} beyond tolerance (solver bug)")]
    BoundCrossing { upper: f64, lower: f64 },
}

/// Collection plan without routes: who is visited when and how the
/// inventories and purchases evolve over the cyclic horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSolution {
    /// Visit indicators Y[i][t], `(n+1) x tau`; row 0 (depot) is all zero.
    pub y: Vec<Vec<u8>>,
    /// Ever-visited indicators Z[i], length `n+1`.
    pub z: Vec<u8>,
    /// Collected liters W[i][t], `(n+1) x tau`.
    pub w: Vec<Vec<f64>>,
    /// Inventories I[i][t], `(n+1) x (tau+1)` with I[i][0] = I[i][tau].
    pub inventory: Vec<Vec<f64>>,
    /// Purchased liters S[t], length tau.
    pub purchase: Vec<f64>,
    /// Vehicle counts V[t] when produced by the IRR relaxation.
    pub vehicles: Option<Vec<u32>>,
}

impl PartialSolution {
    /// The do-nothing plan: no visits, no collections, purchases covering
    /// every requirement just in time.
    pub fn purchase_only(instance: &Instance) -> PartialSolution {
        let y = vec![vec![0u8; instance.tau]; instance.n + 1];
        PartialSolution::from_visits(instance, &y).expect("purchasing alone is always feasible")
    }

    /// Completes a visit pattern `y` (`(n+1) x tau`, row 0 ignored) into the
    /// canonical partial solution: visits collect everything accumulated
    /// since the previous visit (full collection, constraints (10)-(11)),
    /// never-visited nodes hold nothing, and depot purchases are made just
    /// in time, which is cost-minimal because the cycle fixes Σ S[t] =
    /// Σ r[t] - Σ W[i][t] and delaying a purchase never increases holding.
    ///
    /// Fails when the pattern collects more than the cycle requires, since
    /// constraint (13) then admits no cyclic depot inventory.
    pub fn from_visits(instance: &Instance, y: &[Vec<u8>]) -> Result<PartialSolution, SolutionError> {
        let (n, tau) = (instance.n, instance.tau);
        if y.len() != n + 1 || y.iter().any(|row| row.len() != tau) {
            return Err(SolutionError::Dimension(format!(
                "visit pattern must be {}x{}",
                n + 1,
                tau
            )));
        }
        let mut w = vec![vec![0.0; tau]; n + 1];
        let mut inventory = vec![vec![0.0; tau + 1]; n + 1];
        let mut z = vec![0u8; n + 1];

        for i in 1..=n {
            let visits: Vec<usize> = (0..tau).filter(|&t| y[i][t] != 0).collect();
            if visits.is_empty() {
                continue; // z=0: the node accumulates nothing and is never touched
            }
            z[i] = 1;
            // Walk one full cycle starting right after some visit, where the
            // inventory is exactly zero.
            let start = visits[0];
            let mut level = 0.0;
            for k in 1..=tau {
                let t = (start + k) % tau;
                level += instance.a(i, t);
                if y[i][t] != 0 {
                    w[i][t] = level;
                    level = 0.0;
                }
                inventory[i][t + 1] = level;
            }
            inventory[i][0] = inventory[i][tau];
        }

        let collected: f64 = w.iter().map(|row| row.iter().sum::<f64>()).sum();
        let required: f64 = instance.requirements.iter().sum();
        if collected > required + 1e-9 {
            return Err(SolutionError::OverCollection { collected, required });
        }

        // Depot: least cyclic inventory trajectory under just-in-time
        // purchasing. One pass from level 0 reaches the least fixed point's
        // end value; the second pass records the trajectory.
        let net: Vec<f64> = (0..tau)
            .map(|t| (1..=n).map(|i| w[i][t]).sum::<f64>() - instance.r(t))
            .collect();
        let mut level = 0.0;
        for t in 0..tau {
            level = (level + net[t]).max(0.0);
        }
        let mut purchase = vec![0.0; tau];
        inventory[0][0] = level;
        for t in 0..tau {
            let uncovered = level + net[t];
            purchase[t] = (-uncovered).max(0.0);
            level = uncovered.max(0.0);
            inventory[0][t + 1] = level;
        }
        debug_assert!((inventory[0][tau] - inventory[0][0]).abs() <= 1e-9 * (1.0 + level.abs()));
        inventory[0][0] = inventory[0][tau];

        let q = instance.capacity;
        let vehicles = (0..tau)
            .map(|t| {
                let load: f64 = (1..=n).map(|i| w[i][t]).sum();
                ceil_div(load, q)
            })
            .collect();

        Ok(PartialSolution {
            y: y.to_vec(),
            z,
            w,
            inventory,
            purchase,
            vehicles: Some(vehicles),
        })
    }

    /// Total liters collected in period `t`.
    pub fn collected(&self, t: usize) -> f64 {
        self.w.iter().map(|row| row[t]).sum()
    }

    /// Nodes visited in period `t`, ascending.
    pub fn visited(&self, t: usize) -> Vec<usize> {
        (1..self.y.len()).filter(|&i| self.y[i][t] != 0).collect()
    }
}

/// Number of capacity-Q vehicles needed for `load` liters, robust to float
/// dust on exact multiples.
pub fn ceil_div(load: f64, q: f64) -> u32 {
    debug_assert!(q > 0.0 && load >= -1e-9);
    (load / q - 1e-9).ceil().max(0.0) as u32
}

/// One vehicle tour in one period.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    /// Period index in `0..tau`.
    pub period: usize,
    /// Node sequence starting and ending at the depot 0.
    pub nodes: Vec<usize>,
    /// Liters collected along the route: Σ W[i][t] over interior nodes.
    pub load: f64,
}

impl Route {
    /// Interior (non-depot) nodes of the tour.
    pub fn interior(&self) -> &[usize] {
        &self.nodes[1..self.nodes.len() - 1]
    }

    /// Tour length under the instance metric.
    pub fn length(&self, instance: &Instance) -> f64 {
        self.nodes.windows(2).map(|e| instance.d(e[0], e[1])).sum()
    }
}

/// A routed solution: a partial solution plus per-period routes.
#[derive(Debug, Clone, PartialEq)]
pub struct CompleteSolution {
    pub partial: PartialSolution,
    /// routes[t] lists the period-t tours.
    pub routes: Vec<Vec<Route>>,
}

/// Objective decomposition following Eq. (1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub traveling: f64,
    pub vehicles: f64,
    pub holding: f64,
    pub purchase: f64,
    pub total: f64,
}

/// Evaluates the IR objective (1): traveling + vehicle usage + depot
/// holding + purchase costs.
pub fn evaluate_cost(
    solution: &CompleteSolution,
    instance: &Instance,
) -> Result<CostBreakdown, SolutionError> {
    let mut traveling = 0.0;
    let mut route_count = 0usize;
    for (t, period_routes) in solution.routes.iter().enumerate() {
        for route in period_routes {
            if route.nodes.len() < 2
                || route.nodes[0] != 0
                || *route.nodes.last().unwrap() != 0
            {
                return Err(SolutionError::MalformedRoute {
                    t,
                    reason: "route must start and end at the depot".into(),
                });
            }
            traveling += route.length(instance);
            route_count += 1;
        }
    }
    let traveling = instance.traveling_cost * traveling;
    let vehicles = instance.vehicle_cost * route_count as f64;
    let holding =
        instance.holding_cost * (1..=instance.tau).map(|t| solution.partial.inventory[0][t]).sum::<f64>();
    let purchase = instance.purchase_cost * solution.partial.purchase.iter().sum::<f64>();
    Ok(CostBreakdown {
        traveling,
        vehicles,
        holding,
        purchase,
        total: traveling + vehicles + holding + purchase,
    })
}

/// One violated constraint, with enough context to locate it.
#[derive(Debug, Clone)]
pub struct Violation {
    /// Constraint tag, e.g. "(10) full collection on visit".
    pub constraint: String,
    /// Where it happened, e.g. "i=3, t=2".
    pub location: String,
    /// How far past the tolerance the violation lies.
    pub magnitude: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} violated at {} by {:.3e}",
            self.constraint, self.location, self.magnitude
        )
    }
}

/// Outcome of [`check_feasibility`]: empty means feasible.
#[derive(Debug, Clone, Default)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, constraint: &str, location: String, magnitude: f64) {
        self.violations.push(Violation {
            constraint: constraint.to_string(),
            location,
            magnitude,
        });
    }
}

/// Checks a complete solution against every constraint of formulation IR.
///
/// The flow system (2)-(5) is certified by the equivalent condition "each
/// route's load fits the vehicle with full collection along it": on a single
/// route a feasible one-commodity flow exists iff the total load is at most
/// Q. Violations are reported, never panicked on.
pub fn check_feasibility(solution: &CompleteSolution, instance: &Instance) -> FeasibilityReport {
    let (n, tau) = (instance.n, instance.tau);
    let mut report = FeasibilityReport::default();
    let p = &solution.partial;

    if p.y.len() != n + 1
        || p.w.len() != n + 1
        || p.inventory.len() != n + 1
        || p.z.len() != n + 1
        || p.purchase.len() != tau
        || solution.routes.len() != tau
        || p.y.iter().any(|r| r.len() != tau)
        || p.w.iter().any(|r| r.len() != tau)
        || p.inventory.iter().any(|r| r.len() != tau + 1)
    {
        report.push("(shape) array dimensions", "solution".into(), f64::NAN);
        return report;
    }

    let totals = instance.total_accumulation();
    for t in 0..tau {
        if p.y[0][t] != 0 || p.w[0][t] != 0.0 {
            report.push("(shape) depot never visited", format!("t={}", t + 1), 1.0);
        }
    }
    for i in 0..=n {
        if p.z[i] > 1 {
            report.push("(18) Z binary", format!("i={i}"), f64::from(p.z[i]) - 1.0);
        }
        let visits: u32 = p.y[i].iter().map(|&v| u32::from(v)).sum();
        for t in 0..tau {
            if p.y[i][t] > 1 {
                report.push("(17) Y binary", format!("i={i}, t={}", t + 1), f64::from(p.y[i][t]) - 1.0);
            }
        }
        if i >= 1 {
            if u32::from(p.z[i]) > visits {
                report.push("(14) Z at most total visits", format!("i={i}"), 1.0);
            }
            for t in 0..tau {
                if p.y[i][t] > p.z[i] {
                    report.push("(15) Z covers each visit", format!("i={i}, t={}", t + 1), 1.0);
                }
            }
        }
        for t in 0..tau {
            if i >= 1 && p.w[i][t] < -FEAS_TOL {
                report.push("(20) W nonnegative", format!("i={i}, t={}", t + 1), -p.w[i][t]);
            }
        }
        for t in 0..=tau {
            if p.inventory[i][t] < -FEAS_TOL {
                report.push("(21) I nonnegative", format!("i={i}, t={t}"), -p.inventory[i][t]);
            }
        }
        let gap = (p.inventory[i][0] - p.inventory[i][tau]).abs();
        if gap > FEAS_TOL {
            report.push("(12) cyclic inventory", format!("i={i}"), gap);
        }
    }
    for t in 0..tau {
        if p.purchase[t] < -FEAS_TOL {
            report.push("(22) S nonnegative", format!("t={}", t + 1), -p.purchase[t]);
        }
    }

    for i in 1..=n {
        for t in 0..tau {
            let cap = totals[i] * f64::from(p.y[i][t]);
            if p.w[i][t] > cap + FEAS_TOL {
                report.push(
                    "(9) collection only when selected",
                    format!("i={i}, t={}", t + 1),
                    p.w[i][t] - cap,
                );
            }
            let inv_cap = totals[i] * (1.0 - f64::from(p.y[i][t]));
            if p.inventory[i][t + 1] > inv_cap + FEAS_TOL {
                report.push(
                    "(10) full collection on visit",
                    format!("i={i}, t={}", t + 1),
                    p.inventory[i][t + 1] - inv_cap,
                );
            }
            let balance = p.inventory[i][t + 1]
                - p.inventory[i][t]
                - instance.a(i, t) * f64::from(p.z[i])
                + p.w[i][t];
            if balance.abs() > FEAS_TOL {
                report.push(
                    "(11) node inventory balance",
                    format!("i={i}, t={}", t + 1),
                    balance.abs(),
                );
            }
        }
    }
    for t in 0..tau {
        let collected: f64 = (1..=n).map(|i| p.w[i][t]).sum();
        let balance =
            p.inventory[0][t + 1] - p.inventory[0][t] - collected - p.purchase[t] + instance.r(t);
        if balance.abs() > FEAS_TOL {
            report.push("(13) depot inventory balance", format!("t={}", t + 1), balance.abs());
        }
    }

    // Routing side: depot endpoints, distinct interiors, capacity, and the
    // exactly-once visit conditions (6)-(7).
    for t in 0..tau {
        let mut covered = vec![0usize; n + 1];
        for (k, route) in solution.routes[t].iter().enumerate() {
            let loc = format!("t={}, route {k}", t + 1);
            if route.period != t {
                report.push("(shape) route period", loc.clone(), f64::NAN);
            }
            if route.nodes.len() < 3
                || route.nodes[0] != 0
                || *route.nodes.last().unwrap() != 0
            {
                report.push("(8) depot start and return", loc.clone(), f64::NAN);
                continue;
            }
            let interior = route.interior();
            let mut seen = vec![false; n + 1];
            let mut load = 0.0;
            for &i in interior {
                if i == 0 || i > n {
                    report.push("(shape) interior node range", loc.clone(), f64::NAN);
                    continue;
                }
                if seen[i] {
                    report.push("(6) node visited once per route", loc.clone(), 1.0);
                }
                seen[i] = true;
                covered[i] += 1;
                load += p.w[i][t];
            }
            if (route.load - load).abs() > FEAS_TOL {
                report.push(
                    "(shape) route load field",
                    loc.clone(),
                    (route.load - load).abs(),
                );
            }
            if load > instance.capacity + FEAS_TOL {
                report.push(
                    "(3)-(5) vehicle capacity",
                    loc.clone(),
                    load - instance.capacity,
                );
            }
        }
        for i in 1..=n {
            let expected = usize::from(p.y[i][t] != 0);
            if covered[i] != expected {
                report.push(
                    "(6)-(7) visited exactly once when chosen",
                    format!("i={i}, t={}", t + 1),
                    (covered[i] as f64 - expected as f64).abs(),
                );
            }
        }
    }

    report
}

/// A-posteriori optimality gap: 100·(upper − lower)/upper percent.
pub fn optimality_gap(upper: f64, lower: f64) -> Result<f64, SolutionError> {
    if upper <= 0.0 {
        return Err(SolutionError::NonPositiveUpper(upper));
    }
    if lower > upper + 1e-9 {
        return Err(SolutionError::BoundCrossing { upper, lower });
    }
    if (upper - lower).abs() <= 1e-9 {
        return Ok(0.0);
    }
    Ok(100.0 * (upper - lower) / upper)
}

/// On-disk solution schema: Y/W over collection nodes only, inventories
/// including the depot row, routes as node sequences.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolutionFile {
    instance: String,
    y: Vec<Vec<u8>>,
    w: Vec<Vec<f64>>,
    inventory: Vec<Vec<f64>>,
    purchase: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vehicles: Option<Vec<u32>>,
    routes: Vec<Vec<Vec<usize>>>,
    cost: CostBreakdown,
}

impl CompleteSolution {
    /// A solution with no routes at all (used with purchase-only plans).
    pub fn unrouted(partial: PartialSolution, tau: usize) -> CompleteSolution {
        CompleteSolution {
            partial,
            routes: vec![Vec::new(); tau],
        }
    }

    /// Serializes to the solution file format, embedding the evaluated cost.
    pub fn serialize(&self, instance: &Instance) -> Result<String, SolutionError> {
        let cost = evaluate_cost(self, instance)?;
        let file = SolutionFile {
            instance: instance.name.clone(),
            y: self.partial.y[1..].to_vec(),
            w: self.partial.w[1..].to_vec(),
            inventory: self.partial.inventory.clone(),
            purchase: self.partial.purchase.clone(),
            vehicles: self.partial.vehicles.clone(),
            routes: self
                .routes
                .iter()
                .map(|rs| rs.iter().map(|r| r.nodes.clone()).collect())
                .collect(),
            cost,
        };
        let mut out = serde_json::to_string_pretty(&file).expect("solution serializes");
        out.push('\n');
        Ok(out)
    }

    /// Parses a solution file against its instance; returns the solution and
    /// the cost breakdown claimed by the file (callers recompute and compare).
    pub fn parse(
        text: &str,
        instance: &Instance,
    ) -> Result<(CompleteSolution, CostBreakdown), SolutionError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: SolutionFile =
            serde_path_to_error::deserialize(de).map_err(|e| SolutionError::Schema {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        let (n, tau) = (instance.n, instance.tau);
        if file.y.len() != n || file.w.len() != n {
            return Err(SolutionError::Dimension(format!(
                "y/w must have {n} rows for instance `{}`",
                instance.name
            )));
        }
        if file.routes.len() != tau {
            return Err(SolutionError::Dimension(format!("routes must have {tau} periods")));
        }
        let mut y = vec![vec![0u8; tau]; 1];
        y.extend(file.y);
        let mut w = vec![vec![0.0; tau]; 1];
        w.extend(file.w);
        if y.iter().any(|r| r.len() != tau) || w.iter().any(|r| r.len() != tau) {
            return Err(SolutionError::Dimension(format!("y/w rows must have length {tau}")));
        }
        let z = (0..=n)
            .map(|i| u8::from(i > 0 && y[i].iter().any(|&v| v != 0)))
            .collect();
        let routes = file
            .routes
            .into_iter()
            .enumerate()
            .map(|(t, rs)| {
                rs.into_iter()
                    .map(|nodes| {
                        let load = nodes
                            .iter()
                            .filter(|&&i| i != 0 && i <= n)
                            .map(|&i| w[i][t])
                            .sum();
                        Route { period: t, nodes, load }
                    })
                    .collect()
            })
            .collect();
        Ok((
            CompleteSolution {
                partial: PartialSolution {
                    y,
                    z,
                    w,
                    inventory: file.inventory,
                    purchase: file.purchase,
                    vehicles: file.vehicles,
                },
                routes,
            },
            file.cost,
        ))
    }
}
