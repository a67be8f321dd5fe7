//! Branch and bound over the bounded-variable simplex.
//!
//! Search policy: best-bound node selection (ties broken by creation order),
//! most-fractional branching (ties broken by smallest variable index) within
//! the highest branching-priority class that still has a fractional variable.
//! Children inherit the parent's optimal basis, so a popped node costs one
//! refactorization plus a warm LP solve. All pruning uses the relative gap
//! tolerance, and the reported dual bound is valid even when the budget runs
//! out mid-search.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;

use super::simplex::{Basis, LpOutcome, LpProblem, Simplex, WorkMeter};
use super::{
    MilpError, MilpModel, ObjSense, RowSense, SolveOutcome, SolveParams, SolveStatus, VarKind,
    INTEGRALITY_TOL, WARM_START_TOL,
};

/// Improvements smaller than this do not replace the incumbent, which keeps
/// the pool callback strictly monotone.
const IMPROVE_EPS: f64 = 1e-9;

/// Rounding dives run this often (in processed nodes) while the search has
/// not yet produced an incumbent of its own; pure best-bound search on models
/// with many binaries can otherwise go a whole budget without completing a
/// single integer assignment.
const DIVE_COLD_INTERVAL: u64 = 8;
/// Dive cadence once a search-found incumbent exists; later dives mostly
/// tighten the cutoff and feed the incumbent pool.
const DIVE_WARM_INTERVAL: u64 = 32;
/// Consecutive improving dives allowed at one trigger before resuming the
/// tree; each re-dive anchors on the incumbent it just produced.
const MAX_DIVES_PER_TRIGGER: u32 = 3;
/// Rounds of Gomory cuts at the root and cuts accepted per round.
const MAX_CUT_ROUNDS: u32 = 16;
const CUTS_PER_ROUND: usize = 24;
/// Stop cutting once a round lifts the root objective by less than this,
/// relative to its magnitude.
const CUT_TAILOFF: f64 = 1e-6;

fn sign_of(model: &MilpModel) -> f64 {
    match model.objective_sense() {
        ObjSense::Minimize => 1.0,
        ObjSense::Maximize => -1.0,
    }
}

/// Builds the computational form: minimize `sign * c`, slack bounds encode
/// row senses. With `tighten`, integer bounds are snapped to the integral
/// lattice (valid for the MILP, not for a pure relaxation report).
fn build_simplex(model: &MilpModel, sign: f64, tighten: bool) -> Simplex {
    let nv = model.vars.len();
    let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); nv];
    for (i, row) in model.rows.iter().enumerate() {
        for &(j, c) in &row.coeffs {
            cols[j as usize].push((i as u32, c));
        }
    }
    let obj: Vec<f64> = model.vars.iter().map(|v| sign * v.obj).collect();
    let rhs: Vec<f64> = model.rows.iter().map(|r| r.rhs).collect();
    let lp = LpProblem::new(cols, obj, rhs);
    let mut lb: Vec<f64> = model.vars.iter().map(|v| v.lb).collect();
    let mut ub: Vec<f64> = model.vars.iter().map(|v| v.ub).collect();
    if tighten {
        for (j, v) in model.vars.iter().enumerate() {
            if v.kind != VarKind::Continuous {
                lb[j] = (lb[j] - INTEGRALITY_TOL).ceil();
                ub[j] = (ub[j] + INTEGRALITY_TOL).floor();
            }
        }
    }
    let mut s = Simplex::new(lp, lb, ub);
    for (i, row) in model.rows.iter().enumerate() {
        let j = nv + i;
        match row.sense {
            RowSense::Le => s.set_bound(j, 0.0, f64::INFINITY),
            RowSense::Ge => s.set_bound(j, f64::NEG_INFINITY, 0.0),
            RowSense::Eq => s.set_bound(j, 0.0, 0.0),
        }
    }
    s
}

fn numerical(model: &MilpModel, message: impl Into<String>) -> MilpError {
    MilpError::Numerical { model: model.name().to_string(), message: message.into() }
}

pub(super) fn solve_relaxation(model: &MilpModel) -> Result<SolveOutcome, MilpError> {
    let sign = sign_of(model);
    let mut s = build_simplex(model, sign, false);
    let mut meter = WorkMeter::unlimited();
    let outcome = s.solve(&mut meter).map_err(|e| numerical(model, e.0))?;
    let out = match outcome {
        LpOutcome::Optimal => {
            let x = s.structural_values();
            let obj = model.objective_value(&x);
            SolveOutcome {
                status: SolveStatus::Optimal,
                assignment: Some(x),
                objective: Some(obj),
                dual_bound: obj,
                nodes: 1,
                simplex_iterations: s.iterations,
                work_seconds: meter.seconds(),
            }
        }
        LpOutcome::Infeasible => SolveOutcome {
            status: SolveStatus::Infeasible,
            assignment: None,
            objective: None,
            dual_bound: sign * f64::INFINITY,
            nodes: 1,
            simplex_iterations: s.iterations,
            work_seconds: meter.seconds(),
        },
        LpOutcome::Unbounded => SolveOutcome {
            status: SolveStatus::Unbounded,
            assignment: None,
            objective: None,
            dual_bound: sign * f64::NEG_INFINITY,
            nodes: 1,
            simplex_iterations: s.iterations,
            work_seconds: meter.seconds(),
        },
        LpOutcome::Budget => unreachable!("unlimited meter"),
    };
    Ok(out)
}

struct Node {
    /// Valid lower bound (internal minimize form) on the node's subtree.
    bound: f64,
    seq: u64,
    /// Bound tightenings accumulated from the root; applied in order, later
    /// entries for the same variable supersede earlier ones.
    changes: Rc<Vec<(u32, f64, f64)>>,
    /// Parent's optimal basis; the warm start for this node's LP.
    basis: Rc<Basis>,
}

/// Max-heap adapter: "greatest" is the smallest (bound, seq).
struct MinNode(Node);

impl PartialEq for MinNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for MinNode {}
impl PartialOrd for MinNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for MinNode {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .bound
            .total_cmp(&self.0.bound)
            .then_with(|| other.0.seq.cmp(&self.0.seq))
    }
}

fn gap_abs(incumbent: f64, rel_gap: f64) -> f64 {
    rel_gap * incumbent.abs().max(1.0)
}

/// Reduced costs below this carry no usable fixing information.
const RC_DUST: f64 = 1e-7;

/// Reduced-cost bound tightening from the root LP: a nonbasic integer with
/// reduced cost `d` cannot move more than `(cutoff - root_obj) / d` from its
/// bound in any solution better than the cutoff. Tightens the root bound box
/// (and the live simplex, except variables overridden by the active node) and
/// logs the cheapest excluded point's LP certificate into `dual_floor`, which
/// keeps the reported dual bound valid.
#[allow(clippy::too_many_arguments)]
fn apply_rc_fixing(
    s: &mut Simplex,
    root_lb: &mut [f64],
    root_ub: &mut [f64],
    active: &[(u32, f64, f64)],
    entries: &[(usize, f64, f64, bool)],
    root_obj: f64,
    cutoff: f64,
    dual_floor: &mut f64,
) {
    let slack = cutoff - root_obj;
    if !(slack > 0.0) || !slack.is_finite() {
        return;
    }
    for &(j, d, anchor, tightens_upper) in entries {
        let allowed = (slack / d + INTEGRALITY_TOL).floor();
        if tightens_upper {
            let nu = anchor + allowed;
            if nu < root_ub[j] {
                *dual_floor = dual_floor.min(root_obj + d * (allowed + 1.0));
                root_ub[j] = nu;
                if !active.iter().any(|&(a, ..)| a as usize == j) {
                    s.set_bound(j, s.lb[j], nu);
                }
            }
        } else {
            let nl = anchor - allowed;
            if nl > root_lb[j] {
                *dual_floor = dual_floor.min(root_obj + d * (allowed + 1.0));
                root_lb[j] = nl;
                if !active.iter().any(|&(a, ..)| a as usize == j) {
                    s.set_bound(j, nl, s.ub[j]);
                }
            }
        }
    }
}

/// Rounds the integer coordinates of `xi` and installs it as the incumbent if
/// it improves strictly, notifying the pool callback. Returns whether it was
/// accepted. `xi` must be feasible for the current (restricted) LP with every
/// integer variable within `INTEGRALITY_TOL` of the lattice.
fn accept_candidate(
    model: &MilpModel,
    sign: f64,
    int_vars: &[usize],
    incumbent: &mut Option<(Vec<f64>, f64)>,
    callback: &mut Option<&mut dyn FnMut(&[f64], f64)>,
    mut xi: Vec<f64>,
) -> bool {
    for &j in int_vars {
        xi[j] = xi[j].round();
    }
    let obj = model.objective_value(&xi);
    let internal = sign * obj;
    let improving = incumbent.as_ref().map_or(true, |(_, inc)| internal < inc - IMPROVE_EPS);
    if improving {
        if let Some(cb) = callback.as_mut() {
            cb(&xi, obj);
        }
        *incumbent = Some((xi, internal));
    }
    improving
}

/// Fractional rounding dive from the current LP optimum: repeatedly fixes the
/// fractional integer variable closest to the lattice at its rounded value
/// (retrying the other side once if that kills the LP) and re-solves. Ends
/// with an integer point, a dead end, or an exhausted budget. Returns the
/// point, if any, and the variables whose bounds were tightened — the caller
/// must restore those. A numerical failure aborts the dive, not the search.
///
/// With an `anchor` (the incumbent), integer variables where the node LP
/// already sits on the anchor's value are frozen there first, so the rounding
/// only has to resolve the disagreements — a relaxation-induced neighborhood
/// around the incumbent.
fn dive(
    s: &mut Simplex,
    meter: &mut WorkMeter,
    int_vars: &[usize],
    anchor: Option<&[f64]>,
    cutoff: Option<f64>,
    rel_gap: f64,
) -> (Option<Vec<f64>>, Vec<usize>) {
    let mut touched = Vec::new();
    if let Some(inc) = anchor {
        let x = s.structural_values();
        for &j in int_vars {
            if (x[j] - inc[j]).abs() <= INTEGRALITY_TOL {
                s.set_bound(j, inc[j], inc[j]);
                touched.push(j);
            }
        }
        if !touched.is_empty() {
            match s.solve(meter) {
                Ok(LpOutcome::Optimal) => {
                    if cutoff.is_some_and(|c| s.objective() >= c - gap_abs(c, rel_gap)) {
                        return (None, touched);
                    }
                }
                _ => return (None, touched),
            }
        }
    }
    loop {
        if meter.exhausted() {
            return (None, touched);
        }
        let x = s.structural_values();
        let mut pick: Option<(f64, usize)> = None;
        for &j in int_vars {
            let frac = x[j] - x[j].floor();
            let dist = frac.min(1.0 - frac);
            if dist <= INTEGRALITY_TOL {
                continue;
            }
            if pick.is_none_or(|(bd, _)| dist < bd) {
                pick = Some((dist, j));
            }
        }
        let Some((_, j)) = pick else {
            return (Some(x), touched);
        };
        let v = x[j];
        let near = v.round();
        let far = if near > v { v.floor() } else { v.ceil() };
        touched.push(j);
        let mut landed = false;
        for target in [near, far] {
            s.set_bound(j, target, target);
            match s.solve(meter) {
                Ok(LpOutcome::Optimal) => {
                    let pruned =
                        cutoff.is_some_and(|c| s.objective() >= c - gap_abs(c, rel_gap));
                    if !pruned {
                        landed = true;
                        break;
                    }
                }
                Ok(LpOutcome::Infeasible) | Ok(LpOutcome::Unbounded) => {}
                Ok(LpOutcome::Budget) | Err(_) => return (None, touched),
            }
        }
        if !landed {
            return (None, touched);
        }
    }
}

pub(super) fn solve(model: &MilpModel, mut params: SolveParams<'_>) -> Result<SolveOutcome, MilpError> {
    let sign = sign_of(model);

    // Warm start: validate against the model, clean integers, install as the
    // first incumbent. Internal objectives are in minimize form.
    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    if let Some(ws) = params.warm_start.take() {
        if ws.len() != model.num_vars() {
            return Err(MilpError::InvalidWarmStart {
                model: model.name().to_string(),
                message: format!(
                    "expected {} values, got {}",
                    model.num_vars(),
                    ws.len()
                ),
            });
        }
        model
            .check_assignment(&ws, WARM_START_TOL)
            .map_err(|message| MilpError::InvalidWarmStart {
                model: model.name().to_string(),
                message,
            })?;
        let mut x = ws;
        for (j, v) in model.vars.iter().enumerate() {
            if v.kind != VarKind::Continuous {
                x[j] = x[j].round();
            }
        }
        let obj = model.objective_value(&x);
        if let Some(cb) = params.pool_callback.as_mut() {
            cb(&x, obj);
        }
        incumbent = Some((x, sign * obj));
    }

    let mut meter = WorkMeter::new(params.time_limit);
    let mut s = build_simplex(model, sign, true);

    // Lattice tightening can empty an integer domain outright.
    if (0..model.num_vars()).any(|j| s.lb[j] > s.ub[j]) {
        debug_assert!(incumbent.is_none(), "warm start passed an empty domain");
        return Ok(SolveOutcome {
            status: SolveStatus::Infeasible,
            assignment: None,
            objective: None,
            dual_bound: sign * f64::INFINITY,
            nodes: 0,
            simplex_iterations: 0,
            work_seconds: meter.seconds(),
        });
    }

    let int_vars: Vec<usize> = model
        .vars
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind != VarKind::Continuous)
        .map(|(j, _)| j)
        .collect();

    let mut root_lb = s.lb.clone();
    let mut root_ub = s.ub.clone();

    // Root reduced-cost certificates for bound tightening, filled once the
    // root LP (after cuts) is optimal: (var, |d|, anchor bound, side).
    let mut rc_entries: Vec<(usize, f64, f64, bool)> = Vec::new();
    let mut rc_root = f64::NEG_INFINITY;

    let mut heap = BinaryHeap::new();
    heap.push(MinNode(Node {
        bound: f64::NEG_INFINITY,
        seq: 0,
        changes: Rc::new(Vec::new()),
        basis: Rc::new(s.snapshot()),
    }));
    let mut seq: u64 = 0;
    let mut active: Rc<Vec<(u32, f64, f64)>> = Rc::new(Vec::new());
    let mut nodes_solved: u64 = 0;
    // A warm-start incumbent prunes but does not steer: it is a feasibility
    // guarantee, often far from optimal, and anchoring dives on it would lock
    // the rounding into its pattern.
    let mut incumbent_from_search = false;
    // Smallest subtree bound discarded by the gap cutoff; part of the final
    // dual bound.
    let mut dual_floor = f64::INFINITY;
    let mut interrupted: Option<f64> = None;
    let mut unbounded = false;

    'search: while let Some(MinNode(node)) = heap.pop() {
        if let Some((_, inc)) = &incumbent {
            if node.bound >= inc - gap_abs(*inc, params.rel_gap) {
                // Best-bound order: every remaining node is at least as bad.
                dual_floor = dual_floor.min(node.bound);
                break;
            }
        }
        if meter.exhausted() {
            interrupted = Some(node.bound);
            break;
        }

        if !Rc::ptr_eq(&active, &node.changes) {
            for &(j, ..) in active.iter() {
                s.set_bound(j as usize, root_lb[j as usize], root_ub[j as usize]);
            }
            // Intersect with the root box: reduced-cost fixing may have
            // tightened it after this node was created, and can empty it.
            let mut empty = false;
            for &(j, l, u) in node.changes.iter() {
                let j = j as usize;
                let (nl, nu) = (l.max(root_lb[j]), u.min(root_ub[j]));
                empty |= nl > nu;
                s.set_bound(j, nl.min(nu), nu);
            }
            active = Rc::clone(&node.changes);
            if empty {
                continue;
            }
        }
        if !s.current_basis_is(&node.basis) && s.install(&node.basis, &mut meter).is_err() {
            s.reset_to_slack_basis(&mut meter);
        }

        nodes_solved += 1;
        let outcome = s.solve(&mut meter).map_err(|e| numerical(model, e.0))?;
        match outcome {
            LpOutcome::Budget => {
                interrupted = Some(node.bound);
                break;
            }
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded => {
                if node.changes.is_empty() {
                    unbounded = true;
                    break;
                }
                return Err(numerical(model, "child LP reported an unbounded ray"));
            }
            LpOutcome::Optimal => {}
        }

        // Root cut rounds: Gomory cuts from the optimal tableau raise the
        // dual bound for the whole tree, and every later node inherits the
        // added rows through the shared simplex.
        if node.changes.is_empty() {
            let is_int: Vec<bool> =
                model.vars.iter().map(|v| v.kind != VarKind::Continuous).collect();
            let mut prev = s.objective();
            for _ in 0..MAX_CUT_ROUNDS {
                if meter.exhausted() {
                    break;
                }
                let cuts = s
                    .gmi_cuts(&is_int, CUTS_PER_ROUND, &mut meter)
                    .map_err(|e| numerical(model, e.0))?;
                if cuts.is_empty() {
                    break;
                }
                s.add_le_rows(&cuts, &mut meter).map_err(|e| numerical(model, e.0))?;
                root_lb.extend_from_slice(&s.lb[root_lb.len()..]);
                root_ub.extend_from_slice(&s.ub[root_ub.len()..]);
                match s.solve(&mut meter).map_err(|e| numerical(model, e.0))? {
                    LpOutcome::Optimal => {}
                    LpOutcome::Budget => {
                        // The last optimal root value is still a valid bound.
                        interrupted = Some(prev);
                        break 'search;
                    }
                    LpOutcome::Infeasible => {
                        if incumbent.is_some() {
                            // Valid cuts cannot exclude an integer-feasible
                            // incumbent; an empty LP here means the numerics
                            // went off the rails.
                            return Err(numerical(
                                model,
                                "root LP became infeasible after cuts",
                            ));
                        }
                        continue 'search;
                    }
                    LpOutcome::Unbounded => {
                        return Err(numerical(model, "root LP became unbounded after cuts"));
                    }
                }
                let cur = s.objective();
                let done = cur - prev < CUT_TAILOFF * (1.0 + prev.abs());
                prev = cur;
                if done {
                    break;
                }
            }

            // Root reduced costs turn every later cutoff improvement into a
            // global bound tightening.
            let (d, side) = s.reduced_costs(&mut meter);
            rc_root = s.objective();
            for &j in &int_vars {
                if root_lb[j] >= root_ub[j] {
                    continue;
                }
                match side[j] {
                    Some(true) if d[j] > RC_DUST => {
                        rc_entries.push((j, d[j], s.lb[j], true));
                    }
                    Some(false) if d[j] < -RC_DUST => {
                        rc_entries.push((j, -d[j], s.ub[j], false));
                    }
                    _ => {}
                }
            }
            if let Some((_, inc)) = &incumbent {
                let cutoff = inc - gap_abs(*inc, params.rel_gap);
                apply_rc_fixing(
                    &mut s,
                    &mut root_lb,
                    &mut root_ub,
                    &active,
                    &rc_entries,
                    rc_root,
                    cutoff,
                    &mut dual_floor,
                );
            }
        }

        let obj = s.objective();
        if let Some((_, inc)) = &incumbent {
            if obj >= inc - gap_abs(*inc, params.rel_gap) {
                dual_floor = dual_floor.min(obj);
                continue;
            }
        }

        let x = s.structural_values();
        let mut pick: Option<(i32, f64, usize)> = None;
        for &j in &int_vars {
            let frac = x[j] - x[j].floor();
            let dist = frac.min(1.0 - frac);
            if dist <= INTEGRALITY_TOL {
                continue;
            }
            let prio = model.vars[j].priority;
            let better = match pick {
                None => true,
                Some((bp, bd, _)) => prio > bp || (prio == bp && dist > bd),
            };
            if better {
                pick = Some((prio, dist, j));
            }
        }

        match pick {
            None => {
                let improving = accept_candidate(
                    model,
                    sign,
                    &int_vars,
                    &mut incumbent,
                    &mut params.pool_callback,
                    x,
                );
                incumbent_from_search |= improving;
                if !improving {
                    dual_floor = dual_floor.min(obj);
                } else if let Some((_, inc)) = &incumbent {
                    let cutoff = inc - gap_abs(*inc, params.rel_gap);
                    apply_rc_fixing(
                        &mut s,
                        &mut root_lb,
                        &mut root_ub,
                        &active,
                        &rc_entries,
                        rc_root,
                        cutoff,
                        &mut dual_floor,
                    );
                }
            }
            Some((_, _, j)) => {
                let v = x[j];
                let basis = Rc::new(s.snapshot());
                let (cl, cu) = (s.lb[j], s.ub[j]);
                for (nl, nu) in [(cl, v.floor()), (v.ceil(), cu)] {
                    seq += 1;
                    let mut ch = (*node.changes).clone();
                    ch.push((j as u32, nl, nu));
                    heap.push(MinNode(Node {
                        bound: obj,
                        seq,
                        changes: Rc::new(ch),
                        basis: Rc::clone(&basis),
                    }));
                }

                let interval = if incumbent_from_search {
                    DIVE_WARM_INTERVAL
                } else {
                    DIVE_COLD_INTERVAL
                };
                if nodes_solved == 1 || nodes_solved % interval == 0 {
                    for round in 0..MAX_DIVES_PER_TRIGGER {
                        // A re-dive starts from the node optimum again; the
                        // restore below only resets bounds, not the basis.
                        if round > 0 && !matches!(s.solve(&mut meter), Ok(LpOutcome::Optimal)) {
                            break;
                        }
                        let cutoff = incumbent.as_ref().map(|&(_, inc)| inc);
                        let anchor = if incumbent_from_search {
                            incumbent.as_ref().map(|(x, _)| x.clone())
                        } else {
                            None
                        };
                        let (found, touched) = dive(
                            &mut s,
                            &mut meter,
                            &int_vars,
                            anchor.as_deref(),
                            cutoff,
                            params.rel_gap,
                        );
                        let improved = found.is_some_and(|xi| {
                            accept_candidate(
                                model,
                                sign,
                                &int_vars,
                                &mut incumbent,
                                &mut params.pool_callback,
                                xi,
                            )
                        });
                        incumbent_from_search |= improved;
                        // The dive's fixes are heuristic, not part of this
                        // node's state: restore root bounds, then replay the
                        // node's own.
                        for &t in &touched {
                            s.set_bound(t, root_lb[t], root_ub[t]);
                        }
                        for &(t, l, u) in active.iter() {
                            let t = t as usize;
                            let (nl, nu) = (l.max(root_lb[t]), u.min(root_ub[t]));
                            s.set_bound(t, nl.min(nu), nu);
                        }
                        if improved {
                            if let Some((_, inc)) = &incumbent {
                                let cutoff = inc - gap_abs(*inc, params.rel_gap);
                                apply_rc_fixing(
                                    &mut s,
                                    &mut root_lb,
                                    &mut root_ub,
                                    &active,
                                    &rc_entries,
                                    rc_root,
                                    cutoff,
                                    &mut dual_floor,
                                );
                            }
                        }
                        if !improved || meter.exhausted() {
                            break;
                        }
                    }
                }
            }
        }
    }

    let mut open_min = interrupted.unwrap_or(f64::INFINITY);
    for MinNode(n) in heap {
        open_min = open_min.min(n.bound);
    }
    let dual_internal = match (&incumbent, unbounded) {
        (_, true) => f64::NEG_INFINITY,
        (Some((_, inc)), false) => inc.min(open_min).min(dual_floor),
        (None, false) => open_min.min(dual_floor),
    };

    let status = if unbounded {
        SolveStatus::Unbounded
    } else if interrupted.is_some() {
        SolveStatus::FeasibleTimeLimit
    } else if incumbent.is_some() {
        SolveStatus::Optimal
    } else {
        SolveStatus::Infeasible
    };
    let (assignment, objective) = match incumbent {
        Some((x, internal)) => (Some(x), Some(sign * internal)),
        None => (None, None),
    };
    Ok(SolveOutcome {
        status,
        assignment,
        objective,
        dual_bound: sign * dual_internal,
        nodes: nodes_solved,
        simplex_iterations: s.iterations,
        work_seconds: meter.seconds(),
    })
}
