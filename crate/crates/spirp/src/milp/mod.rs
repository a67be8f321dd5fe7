//! Mixed-integer linear models and a self-contained reference backend:
//! branch-and-bound with best-bound node selection over a bounded-variable
//! revised simplex.
//!
//! Determinism contract: solves are pure functions of (model, params).
//! Time limits are enforced on a deterministic work meter — a flop-count
//! proxy mapped to "virtual seconds" — so a budgeted solve returns the same
//! outcome on every run and every machine, which is what makes whole-run
//! reports byte-reproducible.

mod branch_bound;
mod simplex;

use std::io;

use thiserror::Error;

/// Feasibility tolerance of the reference backend.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Integrality tolerance: an LP value within this of an integer counts as
/// integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Tolerance when validating warm starts against the model.
pub const WARM_START_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("model `{model}` has no variables")]
    EmptyModel { model: String },
    #[error("model `{model}` is malformed: {message}")]
    InvalidModel { model: String, message: String },
    #[error("invalid warm start for `{model}`: {message}")]
    InvalidWarmStart { model: String, message: String },
    #[error("invalid solve parameters: {0}")]
    InvalidParams(String),
    #[error("numerical failure in `{model}` after anti-cycling fallback: {message}")]
    Numerical { model: String, message: String },
}

/// Handle to a model variable; only valid for the model that created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(pub(crate) usize);

impl VarId {
    /// Position of this variable in assignment vectors.
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjSense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone)]
pub(crate) struct Var {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub kind: VarKind,
    pub obj: f64,
    /// Branching priority; higher classes are branched first. 0 by default,
    /// in which case branching is purely most-fractional.
    pub priority: i32,
}

#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub name: String,
    pub coeffs: Vec<(u32, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// A mixed-integer linear model: bounded variables, linear rows, linear
/// objective.
#[derive(Debug, Clone)]
pub struct MilpModel {
    name: String,
    sense: ObjSense,
    pub(crate) vars: Vec<Var>,
    pub(crate) rows: Vec<Row>,
}

impl MilpModel {
    pub fn new(name: impl Into<String>, sense: ObjSense) -> MilpModel {
        MilpModel {
            name: name.into(),
            sense,
            vars: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn objective_sense(&self) -> ObjSense {
        self.sense
    }

    /// Declares a variable. Binary variables must have bounds within [0,1];
    /// integer bounds must be finite (the branch-and-bound needs them).
    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lb: f64,
        ub: f64,
        obj: f64,
    ) -> VarId {
        let name = name.into();
        assert!(!lb.is_nan() && !ub.is_nan() && obj.is_finite(), "bad bounds for {name}");
        assert!(lb <= ub, "empty domain for {name}: [{lb}, {ub}]");
        if kind == VarKind::Binary {
            assert!(
                (0.0..=1.0).contains(&lb) && (0.0..=1.0).contains(&ub),
                "binary {name} must have bounds within [0,1]"
            );
        }
        self.vars.push(Var { name, lb, ub, kind, obj, priority: 0 });
        VarId(self.vars.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, obj: f64) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0, obj)
    }

    /// Adds a linear row. Duplicate variable references are summed.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: &[(VarId, f64)],
        sense: RowSense,
        rhs: f64,
    ) {
        let name = name.into();
        assert!(rhs.is_finite(), "non-finite rhs for row {name}");
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(coeffs.len());
        for &(VarId(j), c) in coeffs {
            assert!(j < self.vars.len(), "row {name} references undeclared variable");
            assert!(c.is_finite(), "non-finite coefficient in row {name}");
            match merged.iter_mut().find(|(k, _)| *k as usize == j) {
                Some((_, acc)) => *acc += c,
                None => merged.push((j as u32, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        merged.sort_by_key(|&(j, _)| j);
        self.rows.push(Row { name, coeffs: merged, sense, rhs });
    }

    /// Raises a variable's branching priority class (default 0). Within the
    /// highest fractional class, branching stays most-fractional.
    pub fn set_branch_priority(&mut self, var: VarId, priority: i32) {
        self.vars[var.0].priority = priority;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn var_bounds(&self, var: VarId) -> (f64, f64) {
        (self.vars[var.0].lb, self.vars[var.0].ub)
    }

    /// Objective value of an assignment, in the model's own sense.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.vars.len());
        self.vars.iter().zip(x).map(|(v, &xv)| v.obj * xv).sum()
    }

    /// Checks an assignment against bounds, integrality, and every row within
    /// `tol`; returns a description of the first violation.
    pub fn check_assignment(&self, x: &[f64], tol: f64) -> Result<(), String> {
        if x.len() != self.vars.len() {
            return Err(format!(
                "assignment has {} entries, model has {} variables",
                x.len(),
                self.vars.len()
            ));
        }
        for (v, &xv) in self.vars.iter().zip(x) {
            if !xv.is_finite() {
                return Err(format!("variable {} is not finite", v.name));
            }
            if xv < v.lb - tol || xv > v.ub + tol {
                return Err(format!(
                    "variable {} = {xv} outside bounds [{}, {}]",
                    v.name, v.lb, v.ub
                ));
            }
            if v.kind != VarKind::Continuous && (xv - xv.round()).abs() > tol {
                return Err(format!("variable {} = {xv} is not integral", v.name));
            }
        }
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(j, c)| c * x[j as usize]).sum();
            let violated = match row.sense {
                RowSense::Le => lhs > row.rhs + tol,
                RowSense::Ge => lhs < row.rhs - tol,
                RowSense::Eq => (lhs - row.rhs).abs() > tol,
            };
            if violated {
                return Err(format!(
                    "constraint {} violated: lhs {lhs}, rhs {} ({:?})",
                    row.name, row.rhs, row.sense
                ));
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), MilpError> {
        if self.vars.is_empty() {
            return Err(MilpError::EmptyModel { model: self.name.clone() });
        }
        for v in &self.vars {
            if v.kind != VarKind::Continuous && !(v.lb.is_finite() && v.ub.is_finite()) {
                return Err(MilpError::InvalidModel {
                    model: self.name.clone(),
                    message: format!("integer variable {} needs finite bounds", v.name),
                });
            }
        }
        Ok(())
    }

    /// Writes the model in free MPS format for cross-checking against
    /// external solvers.
    pub fn write_mps(&self, out: &mut impl io::Write) -> io::Result<()> {
        let clean = |s: &str| -> String {
            s.chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
                .collect()
        };
        writeln!(out, "NAME {}", clean(&self.name))?;
        if self.sense == ObjSense::Maximize {
            writeln!(out, "OBJSENSE\n    MAX")?;
        }
        writeln!(out, "ROWS")?;
        writeln!(out, " N  COST")?;
        for row in &self.rows {
            let tag = match row.sense {
                RowSense::Le => 'L',
                RowSense::Eq => 'E',
                RowSense::Ge => 'G',
            };
            writeln!(out, " {}  {}", tag, clean(&row.name))?;
        }
        writeln!(out, "COLUMNS")?;
        let mut in_int = false;
        for (j, v) in self.vars.iter().enumerate() {
            let wants_int = v.kind != VarKind::Continuous;
            if wants_int != in_int {
                let marker = if wants_int { "INTORG" } else { "INTEND" };
                writeln!(out, "    MARKER                 'MARKER' '{marker}'")?;
                in_int = wants_int;
            }
            let name = clean(&v.name);
            if v.obj != 0.0 {
                writeln!(out, "    {name}  COST  {}", v.obj)?;
            }
            for row in &self.rows {
                for &(k, c) in &row.coeffs {
                    if k as usize == j {
                        writeln!(out, "    {name}  {}  {c}", clean(&row.name))?;
                    }
                }
            }
        }
        if in_int {
            writeln!(out, "    MARKER                 'MARKER' 'INTEND'")?;
        }
        writeln!(out, "RHS")?;
        for row in &self.rows {
            if row.rhs != 0.0 {
                writeln!(out, "    RHS  {}  {}", clean(&row.name), row.rhs)?;
            }
        }
        writeln!(out, "BOUNDS")?;
        for v in &self.vars {
            let name = clean(&v.name);
            if v.lb == v.ub {
                writeln!(out, " FX BND  {name}  {}", v.lb)?;
                continue;
            }
            if v.lb.is_finite() {
                writeln!(out, " LO BND  {name}  {}", v.lb)?;
            } else {
                writeln!(out, " MI BND  {name}")?;
            }
            if v.ub.is_finite() {
                writeln!(out, " UP BND  {name}  {}", v.ub)?;
            }
        }
        writeln!(out, "ENDATA")?;
        Ok(())
    }
}

/// Per-solve configuration.
///
/// `time_limit` is measured in deterministic virtual seconds (see module
/// docs); `pool_callback` observes every strictly improving incumbent,
/// including an accepted warm start, as `(assignment, objective)`.
pub struct SolveParams<'a> {
    pub time_limit: f64,
    pub rel_gap: f64,
    pub warm_start: Option<Vec<f64>>,
    pub pool_callback: Option<&'a mut dyn FnMut(&[f64], f64)>,
}

impl Default for SolveParams<'static> {
    fn default() -> Self {
        SolveParams {
            time_limit: 60.0,
            rel_gap: 1e-6,
            warm_start: None,
            pool_callback: None,
        }
    }
}

impl SolveParams<'_> {
    fn validate(&self) -> Result<(), MilpError> {
        if !(self.time_limit > 0.0) {
            return Err(MilpError::InvalidParams(format!(
                "time limit must be positive, got {}",
                self.time_limit
            )));
        }
        if !(self.rel_gap >= 0.0) {
            return Err(MilpError::InvalidParams(format!(
                "gap tolerance must be nonnegative, got {}",
                self.rel_gap
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    FeasibleTimeLimit,
    Infeasible,
    Unbounded,
}

/// Result of a solve, reported in the model's objective sense.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Best feasible assignment found, if any.
    pub assignment: Option<Vec<f64>>,
    /// Objective of `assignment`.
    pub objective: Option<f64>,
    /// Best proven bound on the optimum: a lower bound when minimizing, an
    /// upper bound when maximizing; always valid.
    pub dual_bound: f64,
    pub nodes: u64,
    pub simplex_iterations: u64,
    /// Virtual seconds of work consumed (deterministic).
    pub work_seconds: f64,
}

/// Solves the linear relaxation of `model` (integrality dropped, bounds
/// kept). Deterministic; no time limit.
pub fn solve_lp(model: &MilpModel) -> Result<SolveOutcome, MilpError> {
    model.validate()?;
    branch_bound::solve_relaxation(model)
}

/// Solves `model` with the reference branch-and-bound backend.
pub fn solve_milp(model: &MilpModel, params: SolveParams<'_>) -> Result<SolveOutcome, MilpError> {
    model.validate()?;
    params.validate()?;
    branch_bound::solve(model, params)
}
