//! Bounded-variable primal simplex over a dense LU factorization with
//! product-form (eta) updates.
//!
//! The implementation is a textbook revised simplex specialized for the model
//! sizes this crate produces (hundreds of rows): dense LU with partial
//! pivoting, Dantzig pricing with a Bland fallback after a degenerate streak,
//! and a composite phase-1 objective (sum of bound violations) so warm bases
//! restart without an artificial-variable reformulation.

use super::FEASIBILITY_TOL as FEAS_TOL;

/// Reduced-cost threshold for an improving direction.
const DUAL_TOL: f64 = 1e-9;
/// Minimum acceptable pivot magnitude.
const PIVOT_TOL: f64 = 1e-7;
/// Steps below this count as degenerate for the anti-cycling trigger.
const DEGEN_STEP: f64 = 1e-10;
/// Consecutive degenerate pivots before switching to Bland's rule.
const BLAND_TRIGGER: u32 = 64;
/// Eta-file length that forces refactorization.
const REFACTOR_ETAS: usize = 96;

/// Work-meter calibration: abstract work units per virtual second. One unit
/// is roughly one inner-loop floating point operation, so this is an
/// effective flop rate; a conservative sustained figure for the dense
/// factor/solve kernels on current commodity cores.
pub(crate) const UNITS_PER_SECOND: f64 = 1.0e9;

/// Deterministic work accounting shared by a solve.
#[derive(Debug)]
pub(crate) struct WorkMeter {
    used: u64,
    budget: u64,
}

impl WorkMeter {
    pub fn new(seconds: f64) -> WorkMeter {
        let budget = (seconds * UNITS_PER_SECOND).min(u64::MAX as f64 / 2.0);
        WorkMeter { used: 0, budget: budget.max(1.0) as u64 }
    }

    pub fn unlimited() -> WorkMeter {
        WorkMeter { used: 0, budget: u64::MAX }
    }

    pub fn charge(&mut self, units: u64) {
        self.used = self.used.saturating_add(units);
    }

    pub fn exhausted(&self) -> bool {
        self.used >= self.budget
    }

    pub fn seconds(&self) -> f64 {
        self.used as f64 / UNITS_PER_SECOND
    }
}

/// LP in computational form: minimize `obj . x` over structural columns plus
/// one slack per row, `A x + s = rhs`, with slack bounds encoding the row
/// sense.
#[derive(Debug, Clone)]
pub(crate) struct LpProblem {
    pub nstruct: usize,
    pub nrows: usize,
    col_ptr: Vec<usize>,
    col_rows: Vec<u32>,
    col_vals: Vec<f64>,
    /// Objective over all nstruct + nrows variables (slacks cost 0).
    pub obj: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl LpProblem {
    /// `cols[j]` lists the (row, coefficient) entries of structural column j.
    pub fn new(cols: Vec<Vec<(u32, f64)>>, obj_struct: Vec<f64>, rhs: Vec<f64>) -> LpProblem {
        let nstruct = cols.len();
        let nrows = rhs.len();
        let mut col_ptr = Vec::with_capacity(nstruct + 1);
        let mut col_rows = Vec::new();
        let mut col_vals = Vec::new();
        col_ptr.push(0);
        for col in &cols {
            for &(i, v) in col {
                debug_assert!((i as usize) < nrows);
                col_rows.push(i);
                col_vals.push(v);
            }
            col_ptr.push(col_rows.len());
        }
        let mut obj = obj_struct;
        obj.resize(nstruct + nrows, 0.0);
        LpProblem { nstruct, nrows, col_ptr, col_rows, col_vals, obj, rhs }
    }

    fn ncols(&self) -> usize {
        self.nstruct + self.nrows
    }

    fn nnz(&self) -> usize {
        self.col_vals.len() + self.nrows
    }

    /// Visits the nonzeros of column j (slack columns are unit vectors).
    #[inline]
    fn for_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.nstruct {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                f(self.col_rows[k] as usize, self.col_vals[k]);
            }
        } else {
            f(j - self.nstruct, 1.0);
        }
    }

    /// Dot product of column j with a dense vector.
    #[inline]
    fn col_dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.nstruct {
            let mut acc = 0.0;
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                acc += self.col_vals[k] * y[self.col_rows[k] as usize];
            }
            acc
        } else {
            y[j - self.nstruct]
        }
    }
}

/// Dense LU factors of the basis matrix, `P B = L U` with row permutation P.
#[derive(Debug)]
struct Lu {
    n: usize,
    /// Row-major; L strictly below the diagonal (unit diagonal implicit),
    /// U on and above.
    f: Vec<f64>,
    /// `perm[i]` = source row of factored row i.
    perm: Vec<u32>,
}

impl Lu {
    fn factor(p: &LpProblem, basis: &[u32]) -> Result<Lu, ()> {
        let n = p.nrows;
        let mut f = vec![0.0; n * n];
        for (pos, &j) in basis.iter().enumerate() {
            p.for_col(j as usize, |i, v| f[i * n + pos] = v);
        }
        let mut perm: Vec<u32> = (0..n as u32).collect();
        for k in 0..n {
            let mut best = k;
            let mut best_val = f[k * n + k].abs();
            for r in k + 1..n {
                let val = f[r * n + k].abs();
                if val > best_val {
                    best = r;
                    best_val = val;
                }
            }
            if best_val < 1e-12 {
                return Err(());
            }
            if best != k {
                perm.swap(k, best);
                for c in 0..n {
                    f.swap(k * n + c, best * n + c);
                }
            }
            let piv = f[k * n + k];
            for r in k + 1..n {
                let m = f[r * n + k] / piv;
                f[r * n + k] = m;
                if m != 0.0 {
                    for c in k + 1..n {
                        f[r * n + c] -= m * f[k * n + c];
                    }
                }
            }
        }
        Ok(Lu { n, f, perm })
    }

    /// Solves `B x = b` in place.
    fn ftran(&self, b: &mut [f64]) {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] = b[self.perm[i] as usize];
        }
        for i in 1..n {
            let mut acc = y[i];
            for k in 0..i {
                acc -= self.f[i * n + k] * y[k];
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in i + 1..n {
                acc -= self.f[i * n + k] * y[k];
            }
            y[i] = acc / self.f[i * n + i];
        }
        b.copy_from_slice(&y);
    }

    /// Solves `B^T y = c` in place.
    fn btran(&self, c: &mut [f64]) {
        let n = self.n;
        let mut z = vec![0.0; n];
        // U^T z = c (U^T is lower triangular).
        for i in 0..n {
            let mut acc = c[i];
            for k in 0..i {
                acc -= self.f[k * n + i] * z[k];
            }
            z[i] = acc / self.f[i * n + i];
        }
        // L^T w = z (unit diagonal, upper triangular).
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in i + 1..n {
                acc -= self.f[k * n + i] * z[k];
            }
            z[i] = acc;
        }
        for i in 0..n {
            c[self.perm[i] as usize] = z[i];
        }
    }
}

/// Product-form update: after a pivot at basis position `r` with FTRAN'd
/// entering column `u`, the new basis inverse is `E^{-1}` applied after the
/// old one.
#[derive(Debug)]
struct Eta {
    r: usize,
    u: Vec<f64>,
}

impl Eta {
    #[inline]
    fn ftran(&self, v: &mut [f64]) {
        let t = v[self.r] / self.u[self.r];
        if t != 0.0 {
            for (i, (vi, &ui)) in v.iter_mut().zip(&self.u).enumerate() {
                if i != self.r {
                    *vi -= ui * t;
                }
            }
        }
        v[self.r] = t;
    }

    #[inline]
    fn btran(&self, v: &mut [f64]) {
        let mut s = 0.0;
        for (i, (&vi, &ui)) in v.iter().zip(&self.u).enumerate() {
            if i != self.r {
                s += ui * vi;
            }
        }
        v[self.r] = (v[self.r] - s) / self.u[self.r];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(u32),
    AtLower,
    AtUpper,
}

/// Saved basis: which variable sits at each row position, plus the bound
/// side of every nonbasic variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Basis {
    basic: Vec<u32>,
    at_upper: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpOutcome {
    Optimal,
    Infeasible,
    Unbounded,
    Budget,
}

#[derive(Debug)]
pub(crate) struct NumericalFailure(pub String);

#[derive(Debug)]
pub(crate) struct Simplex {
    p: LpProblem,
    /// Working bounds, node-local during branch and bound.
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<u32>,
    xb: Vec<f64>,
    lu: Lu,
    etas: Vec<Eta>,
    pub iterations: u64,
    degen_streak: u32,
}

impl Simplex {
    /// Builds a solver with the all-slack starting basis. `lb`/`ub` cover the
    /// structural variables; slack bounds are derived from them by the
    /// caller via `set_bound` — here they default to free and must be set
    /// before solving.
    pub fn new(p: LpProblem, mut lb: Vec<f64>, mut ub: Vec<f64>) -> Simplex {
        let n = p.ncols();
        let m = p.nrows;
        lb.resize(n, f64::NEG_INFINITY);
        ub.resize(n, f64::INFINITY);
        let basis: Vec<u32> = (p.nstruct as u32..n as u32).collect();
        let mut state = Vec::with_capacity(n);
        for j in 0..p.nstruct {
            state.push(Self::preferred_state(p.obj[j], lb[j], ub[j]));
        }
        for pos in 0..m {
            state.push(VarState::Basic(pos as u32));
        }
        // The identity basis factors trivially.
        let lu = Lu::factor(&p, &basis).expect("identity basis is nonsingular");
        Simplex {
            p,
            lb,
            ub,
            state,
            basis,
            xb: vec![0.0; m],
            lu,
            etas: Vec::new(),
            iterations: 0,
            degen_streak: 0,
        }
    }

    /// Picks a valid nonbasic placement: `AtLower` requires a finite lower
    /// bound (or a fully free variable resting at zero); `AtUpper` requires a
    /// finite upper bound. `prefer_upper` breaks the two-sided case.
    fn nonbasic_state(lb: f64, ub: f64, prefer_upper: bool) -> VarState {
        if ub.is_finite() && (prefer_upper || !lb.is_finite()) {
            VarState::AtUpper
        } else {
            VarState::AtLower
        }
    }

    fn preferred_state(obj: f64, lb: f64, ub: f64) -> VarState {
        Self::nonbasic_state(lb, ub, obj < 0.0)
    }

    pub fn set_bound(&mut self, j: usize, lb: f64, ub: f64) {
        self.lb[j] = lb;
        self.ub[j] = ub;
        // A nonbasic variable may be parked on a bound that no longer exists.
        if !matches!(self.state[j], VarState::Basic(_)) {
            self.state[j] = Self::nonbasic_state(lb, ub, self.state[j] == VarState::AtUpper);
        }
    }

    #[inline]
    fn nb_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Basic(pos) => self.xb[pos as usize],
            VarState::AtLower => {
                if self.lb[j].is_finite() {
                    self.lb[j]
                } else {
                    0.0
                }
            }
            VarState::AtUpper => self.ub[j],
        }
    }

    #[cfg(test)]
    pub fn value(&self, j: usize) -> f64 {
        self.nb_value(j)
    }

    pub fn structural_values(&self) -> Vec<f64> {
        (0..self.p.nstruct).map(|j| self.nb_value(j)).collect()
    }

    pub fn objective(&self) -> f64 {
        (0..self.p.ncols()).map(|j| self.p.obj[j] * self.nb_value(j)).sum()
    }

    pub fn snapshot(&self) -> Basis {
        Basis {
            basic: self.basis.clone(),
            at_upper: self.state.iter().map(|s| *s == VarState::AtUpper).collect(),
        }
    }

    pub fn current_basis_is(&self, snap: &Basis) -> bool {
        self.basis == snap.basic
            && self
                .state
                .iter()
                .zip(&snap.at_upper)
                .all(|(s, &up)| (*s == VarState::AtUpper) == up)
    }

    /// Falls back to the all-slack basis (always factorizable).
    pub fn reset_to_slack_basis(&mut self, meter: &mut WorkMeter) {
        let nstruct = self.p.nstruct;
        for (pos, b) in self.basis.iter_mut().enumerate() {
            *b = (nstruct + pos) as u32;
        }
        for j in 0..self.p.ncols() {
            self.state[j] = if j < nstruct {
                Self::nonbasic_state(self.lb[j], self.ub[j], self.p.obj[j] < 0.0)
            } else {
                VarState::Basic((j - nstruct) as u32)
            };
        }
        self.refactor(meter).expect("slack basis is the identity");
    }

    pub fn install(&mut self, snap: &Basis, meter: &mut WorkMeter) -> Result<(), NumericalFailure> {
        debug_assert_eq!(snap.basic.len(), self.p.nrows);
        self.basis.copy_from_slice(&snap.basic);
        for (j, s) in self.state.iter_mut().enumerate() {
            *s = Self::nonbasic_state(self.lb[j], self.ub[j], snap.at_upper[j]);
        }
        for (pos, &j) in self.basis.iter().enumerate() {
            self.state[j as usize] = VarState::Basic(pos as u32);
        }
        self.refactor(meter)
    }

    fn refactor(&mut self, meter: &mut WorkMeter) -> Result<(), NumericalFailure> {
        let m = self.p.nrows as u64;
        meter.charge(m * m * m / 3 + m * m);
        self.etas.clear();
        match Lu::factor(&self.p, &self.basis) {
            Ok(lu) => {
                self.lu = lu;
                Ok(())
            }
            Err(()) => Err(NumericalFailure("singular basis at refactorization".into())),
        }
    }

    /// Recomputes basic values from the bounds and the factorization.
    pub fn refresh_xb(&mut self, meter: &mut WorkMeter) {
        let m = self.p.nrows;
        meter.charge((m * m + self.p.nnz()) as u64);
        let mut b = self.p.rhs.clone();
        for j in 0..self.p.ncols() {
            if !matches!(self.state[j], VarState::Basic(_)) {
                let v = self.nb_value(j);
                if v != 0.0 {
                    self.p.for_col(j, |i, a| b[i] -= a * v);
                }
            }
        }
        self.ftran(&mut b);
        self.xb = b;
    }

    fn ftran(&self, v: &mut [f64]) {
        self.lu.ftran(v);
        for eta in &self.etas {
            eta.ftran(v);
        }
    }

    fn btran(&self, v: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            eta.btran(v);
        }
        self.lu.btran(v);
    }

    /// Total primal infeasibility of the current basic values.
    fn infeasibility(&self) -> f64 {
        let mut total = 0.0;
        for (pos, &j) in self.basis.iter().enumerate() {
            let x = self.xb[pos];
            let j = j as usize;
            if x < self.lb[j] - FEAS_TOL {
                total += self.lb[j] - x;
            } else if x > self.ub[j] + FEAS_TOL {
                total += x - self.ub[j];
            }
        }
        total
    }

    /// Appends `≤`-rows over structural columns and keeps solving state: the
    /// old basis is extended by the new slacks, basic at their own rows. The
    /// next `solve` repairs any slack bound violation in its first phase.
    pub fn add_le_rows(
        &mut self,
        rows: &[(Vec<(u32, f64)>, f64)],
        meter: &mut WorkMeter,
    ) -> Result<(), NumericalFailure> {
        let old_m = self.p.nrows;
        let nstruct = self.p.nstruct;
        let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); nstruct];
        for (j, col) in cols.iter_mut().enumerate() {
            for k in self.p.col_ptr[j]..self.p.col_ptr[j + 1] {
                col.push((self.p.col_rows[k], self.p.col_vals[k]));
            }
        }
        let mut rhs = self.p.rhs.clone();
        for (r, (coeffs, b)) in rows.iter().enumerate() {
            for &(j, a) in coeffs {
                cols[j as usize].push(((old_m + r) as u32, a));
            }
            rhs.push(*b);
        }
        let obj_struct = self.p.obj[..nstruct].to_vec();
        self.p = LpProblem::new(cols, obj_struct, rhs);
        // Old slack columns keep their indices; the new ones append after.
        for r in 0..rows.len() {
            self.lb.push(0.0);
            self.ub.push(f64::INFINITY);
            self.state.push(VarState::Basic((old_m + r) as u32));
            self.basis.push((nstruct + old_m + r) as u32);
        }
        self.refactor(meter)?;
        self.refresh_xb(meter);
        Ok(())
    }

    /// Reduced costs of the structural columns at the current basis, and the
    /// bound each nonbasic structural sits at (`true` = lower, `false` =
    /// upper, `None` = basic). Meaningful for bound tightening only right
    /// after a solve returned `Optimal`.
    pub fn reduced_costs(&mut self, meter: &mut WorkMeter) -> (Vec<f64>, Vec<Option<bool>>) {
        let m = self.p.nrows;
        let nstruct = self.p.nstruct;
        meter.charge((m * m + 2 * self.etas.len() * m + self.p.nnz()) as u64);
        let mut y = vec![0.0; m];
        for (pos, &j) in self.basis.iter().enumerate() {
            y[pos] = self.p.obj[j as usize];
        }
        self.btran(&mut y);
        let mut d = Vec::with_capacity(nstruct);
        let mut side = Vec::with_capacity(nstruct);
        for j in 0..nstruct {
            d.push(self.p.obj[j] - self.p.col_dot(j, &y));
            side.push(match self.state[j] {
                VarState::Basic(_) => None,
                VarState::AtLower => Some(true),
                VarState::AtUpper => Some(false),
            });
        }
        (d, side)
    }

    /// Generates Gomory mixed-integer cuts from fractional basic integer
    /// variables at the current optimum, as `≤`-rows over structural columns.
    /// `is_int[j]` marks structural variables branched on the integer
    /// lattice; the cuts are valid for every lattice point inside the
    /// *current* bound box, so callers use this only at the root.
    pub fn gmi_cuts(
        &mut self,
        is_int: &[bool],
        max_cuts: usize,
        meter: &mut WorkMeter,
    ) -> Result<Vec<(Vec<(u32, f64)>, f64)>, NumericalFailure> {
        /// Required fractionality of a source row; GMI denominators carry
        /// 1/(1 − f0), so nearly integral rows breed unstable cuts.
        const MIN_FRAC: f64 = 1e-4;
        /// Cut terms below this are folded into the rhs over their box.
        const COEF_DROP: f64 = 1e-11;
        /// Reject cuts whose coefficient spread exceeds this.
        const MAX_DYNAMISM: f64 = 1e7;

        // A fresh factorization keeps the eta file out of the tableau rows.
        self.refactor(meter)?;
        self.refresh_xb(meter);
        let m = self.p.nrows;
        let n = self.p.ncols();
        let nstruct = self.p.nstruct;

        // Row-major view of the structural matrix for slack substitution.
        let mut rows_of: Vec<Vec<(u32, f64)>> = vec![Vec::new(); m];
        for j in 0..nstruct {
            for k in self.p.col_ptr[j]..self.p.col_ptr[j + 1] {
                rows_of[self.p.col_rows[k] as usize].push((j as u32, self.p.col_vals[k]));
            }
        }

        // Source rows: basic integer variables, most fractional first.
        let mut cand: Vec<(f64, usize)> = Vec::new();
        for (pos, &jb) in self.basis.iter().enumerate() {
            let j = jb as usize;
            if j < nstruct && is_int[j] {
                let f = self.xb[pos] - self.xb[pos].floor();
                if f.min(1.0 - f) > MIN_FRAC {
                    cand.push((f.min(1.0 - f), pos));
                }
            }
        }
        cand.sort_by(|a, b| {
            b.0.total_cmp(&a.0).then_with(|| self.basis[a.1].cmp(&self.basis[b.1]))
        });

        let mut out: Vec<(Vec<(u32, f64)>, f64)> = Vec::new();
        let mut y = vec![0.0; m];
        for &(_, pos) in &cand {
            if out.len() >= max_cuts || meter.exhausted() {
                break;
            }
            meter.charge((m * m + self.p.nnz() + 4 * n) as u64);
            let beta = self.xb[pos];
            let f0 = beta - beta.floor();
            if !(MIN_FRAC..=1.0 - MIN_FRAC).contains(&f0) {
                continue;
            }

            // Tableau row `pos`: x_k = β − Σ_N ābar_j x_j.
            y.iter_mut().for_each(|v| *v = 0.0);
            y[pos] = 1.0;
            self.lu.btran(&mut y);

            // Shift each nonbasic to t_j ≥ 0 (distance from its active
            // bound), giving x_k + Σ g_j t_j = β with t integral where x_j
            // is. The GMI inequality Σ α(g_j)·t_j ≥ f0 then maps back to x.
            let mut cx = vec![0.0; nstruct];
            let mut rhs = f0;
            let mut relax = 0.0;
            let mut usable = true;
            for j in 0..n {
                if matches!(self.state[j], VarState::Basic(_)) {
                    continue;
                }
                if self.lb[j] == self.ub[j] {
                    continue; // fixed: t ≡ 0
                }
                let abar = self.p.col_dot(j, &y);
                if abar == 0.0 {
                    continue;
                }
                let at_upper = self.state[j] == VarState::AtUpper;
                let bound = if at_upper { self.ub[j] } else { self.lb[j] };
                if !bound.is_finite() {
                    // Free nonbasic: no nonnegative shift exists.
                    usable = false;
                    break;
                }
                let g = if at_upper { -abar } else { abar };
                let alpha = if j < nstruct && is_int[j] {
                    let fj = g - g.floor();
                    if fj <= f0 {
                        fj
                    } else {
                        f0 * (1.0 - fj) / (1.0 - f0)
                    }
                } else if g >= 0.0 {
                    g
                } else {
                    f0 * (-g) / (1.0 - f0)
                };
                let range = self.ub[j] - self.lb[j];
                if alpha <= COEF_DROP && range.is_finite() {
                    // Weaken instead of dropping: Σ_keep ≥ f0 − Σ_drop α·range.
                    relax += alpha * range;
                    continue;
                }
                let (coef, shift) = if at_upper {
                    (-alpha, -alpha * self.ub[j])
                } else {
                    (alpha, alpha * self.lb[j])
                };
                rhs += shift;
                if j < nstruct {
                    cx[j] += coef;
                } else {
                    // Slack r = rhs_r − A_r·x substitutes to structurals.
                    let r = j - nstruct;
                    rhs -= coef * self.p.rhs[r];
                    for &(sj, a) in &rows_of[r] {
                        cx[sj as usize] -= coef * a;
                    }
                }
            }
            if !usable || relax > 0.25 * f0 {
                continue;
            }
            rhs -= relax;

            // Hygiene in x-space: fold dust coefficients into the rhs over
            // the root box, reject badly scaled leftovers, and require the
            // cut to actually separate the current point.
            let max_c = cx.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
            if max_c < 1e-9 {
                continue;
            }
            let mut coeffs: Vec<(u32, f64)> = Vec::new();
            let mut min_c = f64::INFINITY;
            let mut bad = false;
            for (j, &c) in cx.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                if c.abs() < max_c * 1e-10 {
                    let worst = (c * self.lb[j]).max(c * self.ub[j]);
                    if worst.is_finite() {
                        rhs -= worst;
                        continue;
                    }
                }
                min_c = min_c.min(c.abs());
                coeffs.push((j as u32, c));
            }
            if coeffs.is_empty() || max_c / min_c > MAX_DYNAMISM {
                continue;
            }
            let lhs_now: f64 =
                coeffs.iter().map(|&(j, c)| c * self.nb_value(j as usize)).sum();
            if rhs - lhs_now < 1e-5 * (1.0 + rhs.abs()) {
                bad = true;
            }
            if bad {
                continue;
            }
            // Normalize and flip Σ c·x ≥ rhs into the ≤ form rows use.
            for (_, c) in &mut coeffs {
                *c = -*c / max_c;
            }
            out.push((coeffs, -rhs / max_c));
        }
        Ok(out)
    }

    /// Runs the composite primal simplex from the current basis until
    /// optimality, infeasibility proof, unboundedness, or budget exhaustion.
    pub fn solve(&mut self, meter: &mut WorkMeter) -> Result<LpOutcome, NumericalFailure> {
        self.refresh_xb(meter);
        let m = self.p.nrows;
        let n = self.p.ncols();
        let mut y = vec![0.0; m];
        let mut u = vec![0.0; m];
        // Hard cap: a finite simplex (Bland) cannot exceed the number of
        // bases; in practice this trips only on a numerical livelock.
        let max_iters = self.iterations + 20_000 * (n as u64 + m as u64);
        loop {
            if meter.exhausted() {
                return Ok(LpOutcome::Budget);
            }
            if self.iterations >= max_iters {
                return Err(NumericalFailure("iteration cap exceeded".into()));
            }
            self.iterations += 1;
            meter.charge((2 * m * m + 2 * self.etas.len() * m + self.p.nnz() + 8 * n) as u64);

            let phase1 = self.infeasibility() > FEAS_TOL;

            // Dual vector for the phase objective.
            for (pos, &j) in self.basis.iter().enumerate() {
                let j = j as usize;
                y[pos] = if phase1 {
                    let x = self.xb[pos];
                    if x < self.lb[j] - FEAS_TOL {
                        -1.0
                    } else if x > self.ub[j] + FEAS_TOL {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.p.obj[j]
                };
            }
            self.btran(&mut y);

            // Pricing: Dantzig by default, Bland after a degenerate streak.
            let bland = self.degen_streak >= BLAND_TRIGGER;
            let mut enter: Option<(usize, i8, f64)> = None; // (var, dir, score)
            for j in 0..n {
                let (dir, viol) = match self.state[j] {
                    VarState::Basic(_) => continue,
                    VarState::AtLower => {
                        let d = if phase1 { 0.0 } else { self.p.obj[j] } - self.p.col_dot(j, &y);
                        if self.lb[j].is_finite() || self.ub[j].is_finite() {
                            if d < -DUAL_TOL {
                                (1i8, -d)
                            } else {
                                continue;
                            }
                        } else {
                            // Free variable: move against the gradient.
                            if d < -DUAL_TOL {
                                (1i8, -d)
                            } else if d > DUAL_TOL {
                                (-1i8, d)
                            } else {
                                continue;
                            }
                        }
                    }
                    VarState::AtUpper => {
                        let d = if phase1 { 0.0 } else { self.p.obj[j] } - self.p.col_dot(j, &y);
                        if d > DUAL_TOL {
                            (-1i8, d)
                        } else {
                            continue;
                        }
                    }
                };
                match enter {
                    _ if bland => {
                        enter = Some((j, dir, viol));
                        break;
                    }
                    Some((_, _, best)) if viol <= best => {}
                    _ => enter = Some((j, dir, viol)),
                }
            }

            let Some((q, dir, _)) = enter else {
                return Ok(if phase1 { LpOutcome::Infeasible } else { LpOutcome::Optimal });
            };

            // FTRAN the entering column.
            u.fill(0.0);
            self.p.for_col(q, |i, a| u[i] = a);
            self.ftran(&mut u);

            // Ratio test. Basic position i moves at rate delta_i = -dir*u_i.
            let dirf = f64::from(dir);
            let mut theta = f64::INFINITY;
            // (position, hits_upper, |pivot|); position == usize::MAX is the
            // entering variable's bound flip.
            let mut leave: Option<(usize, bool, f64)> = None;
            if self.lb[q].is_finite() && self.ub[q].is_finite() {
                theta = self.ub[q] - self.lb[q];
                leave = Some((usize::MAX, false, f64::INFINITY));
            }
            for (pos, &bj) in self.basis.iter().enumerate() {
                let delta = -dirf * u[pos];
                if delta.abs() < PIVOT_TOL {
                    continue;
                }
                let j = bj as usize;
                let x = self.xb[pos];
                let below = x < self.lb[j] - FEAS_TOL;
                let above = x > self.ub[j] + FEAS_TOL;
                // Target bound this basic variable runs into, if any.
                let (bound, hits_upper) = if below {
                    if delta > 0.0 {
                        (self.lb[j], false)
                    } else {
                        continue; // moving further below: slope already priced
                    }
                } else if above {
                    if delta < 0.0 {
                        (self.ub[j], true)
                    } else {
                        continue;
                    }
                } else if delta > 0.0 {
                    if self.ub[j].is_finite() {
                        (self.ub[j], true)
                    } else {
                        continue;
                    }
                } else if self.lb[j].is_finite() {
                    (self.lb[j], false)
                } else {
                    continue;
                };
                let t = ((bound - x) / delta).max(0.0);
                let better = match leave {
                    None => true,
                    Some((lp, _, lpiv)) => {
                        if bland {
                            // Bland: smallest leaving variable index wins ties.
                            t < theta - 1e-12
                                || (t < theta + 1e-12
                                    && (lp == usize::MAX || j < self.basis[lp] as usize))
                        } else {
                            // Stability: among near-ties prefer the largest pivot.
                            t < theta - 1e-9 * (1.0 + theta)
                                || (t < theta + 1e-9 * (1.0 + theta) && u[pos].abs() > lpiv)
                        }
                    }
                };
                if better {
                    theta = t;
                    leave = Some((pos, hits_upper, u[pos].abs()));
                }
            }

            let Some((lpos, hits_upper, _)) = leave else {
                return if phase1 {
                    Err(NumericalFailure("phase-1 ray with positive infeasibility".into()))
                } else {
                    Ok(LpOutcome::Unbounded)
                };
            };

            if theta.abs() < DEGEN_STEP {
                self.degen_streak += 1;
            } else {
                self.degen_streak = 0;
            }

            // Apply the step to the basic values.
            if theta != 0.0 {
                for (pos, xv) in self.xb.iter_mut().enumerate() {
                    *xv -= dirf * theta * u[pos];
                }
            }

            if lpos == usize::MAX {
                // Bound flip; no basis change.
                self.state[q] = if dir > 0 { VarState::AtUpper } else { VarState::AtLower };
                continue;
            }

            let entering_value = self.nb_value(q) + dirf * theta;
            let leaving = self.basis[lpos] as usize;
            if u[lpos].abs() < PIVOT_TOL {
                // Should have been filtered; refactor and retry the iteration.
                self.refactor(meter)?;
                self.refresh_xb(meter);
                continue;
            }
            self.etas.push(Eta { r: lpos, u: u.clone() });
            self.basis[lpos] = q as u32;
            self.state[q] = VarState::Basic(lpos as u32);
            self.state[leaving] = if hits_upper { VarState::AtUpper } else { VarState::AtLower };
            self.xb[lpos] = entering_value;

            if self.etas.len() >= REFACTOR_ETAS {
                self.refactor(meter)?;
                self.refresh_xb(meter);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(
        cols: Vec<Vec<(u32, f64)>>,
        obj: Vec<f64>,
        rhs: Vec<f64>,
        senses: &[u8], // 0 Le, 1 Ge, 2 Eq
        lb: Vec<f64>,
        ub: Vec<f64>,
    ) -> Simplex {
        let nstruct = cols.len();
        let p = LpProblem::new(cols, obj, rhs);
        let mut s = Simplex::new(p, lb, ub);
        for (i, &sense) in senses.iter().enumerate() {
            let j = nstruct + i;
            match sense {
                0 => s.set_bound(j, 0.0, f64::INFINITY),
                1 => s.set_bound(j, f64::NEG_INFINITY, 0.0),
                _ => s.set_bound(j, 0.0, 0.0),
            }
        }
        s
    }

    #[test]
    fn solves_two_variable_lp() {
        // min -3x - 5y st x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), -36.
        let mut s = problem(
            vec![vec![(0, 1.0), (2, 3.0)], vec![(1, 2.0), (2, 2.0)]],
            vec![-3.0, -5.0],
            vec![4.0, 12.0, 18.0],
            &[0, 0, 0],
            vec![0.0, 0.0],
            vec![f64::INFINITY, f64::INFINITY],
        );
        let mut meter = WorkMeter::unlimited();
        assert_eq!(s.solve(&mut meter).unwrap(), LpOutcome::Optimal);
        assert!((s.objective() + 36.0).abs() < 1e-9);
        assert!((s.value(0) - 2.0).abs() < 1e-9);
        assert!((s.value(1) - 6.0).abs() < 1e-9);
    }

    #[test]
    fn phase_one_reaches_equality_rows() {
        // min x + y st x + y = 5, x - y >= 1, bounds [0, 10].
        let mut s = problem(
            vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0), (1, -1.0)]],
            vec![1.0, 1.0],
            vec![5.0, 1.0],
            &[2, 1],
            vec![0.0, 0.0],
            vec![10.0, 10.0],
        );
        let mut meter = WorkMeter::unlimited();
        assert_eq!(s.solve(&mut meter).unwrap(), LpOutcome::Optimal);
        assert!((s.objective() - 5.0).abs() < 1e-9);
        assert!(s.value(0) - s.value(1) >= 1.0 - 1e-9);
    }

    #[test]
    fn reports_infeasible_system() {
        // x >= 3 and x <= 1.
        let mut s = problem(
            vec![vec![(0, 1.0), (1, 1.0)]],
            vec![0.0],
            vec![3.0, 1.0],
            &[1, 0],
            vec![0.0],
            vec![f64::INFINITY],
        );
        let mut meter = WorkMeter::unlimited();
        assert_eq!(s.solve(&mut meter).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn reports_unbounded_ray() {
        // min -x st x - y <= 1 with y free upward drags x to infinity.
        let mut s = problem(
            vec![vec![(0, 1.0)], vec![(0, -1.0)]],
            vec![-1.0, 0.0],
            vec![1.0],
            &[0],
            vec![0.0, 0.0],
            vec![f64::INFINITY, f64::INFINITY],
        );
        let mut meter = WorkMeter::unlimited();
        assert_eq!(s.solve(&mut meter).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn bound_flip_skips_pivot() {
        // min -x st x in [0, 2], one redundant row keeps the basis busy.
        let mut s = problem(
            vec![vec![(0, 1.0)]],
            vec![-1.0],
            vec![100.0],
            &[0],
            vec![0.0],
            vec![2.0],
        );
        let mut meter = WorkMeter::unlimited();
        assert_eq!(s.solve(&mut meter).unwrap(), LpOutcome::Optimal);
        assert!((s.value(0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn warm_basis_reinstall_roundtrips() {
        let build = || {
            problem(
                vec![vec![(0, 1.0), (2, 3.0)], vec![(1, 2.0), (2, 2.0)]],
                vec![-3.0, -5.0],
                vec![4.0, 12.0, 18.0],
                &[0, 0, 0],
                vec![0.0, 0.0],
                vec![f64::INFINITY, f64::INFINITY],
            )
        };
        let mut meter = WorkMeter::unlimited();
        let mut s = build();
        s.solve(&mut meter).unwrap();
        let snap = s.snapshot();
        let obj = s.objective();

        let mut fresh = build();
        fresh.install(&snap, &mut meter).unwrap();
        let before = fresh.iterations;
        assert_eq!(fresh.solve(&mut meter).unwrap(), LpOutcome::Optimal);
        assert!((fresh.objective() - obj).abs() < 1e-9);
        // Reinstalled optimum verifies in one pricing pass.
        assert_eq!(fresh.iterations - before, 1);
    }

    #[test]
    fn budget_exhaustion_surfaces() {
        let mut s = problem(
            vec![vec![(0, 1.0), (2, 3.0)], vec![(1, 2.0), (2, 2.0)]],
            vec![-3.0, -5.0],
            vec![4.0, 12.0, 18.0],
            &[0, 0, 0],
            vec![0.0, 0.0],
            vec![f64::INFINITY, f64::INFINITY],
        );
        let mut meter = WorkMeter::new(1e-12);
        assert_eq!(s.solve(&mut meter).unwrap(), LpOutcome::Budget);
    }
}
