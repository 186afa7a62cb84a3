//! Bounded-variable simplex on a dictionary of the nonbasic columns: primal
//! for cold solves, dual for restarts after bound changes or added rows.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearRow {
    pub fn new(coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        LinearRow { coeffs, sense, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    pub fn is_satisfied(&self, x: &[f64], tol: f64) -> bool {
        let lhs = self.activity(x);
        let slack = tol * self.rhs.abs().max(1.0);
        match self.sense {
            Sense::Le => lhs <= self.rhs + slack,
            Sense::Ge => lhs >= self.rhs - slack,
            Sense::Eq => (lhs - self.rhs).abs() <= slack,
        }
    }
}

/// `min cᵀx` subject to the rows and `lower ≤ x ≤ upper`. Lower bounds must
/// be finite; upper bounds may be `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LinearRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_limit: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { max_iterations: 200_000, degenerate_limit: 50 }
    }
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-8;

/// Dictionary `x_B = T·x_N` over structural variables `0..n` and one row
/// activity variable `n + i` per row; bounds carry the right-hand sides.
#[derive(Debug, Clone)]
struct Tableau {
    m: usize,
    n: usize,
    /// `m × n`, row-major: basic variable of row `i` in terms of the
    /// nonbasic variable of each column.
    t: Vec<f64>,
    basis: Vec<usize>,
    nonbasic: Vec<usize>,
    xb: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    at_upper: Vec<bool>,
    cost: Vec<f64>,
    /// Reduced cost of each column.
    d: Vec<f64>,
    iterations: usize,
}

#[derive(Debug, PartialEq)]
enum Outcome {
    Optimal,
    Unbounded,
    Infeasible,
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    Feasibility,
    Optimality,
}

impl Tableau {
    fn at(&self, i: usize, c: usize) -> f64 {
        self.t[i * self.n + c]
    }

    fn value(&self, v: usize) -> f64 {
        if self.at_upper[v] {
            self.up[v]
        } else {
            self.lo[v]
        }
    }

    fn fixed(&self, v: usize) -> bool {
        self.up[v] <= self.lo[v]
    }

    fn tol(&self, bound: f64) -> f64 {
        FEAS_TOL * bound.abs().max(1.0)
    }

    /// Signed bound violation of basic row `i`: negative below, positive above.
    fn violation(&self, i: usize) -> f64 {
        let v = self.basis[i];
        let x = self.xb[i];
        if x < self.lo[v] - self.tol(self.lo[v]) {
            x - self.lo[v]
        } else if x > self.up[v] + self.tol(self.up[v]) {
            x - self.up[v]
        } else {
            0.0
        }
    }

    fn price_with(&mut self, basic_cost: impl Fn(&Tableau, usize) -> f64, nonbasic_cost: bool) {
        let mut d: Vec<f64> = self.nonbasic.iter().map(|&v| if nonbasic_cost { self.cost[v] } else { 0.0 }).collect();
        for i in 0..self.m {
            let cb = basic_cost(self, i);
            if cb != 0.0 {
                for (dj, &a) in d.iter_mut().zip(&self.t[i * self.n..(i + 1) * self.n]) {
                    *dj += cb * a;
                }
            }
        }
        self.d = d;
    }

    fn price(&mut self) {
        self.price_with(|tab, i| tab.cost[tab.basis[i]], true);
    }

    /// Gradient of the total bound violation.
    fn price_infeasibility(&mut self) -> bool {
        let signs: Vec<f64> = (0..self.m)
            .map(|i| match self.violation(i) {
                g if g > 0.0 => 1.0,
                g if g < 0.0 => -1.0,
                _ => 0.0,
            })
            .collect();
        let infeasible = signs.iter().any(|&s| s != 0.0);
        self.price_with(|_, i| signs[i], false);
        infeasible
    }

    fn shift_column(&mut self, c: usize, delta: f64) {
        if delta == 0.0 {
            return;
        }
        for i in 0..self.m {
            let a = self.t[i * self.n + c];
            if a != 0.0 {
                self.xb[i] += a * delta;
            }
        }
    }

    /// Exchanges the basic variable of row `r` with the nonbasic variable of
    /// column `c`.
    fn pivot(&mut self, r: usize, c: usize) {
        let n = self.n;
        let piv = self.t[r * n + c];
        {
            let row = &mut self.t[r * n..(r + 1) * n];
            for a in row.iter_mut() {
                *a = -*a / piv;
            }
            row[c] = 1.0 / piv;
        }
        let (before, rest) = self.t.split_at_mut(r * n);
        let (prow, after) = rest.split_at_mut(n);
        let nz: Vec<usize> = (0..n).filter(|&j| j != c && prow[j] != 0.0).collect();
        let pc = prow[c];
        for row in before.chunks_mut(n).chain(after.chunks_mut(n)) {
            let f = row[c];
            if f != 0.0 {
                for &j in &nz {
                    row[j] += f * prow[j];
                }
                row[c] = f * pc;
            }
        }
        let f = self.d[c];
        if f != 0.0 {
            for &j in &nz {
                self.d[j] += f * prow[j];
            }
            self.d[c] = f * pc;
        }
        std::mem::swap(&mut self.basis[r], &mut self.nonbasic[c]);
    }

    /// Moves the nonbasic variable of column `c` by `delta` and swaps it into
    /// row `r`, whose variable leaves at its upper bound when `leave_upper`.
    fn exchange(&mut self, r: usize, c: usize, delta: f64, leave_upper: bool) {
        let q = self.nonbasic[c];
        let entering_value = self.value(q) + delta;
        self.shift_column(c, delta);
        let p = self.basis[r];
        self.pivot(r, c);
        self.at_upper[p] = leave_upper;
        self.at_upper[q] = false;
        self.xb[r] = entering_value;
    }

    fn snap(&mut self) {
        for i in 0..self.m {
            let v = self.basis[i];
            let x = self.xb[i];
            if x < self.lo[v] && x > self.lo[v] - self.tol(self.lo[v]) {
                self.xb[i] = self.lo[v];
            } else if x > self.up[v] && x < self.up[v] + self.tol(self.up[v]) {
                self.xb[i] = self.up[v];
            }
        }
    }

    /// Step at which row `i` blocks column `c` moving in `dir`, with its
    /// bound relaxed by `slack`, and whether it then rests at its upper
    /// bound. In the feasibility phase an infeasible row blocks only where
    /// it becomes feasible.
    fn row_limit(&self, i: usize, c: usize, dir: f64, slack: f64, phase: Phase) -> Option<(f64, f64, bool)> {
        let alpha = dir * self.at(i, c);
        if alpha.abs() <= PIVOT_TOL {
            return None;
        }
        let v = self.basis[i];
        let x = self.xb[i];
        let (lo, up) = (self.lo[v], self.up[v]);
        if phase == Phase::Feasibility {
            if x < lo - self.tol(lo) {
                return (alpha > 0.0).then(|| ((lo - x + slack) / alpha, alpha, false));
            }
            if x > up + self.tol(up) {
                return (alpha < 0.0).then(|| ((x - up + slack) / -alpha, alpha, true));
            }
        }
        if alpha < 0.0 && lo.is_finite() {
            Some(((x - lo + slack) / -alpha, alpha, false))
        } else if alpha > 0.0 && up.is_finite() {
            Some(((up - x + slack) / alpha, alpha, true))
        } else {
            None
        }
    }

    /// Smallest step; ties go to the lowest variable index.
    fn ratio_bland(&self, c: usize, dir: f64, phase: Phase) -> Option<(usize, f64, bool)> {
        let mut leave: Option<(usize, f64, bool)> = None;
        for i in 0..self.m {
            let Some((limit, _, upper)) = self.row_limit(i, c, dir, 0.0, phase) else { continue };
            let limit = limit.max(0.0);
            let better = match leave {
                None => true,
                Some((r, lim, _)) => limit < lim - 1e-12 || (limit <= lim + 1e-12 && self.basis[i] < self.basis[r]),
            };
            if better {
                leave = Some((i, limit, upper));
            }
        }
        leave
    }

    /// Two-pass ratio test: among rows whose exact step fits under the
    /// smallest tolerance-relaxed step, take the largest pivot.
    fn ratio_harris(&self, c: usize, dir: f64, phase: Phase) -> Option<(usize, f64, bool)> {
        let mut relaxed = f64::INFINITY;
        for i in 0..self.m {
            if let Some((limit, _, _)) = self.row_limit(i, c, dir, FEAS_TOL, phase) {
                relaxed = relaxed.min(limit);
            }
        }
        if relaxed.is_infinite() {
            return None;
        }
        let mut leave: Option<(usize, f64, f64, bool)> = None;
        for i in 0..self.m {
            let Some((limit, alpha, upper)) = self.row_limit(i, c, dir, 0.0, phase) else { continue };
            if limit <= relaxed && leave.is_none_or(|(_, _, a, _)| alpha.abs() > a.abs()) {
                leave = Some((i, limit.max(0.0), alpha, upper));
            }
        }
        leave.map(|(i, limit, _, upper)| (i, limit, upper))
    }

    fn tick(&mut self, opts: &SimplexOptions) -> Result<()> {
        self.iterations += 1;
        if self.iterations > opts.max_iterations {
            return Err(Error::IterationLimit(opts.max_iterations));
        }
        Ok(())
    }

    /// Primal simplex. The feasibility phase minimizes the total bound
    /// violation of the basic variables and stops once it is zero.
    fn run(&mut self, phase: Phase, opts: &SimplexOptions) -> Result<Outcome> {
        let mut degenerate = 0usize;
        loop {
            if phase == Phase::Feasibility && !self.price_infeasibility() {
                return Ok(Outcome::Optimal);
            }
            let bland = degenerate >= opts.degenerate_limit;
            let mut entering: Option<(usize, f64)> = None;
            for c in 0..self.n {
                let v = self.nonbasic[c];
                if self.fixed(v) {
                    continue;
                }
                let dj = self.d[c];
                let improving = if self.at_upper[v] { dj > COST_TOL } else { dj < -COST_TOL };
                if !improving {
                    continue;
                }
                let better = match entering {
                    None => true,
                    Some((b, best)) => {
                        if bland {
                            v < self.nonbasic[b]
                        } else {
                            dj.abs() > best
                        }
                    }
                };
                if better {
                    entering = Some((c, dj.abs()));
                }
            }
            let Some((c, _)) = entering else {
                return Ok(if phase == Phase::Feasibility { Outcome::Infeasible } else { Outcome::Optimal });
            };
            self.tick(opts)?;
            let q = self.nonbasic[c];
            let dir = if self.at_upper[q] { -1.0 } else { 1.0 };
            let leave = if bland { self.ratio_bland(c, dir, phase) } else { self.ratio_harris(c, dir, phase) };
            let flip = self.up[q] - self.lo[q];
            let theta = match leave {
                Some((r, lim, upper)) if lim < flip => {
                    self.exchange(r, c, dir * lim, upper);
                    lim
                }
                _ if flip.is_finite() => {
                    self.shift_column(c, dir * flip);
                    self.at_upper[q] = !self.at_upper[q];
                    flip
                }
                _ => return Ok(Outcome::Unbounded),
            };
            self.snap();
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
        }
    }

    /// Dual simplex from a dual feasible basis. `Err(Infeasible)` when some
    /// bound violation cannot be repaired.
    fn run_dual(&mut self, opts: &SimplexOptions) -> Result<()> {
        loop {
            let mut worst: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let gap = self.violation(i);
                if gap != 0.0 && worst.is_none_or(|(_, g)| gap.abs() > g.abs()) {
                    worst = Some((i, gap));
                }
            }
            let Some((r, gap)) = worst else {
                return Ok(());
            };
            let above = gap > 0.0;
            self.tick(opts)?;
            // Columns whose feasible move pushes the row toward its bound;
            // two passes as in the primal: the smallest tolerance-relaxed
            // dual step, then the largest pivot within it.
            let candidates: Vec<(usize, f64)> = (0..self.n)
                .filter(|&c| !self.fixed(self.nonbasic[c]))
                .filter_map(|c| {
                    let dir = if self.at_upper[self.nonbasic[c]] { -1.0 } else { 1.0 };
                    let alpha = dir * self.at(r, c);
                    let eligible = if above { alpha < -PIVOT_TOL } else { alpha > PIVOT_TOL };
                    eligible.then_some((c, alpha.abs()))
                })
                .collect();
            let relaxed =
                candidates.iter().map(|&(c, a)| (self.d[c].abs() + COST_TOL) / a).fold(f64::INFINITY, f64::min);
            let mut entering: Option<(usize, f64)> = None;
            for &(c, a) in &candidates {
                if self.d[c].abs() / a <= relaxed && entering.is_none_or(|(_, best)| a > best) {
                    entering = Some((c, a));
                }
            }
            let Some((c, _)) = entering else {
                return Err(Error::Infeasible);
            };
            let v = self.basis[r];
            let target = if above { self.up[v] } else { self.lo[v] };
            let delta = (target - self.xb[r]) / self.at(r, c);
            self.exchange(r, c, delta, above);
            self.snap();
        }
    }

    /// Appends a basic row activity variable for `coeffs` over the scaled
    /// structurals, with bounds `[lo, up]`.
    fn push_row(&mut self, coeffs: &[(usize, f64)], lo: f64, up: f64) {
        let n = self.n;
        let mut row = vec![0.0; n];
        let mut value = 0.0;
        let mut where_basic = vec![None; n];
        for (i, &v) in self.basis.iter().enumerate() {
            if v < n {
                where_basic[v] = Some(i);
            }
        }
        let mut where_nonbasic = vec![None; n];
        for (c, &v) in self.nonbasic.iter().enumerate() {
            if v < n {
                where_nonbasic[v] = Some(c);
            }
        }
        for &(j, a) in coeffs {
            if let Some(c) = where_nonbasic[j] {
                row[c] += a;
                value += a * self.value(j);
            } else if let Some(i) = where_basic[j] {
                for (rc, &t) in row.iter_mut().zip(&self.t[i * n..(i + 1) * n]) {
                    *rc += a * t;
                }
                value += a * self.xb[i];
            }
        }
        self.t.extend_from_slice(&row);
        let var = self.lo.len();
        self.basis.push(var);
        self.xb.push(value);
        self.lo.push(lo);
        self.up.push(up);
        self.at_upper.push(false);
        self.cost.push(0.0);
        self.m += 1;
    }
}

/// Mapping between problem variables and tableau columns.
#[derive(Debug, Clone)]
struct Scaling {
    col_scale: Vec<f64>,
    cost: Vec<f64>,
}

/// Scaled coefficients, lower and upper activity bound of a row.
fn scaled_row(row: &LinearRow, col_scale: &[f64]) -> (Vec<(usize, f64)>, f64, f64) {
    let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(row.coeffs.len());
    for &(j, a) in &row.coeffs {
        match coeffs.iter_mut().find(|(k, _)| *k == j) {
            Some(e) => e.1 += a * col_scale[j],
            None => coeffs.push((j, a * col_scale[j])),
        }
    }
    let s = coeffs.iter().fold(0.0f64, |acc, &(_, a)| acc.max(a.abs()));
    let s = if s > 0.0 { 1.0 / s } else { 1.0 };
    for e in &mut coeffs {
        e.1 *= s;
    }
    let b = row.rhs * s;
    let (lo, up) = match row.sense {
        Sense::Le => (f64::NEG_INFINITY, b),
        Sense::Ge => (b, f64::INFINITY),
        Sense::Eq => (b, b),
    };
    (coeffs, lo, up)
}

/// An optimal tableau that can be re-solved after bound changes or with
/// extra rows.
#[derive(Debug, Clone)]
pub struct WarmStart {
    tab: Tableau,
    map: Scaling,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl WarmStart {
    pub fn solution(&self) -> LpSolution {
        let tab = &self.tab;
        let n = tab.n;
        let mut scaled: Vec<f64> = (0..n).map(|j| tab.value(j)).collect();
        for (i, &v) in tab.basis.iter().enumerate() {
            if v < n {
                scaled[v] = tab.xb[i];
            }
        }
        let x: Vec<f64> =
            (0..n).map(|j| (scaled[j] * self.map.col_scale[j]).clamp(self.lower[j], self.upper[j])).collect();
        let objective = self.map.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
        LpSolution { x, objective, iterations: tab.iterations }
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Number of rows, including added ones.
    pub fn rows(&self) -> usize {
        self.tab.m
    }

    /// Size of the stored tableau.
    pub fn memory_bytes(&self) -> usize {
        self.tab.t.len() * std::mem::size_of::<f64>()
    }

    /// Re-solves with new variable bounds, starting from this basis.
    pub fn resolve(&self, lower: &[f64], upper: &[f64]) -> Result<WarmStart> {
        self.resolve_with(lower, upper, &SimplexOptions::default())
    }

    pub fn resolve_with(&self, lower: &[f64], upper: &[f64], opts: &SimplexOptions) -> Result<WarmStart> {
        let n = self.tab.n;
        if lower.len() != n || upper.len() != n {
            return Err(Error::Dimension("bound vectors do not match the cost vector".into()));
        }
        if (0..n).any(|j| !lower[j].is_finite() || lower[j] > upper[j] + FEAS_TOL) {
            return Err(Error::Infeasible);
        }
        let mut next = self.clone();
        let tab = &mut next.tab;
        tab.iterations = 0;
        let mut column = vec![None; n];
        for (c, &v) in tab.nonbasic.iter().enumerate() {
            if v < n {
                column[v] = Some(c);
            }
        }
        for j in 0..n {
            if lower[j] == self.lower[j] && upper[j] == self.upper[j] {
                continue;
            }
            let cs = self.map.col_scale[j];
            let Some(c) = column[j] else {
                tab.lo[j] = lower[j] / cs;
                tab.up[j] = upper[j] / cs;
                continue;
            };
            let old = tab.value(j);
            tab.lo[j] = lower[j] / cs;
            tab.up[j] = upper[j] / cs;
            // Rest where the reduced cost stays dual feasible.
            tab.at_upper[j] = tab.d[c] < 0.0 && tab.up[j].is_finite();
            let new = tab.value(j);
            tab.shift_column(c, new - old);
        }
        next.lower = lower.to_vec();
        next.upper = upper.to_vec();
        next.finish(opts)?;
        Ok(next)
    }

    /// Adds rows and re-solves from this basis.
    pub fn add_rows(&self, rows: &[LinearRow]) -> Result<WarmStart> {
        self.add_rows_with(rows, &SimplexOptions::default())
    }

    pub fn add_rows_with(&self, rows: &[LinearRow], opts: &SimplexOptions) -> Result<WarmStart> {
        let n = self.tab.n;
        if rows.iter().any(|r| r.coeffs.iter().any(|&(j, _)| j >= n)) {
            return Err(Error::Dimension("row references an undeclared variable".into()));
        }
        let mut next = self.clone();
        next.tab.iterations = 0;
        for row in rows {
            let (coeffs, lo, up) = scaled_row(row, &self.map.col_scale);
            next.tab.push_row(&coeffs, lo, up);
        }
        next.finish(opts)?;
        Ok(next)
    }

    fn finish(&mut self, opts: &SimplexOptions) -> Result<()> {
        self.tab.run_dual(opts)?;
        match self.tab.run(Phase::Optimality, opts)? {
            Outcome::Optimal => Ok(()),
            Outcome::Unbounded => Err(Error::Unbounded),
            Outcome::Infeasible => Err(Error::Infeasible),
        }
    }
}

/// Solves the LP with default options.
pub fn solve(problem: &LpProblem) -> Result<LpSolution> {
    solve_with(problem, &SimplexOptions::default())
}

pub fn solve_with(problem: &LpProblem, opts: &SimplexOptions) -> Result<LpSolution> {
    Ok(solve_warm_with(problem, opts)?.solution())
}

/// Solves the LP and keeps the optimal tableau.
pub fn solve_warm(problem: &LpProblem) -> Result<WarmStart> {
    solve_warm_with(problem, &SimplexOptions::default())
}

pub fn solve_warm_with(problem: &LpProblem, opts: &SimplexOptions) -> Result<WarmStart> {
    let n = problem.cost.len();
    if problem.lower.len() != n || problem.upper.len() != n {
        return Err(Error::Dimension("bound vectors do not match the cost vector".into()));
    }
    for j in 0..n {
        if !problem.lower[j].is_finite() {
            return Err(Error::InvalidModel(format!("variable {j} has an infinite lower bound")));
        }
        if problem.lower[j] > problem.upper[j] + FEAS_TOL {
            return Err(Error::Infeasible);
        }
    }
    for row in &problem.rows {
        if row.coeffs.iter().any(|&(j, _)| j >= n) {
            return Err(Error::Dimension("row references an undeclared variable".into()));
        }
    }
    let mut col_scale = vec![0.0f64; n];
    for row in &problem.rows {
        let s = row.coeffs.iter().fold(0.0f64, |acc, &(_, a)| acc.max(a.abs()));
        for &(j, a) in &row.coeffs {
            if s > 0.0 {
                col_scale[j] = col_scale[j].max(a.abs() / s);
            }
        }
    }
    for cs in &mut col_scale {
        *cs = if *cs > 0.0 { 1.0 / *cs } else { 1.0 };
    }
    let mut lo: Vec<f64> = (0..n).map(|j| problem.lower[j] / col_scale[j]).collect();
    let mut up: Vec<f64> = (0..n).map(|j| problem.upper[j] / col_scale[j]).collect();
    let mut cost: Vec<f64> = (0..n).map(|j| problem.cost[j] * col_scale[j]).collect();
    let at_upper: Vec<bool> = (0..n).map(|j| cost[j] < 0.0 && up[j].is_finite()).collect();
    let mut tab = Tableau {
        m: 0,
        n,
        t: Vec::new(),
        basis: Vec::new(),
        nonbasic: (0..n).collect(),
        xb: Vec::new(),
        lo: Vec::new(),
        up: Vec::new(),
        at_upper,
        cost: Vec::new(),
        d: Vec::new(),
        iterations: 0,
    };
    tab.lo.append(&mut lo);
    tab.up.append(&mut up);
    tab.cost.append(&mut cost);
    for row in &problem.rows {
        let (coeffs, lo, up) = scaled_row(row, &col_scale);
        tab.push_row(&coeffs, lo, up);
    }
    match tab.run(Phase::Feasibility, opts)? {
        Outcome::Optimal => {}
        _ => return Err(Error::Infeasible),
    }
    tab.price();
    match tab.run(Phase::Optimality, opts)? {
        Outcome::Optimal => {}
        Outcome::Unbounded => return Err(Error::Unbounded),
        Outcome::Infeasible => return Err(Error::Infeasible),
    }
    let map = Scaling { col_scale, cost: problem.cost.clone() };
    Ok(WarmStart { tab, map, lower: problem.lower.clone(), upper: problem.upper.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(cost: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>, rows: Vec<LinearRow>) -> LpProblem {
        LpProblem { cost, lower, upper, rows }
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18
        let p = lp(
            vec![-3.0, -5.0],
            vec![0.0; 2],
            vec![f64::INFINITY; 2],
            vec![
                LinearRow::new(vec![(0, 1.0)], Sense::Le, 4.0),
                LinearRow::new(vec![(1, 2.0)], Sense::Le, 12.0),
                LinearRow::new(vec![(0, 3.0), (1, 2.0)], Sense::Le, 18.0),
            ],
        );
        let s = solve(&p).unwrap();
        assert!((s.objective + 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y s.t. x + y = 3, x - y ≥ -1, x ≤ 1.5
        let p = lp(
            vec![1.0, 2.0],
            vec![0.0; 2],
            vec![1.5, f64::INFINITY],
            vec![
                LinearRow::new(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 3.0),
                LinearRow::new(vec![(0, 1.0), (1, -1.0)], Sense::Ge, -1.0),
            ],
        );
        let s = solve(&p).unwrap();
        assert!((s.x[0] - 1.5).abs() < 1e-9);
        assert!((s.objective - 4.5).abs() < 1e-9);
    }

    #[test]
    fn nonzero_lower_bounds() {
        let p = lp(vec![1.0], vec![2.0], vec![5.0], vec![LinearRow::new(vec![(0, 1.0)], Sense::Ge, 3.0)]);
        let s = solve(&p).unwrap();
        assert!((s.x[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_detected() {
        let p = lp(vec![1.0], vec![0.0], vec![1.0], vec![LinearRow::new(vec![(0, 1.0)], Sense::Ge, 2.0)]);
        assert!(matches!(solve(&p), Err(Error::Infeasible)));
    }

    #[test]
    fn unbounded_detected() {
        let p = lp(
            vec![-1.0, 0.0],
            vec![0.0; 2],
            vec![f64::INFINITY; 2],
            vec![LinearRow::new(vec![(0, 1.0), (1, -1.0)], Sense::Le, 1.0)],
        );
        assert!(matches!(solve(&p), Err(Error::Unbounded)));
    }

    #[test]
    fn duplicate_degenerate_rows_terminate() {
        // Beale-style degeneracy with every row repeated three times.
        let base = [
            (vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], 0.0),
            (vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], 0.0),
            (vec![(2, 1.0)], 1.0),
        ];
        let mut rows = Vec::new();
        for _ in 0..3 {
            for (c, b) in &base {
                rows.push(LinearRow::new(c.clone(), Sense::Le, *b));
            }
        }
        let p = lp(vec![-0.75, 150.0, -0.02, 6.0], vec![0.0; 4], vec![f64::INFINITY; 4], rows);
        let s = solve(&p).unwrap();
        assert!((s.objective + 0.05).abs() < 1e-9);
    }

    #[test]
    fn bound_flip_only() {
        let p = lp(vec![-1.0, -1.0], vec![0.0; 2], vec![1.0, 2.0], vec![]);
        let s = solve(&p).unwrap();
        assert_eq!(s.x, vec![1.0, 2.0]);
    }

    #[test]
    fn warm_restart_matches_cold_solve() {
        // min -x - 2y - 3z s.t. x + y + z ≤ 2, y + z ≤ 1.5, boxes [0, 1]
        let rows = vec![
            LinearRow::new(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Le, 2.0),
            LinearRow::new(vec![(1, 1.0), (2, 1.0)], Sense::Le, 1.5),
        ];
        let p = lp(vec![-1.0, -2.0, -3.0], vec![0.0; 3], vec![1.0; 3], rows);
        let root = solve_warm(&p).unwrap();
        assert!((root.solution().objective + 4.5).abs() < 1e-9);
        for (j, v) in [(0, 0.0), (0, 1.0), (1, 0.0), (1, 1.0), (2, 0.0), (2, 1.0)] {
            let mut q = p.clone();
            q.lower[j] = v;
            q.upper[j] = v;
            let warm = root.resolve(&q.lower, &q.upper).unwrap().solution();
            let cold = solve(&q).unwrap();
            assert!((warm.objective - cold.objective).abs() < 1e-9, "{j}={v}: {warm:?} vs {cold:?}");
            assert!(q.rows.iter().all(|r| r.is_satisfied(&warm.x, 1e-9)));
        }
    }

    #[test]
    fn warm_restart_detects_infeasibility() {
        let rows = vec![LinearRow::new(vec![(0, 1.0), (1, 1.0)], Sense::Ge, 1.5)];
        let p = lp(vec![1.0, 1.0], vec![0.0; 2], vec![1.0; 2], rows);
        let root = solve_warm(&p).unwrap();
        assert!(matches!(root.resolve(&[0.0, 0.0], &[0.0, 1.0]), Err(Error::Infeasible)));
        let s = root.resolve(&[0.0, 0.0], &[0.6, 1.0]).unwrap().solution();
        assert!((s.objective - 1.5).abs() < 1e-9);
    }

    #[test]
    fn added_rows_match_cold_solve() {
        let rows = vec![LinearRow::new(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Le, 2.0)];
        let p = lp(vec![-1.0, -2.0, -3.0], vec![0.0; 3], vec![1.0; 3], rows);
        let root = solve_warm(&p).unwrap();
        let cut = LinearRow::new(vec![(1, 1.0), (2, 2.0)], Sense::Le, 1.5);
        let warm = root.add_rows(std::slice::from_ref(&cut)).unwrap();
        let mut q = p.clone();
        q.rows.push(cut);
        let cold = solve(&q).unwrap();
        assert_eq!(warm.rows(), 2);
        assert!((warm.solution().objective - cold.objective).abs() < 1e-9);
        let again = warm.resolve(&[0.0, 0.0, 0.5], &[1.0, 1.0, 1.0]).unwrap().solution();
        q.lower[2] = 0.5;
        assert!((again.objective - solve(&q).unwrap().objective).abs() < 1e-9);
        let infeasible = LinearRow::new(vec![(0, 1.0)], Sense::Ge, 3.0);
        assert!(matches!(warm.add_rows(&[infeasible]), Err(Error::Infeasible)));
    }

    #[test]
    fn redundant_equalities() {
        let row = LinearRow::new(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 1.0);
        let p = lp(vec![1.0, 0.0], vec![0.0; 2], vec![1.0; 2], vec![row.clone(), row]);
        let s = solve(&p).unwrap();
        assert!(s.objective.abs() < 1e-12);
        assert!((s.x[1] - 1.0).abs() < 1e-9);
    }
}
