//! A small dense linear-programming solver.
//!
//! Solves `min cᵀx` subject to equality rows, `≤` rows and finite box bounds
//! with a two-phase bounded-variable primal simplex on a dense tableau.
//! Pricing uses the largest reduced cost until `10·(rows+cols)` iterations
//! have passed and Bland's rule afterwards, so the solver always terminates
//! and is deterministic for a given input.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const FEAS_TOL: f64 = 1e-8;
pub const OPT_TOL: f64 = 1e-9;
/// Bound slack tolerated by the two-pass ratio test.
const HARRIS_TOL: f64 = 1e-9;

/// Basic values are recomputed from the original rows this often.
const REFRESH_EVERY: usize = 100;

pub const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl SparseRow {
    pub fn new(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { coeffs, rhs }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub eq_rows: Vec<SparseRow>,
    /// Rows meaning `row·x ≤ rhs`.
    pub ub_rows: Vec<SparseRow>,
    pub bounds: Vec<(f64, f64)>,
    /// Optional variable names, used by [`LinearProgram::dump`].
    pub names: Vec<String>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.eq_rows.len() + self.ub_rows.len()
    }

    /// Adds a variable and returns its column index.
    pub fn add_var(&mut self, cost: f64, lo: f64, hi: f64, name: impl Into<String>) -> usize {
        self.objective.push(cost);
        self.bounds.push((lo, hi));
        self.names.push(name.into());
        self.objective.len() - 1
    }

    pub fn add_eq(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.eq_rows.push(SparseRow::new(coeffs, rhs));
    }

    pub fn add_le(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.ub_rows.push(SparseRow::new(coeffs, rhs));
    }

    pub fn add_ge(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        let neg = coeffs.into_iter().map(|(j, a)| (j, -a)).collect();
        self.ub_rows.push(SparseRow::new(neg, -rhs));
    }

    pub fn check(&self) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(Error::Solver(format!("{} bounds for {n} variables", self.bounds.len())));
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Solver(format!("variable {j} has a non-finite bound")));
            }
            if lo > hi {
                return Err(Error::Solver(format!("variable {j} has lo {lo} > hi {hi}")));
            }
        }
        for row in self.eq_rows.iter().chain(&self.ub_rows) {
            if let Some(&(j, _)) = row.coeffs.iter().find(|(j, _)| *j >= n) {
                return Err(Error::Solver(format!("row references variable {j} ≥ {n}")));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|(_, a)| !a.is_finite()) {
                return Err(Error::Solver("row has non-finite data".into()));
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for row in &self.eq_rows {
            worst = worst.max((row.dot(x) - row.rhs).abs());
        }
        for row in &self.ub_rows {
            worst = worst.max(row.dot(x) - row.rhs);
        }
        for (&xj, &(lo, hi)) in x.iter().zip(&self.bounds) {
            worst = worst.max(lo - xj).max(xj - hi);
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    fn name(&self, j: usize) -> String {
        match self.names.get(j) {
            Some(s) if !s.is_empty() => s.clone(),
            _ => format!("x{j}"),
        }
    }

    /// Human-readable dump, one objective/row/bound per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let term = |j: usize, a: f64| format!("{a:+} {}", self.name(j));
        let obj: Vec<String> =
            self.objective.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, &c)| term(j, c)).collect();
        let _ = writeln!(out, "min: {}", obj.join(" "));
        for (i, row) in self.eq_rows.iter().enumerate() {
            let lhs: Vec<String> = row.coeffs.iter().map(|&(j, a)| term(j, a)).collect();
            let _ = writeln!(out, "eq{i}: {} = {}", lhs.join(" "), row.rhs);
        }
        for (i, row) in self.ub_rows.iter().enumerate() {
            let lhs: Vec<String> = row.coeffs.iter().map(|&(j, a)| term(j, a)).collect();
            let _ = writeln!(out, "ub{i}: {} <= {}", lhs.join(" "), row.rhs);
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            let _ = writeln!(out, "bound: {lo} <= {} <= {hi}", self.name(j));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.check()?;
    Tableau::build(lp).run(lp)
}

/// Outcome of one simplex phase.
enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Tableau {
    rows: usize,
    cols: usize,
    n_struct: usize,
    /// Row-major `rows × cols` coefficients, always of the form `B⁻¹A`.
    tab: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    /// Reduced costs for the current phase's cost vector.
    reduced: Vec<f64>,
    basis: Vec<usize>,
    /// Row index of each basic column, `usize::MAX` when nonbasic.
    position: Vec<usize>,
    beta: Vec<f64>,
    at_upper: Vec<bool>,
    artificial_from: usize,
    iterations: usize,
    /// Sign-adjusted original rows (including slack/artificial entries) and
    /// right-hand sides, used to refresh `beta`.
    orig_rows: Vec<Vec<(usize, f64)>>,
    orig_rhs: Vec<f64>,
    /// Initial basis; its columns of `tab` hold `B⁻¹`.
    init_basis: Vec<usize>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let n_eq = lp.eq_rows.len();
        let n_ub = lp.ub_rows.len();
        let rows = n_eq + n_ub;

        let lo: Vec<f64> = lp.bounds.iter().map(|b| b.0).collect();
        let mut dense_rows: Vec<(Vec<f64>, f64, Option<usize>)> = Vec::with_capacity(rows);
        for row in &lp.eq_rows {
            let mut d = vec![0.0; n];
            for &(j, a) in &row.coeffs {
                d[j] += a;
            }
            dense_rows.push((d, row.rhs, None));
        }
        for (s, row) in lp.ub_rows.iter().enumerate() {
            let mut d = vec![0.0; n];
            for &(j, a) in &row.coeffs {
                d[j] += a;
            }
            dense_rows.push((d, row.rhs, Some(n + s)));
        }

        // residual at x = lo decides which rows need an artificial
        let mut needs_art = Vec::with_capacity(rows);
        let mut residual = Vec::with_capacity(rows);
        for (d, rhs, slack) in &dense_rows {
            let r = rhs - d.iter().zip(&lo).map(|(a, l)| a * l).sum::<f64>();
            residual.push(r);
            needs_art.push(slack.is_none() || r < 0.0);
        }
        let n_art = needs_art.iter().filter(|&&b| b).count();
        let cols = n + n_ub + n_art;
        let artificial_from = n + n_ub;

        let mut tab = vec![0.0; rows * cols];
        let mut basis = vec![0; rows];
        let mut beta = vec![0.0; rows];
        let mut next_art = artificial_from;
        let mut orig_rows = Vec::with_capacity(rows);
        let mut orig_rhs = Vec::with_capacity(rows);
        for (i, (d, rhs, slack)) in dense_rows.iter().enumerate() {
            let flip = if needs_art[i] && residual[i] < 0.0 { -1.0 } else { 1.0 };
            orig_rhs.push(flip * rhs);
            let row = &mut tab[i * cols..(i + 1) * cols];
            for (j, a) in d.iter().enumerate() {
                row[j] = flip * a;
            }
            if let Some(s) = slack {
                row[*s] = flip;
            }
            if needs_art[i] {
                row[next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            } else {
                basis[i] = slack.expect("rows without artificials are slack rows");
            }
            beta[i] = flip * residual[i];
            orig_rows.push(row.iter().enumerate().filter(|(_, a)| **a != 0.0).map(|(j, a)| (j, *a)).collect());
        }

        let mut lower = lo;
        let mut upper: Vec<f64> = lp.bounds.iter().map(|b| b.1).collect();
        lower.resize(cols, 0.0);
        upper.resize(cols, f64::INFINITY);

        let mut position = vec![usize::MAX; cols];
        for (i, &b) in basis.iter().enumerate() {
            position[b] = i;
        }

        Self {
            rows,
            cols,
            n_struct: n,
            tab,
            lower,
            upper,
            cost: vec![0.0; cols],
            reduced: vec![0.0; cols],
            position,
            beta,
            at_upper: vec![false; cols],
            artificial_from,
            iterations: 0,
            orig_rows,
            orig_rhs,
            init_basis: basis.clone(),
            basis,
        }
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        let has_artificials = self.artificial_from < self.cols;
        if has_artificials {
            let mut phase1 = vec![0.0; self.cols];
            for c in phase1.iter_mut().skip(self.artificial_from) {
                *c = 1.0;
            }
            self.set_cost(phase1);
            if let PhaseEnd::Unbounded = self.iterate()? {
                return Err(Error::Solver("phase one reported an unbounded ray".into()));
            }
            let infeasibility: f64 =
                (0..self.rows).filter(|&i| self.basis[i] >= self.artificial_from).map(|i| self.beta[i]).sum();
            let scale = 1.0 + lp.eq_rows.iter().chain(&lp.ub_rows).map(|r| r.rhs.abs()).fold(0.0, f64::max);
            if infeasibility > FEAS_TOL * scale {
                return Ok(LpSolution { status: LpStatus::Infeasible, x: self.primal(), objective: f64::NAN });
            }
            self.expel_artificials();
            for j in self.artificial_from..self.cols {
                self.upper[j] = 0.0;
            }
        }

        let mut phase2 = lp.objective.clone();
        phase2.resize(self.cols, 0.0);
        self.set_cost(phase2);
        let end = self.iterate()?;
        let x = self.primal();
        if let PhaseEnd::Unbounded = end {
            return Ok(LpSolution { status: LpStatus::Unbounded, x, objective: f64::NEG_INFINITY });
        }
        let violation = lp.max_violation(&x);
        if violation > FEAS_TOL {
            return Err(Error::Solver(format!(
                "final point violates constraints by {violation:e} after {} iterations",
                self.iterations
            )));
        }
        let objective = lp.objective_value(&x);
        Ok(LpSolution { status: LpStatus::Optimal, x, objective })
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.tab[i * self.cols..(i + 1) * self.cols]
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.upper[j]
        } else {
            self.lower[j]
        }
    }

    fn set_cost(&mut self, cost: Vec<f64>) {
        self.reduced.clone_from(&cost);
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let start = i * self.cols;
                for (d, a) in self.reduced.iter_mut().zip(&self.tab[start..start + self.cols]) {
                    *d -= cb * a;
                }
            }
        }
        for &b in &self.basis {
            self.reduced[b] = 0.0;
        }
        self.cost = cost;
    }

    /// `B⁻¹ (b - N x_N)` from the original rows.
    fn recomputed_beta(&self) -> Vec<f64> {
        let mut resid = self.orig_rhs.clone();
        for (i, row) in self.orig_rows.iter().enumerate() {
            for &(j, a) in row {
                if self.position[j] == usize::MAX {
                    resid[i] -= a * self.nonbasic_value(j);
                }
            }
        }
        (0..self.rows)
            .map(|k| {
                let t = &self.tab[k * self.cols..(k + 1) * self.cols];
                self.init_basis.iter().zip(&resid).map(|(&c, r)| t[c] * r).sum()
            })
            .collect()
    }

    fn primal(&self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.n_struct).map(|j| self.nonbasic_value(j)).collect();
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n_struct {
                x[b] = self.beta[i];
            }
        }
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = xj.clamp(self.lower[j], self.upper[j]);
        }
        x
    }

    fn iterate(&mut self) -> Result<PhaseEnd> {
        let bland_after = 10 * (self.rows + self.cols);
        let limit = 200 * (self.rows + self.cols) + 10_000;
        let mut local = 0usize;
        loop {
            let bland = local >= bland_after;
            let Some((entering, dir)) = self.price(bland) else {
                self.beta = self.recomputed_beta();
                return Ok(PhaseEnd::Optimal);
            };
            match self.ratio_test(entering, dir, bland)? {
                None => return Ok(PhaseEnd::Unbounded),
                Some(step) => self.apply(entering, dir, step),
            }
            local += 1;
            self.iterations += 1;
            if local.is_multiple_of(REFRESH_EVERY) {
                self.beta = self.recomputed_beta();
            }
            if local > limit {
                return Err(Error::Solver(format!("iteration limit {limit} exceeded")));
            }
        }
    }

    /// Picks an improving nonbasic column and its direction (+1 up, -1 down).
    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.cols {
            if self.position[j] != usize::MAX || self.upper[j] - self.lower[j] <= 0.0 {
                continue;
            }
            let d = self.reduced[j];
            let dir = if !self.at_upper[j] && d < -OPT_TOL {
                1.0
            } else if self.at_upper[j] && d > OPT_TOL {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    /// Returns the step length and the leaving row (`None` for a bound flip),
    /// or `None` overall when the ray is unbounded.
    ///
    /// Two-pass (Harris) test: the first pass finds the largest step that
    /// keeps every basic variable within `HARRIS_TOL` of its bounds, the
    /// second picks the largest pivot among rows blocking within that step.
    fn ratio_test(&self, entering: usize, dir: f64, bland: bool) -> Result<Option<(f64, Option<usize>)>> {
        let range = self.upper[entering] - self.lower[entering];
        let mut relaxed = f64::INFINITY;
        let mut tiny_blocker = false;
        let mut blocking: Vec<(usize, f64, f64)> = Vec::new();
        for i in 0..self.rows {
            let alpha = self.tab[i * self.cols + entering];
            if alpha.abs() <= PIVOT_TOL {
                if alpha != 0.0 {
                    tiny_blocker = true;
                }
                continue;
            }
            let rate = dir * alpha;
            let b = self.basis[i];
            let room = if rate > 0.0 {
                self.beta[i] - self.lower[b]
            } else if self.upper[b].is_finite() {
                self.upper[b] - self.beta[i]
            } else {
                continue;
            };
            let room = room.max(0.0);
            relaxed = relaxed.min((room + HARRIS_TOL) / rate.abs());
            blocking.push((i, room / rate.abs(), alpha.abs()));
        }
        if range <= relaxed {
            if range.is_infinite() {
                if tiny_blocker {
                    return Err(Error::Solver(format!(
                        "numerical breakdown: only pivots below {PIVOT_TOL:e} block column {entering}"
                    )));
                }
                return Ok(None);
            }
            // a bound flip beats every row
            if blocking.iter().all(|&(_, limit, _)| limit >= range) {
                return Ok(Some((range, None)));
            }
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for &(i, limit, mag) in &blocking {
            if limit > relaxed {
                continue;
            }
            let better = match best {
                None => true,
                Some((cur, _, cur_mag)) => {
                    if bland {
                        self.basis[i] < self.basis[cur]
                    } else {
                        mag > cur_mag
                    }
                }
            };
            if better {
                best = Some((i, limit, mag));
            }
        }
        match best {
            Some((i, limit, _)) => Ok(Some((limit.min(range), Some(i)))),
            None => Ok(Some((range, None))),
        }
    }

    fn apply(&mut self, entering: usize, dir: f64, (step, leave): (f64, Option<usize>)) {
        let cols = self.cols;
        if step != 0.0 {
            for i in 0..self.rows {
                let alpha = self.tab[i * cols + entering];
                if alpha != 0.0 {
                    self.beta[i] -= dir * step * alpha;
                }
            }
        }
        let Some(r) = leave else {
            self.at_upper[entering] = !self.at_upper[entering];
            return;
        };
        let entering_value = self.nonbasic_value(entering) + dir * step;
        let leaving = self.basis[r];
        let rate = dir * self.tab[r * cols + entering];
        self.at_upper[leaving] = rate < 0.0;
        self.pivot(r, entering);
        self.beta[r] = entering_value;
        self.at_upper[entering] = false;
    }

    fn pivot(&mut self, r: usize, entering: usize) {
        let cols = self.cols;
        let piv = self.tab[r * cols + entering];
        {
            let row = &mut self.tab[r * cols..(r + 1) * cols];
            for v in row.iter_mut() {
                *v /= piv;
            }
            row[entering] = 1.0;
        }
        let pivot_row: Vec<f64> = self.row(r).to_vec();
        let nz: Vec<usize> = (0..cols).filter(|&j| pivot_row[j] != 0.0).collect();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let factor = self.tab[i * cols + entering];
            if factor == 0.0 {
                continue;
            }
            let row = &mut self.tab[i * cols..(i + 1) * cols];
            for &j in &nz {
                row[j] -= factor * pivot_row[j];
            }
            row[entering] = 0.0;
        }
        let d = self.reduced[entering];
        if d != 0.0 {
            for &j in &nz {
                self.reduced[j] -= d * pivot_row[j];
            }
            self.reduced[entering] = 0.0;
        }
        let leaving = self.basis[r];
        self.position[leaving] = usize::MAX;
        self.position[entering] = r;
        self.basis[r] = entering;
    }

    /// After phase one, pivots zero-valued artificials out of the basis where
    /// a usable non-artificial column exists. Rows with no such column are
    /// linearly dependent and keep their (fixed at zero) artificial.
    fn expel_artificials(&mut self) {
        for r in 0..self.rows {
            if self.basis[r] < self.artificial_from {
                continue;
            }
            let mut best = None;
            let mut mag = 1e-9;
            for j in 0..self.artificial_from {
                if self.position[j] != usize::MAX {
                    continue;
                }
                let a = self.tab[r * self.cols + j].abs();
                if a > mag {
                    mag = a;
                    best = Some(j);
                }
            }
            if let Some(j) = best {
                // degenerate pivot: the artificial sits at (numerically) zero
                let value = self.nonbasic_value(j);
                let art_value = self.beta[r];
                let alpha = self.tab[r * self.cols + j];
                let delta = art_value / alpha;
                for i in 0..self.rows {
                    if i != r {
                        let a = self.tab[i * self.cols + j];
                        if a != 0.0 {
                            self.beta[i] -= a * delta;
                        }
                    }
                }
                let leaving = self.basis[r];
                self.at_upper[leaving] = false;
                self.pivot(r, j);
                self.beta[r] = value + delta;
            }
        }
    }
}
