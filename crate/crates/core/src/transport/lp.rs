//! Small linear programs: a dense two-phase simplex and a sparse backend.
//!
//! The dense solver pivots with the most-negative reduced cost (lowest index
//! on ties) and falls back to Bland's rule while pivots are degenerate, so
//! it terminates and is deterministic for a given input. Larger programs go
//! through `minilp`'s sparse revised simplex.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintOp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub op: ConstraintOp,
    pub rhs: f64,
}

/// `minimize c·x` subject to linear constraints and per-variable bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub x: Vec<f64>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Turns a non-optimal status into a solver error.
    pub fn require_optimal(self, what: &str) -> Result<LpSolution> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            s => Err(Error::Solver(format!("{what}: {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    Dense,
    Sparse,
    #[default]
    Auto,
}

/// Dense tableaus above this many entries are routed to the sparse backend.
const DENSE_ENTRY_LIMIT: usize = 400_000;

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.bounds.push((lower, upper));
        self.objective.len() - 1
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, op: ConstraintOp, rhs: f64) {
        self.constraints.push(Constraint { coeffs, op, rhs });
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn check(&self) -> Result<()> {
        let n = self.objective.len();
        if self.bounds.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} objective coefficients but {} bounds",
                n,
                self.bounds.len()
            )));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite objective coefficient".into()));
        }
        for (lo, hi) in &self.bounds {
            if lo.is_nan() || hi.is_nan() || lo > hi || *lo == f64::INFINITY || *hi == f64::NEG_INFINITY
            {
                return Err(Error::InvalidParameter(format!("bad bounds [{lo}, {hi}]")));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(Error::InvalidParameter(format!("row {i}: non-finite rhs")));
            }
            for &(j, a) in &c.coeffs {
                if j >= n {
                    return Err(Error::DimensionMismatch(format!(
                        "row {i} references variable {j} of {n}"
                    )));
                }
                if !a.is_finite() {
                    return Err(Error::InvalidParameter(format!("row {i}: non-finite coefficient")));
                }
            }
        }
        Ok(())
    }

    /// Largest violation of a constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            worst = worst.max(lo - x[j]).max(x[j] - hi);
        }
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match c.op {
                ConstraintOp::Le => lhs - c.rhs,
                ConstraintOp::Ge => c.rhs - lhs,
                ConstraintOp::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    solve_lp_with(lp, Backend::Auto)
}

pub fn solve_lp_with(lp: &LinearProgram, backend: Backend) -> Result<LpSolution> {
    lp.check()?;
    let backend = match backend {
        Backend::Auto => {
            let rows = lp.constraints.len()
                + lp.bounds
                    .iter()
                    .filter(|b| b.0.is_finite() && b.1.is_finite())
                    .count();
            let cols = lp.num_vars() + rows;
            if rows.saturating_mul(cols) <= DENSE_ENTRY_LIMIT {
                Backend::Dense
            } else {
                Backend::Sparse
            }
        }
        b => b,
    };
    match backend {
        Backend::Sparse => solve_sparse(lp),
        _ => DenseSimplex::build(lp).solve(lp),
    }
}

fn solve_sparse(lp: &LinearProgram) -> Result<LpSolution> {
    use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
    let mut pb = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = lp
        .objective
        .iter()
        .zip(&lp.bounds)
        .map(|(&c, &b)| pb.add_var(c, b))
        .collect();
    for c in &lp.constraints {
        let mut e = LinearExpr::empty();
        for &(j, a) in &c.coeffs {
            e.add(vars[j], a);
        }
        let op = match c.op {
            ConstraintOp::Le => ComparisonOp::Le,
            ConstraintOp::Ge => ComparisonOp::Ge,
            ConstraintOp::Eq => ComparisonOp::Eq,
        };
        pb.add_constraint(e, op, c.rhs);
    }
    match pb.solve() {
        Ok(sol) => {
            let x: Vec<f64> = vars.iter().map(|&v| sol[v]).collect();
            Ok(LpSolution {
                status: LpStatus::Optimal,
                value: lp.objective_value(&x),
                x,
            })
        }
        Err(minilp::Error::Infeasible) => Ok(not_optimal(lp, LpStatus::Infeasible)),
        Err(minilp::Error::Unbounded) => Ok(not_optimal(lp, LpStatus::Unbounded)),
    }
}

fn not_optimal(lp: &LinearProgram, status: LpStatus) -> LpSolution {
    LpSolution {
        status,
        value: match status {
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        },
        x: vec![f64::NAN; lp.num_vars()],
    }
}

const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-11;
const DEGENERATE_STREAK: usize = 20;

/// Original variable `j` equals `offset + Σ sign * y_k` over its columns.
struct VarMap {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

struct DenseSimplex {
    rows: usize,
    /// Structural columns (`y`), then slacks/surplus, then artificials.
    cols: usize,
    first_artificial: usize,
    /// Row-major, `cols + 1` entries per row; the last one is the rhs.
    tab: Vec<f64>,
    basis: Vec<usize>,
    /// Phase-two cost per column.
    cost: Vec<f64>,
    maps: Vec<VarMap>,
    active: Vec<bool>,
}

impl DenseSimplex {
    fn build(lp: &LinearProgram) -> Self {
        let mut maps = Vec::with_capacity(lp.num_vars());
        let mut ny = 0usize;
        let mut struct_cost = Vec::new();
        let mut extra_rows: Vec<(usize, f64)> = Vec::new();
        for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
            let c = lp.objective[j];
            let map = if lo.is_finite() {
                if hi.is_finite() {
                    extra_rows.push((ny, hi - lo));
                }
                struct_cost.push(c);
                ny += 1;
                VarMap {
                    offset: lo,
                    cols: vec![(ny - 1, 1.0)],
                }
            } else if hi.is_finite() {
                struct_cost.push(-c);
                ny += 1;
                VarMap {
                    offset: hi,
                    cols: vec![(ny - 1, -1.0)],
                }
            } else {
                struct_cost.push(c);
                struct_cost.push(-c);
                ny += 2;
                VarMap {
                    offset: 0.0,
                    cols: vec![(ny - 2, 1.0), (ny - 1, -1.0)],
                }
            };
            maps.push(map);
        }

        // Rows in y-space with non-negative rhs.
        struct Row {
            coeffs: Vec<(usize, f64)>,
            op: ConstraintOp,
            rhs: f64,
        }
        let mut rows: Vec<Row> = Vec::new();
        for c in &lp.constraints {
            let mut coeffs = Vec::new();
            let mut rhs = c.rhs;
            for &(j, a) in &c.coeffs {
                rhs -= a * maps[j].offset;
                for &(k, s) in &maps[j].cols {
                    coeffs.push((k, a * s));
                }
            }
            rows.push(Row {
                coeffs,
                op: c.op,
                rhs,
            });
        }
        for (k, ub) in extra_rows {
            rows.push(Row {
                coeffs: vec![(k, 1.0)],
                op: ConstraintOp::Le,
                rhs: ub,
            });
        }
        for r in &mut rows {
            if r.rhs < 0.0 {
                r.rhs = -r.rhs;
                for c in &mut r.coeffs {
                    c.1 = -c.1;
                }
                r.op = match r.op {
                    ConstraintOp::Le => ConstraintOp::Ge,
                    ConstraintOp::Ge => ConstraintOp::Le,
                    ConstraintOp::Eq => ConstraintOp::Eq,
                };
            }
        }
        let m = rows.len();
        let n_slack = rows.iter().filter(|r| r.op != ConstraintOp::Eq).count();
        let n_art = rows.iter().filter(|r| r.op != ConstraintOp::Le).count();
        let first_artificial = ny + n_slack;
        let cols = first_artificial + n_art;
        let w = cols + 1;
        let mut tab = vec![0.0; m * w];
        let mut basis = vec![0; m];
        let mut slack = ny;
        let mut art = first_artificial;
        for (i, r) in rows.iter().enumerate() {
            let row = &mut tab[i * w..(i + 1) * w];
            for &(k, a) in &r.coeffs {
                row[k] += a;
            }
            row[cols] = r.rhs;
            match r.op {
                ConstraintOp::Le => {
                    row[slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                ConstraintOp::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                ConstraintOp::Eq => {
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        let mut cost = vec![0.0; cols];
        cost[..ny].copy_from_slice(&struct_cost);
        DenseSimplex {
            rows: m,
            cols,
            first_artificial,
            tab,
            basis,
            cost,
            maps,
            active: vec![true; m],
        }
    }

    fn width(&self) -> usize {
        self.cols + 1
    }

    fn pivot(&mut self, r: usize, c: usize, reduced: &mut [f64], obj: &mut f64) {
        let w = self.width();
        let pv = self.tab[r * w + c];
        {
            let row = &mut self.tab[r * w..(r + 1) * w];
            for v in row.iter_mut() {
                *v /= pv;
            }
            row[c] = 1.0;
        }
        let prow: Vec<f64> = self.tab[r * w..(r + 1) * w].to_vec();
        let nz: Vec<usize> = (0..w).filter(|&j| prow[j] != 0.0).collect();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.tab[i * w + c];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.tab[i * w..(i + 1) * w];
            for &j in &nz {
                row[j] -= f * prow[j];
            }
            row[c] = 0.0;
        }
        let f = reduced[c];
        if f != 0.0 {
            for &j in &nz {
                if j < self.cols {
                    reduced[j] -= f * prow[j];
                }
            }
            *obj += f * prow[self.cols];
            reduced[c] = 0.0;
        }
        self.basis[r] = c;
    }

    fn reduced_costs(&self, costs: &[f64]) -> (Vec<f64>, f64) {
        let w = self.width();
        let mut reduced = costs.to_vec();
        let mut obj = 0.0;
        for i in 0..self.rows {
            let cb = costs[self.basis[i]];
            if cb != 0.0 && self.active[i] {
                for j in 0..self.cols {
                    reduced[j] -= cb * self.tab[i * w + j];
                }
                obj -= cb * self.tab[i * w + self.cols];
            }
        }
        (reduced, obj)
    }

    /// Runs the simplex on the current basis with the given column costs.
    /// Returns `false` if unbounded.
    fn optimize(&mut self, costs: &[f64], allowed: usize) -> bool {
        let w = self.width();
        let (mut reduced, mut obj) = self.reduced_costs(costs);
        let mut streak = 0usize;
        let mut fresh = true;
        loop {
            let bland = streak >= DEGENERATE_STREAK;
            let mut enter = None;
            let mut best = -COST_EPS;
            for j in 0..allowed {
                if reduced[j] < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = reduced[j];
                }
            }
            let Some(c) = enter else {
                if fresh {
                    return true;
                }
                // Incremental updates drift; confirm optimality from scratch.
                (reduced, obj) = self.reduced_costs(costs);
                fresh = true;
                continue;
            };
            fresh = false;
            let mut leave: Option<usize> = None;
            let mut ratio = f64::INFINITY;
            for i in 0..self.rows {
                if !self.active[i] {
                    continue;
                }
                let a = self.tab[i * w + c];
                if a > PIVOT_EPS {
                    let t = self.tab[i * w + self.cols] / a;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            t < ratio - 1e-12 * ratio.abs().max(1e-300)
                                || (t <= ratio + 1e-12 * ratio.abs().max(1e-300)
                                    && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some(i);
                        ratio = t;
                    }
                }
            }
            let Some(r) = leave else {
                return false;
            };
            if ratio <= 1e-14 {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(r, c, &mut reduced, &mut obj);
            for i in 0..self.rows {
                let v = &mut self.tab[i * w + self.cols];
                if *v < 0.0 && *v > -1e-12 {
                    *v = 0.0;
                }
            }
        }
    }

    fn solve(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        let w = self.width();
        if self.first_artificial < self.cols {
            let mut phase1 = vec![0.0; self.cols];
            for c in phase1.iter_mut().skip(self.first_artificial) {
                *c = 1.0;
            }
            self.optimize(&phase1, self.cols);
            let infeas: f64 = (0..self.rows)
                .filter(|&i| self.basis[i] >= self.first_artificial)
                .map(|i| self.tab[i * w + self.cols])
                .sum();
            let scale = 1.0
                + (0..self.rows)
                    .map(|i| self.tab[i * w + self.cols].abs())
                    .fold(0.0, f64::max);
            if infeas > 1e-9 * scale {
                return Ok(not_optimal(lp, LpStatus::Infeasible));
            }
            // Drive artificials out of the basis; rows that cannot be pivoted are redundant.
            for i in 0..self.rows {
                if self.basis[i] < self.first_artificial {
                    continue;
                }
                let col = (0..self.first_artificial)
                    .filter(|&j| self.tab[i * w + j].abs() > 1e-9)
                    .max_by(|&a, &b| {
                        self.tab[i * w + a]
                            .abs()
                            .total_cmp(&self.tab[i * w + b].abs())
                            .then(b.cmp(&a))
                    });
                match col {
                    Some(c) => {
                        let mut dummy = vec![0.0; self.cols];
                        let mut o = 0.0;
                        self.pivot(i, c, &mut dummy, &mut o);
                    }
                    None => self.active[i] = false,
                }
            }
        }
        let cost = self.cost.clone();
        if !self.optimize(&cost, self.first_artificial) {
            return Ok(not_optimal(lp, LpStatus::Unbounded));
        }
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            if self.active[i] {
                y[self.basis[i]] = self.tab[i * w + self.cols];
            }
        }
        let x: Vec<f64> = self
            .maps
            .iter()
            .map(|m| m.offset + m.cols.iter().map(|&(k, s)| s * y[k]).sum::<f64>())
            .collect();
        Ok(LpSolution {
            status: LpStatus::Optimal,
            value: lp.objective_value(&x),
            x,
        })
    }
}
