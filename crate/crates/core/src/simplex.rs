//! Revised primal simplex for `max c.x  s.t.  A x = b, x >= 0`.
//!
//! Bland's rule is always on. The basis inverse is kept densely and updated
//! with product-form pivots, refactorized from scratch at a fixed interval.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Smallest pivot element accepted in the ratio test and in basis swaps.
    pub pivot_tolerance: f64,
    /// Allowed negativity of basic values and Phase I residual.
    pub feasibility_tolerance: f64,
    /// Reduced costs above this make a column eligible to enter.
    pub optimality_tolerance: f64,
    pub max_iterations: usize,
    pub refactor_interval: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            pivot_tolerance: 1e-9,
            feasibility_tolerance: 1e-7,
            optimality_tolerance: 1e-9,
            max_iterations: 1_000_000,
            refactor_interval: 50,
        }
    }
}

/// A linear program in canonical equality form.
#[derive(Debug, Clone)]
pub struct LpProblem {
    objective: Vec<f64>,
    constraints: CsMat<f64>,
    rhs: Vec<f64>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, constraints: CsMat<f64>, rhs: Vec<f64>) -> Result<Self> {
        let (rows, cols) = constraints.shape();
        if objective.len() != cols || rhs.len() != rows {
            return Err(Error::DimensionMismatch(format!(
                "constraint matrix is {rows}x{cols}, objective has {} entries, rhs {}",
                objective.len(),
                rhs.len()
            )));
        }
        Ok(LpProblem {
            objective,
            constraints: constraints.to_csc(),
            rhs,
        })
    }

    /// Builds the problem from dense constraint rows.
    pub fn from_rows(objective: Vec<f64>, rows: &[Vec<f64>], rhs: Vec<f64>) -> Result<Self> {
        let cols = objective.len();
        let mut tri = TriMat::new((rows.len(), cols));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    tri.add_triplet(i, j, v);
                }
            }
        }
        Self::new(objective, tri.to_csc(), rhs)
    }

    pub fn rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn cols(&self) -> usize {
        self.objective.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &CsMat<f64> {
        &self.constraints
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Basic column per constraint row (empty when infeasible).
    pub basis: Vec<usize>,
    pub x: Vec<f64>,
    pub objective_value: f64,
    /// For unbounded problems: `d >= 0`, `A d = 0`, `c.d > 0`.
    pub ray: Option<Vec<f64>>,
    pub iterations: usize,
    pub used_phase_one: bool,
    pub diagnostic: Option<String>,
}

/// An explicit dense basis inverse over a fixed constraint matrix.
#[derive(Debug, Clone)]
pub struct Basis {
    columns: Vec<usize>,
    inverse: DMatrix<f64>,
    updates: usize,
    refactor_interval: usize,
    pivot_tolerance: f64,
}

impl Basis {
    pub fn factor(a: &CsMat<f64>, columns: Vec<usize>) -> Result<Self> {
        Self::factor_with(a, columns, &SimplexOptions::default())
    }

    pub fn factor_with(a: &CsMat<f64>, columns: Vec<usize>, opts: &SimplexOptions) -> Result<Self> {
        let (rows, cols) = a.shape();
        if columns.len() != rows {
            return Err(Error::DimensionMismatch(format!(
                "basis has {} columns for {rows} rows",
                columns.len()
            )));
        }
        if let Some(&bad) = columns.iter().find(|&&j| j >= cols) {
            return Err(Error::DimensionMismatch(format!(
                "basis column {bad} out of range"
            )));
        }
        let inverse = invert(a, &columns)?;
        Ok(Basis {
            columns,
            inverse,
            updates: 0,
            refactor_interval: opts.refactor_interval,
            pivot_tolerance: opts.pivot_tolerance,
        })
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn position(&self, column: usize) -> Option<usize> {
        self.columns.iter().position(|&c| c == column)
    }

    /// `B^{-1} rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = self.columns.len();
        let mut out = vec![0.0; m];
        for (k, &r) in rhs.iter().enumerate() {
            if r != 0.0 {
                for (o, v) in out.iter_mut().zip(self.inverse.column(k).iter()) {
                    *o += v * r;
                }
            }
        }
        out
    }

    /// `B^{-T} rhs`.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Vec<f64> {
        (0..self.columns.len())
            .map(|j| {
                self.inverse
                    .column(j)
                    .iter()
                    .zip(rhs)
                    .map(|(v, r)| v * r)
                    .sum()
            })
            .collect()
    }

    /// `B^{-1} A_j`.
    pub fn column_of(&self, a: &CsMat<f64>, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.columns.len()];
        if let Some(col) = a.outer_view(j) {
            for (i, &v) in col.iter() {
                for (o, b) in out.iter_mut().zip(self.inverse.column(i).iter()) {
                    *o += b * v;
                }
            }
        }
        out
    }

    /// Swaps `leave` out of the basis and `enter` in.
    pub fn pivot(&mut self, a: &CsMat<f64>, enter: usize, leave: usize) -> Result<()> {
        if enter == leave {
            return Ok(());
        }
        let r = self
            .position(leave)
            .ok_or_else(|| Error::InvalidArgument(format!("column {leave} is not basic")))?;
        if self.position(enter).is_some() {
            return Err(Error::InvalidArgument(format!(
                "column {enter} is already basic"
            )));
        }
        let w = self.column_of(a, enter);
        self.pivot_at(a, enter, r, &w).map(|_| ())
    }

    /// Returns whether the pivot triggered a refactorization.
    fn pivot_at(&mut self, a: &CsMat<f64>, enter: usize, r: usize, w: &[f64]) -> Result<bool> {
        let wr = w[r];
        if wr.abs() < self.pivot_tolerance {
            return Err(Error::SingularBasis(format!(
                "pivot element {wr:e} for column {enter} in row {r}"
            )));
        }
        let m = self.columns.len();
        for j in 0..m {
            self.inverse[(r, j)] /= wr;
        }
        for (i, &f) in w.iter().enumerate().take(m) {
            if i != r && f != 0.0 {
                for j in 0..m {
                    let delta = f * self.inverse[(r, j)];
                    self.inverse[(i, j)] -= delta;
                }
            }
        }
        self.columns[r] = enter;
        self.updates += 1;
        if self.updates >= self.refactor_interval {
            self.refactor(a)?;
            return Ok(true);
        }
        Ok(false)
    }

    pub fn refactor(&mut self, a: &CsMat<f64>) -> Result<()> {
        self.inverse = invert(a, &self.columns)?;
        self.updates = 0;
        Ok(())
    }
}

fn invert(a: &CsMat<f64>, columns: &[usize]) -> Result<DMatrix<f64>> {
    let m = columns.len();
    let mut dense = DMatrix::<f64>::zeros(m, m);
    for (k, &j) in columns.iter().enumerate() {
        if let Some(col) = a.outer_view(j) {
            for (i, &v) in col.iter() {
                dense[(i, k)] = v;
            }
        }
    }
    dense
        .try_inverse()
        .ok_or_else(|| Error::SingularBasis(format!("basis {columns:?} is singular")))
}

enum Phase {
    Optimal,
    Unbounded {
        entering: usize,
        direction: Vec<f64>,
    },
}

struct Engine<'a> {
    a: &'a CsMat<f64>,
    c: &'a [f64],
    b: &'a [f64],
    opts: &'a SimplexOptions,
    iterations: usize,
}

impl Engine<'_> {
    /// Runs Bland-rule primal simplex from a feasible basis; `x_b` holds the
    /// basic values on entry and exit.
    fn run(&mut self, basis: &mut Basis, x_b: &mut Vec<f64>) -> Result<Phase> {
        let n = self.a.cols();
        let mut is_basic = vec![false; n];
        for &j in basis.columns() {
            is_basic[j] = true;
        }
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Err(Error::IterationLimit(self.opts.max_iterations));
            }
            let c_b: Vec<f64> = basis.columns().iter().map(|&j| self.c[j]).collect();
            let y = basis.solve_transpose(&c_b);
            let entering = (0..n).find(|&j| {
                !is_basic[j] && {
                    let col = self.a.outer_view(j);
                    let dot: f64 = col.map_or(0.0, |col| col.iter().map(|(i, v)| y[i] * v).sum());
                    self.c[j] - dot > self.opts.optimality_tolerance
                }
            });
            let Some(enter) = entering else {
                return Ok(Phase::Optimal);
            };
            let w = basis.column_of(self.a, enter);

            let mut leave: Option<(usize, f64)> = None;
            for (i, &wi) in w.iter().enumerate() {
                if wi <= self.opts.pivot_tolerance {
                    continue;
                }
                let ratio = x_b[i].max(0.0) / wi;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                        if (ratio < best && !tie)
                            || (tie && basis.columns()[i] < basis.columns()[r])
                        {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
            let Some((r, theta)) = leave else {
                return Ok(Phase::Unbounded {
                    entering: enter,
                    direction: w,
                });
            };

            for (xi, wi) in x_b.iter_mut().zip(&w) {
                *xi -= theta * wi;
            }
            x_b[r] = theta;
            is_basic[basis.columns()[r]] = false;
            is_basic[enter] = true;
            if basis.pivot_at(self.a, enter, r, &w)? {
                *x_b = basis.solve(self.b);
            }
            self.iterations += 1;
        }
    }
}

pub fn solve(problem: &LpProblem, start: Option<&[usize]>) -> Result<LpOutcome> {
    solve_with(problem, start, &SimplexOptions::default())
}

/// Solves the problem, skipping Phase I when `start` is a feasible basis.
pub fn solve_with(
    problem: &LpProblem,
    start: Option<&[usize]>,
    opts: &SimplexOptions,
) -> Result<LpOutcome> {
    let m = problem.rows();
    let n = problem.cols();

    if let Some(start) = start {
        if let Some(basis) = feasible_start(problem, start, opts) {
            let mut engine = Engine {
                a: &problem.constraints,
                c: &problem.objective,
                b: &problem.rhs,
                opts,
                iterations: 0,
            };
            return finish(problem, &mut engine, basis, false);
        }
    }

    // Phase I on rows sign-normalized so that b >= 0, with one artificial
    // column per row.
    let signs: Vec<f64> = problem
        .rhs
        .iter()
        .map(|&b| if b < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let rhs: Vec<f64> = problem.rhs.iter().zip(&signs).map(|(b, s)| b * s).collect();
    let mut tri = TriMat::new((m, n + m));
    for (j, col) in problem.constraints.outer_iterator().enumerate() {
        for (i, &v) in col.iter() {
            tri.add_triplet(i, j, v * signs[i]);
        }
    }
    for i in 0..m {
        tri.add_triplet(i, n + i, 1.0);
    }
    let augmented: CsMat<f64> = tri.to_csc();
    let mut phase_one_cost = vec![0.0; n + m];
    phase_one_cost[n..].iter_mut().for_each(|c| *c = -1.0);

    let mut basis = Basis::factor_with(&augmented, (n..n + m).collect(), opts)?;
    let mut x_b = rhs.clone();
    let mut engine = Engine {
        a: &augmented,
        c: &phase_one_cost,
        b: &rhs,
        opts,
        iterations: 0,
    };
    match engine.run(&mut basis, &mut x_b)? {
        Phase::Optimal => {}
        Phase::Unbounded { .. } => {
            return Err(Error::Internal(
                "phase one objective is bounded by zero".into(),
            ));
        }
    }
    let residual: f64 = basis
        .columns()
        .iter()
        .zip(&x_b)
        .filter(|(&j, _)| j >= n)
        .map(|(_, &v)| v.max(0.0))
        .sum();
    let scale = 1.0 + rhs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if residual > opts.feasibility_tolerance * scale {
        return Ok(infeasible(
            engine.iterations,
            format!("phase one residual {residual:e}"),
        ));
    }

    // Drive artificial columns out of the basis.
    for r in 0..m {
        if basis.columns()[r] < n {
            continue;
        }
        let candidate = (0..n).find(|&j| {
            basis.position(j).is_none()
                && basis.column_of(&augmented, j)[r].abs() > opts.pivot_tolerance
        });
        match candidate {
            Some(j) => {
                let w = basis.column_of(&augmented, j);
                basis.pivot_at(&augmented, j, r, &w)?;
                engine.iterations += 1;
            }
            None => {
                return Ok(infeasible(
                    engine.iterations,
                    format!("constraint row {r} is linearly dependent on the others"),
                ));
            }
        }
    }

    let iterations = engine.iterations;
    let basis = Basis::factor_with(&problem.constraints, basis.columns().to_vec(), opts)?;
    let mut engine = Engine {
        a: &problem.constraints,
        c: &problem.objective,
        b: &problem.rhs,
        opts,
        iterations,
    };
    finish(problem, &mut engine, basis, true)
}

fn feasible_start(problem: &LpProblem, start: &[usize], opts: &SimplexOptions) -> Option<Basis> {
    let mut seen = vec![false; problem.cols()];
    for &j in start {
        if j >= problem.cols() || std::mem::replace(&mut seen[j], true) {
            return None;
        }
    }
    let basis = Basis::factor_with(&problem.constraints, start.to_vec(), opts).ok()?;
    let x_b = basis.solve(&problem.rhs);
    x_b.iter()
        .all(|&v| v >= -opts.feasibility_tolerance)
        .then_some(basis)
}

fn finish(
    problem: &LpProblem,
    engine: &mut Engine<'_>,
    mut basis: Basis,
    used_phase_one: bool,
) -> Result<LpOutcome> {
    let mut x_b = basis.solve(&problem.rhs);
    let phase = engine.run(&mut basis, &mut x_b)?;
    let n = problem.cols();
    let mut x = vec![0.0; n];
    for (&j, &v) in basis.columns().iter().zip(&x_b) {
        x[j] = v;
    }
    let objective_value = x.iter().zip(&problem.objective).map(|(a, b)| a * b).sum();
    let (status, ray) = match phase {
        Phase::Optimal => (LpStatus::Optimal, None),
        Phase::Unbounded {
            entering,
            direction,
        } => {
            let mut ray = vec![0.0; n];
            ray[entering] = 1.0;
            for (&j, &w) in basis.columns().iter().zip(&direction) {
                ray[j] = -w;
            }
            (LpStatus::Unbounded, Some(ray))
        }
    };
    Ok(LpOutcome {
        status,
        basis: basis.columns().to_vec(),
        x,
        objective_value,
        ray,
        iterations: engine.iterations,
        used_phase_one,
        diagnostic: None,
    })
}

fn infeasible(iterations: usize, diagnostic: String) -> LpOutcome {
    LpOutcome {
        status: LpStatus::Infeasible,
        basis: Vec::new(),
        x: Vec::new(),
        objective_value: f64::NEG_INFINITY,
        ray: None,
        iterations,
        used_phase_one: true,
        diagnostic: Some(diagnostic),
    }
}
