//! The vector linear program `V-max C x  s.t.  A x = b, x >= 0` equivalent to
//! a vMDP, and its regular (lower triangular) bases.
//!
//! Columns are ordered epoch-major, then state, then action, followed by
//! one terminal column per state. Rows are ordered epoch-major, then state,
//! with the terminal epoch last. With that ordering `A` has summation blocks
//! on the diagonal and `-P_t` blocks just below.

use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sprs::{CsMat, TriMat};

use crate::dynamics::{regularity_report, ActionMap, FrequencyVector};
use crate::error::{Error, Result};
use crate::model::Model;

/// Enumerations of regular bases beyond this count need an explicit force.
pub const MAX_REGULAR_BASES: u128 = 10_000_000;

/// What a column of the program stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Column {
    Stage {
        epoch: usize,
        state: usize,
        action: usize,
    },
    Terminal {
        state: usize,
    },
}

/// Bijection between `(t, s, a)` / terminal `s` and column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMap {
    num_states: usize,
    epochs: usize,
    offsets: Vec<usize>,
}

impl IndexMap {
    pub fn new(model: &Model) -> Self {
        let mut offsets = Vec::with_capacity(model.num_states + 1);
        offsets.push(0);
        for &k in &model.actions_per_state {
            offsets.push(offsets.last().unwrap() + k);
        }
        IndexMap {
            num_states: model.num_states,
            epochs: model.decision_epochs(),
            offsets,
        }
    }

    /// `K = sum_s k_s`.
    pub fn total_actions(&self) -> usize {
        self.offsets[self.num_states]
    }

    pub fn rows(&self) -> usize {
        (self.epochs + 1) * self.num_states
    }

    pub fn cols(&self) -> usize {
        self.epochs * self.total_actions() + self.num_states
    }

    pub fn actions(&self, state: usize) -> usize {
        self.offsets[state + 1] - self.offsets[state]
    }

    pub fn column(&self, epoch: usize, state: usize, action: usize) -> usize {
        debug_assert!(epoch < self.epochs && action < self.actions(state));
        epoch * self.total_actions() + self.offsets[state] + action
    }

    pub fn terminal_column(&self, state: usize) -> usize {
        self.epochs * self.total_actions() + state
    }

    /// Constraint row of `(epoch, state)`; `epoch == T - 1` is terminal.
    pub fn row(&self, epoch: usize, state: usize) -> usize {
        epoch * self.num_states + state
    }

    pub fn locate(&self, column: usize) -> Column {
        let stage_cols = self.epochs * self.total_actions();
        if column >= stage_cols {
            return Column::Terminal {
                state: column - stage_cols,
            };
        }
        let epoch = column / self.total_actions();
        let within = column % self.total_actions();
        let state = self.offsets.partition_point(|&o| o <= within) - 1;
        Column::Stage {
            epoch,
            state,
            action: within - self.offsets[state],
        }
    }
}

/// The canonical program of a model.
#[derive(Debug, Clone)]
pub struct CanonicalProgram {
    model: Model,
    index: IndexMap,
    a: CsMat<f64>,
    b: Vec<f64>,
    c: Vec<Vec<f64>>,
    regular: bool,
}

/// Vectorizes a model into `(A, b, C)`.
pub fn build_program(model: &Model) -> Result<CanonicalProgram> {
    model.ensure_valid()?;
    let index = IndexMap::new(model);
    let (m, n) = (index.rows(), index.cols());
    let epochs = model.decision_epochs();

    let mut tri = TriMat::new((m, n));
    let mut c = vec![vec![0.0; n]; model.num_objectives];
    for t in 0..epochs {
        for s in 0..model.num_states {
            for a in 0..model.actions_per_state[s] {
                let col = index.column(t, s, a);
                tri.add_triplet(index.row(t, s), col, 1.0);
                for (j, &p) in model.transitions[t][s][a].iter().enumerate() {
                    if p != 0.0 {
                        tri.add_triplet(index.row(t + 1, j), col, -p);
                    }
                }
                for (i, &r) in model.rewards[t][s][a].iter().enumerate() {
                    c[i][col] = r;
                }
            }
        }
    }
    for s in 0..model.num_states {
        let col = index.terminal_column(s);
        tri.add_triplet(index.row(epochs, s), col, 1.0);
        for (i, &r) in model.terminal_rewards[s].iter().enumerate() {
            c[i][col] = r;
        }
    }
    let mut b = vec![0.0; m];
    b[..model.num_states].copy_from_slice(&model.alpha);

    Ok(CanonicalProgram {
        model: model.clone(),
        index,
        a: tri.to_csc(),
        b,
        c,
        regular: regularity_report(model).regular,
    })
}

impl CanonicalProgram {
    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn index(&self) -> &IndexMap {
        &self.index
    }

    pub fn a(&self) -> &CsMat<f64> {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Objective rows, one per criterion.
    pub fn c(&self) -> &[Vec<f64>] {
        &self.c
    }

    pub fn rows(&self) -> usize {
        self.index.rows()
    }

    pub fn cols(&self) -> usize {
        self.index.cols()
    }

    pub fn num_objectives(&self) -> usize {
        self.c.len()
    }

    /// Whether the underlying process is regular.
    pub fn is_regular(&self) -> bool {
        self.regular
    }

    pub fn nnz(&self) -> usize {
        self.a.nnz()
    }

    /// Nonzero count when every transition probability is positive:
    /// `(T-1)(K + S K) + S`.
    pub fn full_transition_nnz(&self) -> usize {
        let (s, k) = (self.model.num_states, self.index.total_actions());
        self.model.decision_epochs() * (k + s * k) + s
    }

    /// `C x`.
    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        self.c.iter().map(|row| dot(row, x)).collect()
    }

    /// `p^T C`.
    pub fn scalarized(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols()];
        for (row, &w) in self.c.iter().zip(weights) {
            for (o, r) in out.iter_mut().zip(row) {
                *o += w * r;
            }
        }
        out
    }

    /// `A x - b`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = self.b.iter().map(|v| -v).collect();
        for (j, col) in self.a.outer_iterator().enumerate() {
            if x[j] != 0.0 {
                for (i, &v) in col.iter() {
                    r[i] += v * x[j];
                }
            }
        }
        r
    }

    pub fn flatten(&self, x: &FrequencyVector) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.cols());
        for stage in &x.stages {
            for row in stage {
                out.extend_from_slice(row);
            }
        }
        out.extend_from_slice(&x.terminal);
        out
    }

    pub fn unflatten(&self, x: &[f64]) -> FrequencyVector {
        let mut fv = FrequencyVector::zeros(&self.model);
        for (col, &v) in x.iter().enumerate() {
            match self.index.locate(col) {
                Column::Stage {
                    epoch,
                    state,
                    action,
                } => fv.stages[epoch][state][action] = v,
                Column::Terminal { state } => fv.terminal[state] = v,
            }
        }
        fv
    }

    /// Writes `A`, `b` and `C` as MatrixMarket coordinate files
    /// `A.mtx`, `b.mtx`, `C.mtx` into `dir`.
    pub fn export_matrix_market(&self, dir: &Path) -> io::Result<()> {
        sprs::io::write_matrix_market(dir.join("A.mtx"), &self.a)?;
        let mut b = TriMat::new((self.rows(), 1));
        for (i, &v) in self.b.iter().enumerate() {
            if v != 0.0 {
                b.add_triplet(i, 0, v);
            }
        }
        sprs::io::write_matrix_market(dir.join("b.mtx"), &b.to_csc::<usize>())?;
        let mut c = TriMat::new((self.num_objectives(), self.cols()));
        for (i, row) in self.c.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    c.add_triplet(i, j, v);
                }
            }
        }
        sprs::io::write_matrix_market(dir.join("C.mtx"), &c.to_csc::<usize>())
    }

    /// Writes `A` in MatrixMarket coordinate format to any writer.
    pub fn write_constraint_matrix<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let mut buf = io::BufWriter::new(out);
        sprs::io::write_matrix_market_to_bufwrite(&mut buf, &self.a)?;
        buf.flush()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A basis with one action column per `(s, t)` block plus every terminal
/// column, listed in row order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularBasis {
    pub actions: ActionMap,
    pub columns: Vec<usize>,
}

impl RegularBasis {
    pub fn new(cp: &CanonicalProgram, actions: ActionMap) -> Result<Self> {
        actions.check(cp.model())?;
        let index = cp.index();
        let mut columns = Vec::with_capacity(cp.rows());
        for (t, row) in actions.0.iter().enumerate() {
            for (s, &a) in row.iter().enumerate() {
                columns.push(index.column(t, s, a));
            }
        }
        columns.extend((0..cp.model().num_states).map(|s| index.terminal_column(s)));
        Ok(RegularBasis { actions, columns })
    }

    /// Verifies that `A_B` is lower triangular with unit diagonal and
    /// entries in `[-1, 0]` below it.
    pub fn check_triangular(&self, cp: &CanonicalProgram) -> Result<()> {
        for (k, &col) in self.columns.iter().enumerate() {
            let view = cp.a().outer_view(col).expect("column in range");
            let mut diagonal = false;
            for (i, &v) in view.iter() {
                if i == k {
                    diagonal = v == 1.0;
                } else if i < k || !(-1.0..=0.0).contains(&v) {
                    return Err(Error::SingularBasis(format!(
                        "basis column {col} has entry {v} in row {i}, position {k}"
                    )));
                }
            }
            if !diagonal {
                return Err(Error::SingularBasis(format!(
                    "basis column {col} lacks a unit diagonal"
                )));
            }
        }
        Ok(())
    }
}

/// Basic solution of a regular basis, as a full `n`-vector, by forward
/// substitution through the triangular `A_B`.
pub fn regular_basis_solve(cp: &CanonicalProgram, actions: &ActionMap) -> Result<Vec<f64>> {
    let basis = RegularBasis::new(cp, actions.clone())?;
    Ok(solve_triangular(cp, &basis.columns))
}

pub(crate) fn solve_triangular(cp: &CanonicalProgram, columns: &[usize]) -> Vec<f64> {
    let mut x = vec![0.0; cp.cols()];
    let mut residual = cp.b().to_vec();
    for (k, &col) in columns.iter().enumerate() {
        let value = residual[k];
        x[col] = value;
        if let Some(view) = cp.a().outer_view(col) {
            for (i, &v) in view.iter() {
                if i > k {
                    residual[i] -= v * value;
                }
            }
        }
    }
    x
}

/// Certifies `rank(A) = m` by exhibiting a nonsingular (triangular, unit
/// diagonal) regular basis.
pub fn certify_full_rank(cp: &CanonicalProgram) -> Result<RegularBasis> {
    let basis = RegularBasis::new(cp, ActionMap::first(cp.model()))?;
    basis.check_triangular(cp)?;
    Ok(basis)
}

/// Iterator over every action map, odometer order (last state of the last
/// epoch varies fastest).
#[derive(Debug, Clone)]
pub struct RegularBases {
    sizes: Vec<usize>,
    current: Option<ActionMap>,
    num_states: usize,
}

impl Iterator for RegularBases {
    type Item = ActionMap;

    fn next(&mut self) -> Option<ActionMap> {
        let out = self.current.clone()?;
        let mut next = out.clone();
        let mut advanced = false;
        for pos in (0..self.sizes.len()).rev() {
            let (t, s) = (pos / self.num_states, pos % self.num_states);
            next.0[t][s] += 1;
            if next.0[t][s] < self.sizes[pos] {
                advanced = true;
                break;
            }
            next.0[t][s] = 0;
        }
        self.current = advanced.then_some(next);
        Some(out)
    }
}

/// All `(prod k_s)^(T-1)` action maps. Refuses more than
/// [`MAX_REGULAR_BASES`] unless `force` is set.
pub fn enumerate_regular_bases(cp: &CanonicalProgram, force: bool) -> Result<RegularBases> {
    let model = cp.model();
    let count = model.deterministic_policy_count().unwrap_or(u128::MAX);
    if count > MAX_REGULAR_BASES && !force {
        return Err(Error::TooManyPolicies {
            count,
            limit: MAX_REGULAR_BASES,
        });
    }
    let sizes = (0..model.decision_epochs())
        .flat_map(|_| model.actions_per_state.iter().copied())
        .collect();
    Ok(RegularBases {
        sizes,
        current: Some(ActionMap::first(model)),
        num_states: model.num_states,
    })
}
