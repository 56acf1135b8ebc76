//! Efficient vertices of the vector LP and the deterministic policies they
//! encode.
//!
//! [`enumerate_efficient`] walks from one efficient regular basis to its
//! neighbours (bases differing in a single `(s, t)` action), testing each
//! new vertex with an auxiliary LP that is bounded exactly when the vertex
//! is efficient. [`brute_force_oracle`] classifies every deterministic
//! policy independently, by dominance against the convex hull of all
//! deterministic values.

use std::collections::{HashMap, HashSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sprs::TriMat;

use crate::dynamics::{evaluate_policy, frequencies_to_policy, regularize, ActionMap, Policy};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::simplex::{self, Basis, LpProblem, LpStatus, SimplexOptions};
use crate::vlp::{dot, CanonicalProgram, RegularBasis};

/// Two frequency vectors closer than this (max norm) are the same vertex.
pub const VERTEX_TOLERANCE: f64 = 1e-8;

/// Basic values at or below this count as zero in the efficiency test.
pub const DEGENERACY_TOLERANCE: f64 = 1e-10;

/// Lower bound imposed on every weight before normalization.
pub const WEIGHT_FLOOR: f64 = 1e-3;

/// Largest policy space the oracle agrees to enumerate.
pub const ORACLE_LIMIT: u128 = 1_000_000;

/// Hull-dominance margin above which the oracle calls a value dominated.
pub const DOMINANCE_TOLERANCE: f64 = 1e-9;

/// Feasibility tolerance of the weight recovery program.
pub const WEIGHT_FEASIBILITY_TOLERANCE: f64 = 1e-12;

/// Tolerance for the weight certificate re-solve.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-8;

/// A vertex of the frequency polytope together with a regular basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexRecord {
    pub actions: ActionMap,
    pub basis: Vec<usize>,
    pub x: Vec<f64>,
    pub value: Vec<f64>,
    pub efficient: bool,
    pub weights: Option<WeightCertificate>,
}

impl VertexRecord {
    /// The vertex of a regular basis; `efficient` starts out false.
    pub fn from_actions(cp: &CanonicalProgram, actions: ActionMap) -> Result<Self> {
        let basis = RegularBasis::new(cp, actions)?;
        let x = crate::vlp::solve_triangular(cp, &basis.columns);
        let value = cp.value(&x);
        Ok(VertexRecord {
            actions: basis.actions,
            basis: basis.columns,
            x,
            value,
            efficient: false,
            weights: None,
        })
    }

    /// Max-norm distance between the frequency vectors.
    pub fn distance(&self, other: &[f64]) -> f64 {
        max_distance(&self.x, other)
    }
}

fn max_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |acc, (u, v)| acc.max((u - v).abs()))
}

/// Scalarization weights certifying an efficient vertex optimal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightCertificate {
    /// Positive weights summing to one.
    pub weights: Vec<f64>,
    pub nonbasic_columns: Vec<usize>,
    /// `lambda_N = R^T p - Y_Q^T mu`, all non-negative; `mu` is empty at a
    /// non-degenerate vertex, leaving the reduced costs of `p^T C`.
    pub nonbasic_multipliers: Vec<f64>,
    /// Dual solution `y` of `max p^T C x` with `A^T y >= C^T p` and
    /// `b . y` equal to the vertex objective.
    pub equality_multipliers: Vec<f64>,
    /// `p^T C x` at the vertex.
    pub vertex_objective: f64,
    /// Optimal value of `max p^T C x` over the polytope.
    pub resolved_objective: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationStats {
    /// Work items taken off the active list.
    pub active_vertices: usize,
    /// Auxiliary LPs solved.
    pub efficiency_tests: usize,
    /// Neighbour bases reached by a pivot.
    pub pivots: usize,
    /// Pivots that changed the basis but not the vertex.
    pub non_moves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationResult {
    pub vertices: Vec<VertexRecord>,
    /// Regular policy of each vertex, same order.
    pub policies: Vec<Policy>,
    pub stats: EnumerationStats,
}

impl EnumerationResult {
    /// Action maps of the (deterministic) regular policies.
    pub fn action_maps(&self) -> Vec<ActionMap> {
        self.policies
            .iter()
            .map(|p| p.action_map().expect("vertex policies are deterministic"))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationOptions {
    /// Test the neighbours of an active vertex on the rayon pool.
    pub parallel: bool,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions { parallel: true }
    }
}

/// `B^{-1} A_j` and `C_B B^{-1} A_j - C_j` for every nonbasic column.
struct Tableau {
    nonbasic: Vec<usize>,
    columns: Vec<Vec<f64>>,
    reduced: Vec<Vec<f64>>,
}

fn tableau(cp: &CanonicalProgram, basis: &Basis) -> Tableau {
    let mut in_basis = vec![false; cp.cols()];
    for &j in basis.columns() {
        in_basis[j] = true;
    }
    let nonbasic: Vec<usize> = (0..cp.cols()).filter(|&j| !in_basis[j]).collect();
    let c = cp.c();
    let mut columns = Vec::with_capacity(nonbasic.len());
    let mut reduced = Vec::with_capacity(nonbasic.len());
    for &j in &nonbasic {
        let w = basis.column_of(cp.a(), j);
        let r: Vec<f64> = c
            .iter()
            .map(|row| {
                let c_b: f64 = basis
                    .columns()
                    .iter()
                    .zip(&w)
                    .map(|(&b, wi)| row[b] * wi)
                    .sum();
                c_b - row[j]
            })
            .collect();
        columns.push(w);
        reduced.push(r);
    }
    Tableau {
        nonbasic,
        columns,
        reduced,
    }
}

/// Decides efficiency of the basic feasible solution `(basis, x)`.
///
/// Solves `max sum v  s.t.  R u + v = 0,  Y_i u - s_i = 0 (i in Q),
/// u, v, s >= 0` from the origin; the vertex is efficient iff this is
/// bounded.
pub fn efficiency_test_with_basis(cp: &CanonicalProgram, basis: &Basis, x: &[f64]) -> Result<bool> {
    let tab = tableau(cp, basis);
    let k = cp.num_objectives();
    let degenerate: Vec<usize> = basis
        .columns()
        .iter()
        .enumerate()
        .filter(|&(_, &j)| x[j] <= DEGENERACY_TOLERANCE)
        .map(|(i, _)| i)
        .collect();

    let nu = tab.nonbasic.len();
    let rows = k + degenerate.len();
    let cols = nu + k + degenerate.len();
    let mut tri = TriMat::new((rows, cols));
    for (col, (r, w)) in tab.reduced.iter().zip(&tab.columns).enumerate() {
        for (i, &v) in r.iter().enumerate() {
            if v != 0.0 {
                tri.add_triplet(i, col, v);
            }
        }
        for (q, &i) in degenerate.iter().enumerate() {
            if w[i] != 0.0 {
                tri.add_triplet(k + q, col, -w[i]);
            }
        }
    }
    for i in 0..k {
        tri.add_triplet(i, nu + i, 1.0);
    }
    for q in 0..degenerate.len() {
        tri.add_triplet(k + q, nu + k + q, -1.0);
    }
    let mut objective = vec![0.0; cols];
    objective[nu..nu + k].iter_mut().for_each(|c| *c = 1.0);
    let problem = LpProblem::new(objective, tri.to_csc(), vec![0.0; rows])?;
    let start: Vec<usize> = (nu..cols).collect();
    let outcome = simplex::solve(&problem, Some(&start))?;
    match outcome.status {
        LpStatus::Optimal => Ok(true),
        LpStatus::Unbounded => Ok(false),
        LpStatus::Infeasible => Err(Error::Internal(
            "efficiency test reported infeasible although the origin is feasible".into(),
        )),
    }
}

pub fn efficiency_test(cp: &CanonicalProgram, v: &VertexRecord) -> Result<bool> {
    let basis = Basis::factor(cp.a(), v.basis.clone())?;
    efficiency_test_with_basis(cp, &basis, &v.x)
}

/// Regular action map of a vertex: the occupied action in every reachable
/// block, action 0 elsewhere.
fn vertex_actions(cp: &CanonicalProgram, x: &[f64]) -> ActionMap {
    let model = cp.model();
    let index = cp.index();
    ActionMap(
        (0..model.decision_epochs())
            .map(|t| {
                (0..model.num_states)
                    .map(|s| {
                        let mut best = 0;
                        for a in 1..model.actions_per_state[s] {
                            if x[index.column(t, s, a)] > x[index.column(t, s, best)] {
                                best = a;
                            }
                        }
                        best
                    })
                    .collect()
            })
            .collect(),
    )
}

/// Optimal vertex of the equal-weight scalarization, as a regular basis.
pub fn initial_efficient_vertex(cp: &CanonicalProgram) -> Result<VertexRecord> {
    let k = cp.num_objectives();
    let weights = vec![1.0 / k as f64; k];
    let outcome = solve_scalarized(cp, &weights)?;
    let mut record = VertexRecord::from_actions(cp, vertex_actions(cp, &outcome.x))?;
    let gap = record.distance(&outcome.x);
    if gap > VERTEX_TOLERANCE {
        return Err(Error::Internal(format!(
            "scalarized optimum is {gap:e} away from its regular basis representation"
        )));
    }
    if !efficiency_test(cp, &record)? {
        return Err(Error::EfficiencyInconsistency(
            "optimum of a positive scalarization failed the efficiency test".into(),
        ));
    }
    record.efficient = true;
    Ok(record)
}

fn solve_scalarized(cp: &CanonicalProgram, weights: &[f64]) -> Result<simplex::LpOutcome> {
    let problem = LpProblem::new(cp.scalarized(weights), cp.a().clone(), cp.b().to_vec())?;
    let start = RegularBasis::new(cp, ActionMap::first(cp.model()))?;
    let outcome = simplex::solve(&problem, Some(&start.columns))?;
    match outcome.status {
        LpStatus::Optimal => Ok(outcome),
        status => Err(Error::Internal(format!(
            "scalarized program over the bounded frequency polytope ended {status:?}"
        ))),
    }
}

/// Every action map differing from `actions` in exactly one `(s, t)`.
pub fn adjacent_regular_bases<'a>(
    actions: &'a ActionMap,
    actions_per_state: &'a [usize],
) -> impl Iterator<Item = ActionMap> + 'a {
    swaps(actions, actions_per_state).map(move |(t, s, a)| {
        let mut next = actions.clone();
        next.0[t][s] = a;
        next
    })
}

fn swaps<'a>(
    actions: &'a ActionMap,
    actions_per_state: &'a [usize],
) -> impl Iterator<Item = (usize, usize, usize)> + 'a {
    actions.0.iter().enumerate().flat_map(move |(t, row)| {
        row.iter().enumerate().flat_map(move |(s, &current)| {
            (0..actions_per_state[s])
                .filter(move |&a| a != current)
                .map(move |a| (t, s, a))
        })
    })
}

struct WorkItem {
    actions: ActionMap,
    basis: Basis,
    x: Vec<f64>,
}

struct Candidate {
    actions: ActionMap,
    basis: Basis,
    x: Vec<f64>,
}

enum Verdict {
    Skip,
    /// Same vertex as the active one, reached through another basis.
    NonMove,
    /// Vertex known efficient under another basis.
    KnownEfficient,
    Test,
    /// Same as an earlier candidate of this batch that is being tested.
    SameAs(usize),
}

/// Known vertices and their classification; keyed by action map for
/// regular processes, by frequency vector otherwise.
enum VertexCache {
    Regular(HashMap<ActionMap, bool>),
    General(Vec<(Vec<f64>, bool)>),
}

impl VertexCache {
    fn lookup(&self, actions: &ActionMap, x: &[f64]) -> Option<bool> {
        match self {
            VertexCache::Regular(map) => map.get(actions).copied(),
            VertexCache::General(list) => list
                .iter()
                .find(|(y, _)| max_distance(x, y) < VERTEX_TOLERANCE)
                .map(|(_, e)| *e),
        }
    }

    fn insert(&mut self, actions: &ActionMap, x: &[f64], efficient: bool) {
        match self {
            VertexCache::Regular(map) => {
                map.insert(actions.clone(), efficient);
            }
            VertexCache::General(list) => list.push((x.to_vec(), efficient)),
        }
    }
}

/// Enumerates every efficient vertex by a FIFO walk over adjacent regular
/// bases.
pub fn enumerate_efficient(
    cp: &CanonicalProgram,
    opts: &EnumerationOptions,
) -> Result<EnumerationResult> {
    let model = cp.model();
    let index = cp.index();
    let mut stats = EnumerationStats::default();

    let start = initial_efficient_vertex(cp)?;
    stats.efficiency_tests += 1;
    let mut cache = if cp.is_regular() {
        VertexCache::Regular(HashMap::new())
    } else {
        VertexCache::General(Vec::new())
    };
    cache.insert(&start.actions, &start.x, true);
    let mut seen_bases: HashSet<ActionMap> = HashSet::new();
    seen_bases.insert(start.actions.clone());

    let mut queue = VecDeque::new();
    queue.push_back(WorkItem {
        actions: start.actions.clone(),
        basis: Basis::factor(cp.a(), start.basis.clone())?,
        x: start.x.clone(),
    });
    let mut vertices = vec![start];

    while let Some(active) = queue.pop_front() {
        stats.active_vertices += 1;

        let moves: Vec<(usize, usize, usize)> = swaps(&active.actions, &model.actions_per_state)
            .filter(|&(t, s, a)| {
                let mut next = active.actions.clone();
                next.0[t][s] = a;
                seen_bases.insert(next)
            })
            .collect();
        stats.pivots += moves.len();

        let pivot = |&(t, s, a): &(usize, usize, usize)| -> Result<Candidate> {
            let mut basis = active.basis.clone();
            let leave = index.column(t, s, active.actions.action(t, s));
            basis.pivot(cp.a(), index.column(t, s, a), leave)?;
            let x_b = basis.solve(cp.b());
            let mut x = vec![0.0; cp.cols()];
            for (&j, &v) in basis.columns().iter().zip(&x_b) {
                x[j] = v;
            }
            let mut actions = active.actions.clone();
            actions.0[t][s] = a;
            Ok(Candidate { actions, basis, x })
        };
        let candidates: Vec<Candidate> = if opts.parallel {
            moves.par_iter().map(pivot).collect::<Result<_>>()?
        } else {
            moves.iter().map(pivot).collect::<Result<_>>()?
        };

        let mut verdicts = Vec::with_capacity(candidates.len());
        for (i, cand) in candidates.iter().enumerate() {
            let verdict = if max_distance(&cand.x, &active.x) < VERTEX_TOLERANCE {
                Verdict::NonMove
            } else {
                match cache.lookup(&cand.actions, &cand.x) {
                    Some(true) => Verdict::KnownEfficient,
                    Some(false) => Verdict::Skip,
                    None => {
                        let earlier = (0..i).find(|&j| {
                            matches!(verdicts[j], Verdict::Test)
                                && max_distance(&candidates[j].x, &cand.x) < VERTEX_TOLERANCE
                        });
                        earlier.map_or(Verdict::Test, Verdict::SameAs)
                    }
                }
            };
            verdicts.push(verdict);
        }

        let to_test: Vec<usize> = (0..candidates.len())
            .filter(|&i| matches!(verdicts[i], Verdict::Test))
            .collect();
        let test =
            |&i: &usize| efficiency_test_with_basis(cp, &candidates[i].basis, &candidates[i].x);
        let outcomes: Vec<bool> = if opts.parallel {
            to_test.par_iter().map(test).collect::<Result<_>>()?
        } else {
            to_test.iter().map(test).collect::<Result<_>>()?
        };
        stats.efficiency_tests += outcomes.len();
        let tested: HashMap<usize, bool> = to_test.into_iter().zip(outcomes).collect();

        for (i, cand) in candidates.into_iter().enumerate() {
            let explore = match verdicts[i] {
                Verdict::Skip => false,
                Verdict::NonMove => {
                    stats.non_moves += 1;
                    true
                }
                Verdict::KnownEfficient => true,
                Verdict::SameAs(j) => tested[&j],
                Verdict::Test => {
                    let efficient = tested[&i];
                    cache.insert(&cand.actions, &cand.x, efficient);
                    if efficient {
                        let value = cp.value(&cand.x);
                        vertices.push(VertexRecord {
                            actions: cand.actions.clone(),
                            basis: cand.basis.columns().to_vec(),
                            x: cand.x.clone(),
                            value,
                            efficient: true,
                            weights: None,
                        });
                    }
                    efficient
                }
            };
            if explore {
                queue.push_back(WorkItem {
                    actions: cand.actions,
                    basis: cand.basis,
                    x: cand.x,
                });
            }
        }
    }

    let policies = vertices
        .iter()
        .map(|v| frequencies_to_policy(model, &cp.unflatten(&v.x)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnumerationResult {
        vertices,
        policies,
        stats,
    })
}

/// Finds positive weights making `v` optimal for `max p^T C x`, and
/// confirms them by re-solving the scalarized program.
///
/// At a degenerate vertex the basis alone may not be optimal for any
/// positive `p`; the binding basic rows `Q` then contribute multipliers
/// `mu >= 0` and the condition becomes `R^T p - Y_Q^T mu >= 0`.
pub fn recover_weights(cp: &CanonicalProgram, v: &VertexRecord) -> Result<WeightCertificate> {
    let basis = Basis::factor(cp.a(), v.basis.clone())?;
    let tab = tableau(cp, &basis);
    let k = cp.num_objectives();
    let nn = tab.nonbasic.len();
    let degenerate: Vec<usize> = basis
        .columns()
        .iter()
        .enumerate()
        .filter(|&(_, &j)| v.x[j] <= DEGENERACY_TOLERANCE)
        .map(|(i, _)| i)
        .collect();
    let nq = degenerate.len();

    // Variables (p', lambda, mu) with p = floor + p'; one row per nonbasic
    // column: lambda_j - R_j . p' - (B^-1 A_j)_Q . mu = floor * sum_i R_ij.
    let mut tri = TriMat::new((nn, k + nn + nq));
    let mut rhs = Vec::with_capacity(nn);
    for (j, (r, w)) in tab.reduced.iter().zip(&tab.columns).enumerate() {
        for (i, &v) in r.iter().enumerate() {
            if v != 0.0 {
                tri.add_triplet(j, i, -v);
            }
        }
        tri.add_triplet(j, k + j, 1.0);
        for (q, &i) in degenerate.iter().enumerate() {
            if w[i] != 0.0 {
                tri.add_triplet(j, k + nn + q, -w[i]);
            }
        }
        rhs.push(WEIGHT_FLOOR * r.iter().sum::<f64>());
    }
    let problem = LpProblem::new(vec![0.0; k + nn + nq], tri.to_csc(), rhs)?;
    let start: Vec<usize> = (k..k + nn).collect();
    // The right-hand side scales with the floor, so the default feasibility
    // tolerance would accept slightly negative multipliers.
    let opts = SimplexOptions {
        feasibility_tolerance: WEIGHT_FEASIBILITY_TOLERANCE,
        ..SimplexOptions::default()
    };
    let outcome = simplex::solve_with(&problem, Some(&start), &opts)?;
    if outcome.status != LpStatus::Optimal {
        return Err(Error::EfficiencyInconsistency(format!(
            "no positive weights certify the vertex {:?} ({:?})",
            v.actions, outcome.status
        )));
    }
    let mut weights: Vec<f64> = outcome.x[..k]
        .iter()
        .map(|p| WEIGHT_FLOOR + p.max(0.0))
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|p| *p /= total);
    let mu: Vec<f64> = outcome.x[k + nn..]
        .iter()
        .map(|m| m.max(0.0) / total)
        .collect();

    let nonbasic_multipliers: Vec<f64> = tab
        .reduced
        .iter()
        .zip(&tab.columns)
        .map(|(r, w)| {
            dot(r, &weights)
                + degenerate
                    .iter()
                    .zip(&mu)
                    .map(|(&i, m)| w[i] * m)
                    .sum::<f64>()
        })
        .collect();
    let objective = cp.scalarized(&weights);
    let vertex_objective = dot(&objective, &v.x);
    let resolved = solve_scalarized(cp, &weights)?;
    if resolved.status != LpStatus::Optimal
        || (resolved.objective_value - vertex_objective).abs() > CERTIFICATE_TOLERANCE
    {
        return Err(Error::EfficiencyInconsistency(format!(
            "weights {weights:?} give optimum {} but the vertex scores {vertex_objective}",
            resolved.objective_value
        )));
    }
    // Dual solution of the re-solve; it prices the vertex too since the
    // optimal values agree.
    let optimal = Basis::factor(cp.a(), resolved.basis.clone())?;
    let c_b: Vec<f64> = optimal.columns().iter().map(|&j| objective[j]).collect();
    let equality_multipliers = optimal.solve_transpose(&c_b);
    Ok(WeightCertificate {
        weights,
        nonbasic_columns: tab.nonbasic,
        nonbasic_multipliers,
        equality_multipliers,
        vertex_objective,
        resolved_objective: resolved.objective_value,
    })
}

/// One equivalence class of deterministic policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OraclePolicy {
    /// Regular representative.
    pub actions: ActionMap,
    pub value: Vec<f64>,
    pub efficient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Every class of deterministic policies, in enumeration order.
    pub policies: Vec<OraclePolicy>,
}

impl OracleResult {
    pub fn efficient(&self) -> impl Iterator<Item = &OraclePolicy> {
        self.policies.iter().filter(|p| p.efficient)
    }
}

fn all_action_maps(model: &Model) -> Vec<ActionMap> {
    let mut out = vec![ActionMap::first(model)];
    for t in 0..model.decision_epochs() {
        for s in 0..model.num_states {
            let k = model.actions_per_state[s];
            out = out
                .into_iter()
                .flat_map(|base| {
                    (0..k).map(move |a| {
                        let mut next = base.clone();
                        next.0[t][s] = a;
                        next
                    })
                })
                .collect();
        }
    }
    out
}

/// Classifies every deterministic policy by exhaustive evaluation.
///
/// A value is efficient iff no point of the convex hull of all
/// deterministic values weakly dominates it with a strict gain, decided by
/// `max sum w  s.t.  sum_j l_j u_j - w = v, sum l = 1, l, w >= 0`.
pub fn brute_force_oracle(model: &Model) -> Result<OracleResult> {
    model.ensure_valid()?;
    let count = model.deterministic_policy_count().unwrap_or(u128::MAX);
    if count > ORACLE_LIMIT {
        return Err(Error::TooManyPolicies {
            count,
            limit: ORACLE_LIMIT,
        });
    }

    let mut seen = HashSet::new();
    let mut policies = Vec::new();
    for actions in all_action_maps(model) {
        let pi = regularize(model, &Policy::deterministic(model, &actions))?;
        let regular = pi.action_map().expect("deterministic stays deterministic");
        if !seen.insert(regular.clone()) {
            continue;
        }
        let value = evaluate_policy(model, &pi)?.aggregate;
        policies.push(OraclePolicy {
            actions: regular,
            value,
            efficient: false,
        });
    }

    let values: Vec<&Vec<f64>> = policies.iter().map(|p| &p.value).collect();
    let pairwise_dominated = |v: &[f64]| {
        values.iter().any(|u| {
            u.iter().zip(v).all(|(a, b)| a >= b)
                && u.iter().zip(v).map(|(a, b)| a - b).sum::<f64>() > DOMINANCE_TOLERANCE
        })
    };
    let survivors: Vec<usize> = (0..policies.len())
        .filter(|&i| !pairwise_dominated(&policies[i].value))
        .collect();
    let mut hull: Vec<Vec<f64>> = Vec::new();
    for &i in &survivors {
        if !hull.contains(&policies[i].value) {
            hull.push(policies[i].value.clone());
        }
    }

    let k = model.num_objectives;
    for i in survivors {
        let margin = hull_dominance_margin(&hull, &policies[i].value, k)?;
        policies[i].efficient = margin <= DOMINANCE_TOLERANCE;
    }
    Ok(OracleResult { policies })
}

/// `max sum w` of the hull-dominance program for value `v`.
fn hull_dominance_margin(hull: &[Vec<f64>], v: &[f64], k: usize) -> Result<f64> {
    let h = hull.len();
    let mut tri = TriMat::new((k + 1, h + k));
    for (j, u) in hull.iter().enumerate() {
        for (i, &ui) in u.iter().enumerate() {
            if ui != 0.0 {
                tri.add_triplet(i, j, ui);
            }
        }
        tri.add_triplet(k, j, 1.0);
    }
    for i in 0..k {
        tri.add_triplet(i, h + i, -1.0);
    }
    let mut objective = vec![0.0; h + k];
    objective[h..].iter_mut().for_each(|c| *c = 1.0);
    let mut rhs = v.to_vec();
    rhs.push(1.0);
    let outcome = simplex::solve(&LpProblem::new(objective, tri.to_csc(), rhs)?, None)?;
    match outcome.status {
        LpStatus::Optimal => Ok(outcome.objective_value),
        status => Err(Error::Internal(format!(
            "hull dominance program ended {status:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{build_design_model, DesignInstance};
    use crate::model::{random_model, RandomModelConfig};
    use crate::vlp::build_program;

    fn design() -> CanonicalProgram {
        build_program(&build_design_model(&DesignInstance::example(), None).unwrap()).unwrap()
    }

    fn map(pairs: [[usize; 2]; 2]) -> ActionMap {
        ActionMap(
            pairs
                .iter()
                .map(|p| p.iter().map(|a| a - 1).collect())
                .collect(),
        )
    }

    #[test]
    fn known_vertices_are_efficient() {
        let cp = design();
        let v = VertexRecord::from_actions(&cp, map([[5, 2], [5, 2]])).unwrap();
        assert!(efficiency_test(&cp, &v).unwrap());
        let v = VertexRecord::from_actions(&cp, map([[2, 4], [2, 4]])).unwrap();
        assert!(!efficiency_test(&cp, &v).unwrap());
    }

    #[test]
    fn neighbour_counts() {
        let cp = design();
        let a = map([[5, 2], [5, 2]]);
        let neighbours: Vec<_> =
            adjacent_regular_bases(&a, &cp.model().actions_per_state).collect();
        assert_eq!(neighbours.len(), 16);
        for nb in &neighbours {
            assert!(adjacent_regular_bases(nb, &cp.model().actions_per_state).any(|x| x == a));
        }
        let one = ActionMap(vec![vec![0, 0, 0]]);
        assert_eq!(adjacent_regular_bases(&one, &[1, 2, 1]).count(), 1);
    }

    #[test]
    fn single_objective_vertex_is_the_optimum() {
        let mut model = build_design_model(&DesignInstance::example(), None).unwrap();
        model.num_objectives = 1;
        for r in model.rewards.iter_mut().flatten().flatten() {
            r.truncate(1);
        }
        for r in model.terminal_rewards.iter_mut() {
            r.truncate(1);
        }
        let cp = build_program(&model).unwrap();
        let v = initial_efficient_vertex(&cp).unwrap();
        // Cheapest alternatives: 5 for component 1, 3 for component 2.
        assert_eq!(v.actions, map([[5, 3], [5, 3]]));
        assert!(efficiency_test(&cp, &v).unwrap());
        let result = enumerate_efficient(&cp, &EnumerationOptions::default()).unwrap();
        assert_eq!(result.vertices.len(), 1);
        let w = recover_weights(&cp, &result.vertices[0]).unwrap();
        assert_eq!(w.weights, vec![1.0]);
    }

    #[test]
    fn random_initial_vertices_are_efficient() {
        let config = RandomModelConfig {
            num_states: 3,
            max_actions: 3,
            horizon: 3,
            num_objectives: 2,
            zero_probability: 0.3,
        };
        for seed in 0..20 {
            let cp = build_program(&random_model(&config, seed).unwrap()).unwrap();
            let v = initial_efficient_vertex(&cp).unwrap();
            assert!(efficiency_test(&cp, &v).unwrap());
        }
    }

    #[test]
    fn known_efficient_enumeration() {
        let cp = design();
        let result = enumerate_efficient(&cp, &EnumerationOptions::default()).unwrap();
        assert_eq!(result.vertices.len(), 10);
        let maps: HashSet<ActionMap> = result.action_maps().into_iter().collect();
        for row in [
            [[5, 2], [5, 2]],
            [[4, 2], [5, 2]],
            [[4, 2], [4, 2]],
            [[4, 5], [4, 2]],
            [[4, 5], [4, 5]],
            [[4, 2], [4, 5]],
            [[5, 2], [4, 2]],
            [[5, 2], [5, 3]],
            [[5, 3], [5, 3]],
            [[5, 3], [5, 2]],
        ] {
            assert!(maps.contains(&map(row)), "missing {row:?}");
        }
        let serial = enumerate_efficient(&cp, &EnumerationOptions { parallel: false }).unwrap();
        assert_eq!(serial, result);
    }

    #[test]
    fn weights_for_tied_vertices() {
        let cp = design();
        let a = VertexRecord::from_actions(&cp, map([[4, 2], [5, 2]])).unwrap();
        let b = VertexRecord::from_actions(&cp, map([[5, 2], [4, 2]])).unwrap();
        let wa = recover_weights(&cp, &a).unwrap();
        let wb = recover_weights(&cp, &b).unwrap();
        for w in [&wa, &wb] {
            assert!(w.weights.iter().all(|&p| p > 0.0));
            assert!(w.nonbasic_multipliers.iter().all(|&l| l >= -1e-8));
            assert!((w.resolved_objective - w.vertex_objective).abs() < 1e-8);
        }
        let opt_b_under_a = dot(&cp.scalarized(&wa.weights), &b.x);
        assert!((opt_b_under_a - wa.resolved_objective).abs() < 1e-8);
    }

    #[test]
    fn dominated_vertex_has_no_weights() {
        let cp = design();
        let v = VertexRecord::from_actions(&cp, map([[2, 4], [2, 4]])).unwrap();
        assert!(matches!(
            recover_weights(&cp, &v),
            Err(Error::EfficiencyInconsistency(_))
        ));
    }

    #[test]
    fn oracle_on_example() {
        let cp = design();
        let oracle = brute_force_oracle(cp.model()).unwrap();
        assert_eq!(oracle.policies.len(), 625);
        assert_eq!(oracle.efficient().count(), 10);
    }
}
