//! Markov policies, their evaluation and the policy/frequency maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;

/// Forward marginals below this are treated as unreachable.
pub const REACH_TOLERANCE: f64 = 1e-12;

/// Tolerance for the flow-conservation constraints of a frequency vector.
pub const FLOW_TOLERANCE: f64 = 1e-9;

const POLICY_SUM_TOLERANCE: f64 = 1e-12;

/// One action per state and decision epoch, indexed `[t][s]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionMap(pub Vec<Vec<usize>>);

impl ActionMap {
    /// Action 0 everywhere.
    pub fn first(model: &Model) -> Self {
        ActionMap(vec![vec![0; model.num_states]; model.decision_epochs()])
    }

    pub fn action(&self, t: usize, s: usize) -> usize {
        self.0[t][s]
    }

    pub fn epochs(&self) -> usize {
        self.0.len()
    }

    /// Renders epoch `t` as `(a_1, ..., a_S)` with 1-based actions.
    pub fn epoch_label(&self, t: usize) -> String {
        let parts: Vec<String> = self.0[t].iter().map(|a| (a + 1).to_string()).collect();
        format!("({})", parts.join(", "))
    }

    pub fn check(&self, model: &Model) -> Result<()> {
        if self.0.len() != model.decision_epochs() {
            return Err(Error::DimensionMismatch(format!(
                "action map covers {} epochs, model has {}",
                self.0.len(),
                model.decision_epochs()
            )));
        }
        for (t, row) in self.0.iter().enumerate() {
            if row.len() != model.num_states {
                return Err(Error::DimensionMismatch(format!(
                    "action map epoch {t} covers {} states, model has {}",
                    row.len(),
                    model.num_states
                )));
            }
            for (s, &a) in row.iter().enumerate() {
                if a >= model.actions_per_state[s] {
                    return Err(Error::DimensionMismatch(format!(
                        "action {a} at epoch {t} state {s} exceeds k_s = {}",
                        model.actions_per_state[s]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A Markov policy: `q[t][s][a]` is the probability of `a` in `s` at `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub q: Vec<Vec<Vec<f64>>>,
}

impl Policy {
    pub fn deterministic(model: &Model, actions: &ActionMap) -> Self {
        let q = actions
            .0
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(s, &a)| {
                        let mut dist = vec![0.0; model.actions_per_state[s]];
                        dist[a] = 1.0;
                        dist
                    })
                    .collect()
            })
            .collect();
        Policy { q }
    }

    /// Uniform randomization over every action set.
    pub fn uniform(model: &Model) -> Self {
        let q = (0..model.decision_epochs())
            .map(|_| {
                model
                    .actions_per_state
                    .iter()
                    .map(|&k| vec![1.0 / k as f64; k])
                    .collect()
            })
            .collect();
        Policy { q }
    }

    pub fn check(&self, model: &Model) -> Result<()> {
        if self.q.len() != model.decision_epochs() {
            return Err(Error::DimensionMismatch(format!(
                "policy covers {} epochs, model has {}",
                self.q.len(),
                model.decision_epochs()
            )));
        }
        for (t, rule) in self.q.iter().enumerate() {
            if rule.len() != model.num_states {
                return Err(Error::DimensionMismatch(format!(
                    "policy epoch {t} covers {} states, model has {}",
                    rule.len(),
                    model.num_states
                )));
            }
            for (s, dist) in rule.iter().enumerate() {
                if dist.len() != model.actions_per_state[s] {
                    return Err(Error::DimensionMismatch(format!(
                        "policy q[{t}][{s}] has {} actions, model has {}",
                        dist.len(),
                        model.actions_per_state[s]
                    )));
                }
                if dist.iter().any(|&p| p.is_nan() || p < 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "policy q[{t}][{s}] has a negative entry"
                    )));
                }
                let sum: f64 = dist.iter().sum();
                if (sum - 1.0).abs() > POLICY_SUM_TOLERANCE {
                    return Err(Error::InvalidArgument(format!(
                        "policy q[{t}][{s}] sums to {sum}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_deterministic(&self) -> bool {
        self.q
            .iter()
            .flatten()
            .all(|dist| dist.iter().filter(|&&p| p == 1.0).count() == 1)
    }

    /// The action map of a deterministic policy.
    pub fn action_map(&self) -> Option<ActionMap> {
        if !self.is_deterministic() {
            return None;
        }
        Some(ActionMap(
            self.q
                .iter()
                .map(|rule| {
                    rule.iter()
                        .map(|dist| dist.iter().position(|&p| p == 1.0).unwrap_or(0))
                        .collect()
                })
                .collect(),
        ))
    }
}

/// Policy file contents: a full stochastic table or the deterministic
/// shorthand `d[t][s]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicySpec {
    Stochastic { q: Vec<Vec<Vec<f64>>> },
    Deterministic { d: ActionMap },
}

impl PolicySpec {
    pub fn into_policy(self, model: &Model) -> Result<Policy> {
        let policy = match self {
            PolicySpec::Stochastic { q } => Policy { q },
            PolicySpec::Deterministic { d } => {
                d.check(model)?;
                Policy::deterministic(model, &d)
            }
        };
        policy.check(model)?;
        Ok(policy)
    }
}

/// State-action frequencies `stages[t][s][a]` and terminal frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyVector {
    pub stages: Vec<Vec<Vec<f64>>>,
    pub terminal: Vec<f64>,
}

impl FrequencyVector {
    pub fn zeros(model: &Model) -> Self {
        FrequencyVector {
            stages: vec![
                model
                    .actions_per_state
                    .iter()
                    .map(|&k| vec![0.0; k])
                    .collect();
                model.decision_epochs()
            ],
            terminal: vec![0.0; model.num_states],
        }
    }

    /// Probability of being in `s` at decision epoch `t`.
    pub fn state_mass(&self, t: usize, s: usize) -> f64 {
        self.stages[t][s].iter().sum()
    }

    /// Largest violation of non-negativity and of the flow constraints.
    pub fn max_violation(&self, model: &Model) -> Result<f64> {
        self.check_shape(model)?;
        let mut worst: f64 = 0.0;
        for x in self.stages.iter().flatten().flatten().chain(&self.terminal) {
            worst = worst.max(-x);
        }
        for (j, &a) in model.alpha.iter().enumerate() {
            worst = worst.max((self.state_mass(0, j) - a).abs());
        }
        let epochs = model.decision_epochs();
        for t in 0..epochs {
            let inflow = push_forward(model, t, &self.stages[t]);
            for (j, flow) in inflow.iter().enumerate() {
                let mass = if t + 1 < epochs {
                    self.state_mass(t + 1, j)
                } else {
                    self.terminal[j]
                };
                worst = worst.max((mass - flow).abs());
            }
        }
        Ok(worst)
    }

    /// Fails unless the vector lies in the frequency polytope within `tol`.
    pub fn check_feasible(&self, model: &Model, tol: f64) -> Result<()> {
        let worst = self.max_violation(model)?;
        if worst > tol {
            return Err(Error::InfeasibleFrequencies(format!(
                "constraint violation {worst:e} exceeds {tol:e}"
            )));
        }
        Ok(())
    }

    fn check_shape(&self, model: &Model) -> Result<()> {
        let ok = self.stages.len() == model.decision_epochs()
            && self.terminal.len() == model.num_states
            && self.stages.iter().all(|st| {
                st.len() == model.num_states
                    && st
                        .iter()
                        .zip(&model.actions_per_state)
                        .all(|(row, &k)| row.len() == k)
            });
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(
                "frequency vector does not match the model".into(),
            ))
        }
    }

    /// Max-norm distance to `other` (same shape assumed).
    pub fn distance(&self, other: &FrequencyVector) -> f64 {
        self.stages
            .iter()
            .flatten()
            .flatten()
            .chain(&self.terminal)
            .zip(
                other
                    .stages
                    .iter()
                    .flatten()
                    .flatten()
                    .chain(&other.terminal),
            )
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

/// `mu[j] = sum_{s,a} p_t(j|s,a) x[s][a]`.
fn push_forward(model: &Model, t: usize, x: &[Vec<f64>]) -> Vec<f64> {
    let mut mu = vec![0.0; model.num_states];
    for (s, row) in x.iter().enumerate() {
        for (a, &mass) in row.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (j, &p) in model.transitions[t][s][a].iter().enumerate() {
                mu[j] += p * mass;
            }
        }
    }
    mu
}

/// Values of a policy: `per_state[s]` starting from `s` at the first epoch
/// and the `alpha`-weighted aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyValue {
    pub per_state: Vec<Vec<f64>>,
    pub aggregate: Vec<f64>,
}

/// Backward recursion `u_t(s) = sum_a q(a|s,t) [R_t(s,a) + sum_j p_t(j|s,a) u_{t+1}(j)]`.
pub fn evaluate_policy(model: &Model, policy: &Policy) -> Result<PolicyValue> {
    policy.check(model)?;
    let k = model.num_objectives;
    let mut u = model.terminal_rewards.clone();
    for t in (0..model.decision_epochs()).rev() {
        let mut next = vec![vec![0.0; k]; model.num_states];
        for (s, value) in next.iter_mut().enumerate() {
            for (a, &q) in policy.q[t][s].iter().enumerate() {
                if q == 0.0 {
                    continue;
                }
                let reward = &model.rewards[t][s][a];
                let row = &model.transitions[t][s][a];
                for i in 0..k {
                    let future: f64 = row.iter().zip(&u).map(|(p, uj)| p * uj[i]).sum();
                    value[i] += q * (reward[i] + future);
                }
            }
        }
        u = next;
    }
    let mut aggregate = vec![0.0; k];
    for (alpha, value) in model.alpha.iter().zip(&u) {
        for i in 0..k {
            aggregate[i] += alpha * value[i];
        }
    }
    Ok(PolicyValue {
        per_state: u,
        aggregate,
    })
}

/// State marginals `mu[t][s]` for every epoch including the terminal one.
pub fn forward_marginals(model: &Model, policy: &Policy) -> Result<Vec<Vec<f64>>> {
    let x = policy_frequencies(model, policy)?;
    let mut mu: Vec<Vec<f64>> = (0..model.decision_epochs())
        .map(|t| (0..model.num_states).map(|s| x.state_mass(t, s)).collect())
        .collect();
    mu.push(x.terminal);
    Ok(mu)
}

/// Forward recursion: `mu_0 = alpha`, `x_t(s,a) = mu_t(s) q(a|s,t)`,
/// `mu_{t+1} = P_t x_t`, terminal frequencies `mu_T`.
pub fn policy_frequencies(model: &Model, policy: &Policy) -> Result<FrequencyVector> {
    policy.check(model)?;
    let mut mu = model.alpha.clone();
    let mut stages = Vec::with_capacity(model.decision_epochs());
    for t in 0..model.decision_epochs() {
        let x_t: Vec<Vec<f64>> = policy.q[t]
            .iter()
            .zip(&mu)
            .map(|(dist, &m)| dist.iter().map(|q| m * q).collect())
            .collect();
        mu = push_forward(model, t, &x_t);
        stages.push(x_t);
    }
    Ok(FrequencyVector {
        stages,
        terminal: mu,
    })
}

/// The regular policy realizing `x`: proportional shares where the state is
/// occupied, action 0 where it is not.
pub fn frequencies_to_policy(model: &Model, x: &FrequencyVector) -> Result<Policy> {
    x.check_feasible(model, FLOW_TOLERANCE)?;
    let q = x
        .stages
        .iter()
        .map(|stage| {
            stage
                .iter()
                .map(|row| {
                    let mass: f64 = row.iter().sum();
                    if mass > REACH_TOLERANCE {
                        row.iter().map(|v| v.max(0.0) / mass).collect()
                    } else {
                        let mut dist = vec![0.0; row.len()];
                        dist[0] = 1.0;
                        dist
                    }
                })
                .collect()
        })
        .collect();
    let mut policy = Policy { q };
    // Clipping tiny negatives can leave the shares a hair off unit sum.
    for dist in policy.q.iter_mut().flatten() {
        let sum: f64 = dist.iter().sum();
        if sum != 1.0 {
            dist.iter_mut().for_each(|p| *p /= sum);
        }
    }
    Ok(policy)
}

/// Replaces the decision at every pair the policy cannot reach by action 0.
pub fn regularize(model: &Model, policy: &Policy) -> Result<Policy> {
    let mu = forward_marginals(model, policy)?;
    let mut out = policy.clone();
    for (t, rule) in out.q.iter_mut().enumerate() {
        for (s, dist) in rule.iter_mut().enumerate() {
            if mu[t][s] < REACH_TOLERANCE {
                dist.iter_mut().for_each(|p| *p = 0.0);
                dist[0] = 1.0;
            }
        }
    }
    Ok(out)
}

/// A state-epoch pair; `epoch` counts from 0 and may be the terminal epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateEpoch {
    pub state: usize,
    pub epoch: usize,
}

/// `(state, epoch)` together with one action per predecessor state that
/// never leads there; following those actions at `epoch - 1` misses it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SomePolicyWitness {
    pub state: usize,
    pub epoch: usize,
    pub actions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub regular: bool,
    pub some_policy_witness: Option<SomePolicyWitness>,
    pub all_policy_witness: Option<StateEpoch>,
}

/// Decides whether every policy reaches every state at every epoch.
///
/// The process fails to be regular exactly when some `(s, t)` has, for every
/// predecessor `s'`, an action with `p_{t-1}(s|s',a) = 0`; it is unreachable
/// for all policies when every predecessor action has zero probability.
pub fn regularity_report(model: &Model) -> RegularityReport {
    let mut some_policy_witness = None;
    let mut all_policy_witness = None;
    for epoch in 1..model.horizon {
        let p = &model.transitions[epoch - 1];
        for state in 0..model.num_states {
            let blocking: Option<Vec<usize>> = (0..model.num_states)
                .map(|prev| p[prev].iter().position(|row| row[state] <= REACH_TOLERANCE))
                .collect();
            if let Some(actions) = blocking {
                if some_policy_witness.is_none() {
                    some_policy_witness = Some(SomePolicyWitness {
                        state,
                        epoch,
                        actions,
                    });
                }
                let closed = p.iter().flatten().all(|row| row[state] <= REACH_TOLERANCE);
                if closed && all_policy_witness.is_none() {
                    all_policy_witness = Some(StateEpoch { state, epoch });
                }
            }
        }
    }
    RegularityReport {
        regular: some_policy_witness.is_none(),
        some_policy_witness,
        all_policy_witness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{build_design_model, DesignInstance};

    fn design() -> Model {
        build_design_model(&DesignInstance::example(), None).unwrap()
    }

    /// Three states; state 2 is never entered at epoch 1.
    fn closed_state_model() -> Model {
        Model {
            num_states: 3,
            horizon: 3,
            num_objectives: 1,
            actions_per_state: vec![2, 2, 2],
            alpha: vec![0.5, 0.25, 0.25],
            transitions: vec![
                vec![
                    vec![vec![0.5, 0.5, 0.0]; 2],
                    vec![vec![1.0, 0.0, 0.0]; 2],
                    vec![vec![0.0, 1.0, 0.0]; 2],
                ],
                vec![vec![vec![0.2, 0.3, 0.5]; 2]; 3],
            ],
            rewards: vec![
                vec![vec![vec![1.0], vec![2.0]]; 3],
                vec![vec![vec![3.0], vec![-1.0]]; 3],
            ],
            terminal_rewards: vec![vec![0.5], vec![0.0], vec![1.0]],
        }
    }

    #[test]
    fn known_efficient_values() {
        let m = design();
        let pi = Policy::deterministic(&m, &ActionMap(vec![vec![3, 1], vec![3, 1]]));
        let v = evaluate_policy(&m, &pi).unwrap().aggregate;
        assert!(
            (v[0] + 1.02).abs() < 0.01 && (v[1] + 0.44).abs() < 0.01,
            "{v:?}"
        );
        let pi = Policy::deterministic(&m, &ActionMap(vec![vec![3, 1], vec![4, 1]]));
        let v = evaluate_policy(&m, &pi).unwrap().aggregate;
        assert!(
            (v[0] + 0.87).abs() < 0.01 && (v[1] + 0.53).abs() < 0.01,
            "{v:?}"
        );
    }

    #[test]
    fn zero_rewards_give_zero_value() {
        let mut m = design();
        for r in m.rewards.iter_mut().flatten().flatten().flatten() {
            *r = 0.0;
        }
        let v = evaluate_policy(&m, &Policy::uniform(&m)).unwrap();
        assert_eq!(v.aggregate, vec![0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = design();
        let mut pi = Policy::uniform(&m);
        pi.q.pop();
        assert!(matches!(
            evaluate_policy(&m, &pi),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn design_frequencies_by_hand() {
        let m = design();
        let pi = Policy::deterministic(&m, &ActionMap(vec![vec![4, 1], vec![0, 2]]));
        let x = policy_frequencies(&m, &pi).unwrap();
        assert_eq!(x.stages[0][0], vec![0.0, 0.0, 0.0, 0.0, 0.5]);
        assert_eq!(x.stages[1][0], vec![0.5, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(x.stages[1][1], vec![0.0, 0.0, 0.5, 0.0, 0.0]);
        assert_eq!(x.terminal, vec![0.5, 0.5]);
        assert!(x.max_violation(&m).unwrap() < 1e-15);
    }

    #[test]
    fn concentrated_and_mixed_frequencies_invert() {
        let m = design();
        let pi = Policy::deterministic(&m, &ActionMap(vec![vec![4, 1], vec![4, 1]]));
        let mut x = policy_frequencies(&m, &pi).unwrap();
        let q = frequencies_to_policy(&m, &x).unwrap();
        assert_eq!(q.q[0][0][4], 1.0);
        assert_eq!(q, pi);

        x.stages[0][0] = vec![0.0, 0.0, 0.0, 0.25, 0.25];
        let q = frequencies_to_policy(&m, &x).unwrap();
        assert_eq!(q.q[0][0], vec![0.0, 0.0, 0.0, 0.5, 0.5]);
    }

    #[test]
    fn infeasible_frequencies_are_rejected() {
        let m = design();
        let mut x = policy_frequencies(&m, &Policy::uniform(&m)).unwrap();
        x.terminal[0] += 0.1;
        assert!(matches!(
            frequencies_to_policy(&m, &x),
            Err(Error::InfeasibleFrequencies(_))
        ));
    }

    #[test]
    fn regularize_is_identity_on_regular_models() {
        let m = design();
        let pi = Policy::uniform(&m);
        assert_eq!(regularize(&m, &pi).unwrap(), pi);
    }

    #[test]
    fn regularize_fixes_unreachable_pairs() {
        let m = closed_state_model();
        let pi = Policy::deterministic(&m, &ActionMap(vec![vec![1, 1, 1], vec![1, 1, 1]]));
        let r = regularize(&m, &pi).unwrap();
        assert!(r.is_deterministic());
        assert_eq!(
            r.action_map().unwrap(),
            ActionMap(vec![vec![1, 1, 1], vec![1, 1, 0]])
        );
        let before = evaluate_policy(&m, &pi).unwrap();
        let after = evaluate_policy(&m, &r).unwrap();
        assert_eq!(before.aggregate, after.aggregate);
        assert_eq!(
            policy_frequencies(&m, &pi).unwrap(),
            policy_frequencies(&m, &r).unwrap()
        );
    }

    #[test]
    fn design_model_is_regular() {
        let report = regularity_report(&design());
        assert!(report.regular);
        assert_eq!(report.some_policy_witness, None);
        assert_eq!(report.all_policy_witness, None);
    }

    #[test]
    fn closed_state_is_unreachable_for_everyone() {
        let report = regularity_report(&closed_state_model());
        assert!(!report.regular);
        assert_eq!(
            report.all_policy_witness,
            Some(StateEpoch { state: 2, epoch: 1 })
        );
    }

    #[test]
    fn avoidable_state_has_only_a_some_policy_witness() {
        // Each predecessor has one action that never reaches state 1.
        let mut m = closed_state_model();
        m.transitions[0] = vec![
            vec![vec![1.0, 0.0, 0.0], vec![0.5, 0.5, 0.0]],
            vec![vec![0.2, 0.3, 0.5], vec![0.0, 0.0, 1.0]],
            vec![vec![0.5, 0.0, 0.5], vec![0.1, 0.1, 0.8]],
        ];
        assert!(m.validate().is_ok());
        let report = regularity_report(&m);
        assert!(!report.regular);
        assert_eq!(report.all_policy_witness, None);
        let w = report.some_policy_witness.unwrap();
        assert_eq!((w.state, w.epoch), (1, 1));
        assert_eq!(w.actions, vec![0, 1, 0]);
        // Following the witness actions really misses the state.
        let mut d = ActionMap::first(&m);
        d.0[0] = w.actions.clone();
        let mu = forward_marginals(&m, &Policy::deterministic(&m, &d)).unwrap();
        assert_eq!(mu[1][1], 0.0);
    }

    #[test]
    fn policy_spec_accepts_both_shapes() {
        let m = design();
        let det: PolicySpec = serde_json::from_str(r#"{"d": [[4, 1], [4, 1]]}"#).unwrap();
        let p = det.into_policy(&m).unwrap();
        assert_eq!(
            p.action_map(),
            Some(ActionMap(vec![vec![4, 1], vec![4, 1]]))
        );
        let json = serde_json::to_string(&PolicySpec::Stochastic { q: p.q.clone() }).unwrap();
        let back: PolicySpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_policy(&m).unwrap(), p);
        let bad: PolicySpec = serde_json::from_str(r#"{"d": [[9, 1], [4, 1]]}"#).unwrap();
        assert!(bad.into_policy(&m).is_err());
    }
}
