//! The vector-valued Markov decision process data model.
//!
//! All indices are 0-based: states `0..num_states`, actions `0..k_s`,
//! decision epochs `0..horizon - 1` and the terminal epoch `horizon - 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the probability-sum checks.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// A finite-horizon Markov decision process with vector rewards.
///
/// `transitions[t][s][a][j]` is the probability of moving from `s` to `j`
/// when `a` is taken at decision epoch `t`; `rewards[t][s][a]` is the
/// reward vector collected there and `terminal_rewards[s]` the one collected
/// in state `s` at the terminal epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub num_states: usize,
    pub horizon: usize,
    pub num_objectives: usize,
    pub actions_per_state: Vec<usize>,
    pub alpha: Vec<f64>,
    pub transitions: Vec<Vec<Vec<Vec<f64>>>>,
    pub rewards: Vec<Vec<Vec<Vec<f64>>>>,
    pub terminal_rewards: Vec<Vec<f64>>,
}

/// Outcome of [`Model::validate`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, message: String) {
        self.violations.push(message);
    }
}

impl Model {
    /// Number of decision epochs, `T - 1`.
    pub fn decision_epochs(&self) -> usize {
        self.horizon.saturating_sub(1)
    }

    /// Total number of state-action pairs per epoch, `K = sum k_s`.
    pub fn total_actions(&self) -> usize {
        self.actions_per_state.iter().sum()
    }

    /// `(prod k_s)^(T-1)`, or `None` on overflow.
    pub fn deterministic_policy_count(&self) -> Option<u128> {
        let per_epoch = self
            .actions_per_state
            .iter()
            .try_fold(1u128, |acc, &k| acc.checked_mul(k as u128))?;
        let mut total = 1u128;
        for _ in 0..self.decision_epochs() {
            total = total.checked_mul(per_epoch)?;
        }
        Some(total)
    }

    /// Checks every model axiom and names the offending index of each
    /// violation. Shape errors stop the numeric checks that depend on them.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let s_count = self.num_states;
        let k = self.num_objectives;

        if s_count == 0 {
            report.push("num_states must be positive".into());
        }
        if self.horizon < 2 {
            report.push(format!("horizon must be at least 2, got {}", self.horizon));
        }
        if k == 0 {
            report.push("num_objectives must be positive".into());
        }
        if self.actions_per_state.len() != s_count {
            report.push(format!(
                "actions_per_state has {} entries, expected {}",
                self.actions_per_state.len(),
                s_count
            ));
        }
        if self.alpha.len() != s_count {
            report.push(format!(
                "alpha has {} entries, expected {}",
                self.alpha.len(),
                s_count
            ));
        }
        if !report.is_ok() {
            return report;
        }

        for (s, &ks) in self.actions_per_state.iter().enumerate() {
            if ks == 0 {
                report.push(format!("state {s} has no actions"));
            }
        }
        if !self.actions_per_state.iter().any(|&ks| ks >= 2) {
            report.push("at least one state needs two or more actions".into());
        }

        for (s, &a) in self.alpha.iter().enumerate() {
            if !(a > 0.0 && a <= 1.0) {
                report.push(format!("alpha[{s}] = {a} is not in (0, 1]"));
            }
        }
        let alpha_sum: f64 = self.alpha.iter().sum();
        if (alpha_sum - 1.0).abs() > SUM_TOLERANCE {
            report.push(format!("initial distribution sums to {alpha_sum}"));
        }

        let epochs = self.decision_epochs();
        if self.transitions.len() != epochs {
            report.push(format!(
                "transitions has {} epochs, expected {epochs}",
                self.transitions.len()
            ));
        }
        if self.rewards.len() != epochs {
            report.push(format!(
                "rewards has {} epochs, expected {epochs}",
                self.rewards.len()
            ));
        }
        if self.terminal_rewards.len() != s_count {
            report.push(format!(
                "terminal_rewards has {} states, expected {s_count}",
                self.terminal_rewards.len()
            ));
        }
        if !report.is_ok() {
            return report;
        }

        for t in 0..epochs {
            if self.transitions[t].len() != s_count {
                report.push(format!(
                    "transitions[{t}] has {} states",
                    self.transitions[t].len()
                ));
                continue;
            }
            if self.rewards[t].len() != s_count {
                report.push(format!("rewards[{t}] has {} states", self.rewards[t].len()));
                continue;
            }
            for s in 0..s_count {
                let ks = self.actions_per_state[s];
                if self.transitions[t][s].len() != ks {
                    report.push(format!(
                        "transitions[{t}][{s}] has {} actions, expected {ks}",
                        self.transitions[t][s].len()
                    ));
                    continue;
                }
                if self.rewards[t][s].len() != ks {
                    report.push(format!(
                        "rewards[{t}][{s}] has {} actions, expected {ks}",
                        self.rewards[t][s].len()
                    ));
                    continue;
                }
                for a in 0..ks {
                    let row = &self.transitions[t][s][a];
                    if row.len() != s_count {
                        report.push(format!(
                            "transitions[{t}][{s}][{a}] has {} entries, expected {s_count}",
                            row.len()
                        ));
                    } else {
                        for (j, &p) in row.iter().enumerate() {
                            if !(0.0..=1.0).contains(&p) {
                                report.push(format!(
                                    "transition p[{t}][{s}][{a}][{j}] = {p} is not in [0, 1]"
                                ));
                            }
                        }
                        let sum: f64 = row.iter().sum();
                        if (sum - 1.0).abs() > SUM_TOLERANCE {
                            report.push(format!("transition row p[{t}][{s}][{a}] sums to {sum}"));
                        }
                    }
                    let reward = &self.rewards[t][s][a];
                    if reward.len() != k {
                        report.push(format!(
                            "rewards[{t}][{s}][{a}] has {} objectives, expected {k}",
                            reward.len()
                        ));
                    } else if reward.iter().any(|r| !r.is_finite()) {
                        report.push(format!("rewards[{t}][{s}][{a}] is not finite"));
                    }
                }
            }
        }
        for (s, reward) in self.terminal_rewards.iter().enumerate() {
            if reward.len() != k {
                report.push(format!(
                    "terminal_rewards[{s}] has {} objectives, expected {k}",
                    reward.len()
                ));
            } else if reward.iter().any(|r| !r.is_finite()) {
                report.push(format!("terminal_rewards[{s}] is not finite"));
            }
        }
        report
    }

    /// Like [`Model::validate`] but as a `Result`.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidModel(report.violations.join("; ")))
        }
    }
}

/// Parameters for [`random_model`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomModelConfig {
    pub num_states: usize,
    pub max_actions: usize,
    pub horizon: usize,
    pub num_objectives: usize,
    /// Probability that an individual transition entry is forced to zero.
    /// Positive values produce non-regular processes some of the time.
    pub zero_probability: f64,
}

/// Draws a random model: action counts in `1..=max_actions` (at least one
/// state with two), rewards uniform on `[-1, 1)`, positive random `alpha`.
pub fn random_model(config: &RandomModelConfig, seed: u64) -> Result<Model> {
    let RandomModelConfig {
        num_states,
        max_actions,
        horizon,
        num_objectives,
        zero_probability,
    } = *config;
    if num_states == 0 || max_actions < 2 || horizon < 2 || num_objectives == 0 {
        return Err(Error::InvalidArgument(format!(
            "unusable random model config {config:?}"
        )));
    }
    if !(0.0..1.0).contains(&zero_probability) {
        return Err(Error::InvalidArgument(
            "zero_probability must lie in [0, 1)".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut actions_per_state: Vec<usize> = (0..num_states)
        .map(|_| rng.random_range(1..=max_actions))
        .collect();
    if actions_per_state.iter().all(|&k| k < 2) {
        let s = rng.random_range(0..num_states);
        actions_per_state[s] = rng.random_range(2..=max_actions);
    }

    let mut alpha: Vec<f64> = (0..num_states)
        .map(|_| rng.random_range(0.1..1.0))
        .collect();
    normalize(&mut alpha);

    let epochs = horizon - 1;
    let mut transitions = Vec::with_capacity(epochs);
    let mut rewards = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let mut p_t = Vec::with_capacity(num_states);
        let mut r_t = Vec::with_capacity(num_states);
        for &ks in &actions_per_state {
            let mut p_s = Vec::with_capacity(ks);
            let mut r_s = Vec::with_capacity(ks);
            for _ in 0..ks {
                let mut row: Vec<f64> = (0..num_states)
                    .map(|_| {
                        if rng.random::<f64>() < zero_probability {
                            0.0
                        } else {
                            rng.random_range(0.05..1.0)
                        }
                    })
                    .collect();
                if row.iter().all(|&p| p == 0.0) {
                    let j = rng.random_range(0..num_states);
                    row[j] = 1.0;
                }
                normalize(&mut row);
                p_s.push(row);
                r_s.push(
                    (0..num_objectives)
                        .map(|_| rng.random_range(-1.0..1.0))
                        .collect(),
                );
            }
            p_t.push(p_s);
            r_t.push(r_s);
        }
        transitions.push(p_t);
        rewards.push(r_t);
    }
    let terminal_rewards = (0..num_states)
        .map(|_| {
            (0..num_objectives)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect();

    Ok(Model {
        num_states,
        horizon,
        num_objectives,
        actions_per_state,
        alpha,
        transitions,
        rewards,
        terminal_rewards,
    })
}

/// Scales to unit sum, then puts the rounding residue on the largest entry
/// so the sum is 1 to within one ulp.
fn normalize(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    let residue = 1.0 - v.iter().sum::<f64>();
    if let Some(max) = v.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *max += residue;
    }
}
