//! Two-component cost/reliability design problem cast as a vMDP.
//!
//! One component is designed per epoch, in an order drawn from `alpha`.
//! Epoch 0 moves deterministically to the other component; epoch 1 moves
//! to either component with probability 1/2 (the terminal state carries no
//! reward). Each alternative earns `(-cost, ln reliability)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::model::Model;

/// Lower clamp applied to sampled reliabilities so `ln p` stays finite.
pub const MIN_RELIABILITY: f64 = 0.01;

/// Costs and reliabilities per component (outer index) and alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignInstance {
    pub costs: [Vec<f64>; 2],
    pub reliabilities: [Vec<f64>; 2],
}

impl DesignInstance {
    pub fn new(costs: [Vec<f64>; 2], reliabilities: [Vec<f64>; 2]) -> Result<Self> {
        let d = Self {
            costs,
            reliabilities,
        };
        d.check()?;
        Ok(d)
    }

    /// The five-by-five example instance used throughout the docs and tests.
    pub fn example() -> Self {
        Self {
            costs: [
                vec![0.70, 0.33, 0.83, 0.60, 0.29],
                vec![0.48, 0.42, 0.39, 0.76, 0.98],
            ],
            reliabilities: [
                vec![0.48, 0.21, 0.58, 0.81, 0.68],
                vec![0.56, 0.79, 0.46, 0.38, 0.90],
            ],
        }
    }

    pub fn alternatives(&self) -> [usize; 2] {
        [self.costs[0].len(), self.costs[1].len()]
    }

    fn check(&self) -> Result<()> {
        for c in 0..2 {
            if self.costs[c].is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "component {} has no alternatives",
                    c + 1
                )));
            }
            if self.costs[c].len() != self.reliabilities[c].len() {
                return Err(Error::InvalidArgument(format!(
                    "component {} has {} costs but {} reliabilities",
                    c + 1,
                    self.costs[c].len(),
                    self.reliabilities[c].len()
                )));
            }
            for (a, (&cost, &rel)) in self.costs[c].iter().zip(&self.reliabilities[c]).enumerate() {
                if !(cost >= 0.0 && cost.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "component {} alternative {}: cost {cost} must be finite and non-negative",
                        c + 1,
                        a + 1
                    )));
                }
                if !(rel > 0.0 && rel <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "component {} alternative {}: reliability {rel} must lie in (0, 1]",
                        c + 1,
                        a + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Builds the design vMDP (S = 2, T = 3, two objectives). `alpha` defaults
/// to the uniform distribution.
pub fn build_design_model(d: &DesignInstance, alpha: Option<[f64; 2]>) -> Result<Model> {
    d.check()?;
    let alpha = alpha.unwrap_or([0.5, 0.5]);
    let ks = d.alternatives();

    let swap: Vec<Vec<Vec<f64>>> = (0..2)
        .map(|s| {
            (0..ks[s])
                .map(|_| (0..2).map(|j| if j == s { 0.0 } else { 1.0 }).collect())
                .collect()
        })
        .collect();
    let coin: Vec<Vec<Vec<f64>>> = (0..2)
        .map(|s| (0..ks[s]).map(|_| vec![0.5, 0.5]).collect())
        .collect();
    let reward: Vec<Vec<Vec<f64>>> = (0..2)
        .map(|s| {
            d.costs[s]
                .iter()
                .zip(&d.reliabilities[s])
                .map(|(&c, &p)| vec![-c, p.ln()])
                .collect()
        })
        .collect();

    let model = Model {
        num_states: 2,
        horizon: 3,
        num_objectives: 2,
        actions_per_state: ks.to_vec(),
        alpha: alpha.to_vec(),
        transitions: vec![swap, coin],
        rewards: vec![reward.clone(), reward],
        terminal_rewards: vec![vec![0.0, 0.0]; 2],
    };
    model.ensure_valid()?;
    Ok(model)
}

/// Samples a design instance whose costs and reliabilities have uniform
/// marginals and (rank) correlation close to `rho` within each component.
///
/// Uses a Gaussian copula: the normal pair gets correlation
/// `2 sin(pi rho / 6)`, which turns into Spearman correlation `rho` after the
/// normal CDF. Reliabilities are clamped to `[0.01, 1]`.
pub fn generate_random_instance(
    k1: usize,
    k2: usize,
    rho: f64,
    seed: u64,
) -> Result<DesignInstance> {
    if k1 == 0 || k2 == 0 {
        return Err(Error::InvalidArgument(
            "each component needs at least one alternative".into(),
        ));
    }
    if rho.is_nan() || rho.abs() >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "correlation {rho} must lie in (-1, 1)"
        )));
    }
    let r = 2.0 * (std::f64::consts::PI * rho / 6.0).sin();
    let tail = (1.0 - r * r).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |count: usize| {
        let mut costs = Vec::with_capacity(count);
        let mut rels = Vec::with_capacity(count);
        for _ in 0..count {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            costs.push(normal_cdf(z1));
            rels.push(normal_cdf(r * z1 + tail * z2).clamp(MIN_RELIABILITY, 1.0));
        }
        (costs, rels)
    };
    let (c1, p1) = draw(k1);
    let (c2, p2) = draw(k2);
    Ok(DesignInstance {
        costs: [c1, c2],
        reliabilities: [p1, p2],
    })
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Sample Pearson correlation; `None` when fewer than two points or a
/// constant series.
pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_model_layout() {
        let m = build_design_model(&DesignInstance::example(), None).unwrap();
        assert!(m.validate().is_ok());
        assert_eq!(m.actions_per_state, vec![5, 5]);
        let r = &m.rewards[0][0][4];
        assert_eq!(r[0], -0.29);
        assert_eq!(r[1], 0.68f64.ln());
        assert_eq!(m.transitions[0][0][2], vec![0.0, 1.0]);
        assert_eq!(m.transitions[0][1][2], vec![1.0, 0.0]);
        assert_eq!(m.transitions[1][1][0], vec![0.5, 0.5]);
        assert_eq!(m.terminal_rewards, vec![vec![0.0, 0.0]; 2]);
    }

    #[test]
    fn perfect_reliability_has_zero_log_reward() {
        let d =
            DesignInstance::new([vec![0.1, 0.2], vec![0.3]], [vec![1.0, 0.5], vec![1.0]]).unwrap();
        let m = build_design_model(&d, Some([0.3, 0.7])).unwrap();
        assert_eq!(m.rewards[1][0][0][1], 0.0);
        assert_eq!(m.alpha, vec![0.3, 0.7]);
    }

    #[test]
    fn zero_reliability_is_rejected() {
        let d = DesignInstance {
            costs: [vec![0.1], vec![0.2, 0.3]],
            reliabilities: [vec![0.0], vec![0.5, 0.5]],
        };
        assert!(build_design_model(&d, None).is_err());
    }

    #[test]
    fn single_alternative_everywhere_is_rejected() {
        let d = DesignInstance::new([vec![0.1], vec![0.2]], [vec![0.5], vec![0.5]]).unwrap();
        assert!(build_design_model(&d, None).is_err());
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_random_instance(5, 7, 0.7, 42).unwrap();
        let b = generate_random_instance(5, 7, 0.7, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_random_instance(5, 7, 0.7, 43).unwrap());
        assert_eq!(a.alternatives(), [5, 7]);
    }

    #[test]
    fn generator_rejects_bad_arguments() {
        assert!(generate_random_instance(5, 5, 1.0, 0).is_err());
        assert!(generate_random_instance(5, 5, -1.5, 0).is_err());
        assert!(generate_random_instance(0, 5, 0.5, 0).is_err());
    }

    fn pooled_correlation(rho: f64) -> f64 {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for seed in 0..2000 {
            let d = generate_random_instance(5, 5, rho, seed).unwrap();
            xs.extend_from_slice(&d.costs[0]);
            ys.extend_from_slice(&d.reliabilities[0]);
        }
        assert_eq!(xs.len(), 10_000);
        pearson_correlation(&xs, &ys).unwrap()
    }

    #[test]
    fn empirical_correlation_tracks_target() {
        let r = pooled_correlation(0.7);
        assert!((r - 0.7).abs() < 0.05, "correlation {r}");
        let r = pooled_correlation(0.0);
        assert!(r.abs() < 0.05, "correlation {r}");
    }

    #[test]
    fn reliabilities_are_clamped() {
        for seed in 0..200 {
            let d = generate_random_instance(10, 10, -0.9, seed).unwrap();
            for p in d.reliabilities.iter().flatten() {
                assert!((MIN_RELIABILITY..=1.0).contains(p));
            }
            assert!(build_design_model(&d, None).is_ok());
        }
    }
}
