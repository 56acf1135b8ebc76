//! Random design-instance experiments grouped by `(k1, k2)`.

use rayon::prelude::*;
use serde::Serialize;
use vmdp::design::{build_design_model, generate_random_instance, pearson_correlation};
use vmdp::pareto::{enumerate_efficient, EnumerationOptions};
use vmdp::vlp::build_program;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchGroup {
    pub k1: usize,
    pub k2: usize,
    pub rho: f64,
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
}

impl Summary {
    /// Mean and sample standard deviation; the deviation is 0 for fewer
    /// than two values.
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary {
                mean: f64::NAN,
                sd: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Summary { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupResult {
    pub group: BenchGroup,
    /// Efficient deterministic policy count per instance.
    pub counts: Vec<usize>,
    pub efficient: Summary,
    /// Empirical cost/reliability correlation per component.
    pub rho1: Summary,
    pub rho2: Summary,
}

/// Runs one group; instance `i` uses seed `seed + i`.
pub fn run_group(group: &BenchGroup) -> Result<GroupResult, CliError> {
    let per_instance: Vec<(usize, Option<f64>, Option<f64>)> = (0..group.count)
        .into_par_iter()
        .map(|i| {
            let design =
                generate_random_instance(group.k1, group.k2, group.rho, group.seed + i as u64)?;
            let model = build_design_model(&design, None)?;
            let cp = build_program(&model)?;
            let result = enumerate_efficient(&cp, &EnumerationOptions { parallel: false })?;
            Ok((
                result.vertices.len(),
                pearson_correlation(&design.costs[0], &design.reliabilities[0]),
                pearson_correlation(&design.costs[1], &design.reliabilities[1]),
            ))
        })
        .collect::<Result<_, vmdp::Error>>()?;

    let counts: Vec<usize> = per_instance.iter().map(|r| r.0).collect();
    let as_f64: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let rho1: Vec<f64> = per_instance.iter().filter_map(|r| r.1).collect();
    let rho2: Vec<f64> = per_instance.iter().filter_map(|r| r.2).collect();
    Ok(GroupResult {
        group: *group,
        counts,
        efficient: Summary::of(&as_f64),
        rho1: Summary::of(&rho1),
        rho2: Summary::of(&rho2),
    })
}

/// Parses `5x5,25x25` style group lists.
pub fn parse_groups(spec: &str) -> Result<Vec<(usize, usize)>, CliError> {
    spec.split(',')
        .map(|part| {
            let (a, b) = part.trim().split_once(['x', ':']).ok_or_else(|| {
                CliError::Input(format!("group '{part}' is not of the form K1xK2"))
            })?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| CliError::Input(format!("group '{part}': {e}")))
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_instance_has_zero_sd() {
        let g = BenchGroup {
            k1: 3,
            k2: 3,
            rho: 0.7,
            count: 1,
            seed: 5,
        };
        let r = run_group(&g).unwrap();
        assert_eq!(r.counts.len(), 1);
        assert_eq!(r.efficient.sd, 0.0);
        assert_eq!(r.efficient.mean, r.counts[0] as f64);
    }

    #[test]
    fn groups_parse() {
        assert_eq!(parse_groups("5x5, 25:10").unwrap(), vec![(5, 5), (25, 10)]);
        assert!(parse_groups("5").is_err());
        assert!(parse_groups("ax5").is_err());
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.sd, 1.0);
    }
}
