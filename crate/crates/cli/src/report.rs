//! Table rendering for enumeration, evaluation and bench output.

use std::io::Write;

use serde::Serialize;
use vmdp::dynamics::ActionMap;
use vmdp::pareto::{EnumerationResult, OracleResult};

use crate::bench::GroupResult;
use crate::CliError;

fn io_err(e: std::io::Error) -> CliError {
    CliError::Input(format!("write failed: {e}"))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Input(format!("write failed: {e}"))
}

/// Agreement between the enumeration and the brute-force oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub matched: bool,
    pub enumerated: usize,
    pub oracle_efficient: usize,
    pub oracle_classes: usize,
    pub tolerance: f64,
}

impl OracleComparison {
    /// Compares efficient value vectors as multisets within `tol` per coordinate.
    pub fn new(result: &EnumerationResult, oracle: &OracleResult, tol: f64) -> Self {
        let ours: Vec<&[f64]> = result.vertices.iter().map(|v| v.value.as_slice()).collect();
        let theirs: Vec<&[f64]> = oracle.efficient().map(|p| p.value.as_slice()).collect();
        OracleComparison {
            matched: same_value_sets(&ours, &theirs, tol),
            enumerated: ours.len(),
            oracle_efficient: theirs.len(),
            oracle_classes: oracle.policies.len(),
            tolerance: tol,
        }
    }

    pub fn line(&self) -> String {
        if self.matched {
            format!(
                "oracle: MATCH ({} efficient of {} classes)",
                self.oracle_efficient, self.oracle_classes
            )
        } else {
            format!(
                "oracle: MISMATCH (enumerated {}, oracle {} of {} classes)",
                self.enumerated, self.oracle_efficient, self.oracle_classes
            )
        }
    }
}

/// Multiset equality of value vectors up to `tol` in the max norm.
pub fn same_value_sets(a: &[&[f64]], b: &[&[f64]], tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    a.iter().all(|u| {
        let hit = b.iter().enumerate().position(|(j, v)| {
            !used[j]
                && u.len() == v.len()
                && u.iter().zip(v.iter()).all(|(x, y)| (x - y).abs() <= tol)
        });
        match hit {
            Some(j) => {
                used[j] = true;
                true
            }
            None => false,
        }
    })
}

fn csv_label(actions: &ActionMap, t: usize) -> String {
    actions.0[t]
        .iter()
        .map(|a| (a + 1).to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn enumeration_markdown<W: Write>(
    result: &EnumerationResult,
    oracle: Option<&OracleComparison>,
    out: &mut W,
) -> Result<(), CliError> {
    let maps = result.action_maps();
    let epochs = maps.first().map_or(0, |m| m.epochs());
    let k = result.vertices.first().map_or(0, |v| v.value.len());
    let weights = result.vertices.iter().any(|v| v.weights.is_some());

    let mut header = vec!["policy".to_string()];
    header.extend((1..=epochs).map(|t| format!("pi_{t}")));
    header.extend((1..=k).map(|i| format!("v_{i}")));
    if weights {
        header.extend((1..=k).map(|i| format!("p_{i}")));
    }
    writeln!(out, "| {} |", header.join(" | ")).map_err(io_err)?;
    writeln!(out, "|{}", "---|".repeat(header.len())).map_err(io_err)?;

    for (i, (v, map)) in result.vertices.iter().zip(&maps).enumerate() {
        let mut row = vec![(i + 1).to_string()];
        row.extend((0..epochs).map(|t| map.epoch_label(t)));
        row.extend(v.value.iter().map(|x| format!("{x:.2}")));
        if let Some(w) = &v.weights {
            row.extend(w.weights.iter().map(|p| format!("{p:.4}")));
        }
        writeln!(out, "| {} |", row.join(" | ")).map_err(io_err)?;
    }
    writeln!(out).map_err(io_err)?;
    writeln!(
        out,
        "efficient deterministic policies: {}",
        result.vertices.len()
    )
    .map_err(io_err)?;
    if let Some(o) = oracle {
        writeln!(out, "{}", o.line()).map_err(io_err)?;
    }
    Ok(())
}

/// Columns `policy, pi_1.., value_1.., weight_1..`; actions are 1-based and
/// space separated within an epoch.
pub fn enumeration_csv<W: Write>(result: &EnumerationResult, out: &mut W) -> Result<(), CliError> {
    let maps = result.action_maps();
    let epochs = maps.first().map_or(0, |m| m.epochs());
    let k = result.vertices.first().map_or(0, |v| v.value.len());
    let weights = result.vertices.iter().any(|v| v.weights.is_some());

    let mut csv = csv::Writer::from_writer(out);
    let mut header = vec!["policy".to_string()];
    header.extend((1..=epochs).map(|t| format!("pi_{t}")));
    header.extend((1..=k).map(|i| format!("value_{i}")));
    if weights {
        header.extend((1..=k).map(|i| format!("weight_{i}")));
    }
    csv.write_record(&header).map_err(csv_err)?;
    for (i, (v, map)) in result.vertices.iter().zip(&maps).enumerate() {
        let mut row = vec![(i + 1).to_string()];
        row.extend((0..epochs).map(|t| csv_label(map, t)));
        row.extend(v.value.iter().map(|x| format!("{x:.6}")));
        if weights {
            match &v.weights {
                Some(w) => row.extend(w.weights.iter().map(|p| format!("{p:.6}"))),
                None => row.extend(std::iter::repeat_n(String::new(), k)),
            }
        }
        csv.write_record(&row).map_err(csv_err)?;
    }
    csv.flush().map_err(io_err)
}

pub fn bench_markdown<W: Write>(groups: &[GroupResult], out: &mut W) -> Result<(), CliError> {
    writeln!(
        out,
        "| group | k1 | k2 | instances | mean | sd | rho1 | rho2 |"
    )
    .map_err(io_err)?;
    writeln!(out, "|---|---|---|---|---|---|---|---|").map_err(io_err)?;
    for (i, g) in groups.iter().enumerate() {
        writeln!(
            out,
            "| {} | {} | {} | {} | {:.1} | {:.1} | {:.2} | {:.2} |",
            i + 1,
            g.group.k1,
            g.group.k2,
            g.group.count,
            g.efficient.mean,
            g.efficient.sd,
            g.rho1.mean,
            g.rho2.mean
        )
        .map_err(io_err)?;
    }
    Ok(())
}

pub fn bench_csv<W: Write>(groups: &[GroupResult], out: &mut W) -> Result<(), CliError> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record([
        "group",
        "k1",
        "k2",
        "rho",
        "instances",
        "seed",
        "mean",
        "sd",
        "rho1",
        "rho2",
    ])
    .map_err(csv_err)?;
    for (i, g) in groups.iter().enumerate() {
        csv.write_record([
            (i + 1).to_string(),
            g.group.k1.to_string(),
            g.group.k2.to_string(),
            format!("{:.6}", g.group.rho),
            g.group.count.to_string(),
            g.group.seed.to_string(),
            format!("{:.6}", g.efficient.mean),
            format!("{:.6}", g.efficient.sd),
            format!("{:.6}", g.rho1.mean),
            format!("{:.6}", g.rho2.mean),
        ])
        .map_err(csv_err)?;
    }
    csv.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_sets_match_as_multisets() {
        let a: Vec<&[f64]> = vec![&[1.0, 2.0], &[1.0, 2.0]];
        let b: Vec<&[f64]> = vec![&[1.0, 2.0 + 1e-9], &[1.0, 2.0]];
        assert!(same_value_sets(&a, &b, 1e-6));
        let c: Vec<&[f64]> = vec![&[1.0, 2.0], &[0.0, 3.0]];
        assert!(!same_value_sets(&a, &c, 1e-6));
        assert!(!same_value_sets(&a, &a[..1], 1e-6));
    }
}
