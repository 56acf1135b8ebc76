//! File formats: model and policy JSON, design CSV.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vmdp::design::DesignInstance;
use vmdp::dynamics::{Policy, PolicySpec};
use vmdp::model::Model;

use crate::CliError;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Parses a model file without validating it.
pub fn parse_model(path: &Path) -> Result<Model, CliError> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Parses and validates a model file.
pub fn load_model(path: &Path) -> Result<Model, CliError> {
    let model = parse_model(path)?;
    let report = model.validate();
    if !report.is_ok() {
        return Err(CliError::Domain(format!(
            "{}: invalid model\n  {}",
            path.display(),
            report.violations.join("\n  ")
        )));
    }
    Ok(model)
}

pub fn load_policy(path: &Path, model: &Model) -> Result<Policy, CliError> {
    let text = read(path)?;
    let spec: PolicySpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(spec.into_policy(model)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct DesignRow {
    component: usize,
    alternative: usize,
    cost: f64,
    reliability: f64,
}

/// Reads `component,alternative,cost,reliability` rows (1-based indices).
pub fn read_design_csv<R: std::io::Read>(reader: R) -> Result<DesignInstance, CliError> {
    let mut rows: Vec<DesignRow> = Vec::new();
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| CliError::Input(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["component", "alternative", "cost", "reliability"] {
        return Err(CliError::Input(format!(
            "expected header component,alternative,cost,reliability, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    for row in csv.deserialize() {
        rows.push(row.map_err(|e| CliError::Input(e.to_string()))?);
    }

    let mut costs: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut reliabilities: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for c in 1..=2 {
        let mut mine: Vec<&DesignRow> = rows.iter().filter(|r| r.component == c).collect();
        mine.sort_by_key(|r| r.alternative);
        for (i, r) in mine.iter().enumerate() {
            if r.alternative != i + 1 {
                return Err(CliError::Input(format!(
                    "component {c}: alternatives must be numbered 1..k without gaps"
                )));
            }
            costs[c - 1].push(r.cost);
            reliabilities[c - 1].push(r.reliability);
        }
    }
    if let Some(r) = rows.iter().find(|r| r.component != 1 && r.component != 2) {
        return Err(CliError::Input(format!(
            "component must be 1 or 2, found {}",
            r.component
        )));
    }
    Ok(DesignInstance::new(costs, reliabilities)?)
}

pub fn write_design_csv<W: Write>(design: &DesignInstance, out: W) -> Result<(), CliError> {
    let mut csv = csv::Writer::from_writer(out);
    for c in 0..2 {
        for (a, (&cost, &reliability)) in design.costs[c]
            .iter()
            .zip(&design.reliabilities[c])
            .enumerate()
        {
            csv.serialize(DesignRow {
                component: c + 1,
                alternative: a + 1,
                cost,
                reliability,
            })
            .map_err(|e| CliError::Input(e.to_string()))?;
        }
    }
    csv.flush().map_err(|e| CliError::Input(e.to_string()))
}
