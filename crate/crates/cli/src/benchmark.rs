//! Tables for the two analytic test functions.

use serde::Serialize;
use serde_json::json;

use poincare_sobol::estimators::{
    pdo_der_lower_bound, quadrature_sample, AnovaOracle, DEFAULT_QUADRATURE_NODES,
};
use poincare_sobol::spectral::closed_form_spectrum;
use poincare_sobol::testfunctions::{analytic_indices, build_model};
use poincare_sobol::Distribution1D;

use crate::CliError;

pub const LINEAR_INTERACTION_A: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 4.0];
pub const G_SOBOL_A: [f64; 4] = [0.0, 1.0, 4.5, 9.0];

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRow {
    pub model: String,
    pub params: serde_json::Value,
    pub variable: usize,
    pub eigen_index: usize,
    /// Bound from the single-input terms only.
    pub bound_first: f64,
    /// Bound from single-input and pair terms.
    pub bound_total: f64,
    pub analytic_bound_first: f64,
    pub analytic_bound_total: f64,
    pub oracle_first: f64,
    pub oracle_total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub schema: u32,
    pub command: &'static str,
    pub rows: Vec<BenchmarkRow>,
}

fn rows_for(
    name: &str,
    params: serde_json::Value,
    eigen_index: usize,
) -> Result<Vec<BenchmarkRow>, CliError> {
    let model = build_model(name, &params)?;
    let d = model.dim();
    let u = Distribution1D::uniform(-0.5, 0.5)?;
    let dists = vec![u; d];
    let basis = closed_form_spectrum(&u, eigen_index)?;
    let bases = vec![basis; d];
    let q = quadrature_sample(model.as_ref(), &dists, DEFAULT_QUADRATURE_NODES)?;
    let oracle = AnovaOracle::new(model.as_ref(), &dists, DEFAULT_QUADRATURE_NODES)?;
    (0..d)
        .map(|i| {
            let b = pdo_der_lower_bound(&q, &bases, i, eigen_index)?;
            let first = b
                .terms
                .iter()
                .filter(|(l, _)| l.support() == [i])
                .map(|(_, v)| v)
                .sum();
            let analytic = analytic_indices(name, &params, i)?;
            Ok(BenchmarkRow {
                model: name.to_string(),
                params: params.clone(),
                variable: i,
                eigen_index,
                bound_first: first,
                bound_total: b.value,
                analytic_bound_first: analytic.lb_first,
                analytic_bound_total: analytic.lb_total,
                oracle_first: oracle.partial(&[i])?,
                oracle_total: oracle.total(&[i])?,
            })
        })
        .collect()
}

pub fn benchmark() -> Result<BenchmarkReport, CliError> {
    let mut rows = Vec::new();
    for a in LINEAR_INTERACTION_A {
        rows.extend(rows_for("linear_interaction", json!({ "a": a }), 1)?);
    }
    rows.extend(rows_for("g_sobol", json!({ "a": G_SOBOL_A }), 2)?);
    Ok(BenchmarkReport {
        schema: crate::run::SCHEMA,
        command: "benchmark",
        rows,
    })
}

pub const CSV_HEADER: [&str; 10] = [
    "model",
    "params",
    "variable",
    "eigen_index",
    "bound_first",
    "bound_total",
    "analytic_bound_first",
    "analytic_bound_total",
    "oracle_first",
    "oracle_total",
];

pub fn csv_rows(report: &BenchmarkReport) -> Vec<Vec<String>> {
    report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.model.clone(),
                r.params.to_string(),
                (r.variable + 1).to_string(),
                r.eigen_index.to_string(),
                crate::fmt_f64(r.bound_first),
                crate::fmt_f64(r.bound_total),
                crate::fmt_f64(r.analytic_bound_first),
                crate::fmt_f64(r.analytic_bound_total),
                crate::fmt_f64(r.oracle_first),
                crate::fmt_f64(r.oracle_total),
            ]
        })
        .collect()
}
