//! The `bounds`, `spectrum` and `oracle` workflows.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use poincare_sobol::estimators::{
    bootstrap_ci, center, derive_seed, dgsm_upper_bound_from_sample, fisher_lower_bound,
    monomial_literature_bound, monomial_lower_bound, monte_carlo_sample, pdo_der_lower_bound,
    pdo_lower_bound, pick_freeze_total, quadrature_sample, AnovaOracle,
};
use poincare_sobol::spectral::SpectralRecord;
use poincare_sobol::testfunctions::build_model;
use poincare_sobol::{
    BoundEstimate, Distribution1D, EvaluationSample, Family, ModelFunction, SpectralBasis,
    SpectralSource, Weight,
};

use crate::cache::SpectrumCache;
use crate::config::{EstimatorName, InputSpec, ModelSpec, RunConfig};
use crate::CliError;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputReport {
    pub variable: usize,
    pub name: String,
    pub declared: Distribution1D,
    /// Law actually sampled and used for spectra.
    pub law: Distribution1D,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub variable: usize,
    pub source: SpectralSource,
    pub eigenvalues: Vec<f64>,
    pub poincare_constant: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatorError {
    pub estimator: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariableReport {
    pub variable: usize,
    pub name: String,
    pub estimates: Vec<BoundEstimate>,
    pub errors: Vec<EstimatorError>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedRun {
    pub seed: Option<u64>,
    pub n: usize,
    pub variance: f64,
    pub variables: Vec<VariableReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub schema: u32,
    pub command: &'static str,
    pub mode: &'static str,
    pub model: ModelSummary,
    pub inputs: Vec<InputReport>,
    pub estimators: Vec<EstimatorName>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub spectra: Vec<SpectrumSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectra_error: Option<String>,
    pub runs: Vec<SeedRun>,
}

/// Model, inputs and laws resolved from a configuration.
pub struct Setup {
    pub model: Option<Box<dyn ModelFunction>>,
    pub csv_sample: Option<EvaluationSample>,
    pub summary: ModelSummary,
    pub inputs: Vec<InputSpec>,
    pub laws: Vec<Distribution1D>,
}

impl Setup {
    pub fn dim(&self) -> usize {
        self.inputs.len()
    }

    pub fn name(&self, i: usize) -> String {
        self.inputs[i]
            .name
            .clone()
            .unwrap_or_else(|| format!("x{}", i + 1))
    }

    fn input_reports(&self) -> Vec<InputReport> {
        (0..self.dim())
            .map(|i| InputReport {
                variable: i,
                name: self.name(i),
                declared: self.inputs[i].distribution,
                law: self.laws[i],
            })
            .collect()
    }
}

/// Law used for sampling and spectra: the declared one when a closed-form
/// basis exists or the support is bounded, its bounded version otherwise.
pub fn effective_law(dist: &Distribution1D, weight: &Weight) -> Result<Distribution1D, CliError> {
    let closed = *weight == Weight::Identity
        && !dist.is_truncated()
        && matches!(
            dist.family(),
            Family::Uniform { .. } | Family::Normal { .. }
        );
    if closed || dist.is_bounded() {
        Ok(*dist)
    } else {
        Ok(dist.bounded()?)
    }
}

pub fn setup(cfg: &RunConfig) -> Result<Setup, CliError> {
    let (model, csv_sample, summary, dim) = match &cfg.model {
        ModelSpec::Named { name, params } => {
            let model = build_model(name, params).map_err(|e| match e {
                poincare_sobol::Error::InvalidParameter(m) if m.starts_with("unknown model") => {
                    CliError::ModelUnknown(name.clone())
                }
                other => CliError::Core(other),
            })?;
            let summary = ModelSummary {
                name: Some(name.clone()),
                params: Some(model.params()),
                csv: None,
            };
            let dim = model.dim();
            (Some(model), None, summary, dim)
        }
        ModelSpec::Csv { csv } => {
            let s = EvaluationSample::read_csv(csv)?;
            let summary = ModelSummary {
                name: None,
                params: None,
                csv: Some(csv.display().to_string()),
            };
            let dim = s.dim();
            (None, Some(s), summary, dim)
        }
    };
    let inputs = cfg.input_laws(dim)?;
    let laws = inputs
        .iter()
        .map(|s| effective_law(&s.distribution, &cfg.spectral.weight))
        .collect::<Result<_, _>>()?;
    Ok(Setup {
        model,
        csv_sample,
        summary,
        inputs,
        laws,
    })
}

pub fn solve_spectra(
    cfg: &RunConfig,
    setup: &Setup,
    cache: &SpectrumCache,
) -> Result<Vec<SpectralBasis>, CliError> {
    setup
        .laws
        .par_iter()
        .map(|law| {
            cache
                .basis(
                    law,
                    cfg.spectral_k(),
                    cfg.spectral.grid,
                    cfg.spectral.grid_kind,
                    &cfg.spectral.weight,
                )
                .map(|(_, b)| b)
                .map_err(CliError::from)
        })
        .collect()
}

struct Context<'a> {
    cfg: &'a RunConfig,
    setup: &'a Setup,
    bases: Result<&'a [SpectralBasis], String>,
    oracle: Option<Result<&'a AnovaOracle, String>>,
}

type Outcome = Result<Vec<BoundEstimate>, String>;

impl Context<'_> {
    fn model(&self) -> Result<&dyn ModelFunction, String> {
        self.setup
            .model
            .as_deref()
            .ok_or_else(|| poincare_sobol::Error::MissingModel.to_string())
    }

    fn bases(&self) -> Result<&[SpectralBasis], String> {
        self.bases.clone()
    }

    fn bootstrap<F>(
        &self,
        est: BoundEstimate,
        s: &EvaluationSample,
        stream: u64,
        stat: F,
    ) -> Outcome
    where
        F: Fn(&EvaluationSample) -> poincare_sobol::Result<f64> + Sync,
    {
        match self.cfg.bootstrap {
            Some(b) if !s.is_weighted() => {
                let seed = derive_seed(s.seed().unwrap_or(self.cfg.seeds[0]), stream);
                let ci = bootstrap_ci(stat, s, b.replicates, b.level, seed)
                    .map_err(|e| e.to_string())?;
                Ok(vec![est.with_ci(ci)])
            }
            _ => Ok(vec![est]),
        }
    }

    fn run(
        &self,
        s: &EvaluationSample,
        run_seed: u64,
        i: usize,
        which: EstimatorName,
        slot: u64,
    ) -> Outcome {
        let k = self.cfg.spectral.eigen_index;
        let laws = &self.setup.laws;
        let stream = (1u64 << 32) + 64 * i as u64 + slot;
        let err = |e: poincare_sobol::Error| e.to_string();
        match which {
            EstimatorName::Pdo => {
                let bases = self.bases()?;
                let est = pdo_lower_bound(&center(s), bases, i, k).map_err(err)?;
                self.bootstrap(est, s, stream, |t| {
                    Ok(pdo_lower_bound(&center(t), bases, i, k)?.value)
                })
            }
            EstimatorName::PdoDer => {
                let bases = self.bases()?;
                let est = pdo_der_lower_bound(s, bases, i, k).map_err(err)?;
                self.bootstrap(est, s, stream, |t| {
                    Ok(pdo_der_lower_bound(t, bases, i, k)?.value)
                })
            }
            EstimatorName::Fisher => {
                let est = fisher_lower_bound(&center(s), laws, i).map_err(err)?;
                self.bootstrap(est, s, stream, |t| {
                    Ok(fisher_lower_bound(&center(t), laws, i)?.value)
                })
            }
            EstimatorName::Monomial => {
                let model = self.model()?;
                let m = self.cfg.monomial_degree;
                let est = monomial_lower_bound(s, model, laws, i, m).map_err(err)?;
                let lit = monomial_literature_bound(s, model, laws, i, m).map_err(err)?;
                let mut out = self.bootstrap(est, s, stream, |t| {
                    Ok(monomial_lower_bound(t, model, laws, i, m)?.value)
                })?;
                out.push(lit);
                Ok(out)
            }
            EstimatorName::DgsmUpper => {
                let cp = self.bases()?[i].poincare_constant().map_err(err)?;
                let est = dgsm_upper_bound_from_sample(s, cp, i).map_err(err)?;
                self.bootstrap(est, s, stream, |t| {
                    Ok(dgsm_upper_bound_from_sample(t, cp, i)?.value)
                })
            }
            EstimatorName::PickFreeze => {
                let model = self.model()?;
                let n = self.cfg.pick_freeze_n.unwrap_or(self.cfg.n);
                let pf = pick_freeze_total(model, laws, i, n, run_seed).map_err(err)?;
                Ok(if self.cfg.normalize {
                    vec![pf.total, pf.index]
                } else {
                    vec![pf.total]
                })
            }
            EstimatorName::Oracle => {
                let oracle = match &self.oracle {
                    Some(Ok(o)) => *o,
                    Some(Err(e)) => return Err(e.clone()),
                    None => return Err("oracle not computed".into()),
                };
                let mut out = vec![
                    oracle.estimate(i, false).map_err(err)?,
                    oracle.estimate(i, true).map_err(err)?,
                ];
                if self.cfg.normalize && oracle.variance() > 0.0 {
                    let v = oracle.variance();
                    out = out
                        .iter()
                        .flat_map(|e| [e.clone(), e.normalized(v)])
                        .collect();
                }
                Ok(out)
            }
        }
    }
}

fn sample_for(cfg: &RunConfig, setup: &Setup, seed: u64) -> Result<EvaluationSample, CliError> {
    if let Some(s) = &setup.csv_sample {
        return Ok(s.clone().with_seed(seed));
    }
    let model = setup
        .model
        .as_deref()
        .ok_or(CliError::Core(poincare_sobol::Error::MissingModel))?;
    Ok(if cfg.quadrature {
        quadrature_sample(model, &setup.laws, cfg.quadrature_nodes)?
    } else {
        monte_carlo_sample(model, &setup.laws, cfg.n, seed)?
    })
}

pub fn bounds(cfg: &RunConfig, cache: &SpectrumCache) -> Result<BoundsReport, CliError> {
    let setup = setup(cfg)?;
    let d = setup.dim();

    let needs_spectra = cfg.estimators.iter().any(|e| e.needs_spectra());
    let spectra = if needs_spectra {
        Some(solve_spectra(cfg, &setup, cache))
    } else {
        None
    };
    let (bases, spectra_error): (Result<&[SpectralBasis], String>, Option<String>) = match &spectra
    {
        Some(Ok(b)) => (Ok(b.as_slice()), None),
        Some(Err(e)) => (Err(format!("spectra: {e}")), Some(e.to_string())),
        None => (Err("spectra not computed".into()), None),
    };
    let oracle_store = if cfg.estimators.contains(&EstimatorName::Oracle) {
        Some(match setup.model.as_deref() {
            Some(m) => {
                AnovaOracle::new(m, &setup.laws, cfg.quadrature_nodes).map_err(|e| e.to_string())
            }
            None => Err(poincare_sobol::Error::MissingModel.to_string()),
        })
    } else {
        None
    };
    let ctx = Context {
        cfg,
        setup: &setup,
        bases,
        oracle: oracle_store
            .as_ref()
            .map(|r| r.as_ref().map_err(Clone::clone)),
    };

    // A quadrature design or an ingested sample does not depend on the seed.
    let seeds: Vec<Option<u64>> = if cfg.quadrature {
        vec![None]
    } else if setup.csv_sample.is_some() {
        vec![Some(cfg.seeds[0])]
    } else {
        cfg.seeds.iter().copied().map(Some).collect()
    };

    let mut runs = Vec::with_capacity(seeds.len());
    for seed in seeds {
        let run_seed = seed.unwrap_or(cfg.seeds[0]);
        let s = sample_for(cfg, &setup, run_seed)?;
        let variance = s.output_variance();
        let tasks: Vec<(usize, usize, EstimatorName)> = (0..d)
            .flat_map(|i| {
                cfg.estimators
                    .iter()
                    .enumerate()
                    .map(move |(slot, &e)| (i, slot, e))
            })
            .collect();
        let outcomes: Vec<Outcome> = tasks
            .par_iter()
            .map(|&(i, slot, e)| ctx.run(&s, run_seed, i, e, slot as u64))
            .collect();
        let mut variables: Vec<VariableReport> = (0..d)
            .map(|i| VariableReport {
                variable: i,
                name: setup.name(i),
                estimates: Vec::new(),
                errors: Vec::new(),
            })
            .collect();
        for ((i, _, e), outcome) in tasks.iter().zip(outcomes) {
            let v = &mut variables[*i];
            match outcome {
                Ok(list) => {
                    for est in list {
                        let normalize = cfg.normalize
                            && variance > 0.0
                            && !matches!(e, EstimatorName::PickFreeze | EstimatorName::Oracle);
                        if normalize {
                            let scaled = est.normalized(variance);
                            v.estimates.push(est);
                            v.estimates.push(scaled);
                        } else {
                            v.estimates.push(est);
                        }
                    }
                }
                Err(message) => v.errors.push(EstimatorError {
                    estimator: e.label(),
                    message,
                }),
            }
        }
        runs.push(SeedRun {
            seed: if cfg.quadrature { None } else { Some(run_seed) },
            n: s.len(),
            variance,
            variables,
        });
    }

    let spectra_summary = match &spectra {
        Some(Ok(b)) => b
            .iter()
            .enumerate()
            .map(|(i, basis)| SpectrumSummary {
                variable: i,
                source: basis.source(),
                eigenvalues: basis.eigenvalues().to_vec(),
                poincare_constant: basis.poincare_constant().unwrap_or(f64::NAN),
            })
            .collect(),
        _ => Vec::new(),
    };
    Ok(BoundsReport {
        schema: SCHEMA,
        command: "bounds",
        mode: if cfg.quadrature {
            "quadrature"
        } else {
            "monte_carlo"
        },
        model: setup.summary.clone(),
        inputs: setup.input_reports(),
        estimators: cfg.estimators.clone(),
        spectra: spectra_summary,
        spectra_error,
        runs,
    })
}

/// Rows of the summary table: variable, estimator, value, ci_lo, ci_hi, n, seed.
pub fn summary_rows(report: &BoundsReport) -> Vec<[String; 7]> {
    let fmt_opt = |v: Option<f64>| v.map(crate::fmt_f64).unwrap_or_default();
    let mut rows = Vec::new();
    for run in &report.runs {
        for var in &run.variables {
            for e in &var.estimates {
                let target = serde_json::to_value(e.target).expect("target serializes");
                let kind = serde_json::to_value(e.kind).expect("kind serializes");
                rows.push([
                    var.name.clone(),
                    format!(
                        "{}:{}",
                        kind.as_str().unwrap_or(""),
                        target.as_str().unwrap_or("")
                    ),
                    crate::fmt_f64(e.value),
                    fmt_opt(e.ci.map(|c| c.lo)),
                    fmt_opt(e.ci.map(|c| c.hi)),
                    e.n_used.to_string(),
                    run.seed
                        .or(e.seed)
                        .map(|s| s.to_string())
                        .unwrap_or_default(),
                ]);
            }
        }
    }
    rows
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumEntry {
    pub variable: usize,
    pub name: String,
    pub basis: SpectralRecord,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub schema: u32,
    pub command: &'static str,
    pub spectra: Vec<SpectrumEntry>,
}

pub fn spectrum(cfg: &RunConfig, cache: &SpectrumCache) -> Result<SpectrumReport, CliError> {
    let setup = setup(cfg)?;
    let bases = solve_spectra(cfg, &setup, cache)?;
    Ok(SpectrumReport {
        schema: SCHEMA,
        command: "spectrum",
        spectra: bases
            .iter()
            .enumerate()
            .map(|(i, b)| SpectrumEntry {
                variable: i,
                name: setup.name(i),
                basis: b.to_record(),
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleRow {
    pub variable: usize,
    pub name: String,
    #[serde(rename = "D_i")]
    pub first: f64,
    #[serde(rename = "D_i_tot")]
    pub total: f64,
    #[serde(rename = "S_i")]
    pub first_index: f64,
    #[serde(rename = "S_i_tot")]
    pub total_index: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub schema: u32,
    pub command: &'static str,
    pub model: ModelSummary,
    pub inputs: Vec<InputReport>,
    pub variance: f64,
    pub indices: Vec<OracleRow>,
}

pub fn oracle(cfg: &RunConfig) -> Result<OracleReport, CliError> {
    let setup = setup(cfg)?;
    let model = setup
        .model
        .as_deref()
        .ok_or(CliError::Core(poincare_sobol::Error::MissingModel))?;
    let o = AnovaOracle::new(model, &setup.laws, cfg.quadrature_nodes)?;
    let v = o.variance();
    let indices = (0..setup.dim())
        .map(|i| {
            let first = o.partial(&[i])?;
            let total = o.total(&[i])?;
            Ok(OracleRow {
                variable: i,
                name: setup.name(i),
                first,
                total,
                first_index: first / v,
                total_index: total / v,
            })
        })
        .collect::<poincare_sobol::Result<_>>()?;
    Ok(OracleReport {
        schema: SCHEMA,
        command: "oracle",
        model: setup.summary.clone(),
        inputs: setup.input_reports(),
        variance: v,
        indices,
    })
}
