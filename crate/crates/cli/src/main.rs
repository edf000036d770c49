use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use poincare_sobol_cli::benchmark;
use poincare_sobol_cli::cache::SpectrumCache;
use poincare_sobol_cli::config::{Format, RunConfig};
use poincare_sobol_cli::run::{self, OracleReport};
use poincare_sobol_cli::{fmt_f64, write_csv, write_json, CliError};

/// Lower and upper bounds of Sobol' indices from Poincaré chaos expansions.
#[derive(Parser)]
#[command(name = "poincare-sobol", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the eigenbases of every input and write spectra.json.
    Spectrum(Common),
    /// Compute the configured estimators; writes report.json and summary.csv.
    Bounds(Common),
    /// Exact ANOVA indices by tensor quadrature (at most 4 inputs).
    Oracle(Common),
    /// Bounds and exact values for the linear-interaction and g-Sobol functions.
    Benchmark(Output),
}

#[derive(Args)]
struct Output {
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Use the tensor quadrature design instead of Monte Carlo.
    #[arg(long)]
    quadrature: bool,
    /// Always re-solve spectra.
    #[arg(long)]
    no_cache: bool,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

impl Common {
    fn load(&self) -> Result<(RunConfig, SpectrumCache, PathBuf, Format), CliError> {
        let mut cfg = RunConfig::from_path(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if self.quadrature {
            cfg.quadrature = true;
        }
        cfg.validate()?;
        let cache = if self.no_cache {
            SpectrumCache::disabled()
        } else {
            let dir = self
                .cache_dir
                .clone()
                .unwrap_or_else(|| std::env::temp_dir().join("poincare-sobol-spectra"));
            SpectrumCache::new(Some(dir))
        };
        let out = self
            .output
            .out
            .clone()
            .unwrap_or_else(|| cfg.output.dir.clone());
        let format = self.output.format.unwrap_or(cfg.output.format);
        Ok((cfg, cache, out, format))
    }
}

const SUMMARY_HEADER: [&str; 7] = [
    "variable",
    "estimator",
    "value",
    "ci_lo",
    "ci_hi",
    "n",
    "seed",
];

fn oracle_rows(r: &OracleReport) -> Vec<Vec<String>> {
    r.indices
        .iter()
        .map(|x| {
            vec![
                x.name.clone(),
                fmt_f64(x.first),
                fmt_f64(x.total),
                fmt_f64(x.first_index),
                fmt_f64(x.total_index),
            ]
        })
        .collect()
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Spectrum(c) => {
            let (cfg, cache, out, _) = c.load()?;
            let report = run::spectrum(&cfg, &cache)?;
            write_json(&out.join("spectra.json"), &report)?;
        }
        Command::Bounds(c) => {
            let (cfg, cache, out, format) = c.load()?;
            let report = run::bounds(&cfg, &cache)?;
            for var in report.runs.iter().flat_map(|r| &r.variables) {
                for e in &var.errors {
                    eprintln!("{} [{}]: {}", var.name, e.estimator, e.message);
                }
            }
            if format.json() {
                write_json(&out.join("report.json"), &report)?;
            }
            if format.csv() {
                write_csv(
                    &out.join("summary.csv"),
                    &SUMMARY_HEADER,
                    &run::summary_rows(&report),
                )?;
            }
        }
        Command::Oracle(c) => {
            let (cfg, _, out, format) = c.load()?;
            let report = run::oracle(&cfg)?;
            if format.json() {
                write_json(&out.join("oracle.json"), &report)?;
            }
            if format.csv() {
                let header = ["variable", "D_i", "D_i_tot", "S_i", "S_i_tot"];
                write_csv(&out.join("oracle.csv"), &header, &oracle_rows(&report))?;
            }
        }
        Command::Benchmark(o) => {
            let out = o.out.unwrap_or_else(|| PathBuf::from("out"));
            let format = o.format.unwrap_or_default();
            let report = benchmark::benchmark()?;
            if format.json() {
                write_json(&out.join("benchmark.json"), &report)?;
            }
            if format.csv() {
                write_csv(
                    &out.join("benchmark.csv"),
                    &benchmark::CSV_HEADER,
                    &benchmark::csv_rows(&report),
                )?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
