use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use hdfe::bench::{dummy_feasible, replication_data, run_bench, run_exactness};
use hdfe::estimate::{estimate, recover, wald, Engine, EstimateOptions, VcovChoice};
use hdfe::io::{write_fe_csv, write_model_csv, Table};
use hdfe::report::{read_json, write_json, EstimateReport};
use hdfe_core::{simulate, ApConfig, DgpConfig, Design, Family, FeSolver, NewtonConfig, Schedule};

#[derive(Parser)]
#[command(name = "hdfe", version, about = "Logit and poisson models with high-dimensional fixed effects")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a CSV file.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        response: String,
        /// Comma-separated regressor columns.
        #[arg(long, value_delimiter = ',', default_value = "")]
        regressors: Vec<String>,
        /// Comma-separated fixed-effect columns.
        #[arg(long, value_delimiter = ',', required = true)]
        fe: Vec<String>,
        #[arg(long, default_value = "poisson")]
        family: Family,
        #[arg(long, default_value_t = 1e-5)]
        ap_tol: f64,
        #[arg(long, default_value = "nh")]
        ap_schedule: Schedule,
        #[arg(long, default_value_t = 1e-8)]
        dev_tol: f64,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        /// hessian, opg, robust or cluster:<column>
        #[arg(long, default_value = "hessian")]
        vcov: VcovChoice,
        #[arg(long, default_value = "ap")]
        engine: Engine,
        /// Remove groups whose responses sit at a boundary value.
        #[arg(long)]
        drop_noncontributing: bool,
        /// Result file; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Wald test of linear restrictions on a saved result.
    Wald {
        #[arg(long)]
        result: PathBuf,
        /// e.g. "x1=0,x2=0" or "x1-x2=0"
        #[arg(long)]
        restrict: String,
    },
    /// Recover the fixed effects of a saved result.
    RecoverFe {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// gs (alternating normal equations) or kaczmarz
        #[arg(long, default_value = "gs")]
        solver: FeSolver,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a simulated panel to CSV.
    Simulate {
        /// logit2 or ppml3
        #[arg(long)]
        design: Design,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exactness and timing against the dummy-variable engine.
    Bench {
        #[arg(long)]
        design: Design,
        /// Defaults to 50 for logit2, 10 for ppml3.
        #[arg(long)]
        n: Option<usize>,
        /// Defaults to 10 for logit2, 5 for ppml3.
        #[arg(long)]
        t: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1e-8,1e-5,1e-3")]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_summary(report: &EstimateReport) {
    println!("{} fit, n = {}, {} iterations, log-likelihood {:.6}", report.family, report.n, report.iterations, report.loglik);
    println!("{:<16} {:>14} {:>14}   ({} standard errors)", "", "estimate", "std. error", report.vcov.label);
    for c in &report.coefficients {
        println!("{:<16} {:>14.6} {:>14.6}", c.name, c.estimate, c.std_error);
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match cli.command {
        Command::Estimate { data, response, regressors, fe, family, ap_tol, ap_schedule, dev_tol, max_iter, vcov, engine, drop_noncontributing, out } => {
            let table = Table::read(&data).with_context(|| format!("reading {}", data.display()))?;
            let regressors: Vec<String> = regressors.into_iter().filter(|r| !r.is_empty()).collect();
            let opts = EstimateOptions {
                response,
                regressors,
                fixed_effects: fe,
                family,
                ap: ApConfig { schedule: ap_schedule, ..ApConfig::with_tolerance(ap_tol) },
                newton: NewtonConfig { dev_tol, max_iter, ..NewtonConfig::default() },
                vcov,
                engine,
                drop_noncontributing,
            };
            let report = estimate(&table, &opts)?;
            match out {
                Some(path) => {
                    write_json(&path, &report)?;
                    print_summary(&report);
                }
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
        }
        Command::Wald { result, restrict } => {
            let report: EstimateReport = read_json(&result).with_context(|| format!("reading {}", result.display()))?;
            let w = wald(&report, &restrict)?;
            println!("{}", serde_json::to_string_pretty(&w)?);
        }
        Command::RecoverFe { result, data, solver, out } => {
            let report: EstimateReport = read_json(&result).with_context(|| format!("reading {}", result.display()))?;
            let table = Table::read(&data).with_context(|| format!("reading {}", data.display()))?;
            let (model, fe) = recover(&table, &report, solver)?;
            write_fe_csv(&out, &model.factors, &fe)?;
        }
        Command::Simulate { design, n, t, seed, out } => {
            let cfg = DgpConfig { design, n_units: n, n_periods: t, seed, replications: 1 };
            let data = simulate(&cfg)?;
            write_model_csv(&out, &data, "y")?;
        }
        Command::Bench { design, n, t, grid, reps, seed, out } => {
            if grid.is_empty() {
                bail!("empty tolerance grid");
            }
            let desk = DgpConfig::desk(design, seed);
            let cfg = DgpConfig { n_units: n.unwrap_or(desk.n_units), n_periods: t.unwrap_or(desk.n_periods), replications: reps, ..desk };
            let probe = replication_data(&cfg, 0)?;
            let report = if dummy_feasible(&probe) {
                serde_json::json!({ "exactness": run_exactness(&cfg, &grid)?, "timing": null })
            } else {
                log::warn!("dense design too large, timing the projection engine only");
                serde_json::json!({ "exactness": null, "timing": run_bench(&cfg, &grid)? })
            };
            write_json(&out, &report)?;
        }
    }
    Ok(())
}
