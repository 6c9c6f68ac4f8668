use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use frontier_core::error::{Error, Result};
use frontier_core::io::{self, RunConfig};
use frontier_core::kernels::{Family, KernelSpec};
use frontier_core::propcheck::{self, ComparisonReport, Prop21Outcome};
use frontier_core::steadystate;
use frontier_core::sweep::{self, Axis, RunOptions};

#[derive(Parser)]
#[command(name = "frontier", version, about = "Nonlocal epidemic model with a moving front")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Time-march one configuration and write its run directory.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also fit the front series (writes fit_report.json).
        #[arg(long)]
        fit: bool,
        /// Also solve the steady problem and report profile gaps.
        #[arg(long)]
        steady: bool,
    },
    /// Fit the front series of an existing run directory.
    Fit {
        run_dir: PathBuf,
        /// Config used to pick the predicted law; defaults to the manifest's echo.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Solve the half-line steady problem and write steady_profile.csv.
    Steady {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Property harnesses; writes propcheck_report.json.
    Propcheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        prop21: bool,
        #[arg(long)]
        comparison: bool,
        /// Number of random ordered pairs for --comparison.
        #[arg(long, default_value_t = 20)]
        pairs: u64,
        #[arg(long, default_value_t = 30.0)]
        t_end: f64,
    },
    /// Fan a base config out over a parameter grid, one directory per point.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Axis `key=v1,v2,...`; repeat for a Cartesian product.
        #[arg(long = "set", required = true)]
        axes: Vec<Axis>,
        #[arg(long)]
        fit: bool,
    },
}

fn load(config: Option<&Path>) -> Result<RunConfig> {
    match config {
        Some(p) => io::parse_config(p),
        None => Ok(RunConfig::default()),
    }
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

#[derive(Serialize)]
struct Prop21Row {
    family: Family,
    rho: f64,
    eps: f64,
    k0: f64,
    l0: f64,
    outcome: Prop21Outcome,
}

#[derive(Serialize, Default)]
struct PropReport {
    prop21: Vec<Prop21Row>,
    comparison: Vec<ComparisonReport>,
    pass: bool,
}

fn prop21_grid() -> Result<Vec<Prop21Row>> {
    let mut rows = Vec::new();
    for family in [
        Family::Compact { radius: 1.0 },
        Family::PowerLaw { gamma: 1.5 },
        Family::CritLog { beta: 0.0 },
    ] {
        let kernel = KernelSpec::new(family)?;
        for rho in [1.0, 2.0, 5.0] {
            for eps in [0.05, 0.1, 0.2] {
                let case = propcheck::Prop21Case::standard(kernel.clone(), rho, eps)?;
                let outcome = propcheck::check_prop21(&case, 400)?;
                rows.push(Prop21Row {
                    family,
                    rho,
                    eps,
                    k0: case.k0,
                    l0: case.l0,
                    outcome,
                });
            }
        }
    }
    Ok(rows)
}

fn propcheck_cmd(cfg: &RunConfig, prop21: bool, comparison: bool, pairs: u64, t_end: f64) -> Result<PropReport> {
    let (prop21, comparison) = if prop21 || comparison {
        (prop21, comparison)
    } else {
        (true, true)
    };
    let mut report = PropReport::default();
    if prop21 {
        report.prop21 = prop21_grid()?;
    }
    if comparison {
        for k in 0..pairs {
            let (lo, hi) = propcheck::random_ordered_pair(cfg.seed.wrapping_add(k))?;
            report.comparison.push(propcheck::comparison_harness(&lo, &hi, t_end)?);
        }
    }
    report.pass = report.prop21.iter().all(|r| r.outcome.pass) && report.comparison.iter().all(|c| c.holds);
    Ok(report)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run {
            config,
            out,
            fit,
            steady,
        } => {
            let cfg = load(config.as_deref())?;
            let m = sweep::execute_run(&cfg, &out, RunOptions { fit, steady })?;
            println!("final h = {} after {} steps ({})", m.final_h, m.steps, m.termination);
        }
        Cmd::Fit { run_dir, config } => {
            let cfg = match config {
                Some(p) => io::parse_config(p)?,
                None => RunConfig::from_toml_str(&io::read_manifest(&run_dir)?.config)?,
            };
            let p = cfg.to_params()?;
            let series = io::read_h_series(run_dir.join(io::H_SERIES))?;
            let report = io::fit_report(&series, Some(p.kernel1.predicted_rate()), &[], None)?;
            io::write_json(&run_dir.join(io::FIT_REPORT), &report)?;
            println!("selected {} with C_hat = {}", report.fit.law, report.fit.c_hat);
        }
        Cmd::Steady { config, out } => {
            let cfg = load(config.as_deref())?;
            let p = cfg.to_params()?;
            let prof = steadystate::solve_steady(&p, cfg.steady.length, cfg.steady.tol)?;
            mkdir(&out)?;
            io::write_steady_profile(&out.join(io::STEADY_PROFILE), &prof)?;
            println!(
                "converged in {} iterations, residual {:e}, far-field gap {:e}",
                prof.iterations,
                prof.residual,
                prof.far_field_gap()
            );
        }
        Cmd::Propcheck {
            config,
            out,
            prop21,
            comparison,
            pairs,
            t_end,
        } => {
            let cfg = load(config.as_deref())?;
            let report = propcheck_cmd(&cfg, prop21, comparison, pairs, t_end)?;
            mkdir(&out)?;
            io::write_json(&out.join("propcheck_report.json"), &report)?;
            if !report.pass {
                return Err(Error::Property("see propcheck_report.json".into()));
            }
            println!("all property checks passed");
        }
        Cmd::Sweep { config, out, axes, fit } => {
            let base = match &config {
                Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.clone(),
                    source: e,
                })?,
                None => String::new(),
            };
            let runs = sweep::expand(&base, &axes)?;
            mkdir(&out)?;
            let outcomes = sweep::sweep(&runs, &out, RunOptions { fit, steady: false })?;
            io::write_json(&out.join("sweep.json"), &outcomes)?;
            let failed = outcomes.iter().filter(|o| o.error.is_some()).count();
            println!("{} runs, {failed} failed", outcomes.len());
            if let Some(code) = outcomes.iter().map(|o| o.exit_code).max().filter(|&c| c != 0) {
                return Err(match code {
                    2 => Error::Parameter(format!("{failed} sweep runs rejected their config")),
                    _ => Error::Domain(format!("{failed} sweep runs failed")),
                });
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
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
