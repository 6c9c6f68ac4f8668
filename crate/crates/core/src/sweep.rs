//! Single-run driver and parameter sweeps fanned out over a thread pool.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::ReachRule;
use crate::error::{Error, Result};
use crate::evolution;
use crate::io::{self, Extras, RunConfig, RunManifest};
use crate::steadystate;

/// Environment variable capping the sweep's worker count.
pub const THREADS_ENV: &str = "FRONTIER_THREADS";

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Fit the front series and write `fit_report.json`.
    pub fit: bool,
    /// Solve the steady problem, write `steady_profile.csv`, and add profile gaps to the fit.
    pub steady: bool,
}

/// Runs one configuration to completion and writes its directory.
pub fn execute_run(cfg: &RunConfig, dir: &Path, opts: RunOptions) -> Result<RunManifest> {
    let started = io::unix_seconds();
    let p = cfg.to_params()?;
    let traj = evolution::run(&p, cfg.run.t_end, &cfg.output_times(), cfg.run.max_seconds)?;
    let steady = if opts.steady {
        // the profile comparison reaches out to s(t); keep the closure well beyond it
        let reach = traj
            .snapshots
            .iter()
            .map(|s| ReachRule::HOverLogH.reach(s.h))
            .fold(0.0, f64::max);
        let length = cfg.steady.length.max(2.0 * reach);
        Some(steadystate::solve_steady(&p, length, cfg.steady.tol)?)
    } else {
        None
    };
    let fit = if opts.fit {
        Some(io::fit_report(
            &traj.h_series,
            Some(p.kernel1.predicted_rate()),
            &traj.snapshots,
            steady.as_ref(),
        )?)
    } else {
        None
    };
    io::write_outputs(
        &traj,
        cfg,
        dir,
        started,
        Extras {
            fit: fit.as_ref(),
            steady: steady.as_ref(),
        },
    )
}

/// One swept key with its values, parsed from `key=v1,v2,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<toml::Value>,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (key, rest) = s
            .split_once('=')
            .ok_or_else(|| Error::config(s, "sweep axis must look like key=v1,v2,..."))?;
        let key = key.trim().to_string();
        let values = rest
            .split(',')
            .map(|raw| {
                let raw = raw.trim();
                // bare words (e.g. a family name) are taken as strings
                toml::from_str::<toml::Table>(&format!("v = {raw}"))
                    .ok()
                    .and_then(|mut t| t.remove("v"))
                    .unwrap_or_else(|| toml::Value::String(raw.to_string()))
            })
            .collect::<Vec<_>>();
        if key.is_empty() || values.is_empty() {
            return Err(Error::config(s, "empty sweep axis"));
        }
        Ok(Axis { key, values })
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().unwrap_or(key);
    let mut cur = table;
    for part in parts {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("`{part}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Cartesian product of the axes applied to `base`; each entry is a
/// validated config and a directory label like `run_0003`.
pub fn expand(base: &str, axes: &[Axis]) -> Result<Vec<(String, RunConfig)>> {
    let table: toml::Table = toml::from_str(base).map_err(|e| Error::config("", e.message().to_string()))?;
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut t = table.clone();
        let mut rem = idx;
        for axis in axes.iter().rev() {
            let n = axis.values.len();
            set_dotted(&mut t, &axis.key, axis.values[rem % n].clone())?;
            rem /= n;
        }
        let text = toml::to_string(&t).map_err(|e| Error::config("", e.to_string()))?;
        out.push((format!("run_{idx:04}"), RunConfig::from_toml_str(&text)?));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutcome {
    pub label: String,
    pub dir: PathBuf,
    pub final_h: Option<f64>,
    pub error: Option<String>,
    pub exit_code: i32,
}

pub fn thread_count() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs every config in its own subdirectory of `out`; failures are recorded, not fatal.
pub fn sweep(runs: &[(String, RunConfig)], out: &Path, opts: RunOptions) -> Result<Vec<SweepOutcome>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Parameter(e.to_string()))?;
    let outcomes = pool.install(|| {
        runs.par_iter()
            .map(|(label, cfg)| {
                let dir = out.join(label);
                match execute_run(cfg, &dir, opts) {
                    Ok(m) => SweepOutcome {
                        label: label.clone(),
                        dir,
                        final_h: Some(m.final_h),
                        error: None,
                        exit_code: 0,
                    },
                    Err(e) => SweepOutcome {
                        label: label.clone(),
                        dir,
                        final_h: None,
                        error: Some(e.to_string()),
                        exit_code: e.exit_code(),
                    },
                }
            })
            .collect()
    });
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parsing() {
        let a: Axis = "model.mu1=0.5,1,2".parse().unwrap();
        assert_eq!(a.key, "model.mu1");
        assert_eq!(a.values.len(), 3);
        let f: Axis = "kernel1.family=COMPACT,POWERLAW".parse().unwrap();
        assert_eq!(f.values[0], toml::Value::String("COMPACT".into()));
        assert!("nokey".parse::<Axis>().is_err());
    }

    #[test]
    fn expansion_is_cartesian() {
        let axes: Vec<Axis> = vec![
            "model.mu1=0.5,1.0".parse().unwrap(),
            "model.h0=2.0,3.0,4.0".parse().unwrap(),
        ];
        let runs = expand("[run]\nt_end = 1.0\n", &axes).unwrap();
        assert_eq!(runs.len(), 6);
        assert_eq!(runs[0].1.model.mu1, 0.5);
        assert_eq!(runs[0].1.model.h0, 2.0);
        assert_eq!(runs[5].1.model.mu1, 1.0);
        assert_eq!(runs[5].1.model.h0, 4.0);
        assert!(runs.iter().all(|r| r.1.run.t_end == 1.0));
    }

    #[test]
    fn bad_value_is_config_error() {
        let axes: Vec<Axis> = vec!["model.mu1=-1.0".parse().unwrap()];
        assert_eq!(expand("", &axes).unwrap_err().exit_code(), 2);
    }
}
