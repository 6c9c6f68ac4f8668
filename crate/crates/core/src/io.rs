//! Run configuration, on-disk artifacts and manifests.
//!
//! Every run directory holds `h_series.csv`, `snapshots.jsonl`, optionally
//! `fit_report.json` / `steady_profile.csv`, and `manifest.json`, which is
//! always written last and atomically.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::analysis::{self, GapPoint, RateFit, RateLaw, ReachRule, SpeedEstimate};
use crate::error::{Error, Result};
use crate::evolution::{self, InitShape, InitialData, ModelParams, Numerics, Snapshot, Trajectory};
use crate::kernels::{Family, KernelSpec};
use crate::reactions::ReactionSpec;
use crate::steadystate::SteadyProfile;

pub const H_SERIES: &str = "h_series.csv";
pub const SNAPSHOTS: &str = "snapshots.jsonl";
pub const FIT_REPORT: &str = "fit_report.json";
pub const STEADY_PROFILE: &str = "steady_profile.csv";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection {
            family: "ALGLOG".into(),
            gamma: Some(1.5),
            beta: Some(0.0),
            alpha: None,
            radius: None,
        }
    }
}

impl KernelSection {
    pub fn from_family(f: &Family) -> Self {
        let mut s = KernelSection {
            family: f.name().into(),
            gamma: None,
            beta: None,
            alpha: None,
            radius: None,
        };
        match *f {
            Family::LogLog { alpha, beta } => {
                s.alpha = Some(alpha);
                s.beta = Some(beta);
            }
            Family::AlgLog { gamma, beta } => {
                s.gamma = Some(gamma);
                s.beta = Some(beta);
            }
            Family::CritLog { beta } => s.beta = Some(beta),
            Family::Compact { radius } => s.radius = Some(radius),
            Family::PowerLaw { gamma } => s.gamma = Some(gamma),
        }
        s
    }

    /// Resolves the family, filling unset parameters with defaults
    /// (`gamma = 1.5`, `beta = 0` or `2` for LOGLOG, `alpha = 0`, `R = 1`).
    pub fn family(&self, prefix: &str) -> Result<Family> {
        let key = |k: &str| format!("{prefix}.{k}");
        let unused = |k: &str, v: Option<f64>| -> Result<()> {
            match v {
                Some(_) => Err(Error::config(
                    key(k),
                    format!("not a parameter of family {}", self.family),
                )),
                None => Ok(()),
            }
        };
        let f = match self.family.to_ascii_uppercase().as_str() {
            "LOGLOG" => {
                unused("gamma", self.gamma)?;
                unused("R", self.radius)?;
                Family::LogLog {
                    alpha: self.alpha.unwrap_or(0.0),
                    beta: self.beta.unwrap_or(2.0),
                }
            }
            "ALGLOG" => {
                unused("alpha", self.alpha)?;
                unused("R", self.radius)?;
                Family::AlgLog {
                    gamma: self.gamma.unwrap_or(1.5),
                    beta: self.beta.unwrap_or(0.0),
                }
            }
            "CRITLOG" => {
                unused("gamma", self.gamma)?;
                unused("alpha", self.alpha)?;
                unused("R", self.radius)?;
                Family::CritLog {
                    beta: self.beta.unwrap_or(0.0),
                }
            }
            "COMPACT" => {
                unused("gamma", self.gamma)?;
                unused("beta", self.beta)?;
                unused("alpha", self.alpha)?;
                Family::Compact {
                    radius: self.radius.unwrap_or(1.0),
                }
            }
            "POWERLAW" => {
                unused("beta", self.beta)?;
                unused("alpha", self.alpha)?;
                unused("R", self.radius)?;
                Family::PowerLaw {
                    gamma: self.gamma.unwrap_or(1.5),
                }
            }
            other => {
                return Err(Error::config(
                    key("family"),
                    format!("unknown family `{other}` (expected LOGLOG, ALGLOG, CRITLOG, COMPACT or POWERLAW)"),
                ))
            }
        };
        f.validate().map_err(|e| match e {
            Error::Parameter(m) => Error::config(key(param_of(&f)), m),
            e => e,
        })?;
        Ok(f)
    }
}

fn param_of(f: &Family) -> &'static str {
    match f {
        Family::LogLog { .. } | Family::CritLog { .. } => "beta",
        Family::AlgLog { .. } | Family::PowerLaw { .. } => "gamma",
        Family::Compact { .. } => "R",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReactionSection {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
}

impl Default for ReactionSection {
    fn default() -> Self {
        ReactionSection {
            a: 1.0,
            b: 1.0,
            p: 2.0,
            q: 1.0,
            r: 2.0,
            s: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub dx: f64,
    pub initial_capacity: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        let n = Numerics::default();
        GridSection {
            dx: n.dx,
            initial_capacity: n.initial_capacity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub t_end: f64,
    pub cfl: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_times: Option<Vec<f64>>,
    pub snapshot_base: f64,
    pub snapshot_factor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_seconds: Option<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            t_end: 200.0,
            cfl: 0.5,
            output_times: None,
            snapshot_base: 1.0,
            snapshot_factor: 2.0,
            max_seconds: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitSection {
    pub shape: InitShape,
    pub amp_u: f64,
    pub amp_v: f64,
}

impl Default for InitSection {
    fn default() -> Self {
        InitSection {
            shape: InitShape::CosineBump,
            amp_u: 0.5,
            amp_v: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub d1: f64,
    pub d2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub h0: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            d1: 1.0,
            d2: 1.0,
            mu1: 1.0,
            mu2: 1.0,
            h0: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteadySection {
    #[serde(rename = "L")]
    pub length: f64,
    pub tol: f64,
}

impl Default for SteadySection {
    fn default() -> Self {
        SteadySection {
            length: 400.0,
            tol: 1e-10,
        }
    }
}

/// Every configurable key with its default. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Only used by randomized property sweeps; the solver itself is deterministic.
    pub seed: u64,
    pub kernel1: KernelSection,
    pub kernel2: KernelSection,
    pub reaction: ReactionSection,
    pub grid: GridSection,
    pub run: RunSection,
    pub init: InitSection,
    pub model: ModelSection,
    pub steady: SteadySection,
}

impl RunConfig {
    /// Parses and validates a TOML document; the kernel sections come back
    /// with their defaulted parameters filled in.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let key = e.span().map(|s| text[s].trim().to_string()).unwrap_or_default();
            Error::config(key, e.message().to_string())
        })?;
        cfg.kernel1 = KernelSection::from_family(&cfg.kernel1.family("kernel1")?);
        cfg.kernel2 = KernelSection::from_family(&cfg.kernel2.family("kernel2")?);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.to_params()?;
        let r = &self.run;
        if !(r.t_end >= 0.0 && r.t_end.is_finite()) {
            return Err(Error::config(
                "run.t_end",
                format!("{} must be a non-negative finite number", r.t_end),
            ));
        }
        if let Some(ts) = &r.output_times {
            if let Some(t) = ts.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
                return Err(Error::config("run.output_times", format!("{t} must be non-negative")));
            }
        } else {
            if !(r.snapshot_base > 0.0 && r.snapshot_base.is_finite()) {
                return Err(Error::config(
                    "run.snapshot_base",
                    format!("{} must be positive", r.snapshot_base),
                ));
            }
            if !(r.snapshot_factor > 1.0 && r.snapshot_factor.is_finite()) {
                return Err(Error::config(
                    "run.snapshot_factor",
                    format!("{} outside admissible range (1, inf)", r.snapshot_factor),
                ));
            }
        }
        if let Some(s) = r.max_seconds {
            if !(s > 0.0) {
                return Err(Error::config("run.max_seconds", format!("{s} must be positive")));
            }
        }
        if self.grid.initial_capacity == 0 {
            return Err(Error::config("grid.initial_capacity", "must be at least 1"));
        }
        if !(self.steady.length > 0.0 && self.steady.length.is_finite()) {
            return Err(Error::config(
                "steady.L",
                format!("{} must be positive", self.steady.length),
            ));
        }
        if !(self.steady.tol > 0.0) {
            return Err(Error::config(
                "steady.tol",
                format!("{} must be positive", self.steady.tol),
            ));
        }
        Ok(())
    }

    pub fn reactions(&self) -> ReactionSpec {
        let r = &self.reaction;
        ReactionSpec::saturating(r.a, r.b, r.p, r.q, r.r, r.s)
    }

    pub fn to_params(&self) -> Result<ModelParams> {
        let reactions = self.reactions();
        reactions.check_rates().map_err(|e| match e {
            Error::Parameter(m) => {
                let key = m.split(' ').next().unwrap_or("reaction").to_string();
                Error::config(key, m)
            }
            e => e,
        })?;
        let p = ModelParams {
            d1: self.model.d1,
            d2: self.model.d2,
            mu1: self.model.mu1,
            mu2: self.model.mu2,
            h0: self.model.h0,
            kernel1: KernelSpec::new(self.kernel1.family("kernel1")?)?,
            kernel2: KernelSpec::new(self.kernel2.family("kernel2")?)?,
            reactions,
            init: InitialData {
                shape: self.init.shape,
                amp_u: self.init.amp_u,
                amp_v: self.init.amp_v,
            },
            numerics: Numerics {
                dx: self.grid.dx,
                cfl: self.run.cfl,
                initial_capacity: self.grid.initial_capacity,
            },
        };
        p.validate()?;
        Ok(p)
    }

    pub fn output_times(&self) -> Vec<f64> {
        match &self.run.output_times {
            Some(ts) => ts.clone(),
            None => evolution::geometric_times(self.run.snapshot_base, self.run.snapshot_factor, self.run.t_end),
        }
    }

    /// The effective configuration as TOML; parsing it back yields `self`.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::from_toml_str(&text)
}

/// Diagnostics written to `fit_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    #[serde(flatten)]
    pub fit: RateFit,
    /// Law predicted from the configured kernel, when known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted: Option<RateLaw>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed: Option<SpeedEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile_gap: Option<Vec<GapPoint>>,
}

/// Candidate laws for a fit: the kernel's predicted law plus the common alternatives.
pub fn default_candidates(predicted: Option<RateLaw>) -> Vec<RateLaw> {
    let mut out: Vec<RateLaw> = predicted.into_iter().collect();
    for law in [
        RateLaw::Linear,
        RateLaw::LinearLogPow { m: 1.0 },
        RateLaw::LinearLogLog,
        RateLaw::PowerLog { p: 2.0, q: 0.0 },
    ] {
        if !out.contains(&law) {
            out.push(law);
        }
    }
    out
}

/// Fits the series; speed and profile diagnostics are attached when computable.
pub fn fit_report(
    series: &[(f64, f64)],
    predicted: Option<RateLaw>,
    snapshots: &[Snapshot],
    steady: Option<&SteadyProfile>,
) -> Result<FitReport> {
    let fit = analysis::fit_rate(series, &default_candidates(predicted), None)?;
    let speed = analysis::speed_estimate(series).ok();
    let profile_gap = match steady {
        Some(s) => Some(analysis::profile_gap(snapshots, s, ReachRule::HOverLogH)?),
        None => None,
    };
    Ok(FitReport {
        fit,
        predicted,
        speed,
        profile_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: String,
    pub started: f64,
    pub finished: f64,
    pub dt: f64,
    pub steps: usize,
    pub final_h: f64,
    pub termination: String,
    pub files: Vec<String>,
}

pub fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(mut w: std::io::BufWriter<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_h_series(path: &Path, series: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let wrap = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(["t", "h"]).map_err(wrap)?;
    for &(t, h) in series {
        // Display for f64 is the shortest string that parses back exactly
        w.write_record([t.to_string(), h.to_string()]).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_h_series(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let wrap = |m: String| Error::Format {
        path: path.to_path_buf(),
        message: m,
    };
    let headers = r.headers().map_err(|e| wrap(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["t", "h"] {
        return Err(wrap(format!(
            "expected header `t,h`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.deserialize()
        .map(|rec| rec.map_err(|e| wrap(e.to_string())))
        .collect()
}

pub fn write_snapshots(path: &Path, snapshots: &[Snapshot]) -> Result<()> {
    let mut w = create(path)?;
    for s in snapshots {
        serde_json::to_writer(&mut w, s).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

pub fn read_snapshots(path: impl AsRef<Path>) -> Result<Vec<Snapshot>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| Error::Format {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_steady_profile(path: &Path, profile: &SteadyProfile) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let wrap = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(["x", "U", "V"]).map_err(wrap)?;
    for j in 0..profile.len() {
        w.write_record([
            profile.x(j).to_string(),
            profile.u[j].to_string(),
            profile.v[j].to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

/// Writes `manifest.json` through a temporary file and a rename.
pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    let tmp = dir.join(".manifest.json.tmp");
    let path = dir.join(MANIFEST);
    write_json(&tmp, manifest)?;
    fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Everything a finished run may put on disk besides the trajectory itself.
#[derive(Debug, Default)]
pub struct Extras<'a> {
    pub fit: Option<&'a FitReport>,
    pub steady: Option<&'a SteadyProfile>,
}

/// Writes the run artifacts into `dir` (created if needed) and the manifest last.
pub fn write_outputs(
    traj: &Trajectory,
    cfg: &RunConfig,
    dir: &Path,
    started: f64,
    extras: Extras<'_>,
) -> Result<RunManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![H_SERIES.to_string(), SNAPSHOTS.to_string()];
    write_h_series(&dir.join(H_SERIES), &traj.h_series)?;
    write_snapshots(&dir.join(SNAPSHOTS), &traj.snapshots)?;
    if let Some(fit) = extras.fit {
        write_json(&dir.join(FIT_REPORT), fit)?;
        files.push(FIT_REPORT.into());
    }
    if let Some(steady) = extras.steady {
        write_steady_profile(&dir.join(STEADY_PROFILE), steady)?;
        files.push(STEADY_PROFILE.into());
    }
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.echo(),
        started,
        finished: unix_seconds(),
        dt: traj.dt,
        steps: traj.steps,
        final_h: traj.h_series.last().map_or(cfg.model.h0, |p| p.1),
        termination: traj.termination.clone(),
        files,
    };
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<RunManifest> {
    let path = dir.as_ref().join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path,
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let p = cfg.to_params().unwrap();
        assert_eq!(p.kernel1.family(), Family::AlgLog { gamma: 1.5, beta: 0.0 });
        assert_eq!(p.h0, 5.0);
        assert_eq!(p.numerics.dx, 0.25);
        assert!(p.reactions.reproduction_number() > 1.0);
    }

    #[test]
    fn out_of_range_gamma_names_key_and_range() {
        let err = RunConfig::from_toml_str("[kernel1]\nfamily = \"ALGLOG\"\ngamma = 2.5\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("kernel1.gamma") && msg.contains("(1, 2)"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("[model]\nd3 = 1.0\n").is_err());
        assert!(RunConfig::from_toml_str("bogus = 1\n").is_err());
        assert!(RunConfig::from_toml_str("[kernel1]\nfamily = \"COMPACT\"\ngamma = 1.5\n").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let text = "seed = 7\n[kernel1]\nfamily = \"COMPACT\"\n[kernel2]\nfamily = \"CRITLOG\"\nbeta = -0.5\n[run]\nt_end = 12.5\noutput_times = [1.0, 2.0]\n";
        let cfg = RunConfig::from_toml_str(text).unwrap();
        let echo = cfg.echo();
        let again = RunConfig::from_toml_str(&echo).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(echo, again.echo());
        assert_eq!(cfg.kernel1.radius, Some(1.0));
    }

    #[test]
    fn geometric_output_times_by_default() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.output_times(), vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0]);
    }
}
