//! Rate-law diagnostics for front histories.
//!
//! The growth laws hold only up to two-sided constants, so a law is judged by
//! how flat `h(t) / g(t)` is over a late window and by the log-log trend of that
//! ratio, rather than by fitting exponents.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::Snapshot;
use crate::steadystate::SteadyProfile;

/// Candidate growth law for the front `h(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form")]
pub enum RateLaw {
    /// `h ≈ C t`
    Linear,
    /// `h ≈ C t^p ln^q t`
    PowerLog { p: f64, q: f64 },
    /// `h ≈ C t ln^m t`
    LinearLogPow { m: f64 },
    /// `h ≈ C t ln ln t`
    LinearLogLog,
    /// `ln h ≈ C t^p ln^q t`
    ExpPower { p: f64, q: f64 },
}

impl fmt::Display for RateLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateLaw::Linear => write!(f, "Linear"),
            RateLaw::PowerLog { p, q } => write!(f, "PowerLog({p}, {q})"),
            RateLaw::LinearLogPow { m } => write!(f, "LinearLogPow({m})"),
            RateLaw::LinearLogLog => write!(f, "LinearLogLog"),
            RateLaw::ExpPower { p, q } => write!(f, "ExpPower({p}, {q})"),
        }
    }
}

impl RateLaw {
    /// Shape `g(t)` the law compares against (for `ExpPower`, the shape of `ln h`).
    pub fn shape(&self, t: f64) -> f64 {
        let l = t.ln();
        match *self {
            RateLaw::Linear => t,
            RateLaw::PowerLog { p, q } => t.powf(p) * l.powf(q),
            RateLaw::LinearLogPow { m } => t * l.powf(m),
            RateLaw::LinearLogLog => t * l.ln(),
            RateLaw::ExpPower { p, q } => t.powf(p) * l.powf(q),
        }
    }

    /// The observable the shape is matched to: `h`, or `ln h` for `ExpPower`.
    pub fn observable(&self, h: f64) -> f64 {
        match self {
            RateLaw::ExpPower { .. } => h.ln(),
            _ => h,
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            RateLaw::PowerLog { p, q } | RateLaw::ExpPower { p, q } => p.is_finite() && q.is_finite() && p > 0.0,
            RateLaw::LinearLogPow { m } => m.is_finite(),
            _ => true,
        }
    }
}

/// Flatness statistics of `h / g` over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Flatness {
    pub c_hat: f64,
    pub maxmin_ratio: f64,
    pub trend_slope: f64,
    pub rms_resid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateDiag {
    pub law: RateLaw,
    #[serde(flatten)]
    pub stats: Flatness,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub law: RateLaw,
    pub c_hat: f64,
    pub slope_diag: Vec<(f64, f64)>,
    pub flatness: f64,
    pub window: (f64, f64),
    pub rms_resid: f64,
    pub trend_slope: f64,
    pub candidates: Vec<CandidateDiag>,
}

/// Least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

fn positive_points(series: &[(f64, f64)]) -> Vec<(f64, f64)> {
    series.iter().copied().filter(|&(t, h)| t > 0.0 && h > 0.0).collect()
}

/// Windowed log-log slope `p(t)` of `h` against `t`, with windows
/// `[t / 10^{w/2}, t · 10^{w/2}]` that fit inside the data.
pub fn local_log_slope(series: &[(f64, f64)], window_decades: f64) -> Result<Vec<(f64, f64)>> {
    let pts = positive_points(series);
    if pts.len() < 50 {
        return Err(Error::InsufficientData(format!(
            "{} positive points, need 50",
            pts.len()
        )));
    }
    let (t_lo, t_hi) = (pts[0].0, pts[pts.len() - 1].0);
    let span = (t_hi / t_lo).log10();
    if span < 1.5 {
        return Err(Error::InsufficientData(format!(
            "data spans {span:.2} decades, need 1.5"
        )));
    }
    if !(window_decades > 0.0 && window_decades < span) {
        return Err(Error::InsufficientData(format!(
            "window of {window_decades} decades does not fit a {span:.2}-decade series"
        )));
    }
    let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let half = 0.5 * window_decades * std::f64::consts::LN_10;
    // centred prefix sums keep the normal equations well conditioned
    let cx = lx[lx.len() / 2];
    let cy = ly[ly.len() / 2];
    let mut s = vec![[0.0f64; 4]; lx.len() + 1];
    for i in 0..lx.len() {
        let (x, y) = (lx[i] - cx, ly[i] - cy);
        s[i + 1] = [s[i][0] + x, s[i][1] + y, s[i][2] + x * x, s[i][3] + x * y];
    }
    let mut out = Vec::new();
    let (first, last) = (lx[0], lx[lx.len() - 1]);
    let mut lo = 0;
    let mut hi = 0;
    for i in 0..lx.len() {
        let centre = lx[i];
        if centre - half < first || centre + half > last {
            continue;
        }
        while lx[lo] < centre - half {
            lo += 1;
        }
        while hi < lx.len() && lx[hi] <= centre + half {
            hi += 1;
        }
        let m = (hi - lo) as f64;
        if m < 3.0 {
            continue;
        }
        let sx = s[hi][0] - s[lo][0];
        let sy = s[hi][1] - s[lo][1];
        let sxx = s[hi][2] - s[lo][2];
        let sxy = s[hi][3] - s[lo][3];
        let denom = m * sxx - sx * sx;
        if denom <= 0.0 {
            continue;
        }
        out.push((pts[i].0, (m * sxy - sx * sy) / denom));
    }
    if out.is_empty() {
        return Err(Error::InsufficientData("no window fits inside the series".into()));
    }
    Ok(out)
}

/// Flatness of `observable(h) / g(t)` on `[t_lo, t_hi]` for a fixed law.
pub fn ratio_flatness(series: &[(f64, f64)], law: &RateLaw, window: (f64, f64)) -> Result<Flatness> {
    let pts = positive_points(series);
    let (t_lo, t_hi) = window;
    if pts.is_empty() {
        return Err(Error::InsufficientData("empty series".into()));
    }
    let (d_lo, d_hi) = (pts[0].0, pts[pts.len() - 1].0);
    if !(t_lo < t_hi) || t_lo < d_lo || t_hi > d_hi * (1.0 + 1e-12) {
        return Err(Error::Window {
            lo: t_lo,
            hi: t_hi,
            data_lo: d_lo,
            data_hi: d_hi,
        });
    }
    let mut lt = Vec::new();
    let mut lr = Vec::new();
    for &(t, h) in pts.iter().filter(|p| p.0 >= t_lo && p.0 <= t_hi) {
        let g = law.shape(t);
        let obs = law.observable(h);
        if !(g > 0.0 && obs > 0.0) {
            return Err(Error::Domain(format!("{law} is not positive at t = {t}")));
        }
        lt.push(t.ln());
        lr.push((obs / g).ln());
    }
    if lt.len() < 3 {
        return Err(Error::InsufficientData(format!("{} points in window", lt.len())));
    }
    let mean = lr.iter().sum::<f64>() / lr.len() as f64;
    let max = lr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = lr.iter().copied().fold(f64::INFINITY, f64::min);
    let rms = (lr.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / lr.len() as f64).sqrt();
    Ok(Flatness {
        c_hat: mean.exp(),
        maxmin_ratio: (max - min).exp(),
        trend_slope: ls_slope(&lt, &lr),
        rms_resid: rms,
    })
}

/// Last decade of the series: `[t_max / 10, t_max]`.
pub fn last_decade(series: &[(f64, f64)]) -> Result<(f64, f64)> {
    let t_max = series.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if !(t_max > 0.0) {
        return Err(Error::InsufficientData("no positive times".into()));
    }
    Ok((t_max / 10.0, t_max))
}

/// Picks the candidate whose ratio `h / g` shows the smallest trend on `window`
/// (the last decade when `None`).
pub fn fit_rate(series: &[(f64, f64)], candidates: &[RateLaw], window: Option<(f64, f64)>) -> Result<RateFit> {
    if candidates.len() < 2 {
        return Err(Error::Parameter("fit_rate needs at least two candidate laws".into()));
    }
    if let Some(bad) = candidates.iter().find(|l| !l.is_valid()) {
        return Err(Error::Parameter(format!("invalid candidate law {bad}")));
    }
    let window = match window {
        Some(w) => w,
        None => last_decade(series)?,
    };
    let mut diags = Vec::with_capacity(candidates.len());
    for law in candidates {
        let stats = ratio_flatness(series, law, window)?;
        diags.push(CandidateDiag { law: *law, stats });
    }
    let best = diags
        .iter()
        .min_by(|a, b| a.stats.trend_slope.abs().total_cmp(&b.stats.trend_slope.abs()))
        .expect("non-empty")
        .clone();
    let slope_diag = local_log_slope(series, 0.5).unwrap_or_default();
    Ok(RateFit {
        law: best.law,
        c_hat: best.stats.c_hat,
        slope_diag,
        flatness: best.stats.maxmin_ratio,
        window,
        rms_resid: best.stats.rms_resid,
        trend_slope: best.stats.trend_slope,
        candidates: diags,
    })
}

/// Late-time speed estimate for finite-speed kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedEstimate {
    pub c0_hat: f64,
    pub slope_early: f64,
    pub slope_late: f64,
    /// `|late - early| / |late|`.
    pub relative_gap: f64,
}

fn slope_on(series: &[(f64, f64)], lo: f64, hi: f64) -> Result<f64> {
    let (t, h): (Vec<f64>, Vec<f64>) = series.iter().filter(|p| p.0 >= lo && p.0 <= hi).copied().unzip();
    if t.len() < 3 {
        return Err(Error::InsufficientData(format!("{} points in [{lo}, {hi}]", t.len())));
    }
    Ok(ls_slope(&t, &h))
}

/// Least-squares slope of `h` against `t` over the last half of the run, with
/// the two late quarters compared as a convergence check.
pub fn speed_estimate(series: &[(f64, f64)]) -> Result<SpeedEstimate> {
    let t_end = series.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if series.len() < 8 || !(t_end > 0.0) {
        return Err(Error::InsufficientData(format!("{} points", series.len())));
    }
    let c0_hat = slope_on(series, 0.5 * t_end, t_end)?;
    let slope_early = slope_on(series, 0.5 * t_end, 0.75 * t_end)?;
    let slope_late = slope_on(series, 0.75 * t_end, t_end)?;
    Ok(SpeedEstimate {
        c0_hat,
        slope_early,
        slope_late,
        relative_gap: (slope_late - slope_early).abs() / slope_late.abs(),
    })
}

/// How far behind the front the profile comparison reaches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReachRule {
    /// `s(t) = h / ln(e + h)`
    HOverLogH,
    /// `s(t) = fraction · h`
    Fraction(f64),
}

impl ReachRule {
    pub fn reach(&self, h: f64) -> f64 {
        match *self {
            ReachRule::HOverLogH => h / (std::f64::consts::E + h).ln(),
            ReachRule::Fraction(c) => c * h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub t: f64,
    pub reach: f64,
    pub gap: f64,
}

/// `sup_{x_j ≤ s(t)} |u - U| + |v - V|` for each snapshot.
pub fn profile_gap(snapshots: &[Snapshot], steady: &SteadyProfile, rule: ReachRule) -> Result<Vec<GapPoint>> {
    snapshots
        .iter()
        .map(|snap| {
            if (snap.dx - steady.dx).abs() > 1e-12 * steady.dx {
                return Err(Error::Domain(format!(
                    "snapshot dx {} differs from steady dx {}",
                    snap.dx, steady.dx
                )));
            }
            let reach = rule.reach(snap.h);
            let last_snap = (snap.u.len() as f64 - 1.0) * snap.dx;
            if reach > steady.length || reach > last_snap {
                return Err(Error::Domain(format!(
                    "reach s(t) = {reach} at t = {} exceeds the available domain (steady L = {}, snapshot {last_snap})",
                    snap.t, steady.length
                )));
            }
            let nodes = (reach / snap.dx).floor() as usize + 1;
            let gap = (0..nodes.min(snap.u.len()).min(steady.u.len()))
                .map(|j| (snap.u[j] - steady.u[j]).abs() + (snap.v[j] - steady.v[j]).abs())
                .fold(0.0, f64::max);
            Ok(GapPoint { t: snap.t, reach, gap })
        })
        .collect()
}
