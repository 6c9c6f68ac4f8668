//! Dispersal kernels: the heavy-tailed families driving accelerated spreading
//! plus finite-first-moment baselines.
//!
//! Every kernel is an even probability density `J(x) = c · g(|x|)`. Tails are
//! integrated after a change of variables that turns the algebraic (or
//! log-algebraic) decay into exponential decay:
//!
//! * algebraic families use `1 + y = e^σ`, so `J dy ~ σ^β e^{(1-γ)σ} dσ`;
//! * the log-log family uses `s + y = exp(e^w)`, giving exactly
//!   `J dy = c · w^α e^{(1-β)w} dw`.

use std::f64::consts::E;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::analysis::RateLaw;
use crate::error::{Error, Result};
use crate::quadrature::{self, QuadOptions};

/// Kernel family with its tail parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Family {
    /// `J ~ ln^α(ln|x|) / (|x| ln^β|x|)`, β > 1.
    LogLog { alpha: f64, beta: f64 },
    /// `J ~ ln^β|x| / |x|^γ`, γ ∈ (1, 2).
    AlgLog { gamma: f64, beta: f64 },
    /// `J ~ ln^β|x| / |x|^2`, β ≥ -1.
    CritLog { beta: f64 },
    /// Quartic bump supported on `[-R, R]`.
    Compact { radius: f64 },
    /// `J ~ |x|^{-γ}`, γ > 1.
    PowerLaw { gamma: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::LogLog { .. } => "LOGLOG",
            Family::AlgLog { .. } => "ALGLOG",
            Family::CritLog { .. } => "CRITLOG",
            Family::Compact { .. } => "COMPACT",
            Family::PowerLaw { .. } => "POWERLAW",
        }
    }

    /// Checks admissible parameter ranges.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        let all_finite = match *self {
            Family::LogLog { alpha, beta } => alpha.is_finite() && beta.is_finite(),
            Family::AlgLog { gamma, beta } => gamma.is_finite() && beta.is_finite(),
            Family::CritLog { beta } => beta.is_finite(),
            Family::Compact { radius } => radius.is_finite(),
            Family::PowerLaw { gamma } => gamma.is_finite(),
        };
        if !all_finite {
            return bad(format!("{} parameters must be finite", self.name()));
        }
        match *self {
            Family::LogLog { beta, .. } if beta <= 1.0 => {
                bad(format!("LOGLOG beta = {beta} outside admissible range (1, inf)"))
            }
            Family::AlgLog { gamma, .. } if !(gamma > 1.0 && gamma < 2.0) => {
                bad(format!("ALGLOG gamma = {gamma} outside admissible range (1, 2)"))
            }
            Family::CritLog { beta } if beta < -1.0 => {
                bad(format!("CRITLOG beta = {beta} outside admissible range [-1, inf)"))
            }
            Family::Compact { radius } if radius <= 0.0 => {
                bad(format!("COMPACT R = {radius} outside admissible range (0, inf)"))
            }
            Family::PowerLaw { gamma } if gamma <= 1.0 => {
                bad(format!("POWERLAW gamma = {gamma} outside admissible range (1, inf)"))
            }
            _ => Ok(()),
        }
    }

    /// Unnormalized profile `g(r)` for `r = |x| ≥ 0`.
    fn profile(&self, r: f64) -> f64 {
        match *self {
            Family::LogLog { alpha, beta } => {
                let y = LOGLOG_SHIFT + r;
                let ly = y.ln();
                ly.ln().powf(alpha) / (y * ly.powf(beta))
            }
            Family::AlgLog { gamma, beta } => (E + r).ln().powf(beta) / (1.0 + r).powf(gamma),
            Family::CritLog { beta } => (E + r).ln().powf(beta) / ((1.0 + r) * (1.0 + r)),
            Family::Compact { radius } => {
                if r >= radius {
                    0.0
                } else {
                    let t = r / radius;
                    let w = 1.0 - t * t;
                    w * w
                }
            }
            Family::PowerLaw { gamma } => (1.0 + r).powf(-gamma),
        }
    }

    /// Exponent of the pure power law this family reduces to, when it does.
    fn pure_power(&self) -> Option<f64> {
        match *self {
            Family::PowerLaw { gamma } => Some(gamma),
            Family::AlgLog { gamma, beta: 0.0 } => Some(gamma),
            Family::CritLog { beta: 0.0 } => Some(2.0),
            _ => None,
        }
    }

    /// Nominal tail shape the family is defined against (no shifts).
    pub fn nominal_tail(&self, r: f64) -> Option<f64> {
        match *self {
            Family::LogLog { alpha, beta } => {
                let l = r.ln();
                Some(l.ln().powf(alpha) / (r * l.powf(beta)))
            }
            Family::AlgLog { gamma, beta } => Some(r.ln().powf(beta) / r.powf(gamma)),
            Family::CritLog { beta } => Some(r.ln().powf(beta) / (r * r)),
            Family::PowerLaw { gamma } => Some(r.powf(-gamma)),
            Family::Compact { .. } => None,
        }
    }
}

/// Argument shift for the log-log family: keeps `ln ln(s + |x|) ≥ 1`.
pub const LOGLOG_SHIFT: f64 = 15.154_262_241_479_262; // e^e

const TABLE_POINTS: usize = 10_000;
const TABLE_Z_MAX: f64 = 1e8;
const ENVELOPE_X_MIN: f64 = 10.0;
const ENVELOPE_X_MAX: f64 = 1e6;
const ENVELOPE_SAMPLES: usize = 400;
const ENVELOPE_SLACK: f64 = 0.05;

/// Two-sided comparability constants `lower·g ≤ J ≤ upper·g` on `|x| ≥ x_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    pub lower: f64,
    pub upper: f64,
    pub x_min: f64,
}

/// A normalized even kernel. Cloning is cheap; the tail table is shared.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    family: Family,
    norm_const: f64,
    shift: f64,
    envelope: Option<Envelope>,
    table: Arc<OnceLock<TailTable>>,
}

impl PartialEq for KernelSpec {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
    }
}

fn quad_opts() -> QuadOptions {
    QuadOptions::default().with_abs_tol(1e-300)
}

impl KernelSpec {
    /// Builds and normalizes a kernel of the given family.
    pub fn new(family: Family) -> Result<Self> {
        family.validate()?;
        let shift = match family {
            Family::LogLog { .. } => LOGLOG_SHIFT,
            Family::AlgLog { .. } | Family::CritLog { .. } => E,
            Family::PowerLaw { .. } => 1.0,
            Family::Compact { radius } => radius,
        };
        let norm_const = match family {
            Family::Compact { radius } => 15.0 / (16.0 * radius),
            _ => match family.pure_power() {
                Some(gamma) => 0.5 * (gamma - 1.0),
                None => 0.5 / half_line_profile_mass(&family, shift)?,
            },
        };
        let mut kernel = KernelSpec {
            family,
            norm_const,
            shift,
            envelope: None,
            table: Arc::new(OnceLock::new()),
        };
        kernel.envelope = kernel.measure_envelope();
        Ok(kernel)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn envelope(&self) -> Option<Envelope> {
        self.envelope
    }

    /// Kernel density at `x`.
    #[inline]
    pub fn evaluate(&self, x: f64) -> f64 {
        self.norm_const * self.family.profile(x.abs())
    }

    /// `∫_ℝ J` computed by quadrature, independent of the normalization path.
    pub fn numeric_mass(&self) -> Result<f64> {
        let half = match self.family {
            Family::Compact { radius } => quadrature::integrate(|x| self.evaluate(x), 0.0, radius, quad_opts())?,
            _ => self.norm_const * half_line_profile_mass(&self.family, self.shift)?,
        };
        Ok(2.0 * half)
    }

    /// Support radius, if finite.
    pub fn support(&self) -> Option<f64> {
        match self.family {
            Family::Compact { radius } => Some(radius),
            _ => None,
        }
    }

    fn closed_form_tail(&self, z: f64) -> Option<f64> {
        match self.family {
            Family::Compact { radius } => {
                if z >= radius {
                    return Some(0.0);
                }
                let t = z / radius;
                let t2 = t * t;
                let antideriv = t * (1.0 - 2.0 * t2 / 3.0 + t2 * t2 / 5.0);
                Some(self.norm_const * radius * (8.0 / 15.0 - antideriv))
            }
            _ => self.family.pure_power().map(|gamma| 0.5 * (1.0 + z).powf(1.0 - gamma)),
        }
    }

    /// `∫_z^∞ J(y) dy` by direct quadrature (the reference path).
    pub fn tail_mass_quad(&self, z: f64) -> Result<f64> {
        let z = z.max(0.0);
        if let Family::Compact { radius } = self.family {
            if z >= radius {
                return Ok(0.0);
            }
            return quadrature::integrate(|y| self.evaluate(y), z, radius, quad_opts());
        }
        Ok(self.norm_const * transformed_tail(&self.family, z)?)
    }

    /// `∫_z^∞ J(y) dy`, closed form where one exists, otherwise the cached
    /// log-spaced table (falling back to quadrature beyond it).
    pub fn tail_mass(&self, z: f64) -> f64 {
        let z = z.max(0.0);
        if let Some(v) = self.closed_form_tail(z) {
            return v;
        }
        if z <= TABLE_Z_MAX {
            if let Some(table) = self.tail_table() {
                return table.eval(z);
            }
        }
        self.tail_mass_quad(z).unwrap_or(0.0)
    }

    fn tail_table(&self) -> Option<&TailTable> {
        if let Some(t) = self.table.get() {
            return Some(t);
        }
        match TailTable::build(self) {
            Ok(t) => Some(self.table.get_or_init(|| t)),
            Err(_) => None,
        }
    }

    /// Forces construction of the tail table (a no-op for closed-form tails).
    pub fn warm_up(&self) -> Result<()> {
        if self.closed_form_tail(0.0).is_none() && self.table.get().is_none() {
            let t = TailTable::build(self)?;
            let _ = self.table.get_or_init(|| t);
        }
        Ok(())
    }

    /// `∫_lo^hi J` for `0 ≤ lo ≤ hi`, by quadrature over the interval.
    pub fn interval_mass(&self, lo: f64, hi: f64) -> Result<f64> {
        let mut points = vec![lo];
        if let Some(r) = self.support() {
            if r <= lo {
                return Ok(0.0);
            }
            if r < hi {
                points.push(r);
            }
        }
        points.push(hi);
        quadrature::integrate_pieces(
            |y| self.evaluate(y),
            &points,
            QuadOptions {
                rel_tol: 1e-13,
                abs_tol: 1e-300,
                max_intervals: 200,
            },
        )
    }

    /// Whether `∫_0^∞ x J(x) dx < ∞`, decided from the family.
    pub fn first_moment_finite(&self) -> bool {
        match self.family {
            Family::Compact { .. } => true,
            Family::PowerLaw { gamma } => gamma > 2.0,
            Family::AlgLog { .. } | Family::CritLog { .. } | Family::LogLog { .. } => false,
        }
    }

    /// Closed-form `∫_0^∞ x J(x) dx` for the finite-moment families.
    pub fn first_moment(&self) -> Option<f64> {
        match self.family {
            Family::Compact { radius } => Some(5.0 * radius / 32.0),
            Family::PowerLaw { gamma } if gamma > 2.0 => Some(0.5 / (gamma - 2.0)),
            _ => None,
        }
    }

    /// `I(h) = ∫_0^1 J y dy + ∫_1^h J y dy + h ∫_h^∞ J dy`.
    pub fn flux_functional(&self, h: f64) -> Result<f64> {
        if !(h > 1.0) {
            return Err(Error::Parameter(format!("flux functional needs h > 1, got {h}")));
        }
        let opts = quad_opts();
        let near = match self.support() {
            Some(r) if r < 1.0 => quadrature::integrate_pieces(|y| self.evaluate(y) * y, &[0.0, r, 1.0], opts)?,
            _ => quadrature::integrate(|y| self.evaluate(y) * y, 0.0, 1.0, opts)?,
        };
        // y = e^σ on [1, h]
        let log_h = h.ln();
        let mut points = vec![0.0];
        if let Some(r) = self.support() {
            if r > 1.0 && r < h {
                points.push(r.ln());
            }
        }
        points.push(log_h);
        let middle = quadrature::integrate_pieces(
            |s| {
                let y = s.exp();
                self.evaluate(y) * y * y
            },
            &points,
            opts,
        )?;
        let far = h * self.tail_mass_quad(h)?;
        Ok(near + middle + far)
    }

    /// Growth shape of `I(h)` for large `h`, up to constants.
    pub fn nominal_flux_shape(&self, h: f64) -> f64 {
        let l = h.ln();
        match self.family {
            Family::LogLog { alpha, beta } => h * l.ln().powf(alpha) / l.powf(beta - 1.0),
            Family::AlgLog { gamma, beta } => h.powf(2.0 - gamma) * l.powf(beta),
            Family::CritLog { beta } if beta > -1.0 => l.powf(beta + 1.0),
            Family::CritLog { .. } => l.ln(),
            Family::Compact { .. } => 1.0,
            Family::PowerLaw { gamma } if gamma < 2.0 => h.powf(2.0 - gamma),
            Family::PowerLaw { gamma: 2.0 } => l,
            Family::PowerLaw { .. } => 1.0,
        }
    }

    /// Asymptotic law the front is expected to follow under this kernel.
    pub fn predicted_rate(&self) -> RateLaw {
        match self.family {
            Family::LogLog { alpha, beta } => RateLaw::ExpPower {
                p: 1.0 / beta,
                q: alpha / beta,
            },
            Family::AlgLog { gamma, beta } => RateLaw::PowerLog {
                p: 1.0 / (gamma - 1.0),
                q: beta / (gamma - 1.0),
            },
            Family::CritLog { beta } if beta > -1.0 => RateLaw::LinearLogPow { m: beta + 1.0 },
            Family::CritLog { .. } => RateLaw::LinearLogLog,
            Family::PowerLaw { gamma } if gamma < 2.0 => RateLaw::PowerLog {
                p: 1.0 / (gamma - 1.0),
                q: 0.0,
            },
            Family::PowerLaw { gamma: 2.0 } => RateLaw::LinearLogPow { m: 1.0 },
            Family::PowerLaw { .. } | Family::Compact { .. } => RateLaw::Linear,
        }
    }

    fn measure_envelope(&self) -> Option<Envelope> {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for x in envelope_samples() {
            let g = self.family.nominal_tail(x)?;
            let ratio = self.evaluate(x) / g;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        Some(Envelope {
            lower: lo * (1.0 - ENVELOPE_SLACK),
            upper: hi * (1.0 + ENVELOPE_SLACK),
            x_min: ENVELOPE_X_MIN,
        })
    }
}

/// Log-spaced sample points used to certify the envelope.
pub fn envelope_samples() -> impl Iterator<Item = f64> {
    let (a, b) = (ENVELOPE_X_MIN.ln(), ENVELOPE_X_MAX.ln());
    (0..ENVELOPE_SAMPLES).map(move |i| (a + (b - a) * i as f64 / (ENVELOPE_SAMPLES - 1) as f64).exp())
}

/// `∫_0^∞ g(r) dr` for the unnormalized profile, split at `split`.
fn half_line_profile_mass(family: &Family, split: f64) -> Result<f64> {
    let opts = quad_opts();
    let head = quadrature::integrate(|r| family.profile(r), 0.0, split, opts)?;
    Ok(head + transformed_tail(family, split)?)
}

/// `∫_z^∞ g(r) dr` for the unnormalized profile after the tail substitution.
fn transformed_tail(family: &Family, z: f64) -> Result<f64> {
    let opts = quad_opts();
    match *family {
        Family::LogLog { alpha, beta } => {
            let w0 = (LOGLOG_SHIFT + z).ln().ln();
            quadrature::integrate_to_infinity(|w| w.powf(alpha) * ((1.0 - beta) * w).exp(), w0, opts)
        }
        Family::Compact { radius } => {
            if z >= radius {
                Ok(0.0)
            } else {
                quadrature::integrate(|r| family.profile(r), z, radius, opts)
            }
        }
        _ => {
            let s0 = z.ln_1p();
            quadrature::integrate_to_infinity(
                |s| {
                    let es = s.exp();
                    family.profile(es - 1.0) * es
                },
                s0,
                opts,
            )
        }
    }
}

/// Monotone cubic Hermite table of `ln tail` against `ln(1 + z)`.
#[derive(Debug)]
struct TailTable {
    step: f64,
    log_tail: Vec<f64>,
    slope: Vec<f64>,
}

impl TailTable {
    fn build(kernel: &KernelSpec) -> Result<Self> {
        let n = TABLE_POINTS;
        let step = TABLE_Z_MAX.ln_1p() / (n - 1) as f64;
        let x_at = |k: usize| k as f64 * step;
        let mut tail = vec![0.0; n];
        tail[n - 1] = kernel.tail_mass_quad(x_at(n - 1).exp_m1())?;
        let opts = QuadOptions {
            rel_tol: 1e-13,
            abs_tol: 1e-300,
            max_intervals: 64,
        };
        // Accumulate cell integrals from the far end; each cell is tiny and smooth.
        for k in (0..n - 1).rev() {
            let piece = quadrature::integrate(
                |s| {
                    let es = s.exp();
                    kernel.evaluate(es - 1.0) * es
                },
                x_at(k),
                x_at(k + 1),
                opts,
            )?;
            tail[k] = tail[k + 1] + piece;
        }
        let log_tail: Vec<f64> = tail.iter().map(|t| t.ln()).collect();
        let mut slope: Vec<f64> = (0..n)
            .map(|k| {
                let z = x_at(k).exp_m1();
                -kernel.evaluate(z) * (1.0 + z) / tail[k]
            })
            .collect();
        // Fritsch–Carlson limiter keeps every cell monotone.
        for k in 0..n - 1 {
            let secant = (log_tail[k + 1] - log_tail[k]) / step;
            if secant == 0.0 {
                slope[k] = 0.0;
                slope[k + 1] = 0.0;
                continue;
            }
            let a = slope[k] / secant;
            let b = slope[k + 1] / secant;
            if a < 0.0 {
                slope[k] = 0.0;
            }
            if b < 0.0 {
                slope[k + 1] = 0.0;
            }
            let r2 = a * a + b * b;
            if r2 > 9.0 {
                let tau = 3.0 / r2.sqrt();
                slope[k] = tau * a * secant;
                slope[k + 1] = tau * b * secant;
            }
        }
        Ok(TailTable { step, log_tail, slope })
    }

    fn eval(&self, z: f64) -> f64 {
        let x = z.ln_1p();
        let pos = x / self.step;
        let k = (pos.floor() as usize).min(self.log_tail.len() - 2);
        let t = pos - k as f64;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let y = h00 * self.log_tail[k]
            + h10 * self.step * self.slope[k]
            + h01 * self.log_tail[k + 1]
            + h11 * self.step * self.slope[k + 1];
        y.exp()
    }
}
