//! Reaction terms `H(v)`, `G(u)` with decay rates `a`, `b`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Saturating response `f(z) = gain · z / (1 + saturation · z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Saturating {
    pub gain: f64,
    pub saturation: f64,
}

impl Saturating {
    pub fn new(gain: f64, saturation: f64) -> Self {
        Self { gain, saturation }
    }

    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        self.gain * z / (1.0 + self.saturation * z)
    }

    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        let d = 1.0 + self.saturation * z;
        self.gain / (d * d)
    }

    /// `sup f`; infinite when unsaturated.
    pub fn supremum(&self) -> f64 {
        if self.saturation > 0.0 {
            self.gain / self.saturation
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactionSpec {
    pub a: f64,
    pub b: f64,
    pub h: Saturating,
    pub g: Saturating,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub u_star: f64,
    pub v_star: f64,
    pub residual: f64,
}

/// Outcome of each hypothesis check on `(H, G)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub vanish_at_zero: bool,
    pub h_increasing: bool,
    pub g_increasing: bool,
    pub h_strictly_concave: bool,
    pub g_strictly_concave: bool,
    /// A witness `ẑ` with `G(H(ẑ)/a) < b ẑ`, if one was found.
    pub z_hat: Option<f64>,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.vanish_at_zero
            && self.h_increasing
            && self.g_increasing
            && self.h_strictly_concave
            && self.g_strictly_concave
            && self.z_hat.is_some()
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.vanish_at_zero {
            out.push("H(0) = G(0) = 0");
        }
        if !self.h_increasing {
            out.push("H' > 0");
        }
        if !self.g_increasing {
            out.push("G' > 0");
        }
        if !self.h_strictly_concave {
            out.push("H'' < 0");
        }
        if !self.g_strictly_concave {
            out.push("G'' < 0");
        }
        if self.z_hat.is_none() {
            out.push("G(H(z)/a) < b z for some z > 0");
        }
        out
    }
}

const SAMPLE_POINTS: usize = 10_000;
const SAMPLE_MAX: f64 = 100.0;
const ZHAT_SCAN_MAX: f64 = 1e6;
const BISECTION_TOL: f64 = 1e-14;
const BISECTION_MAX_ITER: usize = 200;

impl ReactionSpec {
    pub fn saturating(a: f64, b: f64, p: f64, q: f64, r: f64, s: f64) -> Self {
        Self {
            a,
            b,
            h: Saturating::new(p, q),
            g: Saturating::new(r, s),
        }
    }

    /// Rejects non-positive rates and gains; concavity is left to [`Self::validate_h`].
    pub fn check_rates(&self) -> Result<()> {
        let named = [("a", self.a), ("b", self.b), ("p", self.h.gain), ("r", self.g.gain)];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!("reaction.{name} = {v} must be positive")));
            }
        }
        for (name, v) in [("q", self.h.saturation), ("s", self.g.saturation)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parameter(format!("reaction.{name} = {v} must be non-negative")));
            }
        }
        Ok(())
    }

    /// `R₀ = H'(0) G'(0) / (a b)`.
    pub fn reproduction_number(&self) -> f64 {
        self.h.derivative(0.0) * self.g.derivative(0.0) / (self.a * self.b)
    }

    /// Largest value `u` can be pushed to by the reaction alone.
    pub fn u_ceiling(&self) -> f64 {
        self.h.supremum() / self.a
    }

    pub fn v_ceiling(&self) -> f64 {
        self.g.supremum() / self.b
    }

    /// `F(u) = H(G(u)/b)/a - u`, whose positive root is `u*`.
    fn fixed_point_defect(&self, u: f64) -> f64 {
        self.h.value(self.g.value(u) / self.b) / self.a - u
    }

    /// Positive constant equilibrium, or `None` when `R₀ ≤ 1`.
    pub fn equilibrium(&self) -> Result<Option<EquilibriumResult>> {
        if self.reproduction_number() <= 1.0 {
            return Ok(None);
        }
        if !(self.g.saturation > 0.0) {
            return Err(Error::Bracket("G must be bounded (s > 0) to bracket u*".into()));
        }
        let mut hi = self.h.value(self.g.gain / (self.b * self.g.saturation)) / self.a + 1.0;
        if self.fixed_point_defect(hi) >= 0.0 {
            return Err(Error::Bracket(format!("F(u_hi) >= 0 at u_hi = {hi}")));
        }
        // F'(0) = R₀ - 1 > 0, so F > 0 just right of zero; walk down to find it.
        let mut lo = hi;
        let mut found = false;
        for _ in 0..BISECTION_MAX_ITER * 4 {
            lo *= 0.5;
            if self.fixed_point_defect(lo) > 0.0 {
                found = true;
                break;
            }
        }
        if !found {
            return Err(Error::Bracket("no point with F(u) > 0 found".into()));
        }
        for _ in 0..BISECTION_MAX_ITER {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= BISECTION_TOL * mid.max(1.0) {
                break;
            }
            if self.fixed_point_defect(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let u_star = 0.5 * (lo + hi);
        let v_star = self.g.value(u_star) / self.b;
        let residual = (self.a * u_star - self.h.value(v_star))
            .abs()
            .max((self.b * v_star - self.g.value(u_star)).abs());
        Ok(Some(EquilibriumResult {
            u_star,
            v_star,
            residual,
        }))
    }

    /// Samples every clause of the structural hypothesis on `(H, G)`.
    pub fn validate_h(&self) -> HypothesisReport {
        let dz = SAMPLE_MAX / SAMPLE_POINTS as f64;
        let grid: Vec<f64> = (0..=SAMPLE_POINTS).map(|i| i as f64 * dz).collect();
        let increasing = |f: &Saturating| grid[1..].iter().all(|&z| f.derivative(z) > 0.0) && f.derivative(0.0) > 0.0;
        let concave = |f: &Saturating| {
            grid.windows(3)
                .all(|w| f.value(w[2]) - 2.0 * f.value(w[1]) + f.value(w[0]) < 0.0)
        };
        let z_hat = (0..=600)
            .map(|i| 10f64.powf(-6.0 + 12.0 * i as f64 / 600.0))
            .take_while(|&z| z <= ZHAT_SCAN_MAX * (1.0 + 1e-12))
            .find(|&z| self.g.value(self.h.value(z) / self.a) < self.b * z);
        HypothesisReport {
            vanish_at_zero: self.h.value(0.0) == 0.0 && self.g.value(0.0) == 0.0,
            h_increasing: increasing(&self.h),
            g_increasing: increasing(&self.g),
            h_strictly_concave: concave(&self.h),
            g_strictly_concave: concave(&self.g),
            z_hat,
        }
    }
}

impl Default for ReactionSpec {
    fn default() -> Self {
        Self::saturating(1.0, 1.0, 2.0, 1.0, 2.0, 1.0)
    }
}
