//! Property harnesses: the ramp-profile inequality for truncated kernels and
//! paired-run comparison of ordered initial data.

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{step_plan, InitShape, InitialData, ModelParams, Numerics, Simulation};
use crate::kernels::{Family, KernelSpec};
use crate::quadrature::{self, QuadOptions};
use crate::reactions::ReactionSpec;

const MARGIN_TOL: f64 = -1e-10;
const ORDER_TOL: f64 = 1e-10;

/// Geometry for the ramp inequality `∫_l^{k₂} J(x-y) ξ(y) dy ≥ (1-ε) ξ(x)` on `[k₀, k₂]`.
#[derive(Debug, Clone)]
pub struct Prop21Case {
    pub kernel: KernelSpec,
    pub l: f64,
    pub rho: f64,
    pub eps: f64,
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    /// Half-width holding at least `1 - ε/2` of the kernel mass.
    pub l0: f64,
}

/// Smallest `l0` with `∫_{-l0}^{l0} J ≥ 1 - ε/2`, by bisection on the tail mass.
pub fn mass_half_width(kernel: &KernelSpec, eps: f64) -> f64 {
    let target = 0.25 * eps;
    let mut hi = 1.0;
    while kernel.tail_mass(hi) > target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 * hi {
            break;
        }
        if kernel.tail_mass(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// `k₀ = 2^{ρ+1} ρ l₀ / ε`.
pub fn proof_k0(l0: f64, rho: f64, eps: f64) -> f64 {
    2f64.powf(rho + 1.0) * rho * l0 / eps
}

impl Prop21Case {
    pub fn new(kernel: KernelSpec, l: f64, rho: f64, eps: f64, k0: f64, k1: f64, k2: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Parameter(format!("eps = {eps} outside (0, 1)")));
        }
        let l0 = mass_half_width(&kernel, eps);
        let case = Prop21Case {
            kernel,
            l,
            rho,
            eps,
            k0,
            k1,
            k2,
            l0,
        };
        case.validate()?;
        Ok(case)
    }

    /// The construction used in the sweep: `k₀` from the formula, `k₁ = 1.5 k₀`,
    /// `k₂ = 5 k₀ + k₁`, and `l = l₀`.
    pub fn standard(kernel: KernelSpec, rho: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Parameter(format!("eps = {eps} outside (0, 1)")));
        }
        let l0 = mass_half_width(&kernel, eps);
        let k0 = proof_k0(l0, rho, eps);
        let k1 = 1.5 * k0;
        Prop21Case::new(kernel, l0.max(1.0), rho, eps, k0, k1, 5.0 * k0 + k1)
    }

    /// Replaces the computed half-width (and re-checks the geometry).
    pub fn with_l0(mut self, l0: f64) -> Result<Self> {
        self.l0 = l0;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("eps = {} outside (0, 1)", self.eps));
        }
        if !(self.rho >= 1.0) {
            return bad(format!("rho = {} must be >= 1", self.rho));
        }
        if !(self.k2 > self.k1 && self.k1 > self.l) {
            return bad(format!("need k2 > k1 > l, got {} {} {}", self.k2, self.k1, self.l));
        }
        if !(self.k1 > self.k0) {
            return bad(format!("need k1 > k0, got {} <= {}", self.k1, self.k0));
        }
        if !(self.k2 - self.k1 > 2.0 * self.k0) {
            return bad(format!(
                "need k2 - k1 > 2 k0, got {} <= {}",
                self.k2 - self.k1,
                2.0 * self.k0
            ));
        }
        Ok(())
    }
}

/// `ξ(x) = min{1, ((k₂ - x)/k₁)^ρ}`, extended by zero for `x ≥ k₂`.
pub fn ramp_profile(case: &Prop21Case, x: f64) -> f64 {
    if x >= case.k2 {
        return 0.0;
    }
    ((case.k2 - x) / case.k1).powf(case.rho).min(1.0)
}

/// `∫_l^{k₂} J(x - y) ξ(y) dy`, integrated in `s = ln(1 + |y - x|)` on each side of `x`.
pub fn ramp_integral(case: &Prop21Case, x: f64) -> Result<f64> {
    let opts = QuadOptions {
        rel_tol: 1e-12,
        abs_tol: 1e-15,
        max_intervals: 4000,
    };
    let kink = case.k2 - case.k1;
    let support = case.kernel.support();
    let side = |reach: f64, sign: f64| -> Result<f64> {
        if reach <= 0.0 {
            return Ok(0.0);
        }
        let mut pts = vec![0.0, reach.ln_1p()];
        let d = sign * (kink - x);
        if d > 0.0 && d < reach {
            pts.push(d.ln_1p());
        }
        if let Some(r) = support {
            if r < reach {
                pts.push(r.ln_1p());
            }
        }
        pts.sort_by(f64::total_cmp);
        quadrature::integrate_pieces(
            |s| {
                let off = s.exp_m1();
                case.kernel.evaluate(off) * ramp_profile(case, x + sign * off) * (off + 1.0)
            },
            &pts,
            opts,
        )
    };
    let right = side(case.k2 - x.max(case.l), 1.0)?;
    let left = if x > case.l { side(x - case.l, -1.0)? } else { 0.0 };
    Ok(left + right)
}

/// Evaluation points on `[k₀, k₂]`: uniform plus clusters at the case boundaries.
pub fn prop21_samples(case: &Prop21Case, n_samples: usize) -> Vec<f64> {
    let (a, b) = (case.k0, case.k2);
    let mut xs: Vec<f64> = (0..n_samples.max(2))
        .map(|i| a + (b - a) * i as f64 / (n_samples.max(2) - 1) as f64)
        .collect();
    let kink = case.k2 - case.k1;
    for centre in [kink - case.l0, kink, kink + case.l0, case.k2 - case.l0, case.k2] {
        for off in [0.0, 1e-3, 1e-2, 0.1, 0.25, 0.5, 1.0] {
            for sgn in [-1.0, 1.0] {
                xs.push(centre + sgn * off * case.l0);
            }
        }
    }
    xs.retain(|&x| x >= a && x <= b);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prop21Outcome {
    pub pass: bool,
    pub min_margin: f64,
    pub argmin: f64,
    pub samples: usize,
}

/// Minimum of `LHS - (1-ε) ξ(x)` over the sample points.
pub fn check_prop21(case: &Prop21Case, n_samples: usize) -> Result<Prop21Outcome> {
    case.validate()?;
    let xs = prop21_samples(case, n_samples);
    let mut min_margin = f64::INFINITY;
    let mut argmin = case.k0;
    for &x in &xs {
        let margin = ramp_integral(case, x)? - (1.0 - case.eps) * ramp_profile(case, x);
        if margin < min_margin {
            min_margin = margin;
            argmin = x;
        }
    }
    Ok(Prop21Outcome {
        pass: min_margin >= MARGIN_TOL,
        min_margin,
        argmin,
        samples: xs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderViolation {
    pub t: f64,
    pub node: Option<usize>,
    pub field: &'static str,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub holds: bool,
    pub steps: usize,
    /// Largest `lo - hi` seen over all compared quantities.
    pub max_excess: f64,
    pub first_violation: Option<OrderViolation>,
    pub final_h: (f64, f64),
}

impl ComparisonReport {
    pub fn into_result(self) -> Result<Self> {
        match self.first_violation {
            Some(v) => Err(Error::Property(format!(
                "ordering of {} violated by {:e} at t = {}, node {:?}",
                v.field, v.excess, v.t, v.node
            ))),
            None => Ok(self),
        }
    }
}

fn same_model(a: &ModelParams, b: &ModelParams) -> bool {
    a.d1 == b.d1
        && a.d2 == b.d2
        && a.mu1 == b.mu1
        && a.mu2 == b.mu2
        && a.h0 == b.h0
        && a.kernel1 == b.kernel1
        && a.kernel2 == b.kernel2
        && a.reactions == b.reactions
        && a.numerics == b.numerics
        && a.init.shape == b.init.shape
}

/// Runs both models in lockstep and checks `u_lo ≤ u_hi`, `v_lo ≤ v_hi`,
/// `h_lo ≤ h_hi` after every step.
pub fn comparison_harness(p_lo: &ModelParams, p_hi: &ModelParams, t_end: f64) -> Result<ComparisonReport> {
    if !same_model(p_lo, p_hi) {
        return Err(Error::Parameter(
            "comparison runs must differ only in initial amplitudes".into(),
        ));
    }
    if p_lo.init.amp_u > p_hi.init.amp_u || p_lo.init.amp_v > p_hi.init.amp_v {
        return Err(Error::Parameter(
            "lower run must have pointwise smaller initial data".into(),
        ));
    }
    let (steps, dt) = step_plan(p_hi, t_end)?;
    let mut lo = Simulation::new(p_lo)?;
    let mut hi = Simulation::new(p_hi)?;
    let mut max_excess = f64::NEG_INFINITY;
    let mut first = None;
    let mut inspect = |lo: &Simulation, hi: &Simulation, t: f64| {
        let (a, b) = (lo.state(), hi.state());
        let mut note = |excess: f64, node: Option<usize>, field: &'static str| {
            max_excess = max_excess.max(excess);
            if excess > ORDER_TOL && first.is_none() {
                first = Some(OrderViolation { t, node, field, excess });
            }
        };
        note(a.h - b.h, None, "h");
        for j in 0..a.grid.n {
            let (uh, vh) = if j < b.grid.n { (b.u[j], b.v[j]) } else { (0.0, 0.0) };
            note(a.u[j] - uh, Some(j), "u");
            note(a.v[j] - vh, Some(j), "v");
        }
    };
    inspect(&lo, &hi, 0.0);
    for k in 1..=steps {
        lo.step(dt)?;
        hi.step(dt)?;
        inspect(&lo, &hi, k as f64 * dt);
    }
    Ok(ComparisonReport {
        holds: first.is_none(),
        steps,
        max_excess,
        first_violation: first,
        final_h: (lo.state().h, hi.state().h),
    })
}

/// A random supercritical model with two ordered sets of initial amplitudes.
pub fn random_ordered_pair(seed: u64) -> Result<(ModelParams, ModelParams)> {
    let mut rng = StdRng::seed_from_u64(seed);
    let reactions = loop {
        let r = ReactionSpec::saturating(
            rng.random_range(0.5..1.5),
            rng.random_range(0.5..1.5),
            rng.random_range(0.5..3.0),
            rng.random_range(0.5..2.0),
            rng.random_range(0.5..3.0),
            rng.random_range(0.5..2.0),
        );
        if r.reproduction_number() > 1.2 {
            break r;
        }
    };
    let family = match rng.random_range(0..3) {
        0 => Family::Compact {
            radius: rng.random_range(1.0..3.0),
        },
        1 => Family::PowerLaw {
            gamma: rng.random_range(1.3..1.9),
        },
        _ => Family::CritLog {
            beta: rng.random_range(-1.0..1.0),
        },
    };
    let kernel = KernelSpec::new(family)?;
    let eq = reactions.equilibrium()?.expect("supercritical");
    let (lo_u, hi_u) = ordered(&mut rng, eq.u_star);
    let (lo_v, hi_v) = ordered(&mut rng, eq.v_star);
    let base = ModelParams {
        d1: rng.random_range(0.5..1.5),
        d2: rng.random_range(0.5..1.5),
        mu1: rng.random_range(0.2..1.5),
        mu2: rng.random_range(0.2..1.5),
        h0: rng.random_range(2.0..6.0),
        kernel1: kernel.clone(),
        kernel2: kernel,
        reactions,
        init: InitialData {
            shape: if rng.random_range(0..2) == 0 {
                InitShape::CosineBump
            } else {
                InitShape::ConstantPlateau
            },
            amp_u: lo_u,
            amp_v: lo_v,
        },
        numerics: Numerics::default(),
    };
    let mut hi = base.clone();
    hi.init.amp_u = hi_u;
    hi.init.amp_v = hi_v;
    Ok((base, hi))
}

fn ordered(rng: &mut StdRng, scale: f64) -> (f64, f64) {
    let a = rng.random_range(0.0..1.5) * scale;
    let b = rng.random_range(0.0..1.5) * scale;
    (a.min(b), a.max(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn compact_case(eps: f64) -> Result<Prop21Case> {
        let k = KernelSpec::new(Family::Compact { radius: 1.0 }).unwrap();
        Prop21Case::new(k, 1.0, 1.0, eps, 40.0, 50.0, 200.0)
    }

    #[test]
    fn ramp_values() {
        let case = compact_case(0.1).unwrap();
        assert_eq!(ramp_profile(&case, 100.0), 1.0);
        assert_eq!(ramp_profile(&case, 150.0), 1.0);
        assert_eq!(ramp_profile(&case, 200.0), 0.0);
        assert_eq!(ramp_profile(&case, 250.0), 0.0);
        assert!((ramp_profile(&case, 175.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn proof_constant() {
        assert_eq!(proof_k0(1.0, 1.0, 0.1), 40.0);
    }

    #[test]
    fn compact_case_passes() {
        let case = compact_case(0.1).unwrap().with_l0(1.0).unwrap();
        let out = check_prop21(&case, 200).unwrap();
        assert!(out.pass && out.min_margin >= 0.0, "{out:?}");
    }

    #[test]
    fn eps_must_be_in_unit_interval() {
        assert!(compact_case(0.0).is_err());
        assert!(compact_case(1.0).is_err());
    }

    #[test]
    fn flat_interior_integrates_to_kernel_mass() {
        // ξ ≡ 1 on a span much wider than the kernel: LHS ≈ ∫J = 1.
        let k = KernelSpec::new(Family::Compact { radius: 1.0 }).unwrap();
        let case = Prop21Case::new(k, 1.0, 1.0, 0.1, 40.0, 50.0, 10_000.0).unwrap();
        let lhs = ramp_integral(&case, 500.0).unwrap();
        assert!((lhs - 1.0).abs() < 1e-10);
    }

    #[test]
    fn geometry_is_checked() {
        let k = KernelSpec::new(Family::Compact { radius: 1.0 }).unwrap();
        assert!(Prop21Case::new(k.clone(), 1.0, 1.0, 0.1, 40.0, 30.0, 200.0).is_err());
        assert!(Prop21Case::new(k.clone(), 1.0, 1.0, 0.1, 40.0, 50.0, 120.0).is_err());
        assert!(Prop21Case::new(k, 1.0, 0.5, 0.1, 40.0, 50.0, 200.0).is_err());
    }

    #[test]
    fn half_width_captures_mass() {
        let k = KernelSpec::new(Family::PowerLaw { gamma: 1.5 }).unwrap();
        let l0 = mass_half_width(&k, 0.1);
        // 2 tail(l0) = ε/2  ⇒  (1 + l0)^{-1/2} = ε/2
        assert!((l0 - (1.0 / 0.05f64.powi(2) - 1.0)).abs() < 1e-6 * l0);
    }

    #[test]
    fn random_pairs_are_ordered() {
        for seed in 0..5 {
            let (lo, hi) = random_ordered_pair(seed).unwrap();
            assert!(lo.init.amp_u <= hi.init.amp_u && lo.init.amp_v <= hi.init.amp_v);
            assert!(lo.reactions.reproduction_number() > 1.0);
        }
    }
}
