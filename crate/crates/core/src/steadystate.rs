//! Half-line steady profile by monotone iteration from the constant upper
//! solution `(u*, v*)`.
//!
//! The domain is cut at `L` and the missing mass beyond it is closed with the
//! far-field value: a node at `x_i` receives `u*` times the discrete mass of
//! `J(x_i - ·)` to the right of `L`, which is
//! `tail_mass(L - x_i + dx/2) + (dx/2) K_{N-i}` for cell-averaged weights.

use serde::Serialize;

use crate::discretization::{nonlocal_apply_direct, Convolver, Grid, KernelSamples};
use crate::error::{Error, Result};
use crate::evolution::ModelParams;
use crate::kernels::KernelSpec;

pub const MAX_ITERATIONS: usize = 100_000;
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyProfile {
    pub length: f64,
    pub dx: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub u_star: f64,
    pub v_star: f64,
    /// Sup-norm defect of the discrete steady equations.
    pub residual: f64,
    pub iterations: usize,
    /// Largest of `tail_mass(kᵢ, L/2)`; the closure is accurate when this is small.
    pub far_field_tail: f64,
}

impl SteadyProfile {
    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Non-decreasing up to `slack` (relative to the equilibrium) between neighbours.
    pub fn is_monotone(&self, slack: f64) -> bool {
        let ok = |w: &[f64], star: f64| w.windows(2).all(|p| p[1] >= p[0] - slack * star);
        ok(&self.u, self.u_star) && ok(&self.v, self.v_star)
    }

    /// `max(|U(L) - u*| / u*, |V(L) - v*| / v*)`.
    pub fn far_field_gap(&self) -> f64 {
        let n = self.u.len() - 1;
        ((self.u[n] - self.u_star).abs() / self.u_star).max((self.v[n] - self.v_star).abs() / self.v_star)
    }
}

fn closure_weights(kernel: &KernelSpec, samples: &KernelSamples, n: usize, dx: f64) -> Vec<f64> {
    let last = n - 1;
    (0..n)
        .map(|i| {
            let m = last - i;
            kernel.tail_mass((m as f64 + 0.5) * dx) + 0.5 * dx * samples.get(m)
        })
        .collect()
}

struct SteadyOperator {
    grid: Grid,
    length: f64,
    conv_u: Convolver,
    conv_v: Convolver,
    closure_u: Vec<f64>,
    closure_v: Vec<f64>,
}

impl SteadyOperator {
    fn new(p: &ModelParams, length: f64) -> Result<Self> {
        let dx = p.numerics.dx;
        let grid = Grid::covering(dx, length, 0);
        let length = grid.last_x();
        let n = grid.n;
        let mut conv_u = Convolver::new(p.kernel1.clone(), dx);
        let mut conv_v = Convolver::new(p.kernel2.clone(), dx);
        conv_u.samples_mut().ensure(n)?;
        conv_v.samples_mut().ensure(n)?;
        let closure_u = closure_weights(&p.kernel1, conv_u.samples(), n, dx);
        let closure_v = closure_weights(&p.kernel2, conv_v.samples(), n, dx);
        Ok(SteadyOperator {
            grid,
            length,
            conv_u,
            conv_v,
            closure_u,
            closure_v,
        })
    }
}

/// Solves the truncated steady system to a successive-iterate change of `tol`.
pub fn solve_steady(p: &ModelParams, length: f64, tol: f64) -> Result<SteadyProfile> {
    p.validate()?;
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::config("steady.L", format!("{length} must be positive")));
    }
    if !(tol > 0.0) {
        return Err(Error::config("steady.tol", format!("{tol} must be positive")));
    }
    let r = &p.reactions;
    let eq = r.equilibrium()?.ok_or_else(|| {
        Error::Domain(format!(
            "no positive steady profile: R0 = {} <= 1",
            r.reproduction_number()
        ))
    })?;
    let (us, vs) = (eq.u_star, eq.v_star);
    let mut op = SteadyOperator::new(p, length)?;
    let n = op.grid.n;
    let mut u = vec![us; n];
    let mut v = vec![vs; n];
    let mut cu = vec![0.0; n];
    let mut cv = vec![0.0; n];
    let (du, dv) = (p.d1 + r.a, p.d2 + r.b);
    let h = op.length;
    let mut iterations = 0;
    loop {
        if iterations >= MAX_ITERATIONS {
            return Err(Error::IterationCap(MAX_ITERATIONS));
        }
        iterations += 1;
        op.conv_u.apply_into(&u, &op.grid, h, &mut cu)?;
        op.conv_v.apply_into(&v, &op.grid, h, &mut cv)?;
        let mut change = 0.0f64;
        for i in 0..n {
            let nu = (p.d1 * (cu[i] + us * op.closure_u[i]) + r.h.value(v[i])) / du;
            let nv = (p.d2 * (cv[i] + vs * op.closure_v[i]) + r.g.value(u[i])) / dv;
            let rise = (nu - u[i]).max(nv - v[i]);
            if rise > MONOTONE_SLACK {
                return Err(Error::NonMonotone {
                    iteration: iterations,
                    node: i,
                    increase: rise,
                });
            }
            change = change.max((nu - u[i]).abs()).max((nv - v[i]).abs());
            cu[i] = nu;
            cv[i] = nv;
        }
        std::mem::swap(&mut u, &mut cu);
        std::mem::swap(&mut v, &mut cv);
        if change <= tol {
            break;
        }
    }
    let far_field_tail = p
        .kernel1
        .tail_mass(0.5 * op.length)
        .max(p.kernel2.tail_mass(0.5 * op.length));
    let mut profile = SteadyProfile {
        length: op.length,
        dx: op.grid.dx,
        u,
        v,
        u_star: us,
        v_star: vs,
        residual: 0.0,
        iterations,
        far_field_tail,
    };
    profile.residual = steady_defect(&profile, p, false)?;
    Ok(profile)
}

/// Sup-norm defect of the discrete steady equations at `profile`.
///
/// With `direct = true` the nonlocal term is summed directly rather than by FFT,
/// giving a check independent of the iteration's convolution path.
pub fn steady_defect(profile: &SteadyProfile, p: &ModelParams, direct: bool) -> Result<f64> {
    let r = &p.reactions;
    let mut op = SteadyOperator::new(p, profile.length)?;
    let n = op.grid.n;
    if n != profile.len() {
        return Err(Error::Domain(format!(
            "profile has {} nodes, grid for L = {} has {n}",
            profile.len(),
            profile.length
        )));
    }
    let h = op.length;
    let (cu, cv) = if direct {
        let mut su = op.conv_u.samples().clone();
        let mut sv = op.conv_v.samples().clone();
        (
            nonlocal_apply_direct(&mut su, &profile.u, &op.grid, h)?,
            nonlocal_apply_direct(&mut sv, &profile.v, &op.grid, h)?,
        )
    } else {
        (
            op.conv_u.apply(&profile.u, &op.grid, h)?,
            op.conv_v.apply(&profile.v, &op.grid, h)?,
        )
    };
    let mut worst = 0.0f64;
    for i in 0..n {
        let (uu, vv) = (profile.u[i], profile.v[i]);
        let ru = p.d1 * (cu[i] + profile.u_star * op.closure_u[i]) - (p.d1 + r.a) * uu + r.h.value(vv);
        let rv = p.d2 * (cv[i] + profile.v_star * op.closure_v[i]) - (p.d2 + r.b) * vv + r.g.value(uu);
        worst = worst.max(ru.abs()).max(rv.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{InitShape, InitialData, Numerics};
    use crate::kernels::Family;
    use crate::reactions::ReactionSpec;

    fn params(family: Family) -> ModelParams {
        let k = KernelSpec::new(family).unwrap();
        ModelParams {
            d1: 1.0,
            d2: 1.0,
            mu1: 1.0,
            mu2: 1.0,
            h0: 5.0,
            kernel1: k.clone(),
            kernel2: k,
            reactions: ReactionSpec::default(),
            init: InitialData {
                shape: InitShape::CosineBump,
                amp_u: 0.5,
                amp_v: 0.5,
            },
            numerics: Numerics::default(),
        }
    }

    #[test]
    fn compact_profile_is_monotone_and_closes() {
        let p = params(Family::Compact { radius: 1.0 });
        let prof = solve_steady(&p, 100.0, 1e-10).unwrap();
        // flat far field: neighbours agree to rounding
        assert!(prof.is_monotone(1e-14));
        assert!(prof.u[0] > 0.0 && prof.u[0] < prof.u_star);
        assert!(prof.far_field_gap() <= 1e-3);
        assert!(prof.residual <= 5e-10, "{}", prof.residual);
        let direct = steady_defect(&prof, &p, true).unwrap();
        assert!(direct <= 5e-10, "{direct}");
    }

    #[test]
    fn first_iterate_is_below_equilibrium() {
        let p = params(Family::PowerLaw { gamma: 1.5 });
        let prof = solve_steady(&p, 50.0, 1e-1).unwrap();
        assert!(prof.u.iter().all(|&x| x <= prof.u_star));
        assert!(prof.v.iter().all(|&x| x <= prof.v_star));
    }

    #[test]
    fn subcritical_is_rejected() {
        let mut p = params(Family::Compact { radius: 1.0 });
        p.reactions = ReactionSpec::saturating(1.0, 1.0, 0.5, 1.0, 0.5, 1.0);
        assert!(matches!(solve_steady(&p, 50.0, 1e-8), Err(Error::Domain(_))));
    }
}
