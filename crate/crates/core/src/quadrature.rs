//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Intervals live in a max-heap keyed on their error estimate; the worst one
//! is bisected until the summed estimate meets the tolerance. Semi-infinite
//! ranges are mapped onto `[0, 1)` with `x = a + t / (1 - t)`.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// One 15-point Kronrod pass with the QUADPACK error heuristic.
fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut f1 = [0.0; 7];
    let mut f2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let a = f(center - dx);
        let b = f(center + dx);
        f1[j] = a;
        f2[j] = b;
        res_k += WGK[j] * (a + b);
        res_abs += WGK[j] * (a.abs() + b.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (a + b);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((f1[j] - mean).abs() + (f2[j] - mean).abs());
    }
    let scale = half.abs();
    let value = res_k * half;
    res_abs *= scale;
    res_asc *= scale;
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment { lo, hi, value, err }
}

/// Integrate `f` over `[lo, hi]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, opts: QuadOptions) -> Result<f64> {
    integrate_pieces(f, &[lo, hi], opts)
}

/// Integrate over consecutive pieces `points[0]..points[1]..` with global adaptivity.
///
/// Breakpoints are where the integrand has kinks; the heap never bisects
/// across them.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, points: &[f64], opts: QuadOptions) -> Result<f64> {
    if points.len() < 2 {
        return Ok(0.0);
    }
    // the per-segment error estimate never drops below 50ε of the segment, so
    // a tighter relative target could never be met
    let rel_tol = opts.rel_tol.max(100.0 * f64::EPSILON);
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            let s = gk15(&f, w[0], w[1]);
            total += s.value;
            total_err += s.err;
            heap.push(s);
        }
    }
    let lo = points[0];
    let hi = points[points.len() - 1];
    let mut count = heap.len();
    // Segments too narrow to split are parked here; their error still counts.
    let mut frozen_err = 0.0;
    loop {
        let tol = opts.abs_tol.max(rel_tol * total.abs());
        if total_err <= tol || !total.is_finite() {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(mid > worst.lo && mid < worst.hi) || (worst.hi - worst.lo) < 1e-15 * (1.0 + mid.abs()) {
            frozen_err += worst.err;
            if heap.is_empty() {
                break;
            }
            continue;
        }
        if count >= opts.max_intervals {
            return Err(Error::Quadrature {
                lo,
                hi,
                err: total_err,
                intervals: count,
            });
        }
        let left = gk15(&f, worst.lo, mid);
        let right = gk15(&f, mid, worst.hi);
        total += left.value + right.value - worst.value;
        total_err += left.err + right.err - worst.err;
        heap.push(left);
        heap.push(right);
        count += 1;
        if heap.is_empty() {
            break;
        }
    }
    if !total.is_finite() {
        return Err(Error::Quadrature {
            lo,
            hi,
            err: f64::INFINITY,
            intervals: count,
        });
    }
    let tol = opts.abs_tol.max(rel_tol * total.abs());
    // Parked segments carry rounding-level error; tolerate them up to a few tolerances.
    if total_err > tol && frozen_err < 0.5 * total_err {
        return Err(Error::Quadrature {
            lo,
            hi,
            err: total_err,
            intervals: count,
        });
    }
    Ok(total)
}

/// Integrate `f` over `[lo, ∞)`.
///
/// The map turns an algebraic tail `x^{-1-δ}` into an endpoint singularity, so
/// slowly decaying integrands should be brought to exponential decay first
/// (e.g. `x = e^s`).
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, lo: f64, opts: QuadOptions) -> Result<f64> {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - t;
        let x = lo + t / s;
        let v = f(x) / (s * s);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, opts)
}
