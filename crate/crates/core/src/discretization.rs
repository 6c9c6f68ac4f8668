//! Uniform grid on the growing domain `[0, h(t)]`, the discrete nonlocal
//! operator and the boundary flux.
//!
//! Kernel weights are cell averages `K_m = (1/dx) ∫_{(m-½)dx}^{(m+½)dx} J`, so the
//! full-line discrete mass `dx Σ_m K_m` equals one. Fields are integrated with
//! trapezoid weights; the last segment `[x_{n-1}, h]` interpolates linearly to
//! the Dirichlet zero at `h`. The weighted field is convolved with `K`, which
//! keeps the operator Toeplitz and lets the FFT path apply.

use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::Result;
use crate::kernels::KernelSpec;

/// Node layout `x_j = j·dx`, `j < n`, covering `[0, h]` with `x_{n-1} ≤ h < x_{n-1} + dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub dx: f64,
    pub n: usize,
    pub capacity: usize,
}

impl Grid {
    /// Smallest grid whose last node sits at or below `h`.
    pub fn covering(dx: f64, h: f64, min_capacity: usize) -> Self {
        let n = node_count(dx, h);
        Grid {
            dx,
            n,
            capacity: min_capacity.max(n),
        }
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx
    }

    pub fn last_x(&self) -> f64 {
        self.x(self.n - 1)
    }
}

fn node_count(dx: f64, h: f64) -> usize {
    let mut n = (h / dx).floor().max(0.0) as usize + 1;
    while (n as f64) * dx <= h {
        n += 1;
    }
    while n > 1 && ((n - 1) as f64) * dx > h {
        n -= 1;
    }
    n
}

/// Fields on the grid at time `t` with front `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub h: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub grid: Grid,
}

impl SimState {
    pub fn zeros(dx: f64, h: f64, capacity: usize) -> Self {
        let grid = Grid::covering(dx, h, capacity);
        let mut u = Vec::with_capacity(grid.capacity);
        u.resize(grid.n, 0.0);
        let v = u.clone();
        SimState { t: 0.0, h, u, v, grid }
    }

    /// Nodes strictly inside the domain, i.e. with `x_j < h`.
    pub fn interior_len(&self) -> usize {
        let n = self.grid.n;
        if self.grid.last_x() < self.h {
            n
        } else {
            n - 1
        }
    }

    /// Zeroes every node at or beyond the front.
    pub fn impose_dirichlet(&mut self) {
        for j in self.interior_len()..self.grid.n {
            self.u[j] = 0.0;
            self.v[j] = 0.0;
        }
    }

    pub fn max_u(&self) -> f64 {
        self.u.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_v(&self) -> f64 {
        self.v.iter().copied().fold(0.0, f64::max)
    }
}

/// Appends zero nodes until the grid covers `state.h` again.
pub fn extend_domain(mut state: SimState) -> SimState {
    grow_to_front(&mut state);
    state
}

pub(crate) fn grow_to_front(state: &mut SimState) {
    let n = node_count(state.grid.dx, state.h);
    if n <= state.grid.n {
        return;
    }
    if n > state.grid.capacity {
        let cap = (2 * state.grid.capacity).max(n);
        state.u.reserve_exact(cap - state.u.len());
        state.v.reserve_exact(cap - state.v.len());
        state.grid.capacity = cap;
    }
    state.u.resize(n, 0.0);
    state.v.resize(n, 0.0);
    state.grid.n = n;
}

/// Trapezoid weights (in units of `dx`) for integrating over `[0, h]`.
pub fn quadrature_weights(grid: &Grid, h: f64) -> Vec<f64> {
    let mut w = Vec::new();
    fill_weights(grid, h, &mut w);
    w
}

fn fill_weights(grid: &Grid, h: f64, out: &mut Vec<f64>) {
    let n = grid.n;
    out.clear();
    out.resize(n, 1.0);
    let frac = ((h - grid.last_x()) / grid.dx).clamp(0.0, 1.0);
    if n == 1 {
        out[0] = 0.5 * frac;
        return;
    }
    out[0] = 0.5;
    out[n - 1] = 0.5 + 0.5 * frac;
}

/// Cell-averaged kernel weights `K_m`, extended on demand.
#[derive(Debug, Clone)]
pub struct KernelSamples {
    kernel: KernelSpec,
    dx: f64,
    values: Vec<f64>,
}

impl KernelSamples {
    pub fn new(kernel: KernelSpec, dx: f64) -> Self {
        KernelSamples {
            kernel,
            dx,
            values: Vec::new(),
        }
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Makes `K_0 .. K_{len-1}` available.
    pub fn ensure(&mut self, len: usize) -> Result<()> {
        let dx = self.dx;
        let support_cells = self.kernel.support().map(|r| (r / dx).ceil() as usize + 1);
        while self.values.len() < len {
            let m = self.values.len();
            let k = if support_cells.is_some_and(|cells| m > cells) {
                0.0
            } else if m == 0 {
                2.0 * self.kernel.interval_mass(0.0, 0.5 * dx)? / dx
            } else {
                let lo = (m as f64 - 0.5) * dx;
                self.kernel.interval_mass(lo, lo + dx)? / dx
            };
            self.values.push(k);
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, m: usize) -> f64 {
        self.values[m]
    }
}

/// FFT-backed evaluation of `∫_0^h J(x_i - y) w(y) dy` at every node.
pub struct Convolver {
    samples: KernelSamples,
    planner: RealFftPlanner<f64>,
    fft_len: usize,
    forward: Option<Arc<dyn RealToComplex<f64>>>,
    inverse: Option<Arc<dyn ComplexToReal<f64>>>,
    kernel_spectrum: Vec<Complex<f64>>,
    time_buf: Vec<f64>,
    freq_buf: Vec<Complex<f64>>,
    scratch_fwd: Vec<Complex<f64>>,
    scratch_inv: Vec<Complex<f64>>,
    weights: Vec<f64>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver")
            .field("dx", &self.samples.dx)
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

impl Convolver {
    pub fn new(kernel: KernelSpec, dx: f64) -> Self {
        Convolver {
            samples: KernelSamples::new(kernel, dx),
            planner: RealFftPlanner::new(),
            fft_len: 0,
            forward: None,
            inverse: None,
            kernel_spectrum: Vec::new(),
            time_buf: Vec::new(),
            freq_buf: Vec::new(),
            scratch_fwd: Vec::new(),
            scratch_inv: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn samples(&self) -> &KernelSamples {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut KernelSamples {
        &mut self.samples
    }

    /// Re-plans when `n` nodes no longer fit without wraparound.
    fn prepare(&mut self, n: usize) -> Result<()> {
        if n <= self.fft_len / 2 {
            return Ok(());
        }
        let len = (2 * n).next_power_of_two().max(16);
        let half = len / 2;
        self.samples.ensure(half + 1)?;
        let forward = self.planner.plan_fft_forward(len);
        let inverse = self.planner.plan_fft_inverse(len);
        let mut cyclic = vec![0.0; len];
        cyclic[0] = self.samples.get(0);
        for m in 1..half {
            let k = self.samples.get(m);
            cyclic[m] = k;
            cyclic[len - m] = k;
        }
        cyclic[half] = self.samples.get(half);
        let mut spectrum = forward.make_output_vec();
        let mut scratch = forward.make_scratch_vec();
        forward
            .process_with_scratch(&mut cyclic, &mut spectrum, &mut scratch)
            .expect("buffer sizes come from the plan");
        // An even sequence has a real spectrum.
        for c in spectrum.iter_mut() {
            c.im = 0.0;
        }
        self.time_buf = forward.make_input_vec();
        self.freq_buf = forward.make_output_vec();
        self.scratch_fwd = forward.make_scratch_vec();
        self.scratch_inv = inverse.make_scratch_vec();
        self.kernel_spectrum = spectrum;
        self.forward = Some(forward);
        self.inverse = Some(inverse);
        self.fft_len = len;
        Ok(())
    }

    /// Writes `dx Σ_j K_{|i-j|} ω_j w_j` into `out` for `i < n`.
    pub fn apply_into(&mut self, w: &[f64], grid: &Grid, h: f64, out: &mut [f64]) -> Result<()> {
        let n = w.len();
        debug_assert_eq!(n, grid.n);
        self.prepare(n)?;
        let mut weights = std::mem::take(&mut self.weights);
        fill_weights(grid, h, &mut weights);
        for (slot, (&wj, &om)) in self.time_buf.iter_mut().zip(w.iter().zip(&weights)) {
            *slot = wj * om;
        }
        self.time_buf[n..].fill(0.0);
        self.weights = weights;
        let forward = self.forward.as_ref().expect("planned");
        let inverse = self.inverse.as_ref().expect("planned");
        forward
            .process_with_scratch(&mut self.time_buf, &mut self.freq_buf, &mut self.scratch_fwd)
            .expect("buffer sizes come from the plan");
        for (c, k) in self.freq_buf.iter_mut().zip(&self.kernel_spectrum) {
            *c *= k.re;
        }
        let last = self.freq_buf.len() - 1;
        self.freq_buf[0].im = 0.0;
        self.freq_buf[last].im = 0.0;
        inverse
            .process_with_scratch(&mut self.freq_buf, &mut self.time_buf, &mut self.scratch_inv)
            .expect("buffer sizes come from the plan");
        let scale = grid.dx / self.fft_len as f64;
        for (o, &t) in out.iter_mut().zip(&self.time_buf[..n]) {
            *o = t * scale;
        }
        Ok(())
    }

    pub fn apply(&mut self, w: &[f64], grid: &Grid, h: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; w.len()];
        self.apply_into(w, grid, h, &mut out)?;
        Ok(out)
    }
}

/// `∫_0^h J(x_i - y) w(y) dy` at every node via FFT.
pub fn nonlocal_apply(kernel: &KernelSpec, w: &[f64], grid: &Grid, h: f64) -> Result<Vec<f64>> {
    Convolver::new(kernel.clone(), grid.dx).apply(w, grid, h)
}

/// Direct `O(n²)` evaluation of the same sum; the reference for the FFT path.
pub fn nonlocal_apply_direct(samples: &mut KernelSamples, w: &[f64], grid: &Grid, h: f64) -> Result<Vec<f64>> {
    let n = w.len();
    samples.ensure(n)?;
    let k = samples.values();
    let weights = quadrature_weights(grid, h);
    let weighted: Vec<f64> = w.iter().zip(&weights).map(|(a, b)| a * b).collect();
    Ok((0..n)
        .map(|i| {
            let s: f64 = weighted.iter().enumerate().map(|(j, &wj)| k[i.abs_diff(j)] * wj).sum();
            grid.dx * s
        })
        .collect())
}

/// Front speed `∫_0^h ∫_h^∞ [μ₁ J₁(x-y) u(x) + μ₂ J₂(x-y) v(x)] dy dx`, with the inner
/// integral collapsed to `tail_mass(h - x)`.
pub fn boundary_flux(state: &SimState, k1: &KernelSpec, k2: &KernelSpec, mu1: f64, mu2: f64) -> f64 {
    let grid = &state.grid;
    let weights = quadrature_weights(grid, state.h);
    let mut acc = 0.0;
    for (j, &om) in weights.iter().enumerate() {
        let (u, v) = (state.u[j], state.v[j]);
        if u == 0.0 && v == 0.0 {
            continue;
        }
        let z = state.h - grid.x(j);
        let mut term = 0.0;
        if u != 0.0 {
            term += mu1 * u * k1.tail_mass(z);
        }
        if v != 0.0 {
            term += mu2 * v * if k1 == k2 { k1.tail_mass(z) } else { k2.tail_mass(z) };
        }
        acc += om * term;
    }
    grid.dx * acc
}
