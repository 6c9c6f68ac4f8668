//! Explicit time marching of the coupled nonlocal system and its free boundary.
//!
//! One forward-Euler step updates `(u, v)` on the nodes inside `[0, h)` and then
//! moves the front by `dt · flux`, the flux being evaluated on the pre-step
//! fields. With `dt` below [`stable_dt`] the update is a monotone map, which is
//! what makes the discrete comparison and positivity properties hold.

use std::f64::consts::PI;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::discretization::{boundary_flux, grow_to_front, Convolver, SimState};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::reactions::ReactionSpec;

const NEGATIVITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InitShape {
    CosineBump,
    ConstantPlateau,
}

/// Initial data, positive on `[0, h0)` and zero at `h0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub shape: InitShape,
    pub amp_u: f64,
    pub amp_v: f64,
}

impl InitialData {
    /// Profile value at `x` for unit amplitude.
    pub fn profile(&self, x: f64, h0: f64) -> f64 {
        if x >= h0 || x < 0.0 {
            return 0.0;
        }
        match self.shape {
            InitShape::CosineBump => (0.5 * PI * x / h0).cos(),
            InitShape::ConstantPlateau => {
                // linear shoulder over the last tenth keeps the data continuous
                let ramp = 0.1 * h0;
                ((h0 - x) / ramp).min(1.0)
            }
        }
    }

    pub fn realize(&self, state: &mut SimState, h0: f64) {
        for j in 0..state.grid.n {
            let p = self.profile(state.grid.x(j), h0);
            state.u[j] = self.amp_u * p;
            state.v[j] = self.amp_v * p;
        }
        state.impose_dirichlet();
    }
}

/// Discretization controls shared by every run of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    pub dx: f64,
    pub cfl: f64,
    pub initial_capacity: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            dx: 0.25,
            cfl: 0.5,
            initial_capacity: 1024,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelParams {
    pub d1: f64,
    pub d2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub h0: f64,
    pub kernel1: KernelSpec,
    pub kernel2: KernelSpec,
    pub reactions: ReactionSpec,
    pub init: InitialData,
    pub numerics: Numerics,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("model.d1", self.d1),
            ("model.d2", self.d2),
            ("model.mu1", self.mu1),
            ("model.mu2", self.mu2),
            ("model.h0", self.h0),
            ("grid.dx", self.numerics.dx),
            ("run.cfl", self.numerics.cfl),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, format!("{v} must be a positive finite number")));
            }
        }
        if self.numerics.cfl > 1.0 {
            return Err(Error::config(
                "run.cfl",
                format!("{} outside admissible range (0, 1]", self.numerics.cfl),
            ));
        }
        for (name, v) in [("init.amp_u", self.init.amp_u), ("init.amp_v", self.init.amp_v)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(name, format!("{v} must be non-negative")));
            }
        }
        self.reactions.check_rates()
    }

    /// A-priori bound `max(‖u₀‖∞, sup H / a)` on `u`.
    pub fn u_bound(&self) -> f64 {
        (self.init.amp_u).max(self.reactions.u_ceiling())
    }

    pub fn v_bound(&self) -> f64 {
        (self.init.amp_v).max(self.reactions.v_ceiling())
    }

    pub fn initial_state(&self) -> SimState {
        let mut st = SimState::zeros(self.numerics.dx, self.h0, self.numerics.initial_capacity);
        self.init.realize(&mut st, self.h0);
        st
    }
}

/// `dt = cfl / (2(d1 + d2) + a + b + H'(0) + G'(0))`.
pub fn stable_dt(p: &ModelParams) -> Result<f64> {
    let cfl = p.numerics.cfl;
    if !(cfl > 0.0 && cfl.is_finite()) {
        return Err(Error::config("run.cfl", format!("{cfl} must be positive")));
    }
    let r = &p.reactions;
    let rate = 2.0 * (p.d1 + p.d2) + r.a + r.b + r.h.derivative(0.0) + r.g.derivative(0.0);
    Ok(cfl / rate)
}

/// Field record at an output time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub h: f64,
    pub dx: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Snapshot {
    pub fn from_state(st: &SimState) -> Self {
        Snapshot {
            t: st.t,
            h: st.h,
            dx: st.grid.dx,
            u: st.u.clone(),
            v: st.v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub h_series: Vec<(f64, f64)>,
    pub snapshots: Vec<Snapshot>,
    pub dt: f64,
    pub steps: usize,
    pub termination: String,
}

/// Stateful stepper owning the FFT plans for both kernels.
#[derive(Debug)]
pub struct Simulation<'a> {
    params: &'a ModelParams,
    state: SimState,
    conv_u: Convolver,
    conv_v: Convolver,
    nonlocal_u: Vec<f64>,
    nonlocal_v: Vec<f64>,
}

impl<'a> Simulation<'a> {
    pub fn new(params: &'a ModelParams) -> Result<Self> {
        Self::from_state(params, params.initial_state())
    }

    pub fn from_state(params: &'a ModelParams, state: SimState) -> Result<Self> {
        params.validate()?;
        params.kernel1.warm_up()?;
        params.kernel2.warm_up()?;
        let dx = state.grid.dx;
        Ok(Simulation {
            params,
            state,
            conv_u: Convolver::new(params.kernel1.clone(), dx),
            conv_v: Convolver::new(params.kernel2.clone(), dx),
            nonlocal_u: Vec::new(),
            nonlocal_v: Vec::new(),
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn into_state(self) -> SimState {
        self.state
    }

    /// Advances by `dt`; returns the flux used to move the front.
    pub fn step(&mut self, dt: f64) -> Result<f64> {
        let p = self.params;
        let st = &mut self.state;
        let n = st.grid.n;
        self.nonlocal_u.resize(n, 0.0);
        self.nonlocal_v.resize(n, 0.0);
        self.conv_u.apply_into(&st.u, &st.grid, st.h, &mut self.nonlocal_u)?;
        self.conv_v.apply_into(&st.v, &st.grid, st.h, &mut self.nonlocal_v)?;
        let flux = boundary_flux(st, &p.kernel1, &p.kernel2, p.mu1, p.mu2);
        if !flux.is_finite() {
            return Err(Error::NonFinite {
                field: "h",
                node: n,
                t: st.t,
            });
        }
        let r = &p.reactions;
        let loss_u = p.d1 + r.a;
        let loss_v = p.d2 + r.b;
        let t = st.t;
        for j in 0..st.interior_len() {
            let (u, v) = (st.u[j], st.v[j]);
            let du = p.d1 * self.nonlocal_u[j] - loss_u * u + r.h.value(v);
            let dv = p.d2 * self.nonlocal_v[j] - loss_v * v + r.g.value(u);
            st.u[j] = checked(u + dt * du, "u", j, t)?;
            st.v[j] = checked(v + dt * dv, "v", j, t)?;
        }
        st.h += dt * flux;
        st.t += dt;
        grow_to_front(st);
        st.impose_dirichlet();
        Ok(flux)
    }
}

fn checked(x: f64, field: &'static str, node: usize, t: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite { field, node, t });
    }
    if x < 0.0 {
        if x < -NEGATIVITY_TOL {
            return Err(Error::Negative {
                field,
                node,
                t,
                value: x,
            });
        }
        return Ok(0.0);
    }
    Ok(x)
}

/// One explicit step from `state`.
pub fn step(state: SimState, p: &ModelParams, dt: f64) -> Result<SimState> {
    let limit = stable_dt(p)?;
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::Parameter(format!("dt = {dt} outside (0, {limit}]")));
    }
    let mut sim = Simulation::from_state(p, state)?;
    sim.step(dt)?;
    Ok(sim.into_state())
}

/// Geometric output times `base · factor^k ≤ t_end`.
pub fn geometric_times(base: f64, factor: f64, t_end: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if !(base > 0.0 && factor > 1.0) {
        return out;
    }
    let mut t = base;
    while t <= t_end * (1.0 + 1e-12) {
        out.push(t);
        t *= factor;
    }
    out
}

/// Step count and uniform step landing exactly on `t_end`.
pub fn step_plan(p: &ModelParams, t_end: f64) -> Result<(usize, f64)> {
    let limit = stable_dt(p)?;
    if t_end <= 0.0 {
        return Ok((0, limit));
    }
    let steps = (t_end / limit).ceil() as usize;
    Ok((steps, t_end / steps as f64))
}

/// Marches to `t_end`, recording `h` every step and snapshots at the steps
/// nearest each requested output time.
pub fn run(p: &ModelParams, t_end: f64, output_times: &[f64], max_seconds: Option<f64>) -> Result<Trajectory> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::config(
            "run.t_end",
            format!("{t_end} must be a non-negative finite number"),
        ));
    }
    let started = Instant::now();
    let (steps, dt) = step_plan(p, t_end)?;
    let mut sim = Simulation::new(p)?;
    let mut wanted: Vec<(usize, f64)> = output_times
        .iter()
        .filter(|&&t| t >= 0.0 && t <= t_end * (1.0 + 1e-12))
        .map(|&t| (((t / dt).round() as usize).min(steps), t))
        .collect();
    wanted.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut next = 0;
    let mut snapshots = Vec::with_capacity(wanted.len());
    let mut h_series = Vec::with_capacity(steps + 1);
    h_series.push((0.0, sim.state().h));
    let take = |k: usize, sim: &Simulation, next: &mut usize, snaps: &mut Vec<Snapshot>| {
        while *next < wanted.len() && wanted[*next].0 == k {
            snaps.push(Snapshot::from_state(sim.state()));
            *next += 1;
        }
    };
    take(0, &sim, &mut next, &mut snapshots);
    for k in 1..=steps {
        sim.step(dt)?;
        // pin t to the step grid so output is independent of rounding drift
        sim.state.t = k as f64 * dt;
        h_series.push((sim.state().t, sim.state().h));
        take(k, &sim, &mut next, &mut snapshots);
        if let Some(limit) = max_seconds {
            if k % 64 == 0 && started.elapsed().as_secs_f64() > limit {
                return Err(Error::Budget(limit));
            }
        }
    }
    Ok(Trajectory {
        h_series,
        snapshots,
        dt,
        steps,
        termination: "completed".to_string(),
    })
}
