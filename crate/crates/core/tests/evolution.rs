use frontier_core::discretization::SimState;
use frontier_core::evolution::{self, stable_dt, InitShape, InitialData, ModelParams, Numerics, Simulation};
use frontier_core::kernels::{Family, KernelSpec};
use frontier_core::reactions::ReactionSpec;

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
fn equilibrium_is_stationary_in_the_bulk() {
    for f in [Family::Compact { radius: 1.0 }, Family::PowerLaw { gamma: 3.0 }] {
        let p = params(f);
        let h = 2000.0;
        let mut st = SimState::zeros(p.numerics.dx, h, 0);
        st.u.iter_mut().for_each(|u| *u = 1.0);
        st.v.iter_mut().for_each(|v| *v = 1.0);
        st.impose_dirichlet();
        let dt = stable_dt(&p).unwrap();
        let next = evolution::step(st.clone(), &p, dt).unwrap();
        let mid = st.grid.n / 2;
        assert!((next.u[mid] - st.u[mid]).abs() / dt <= 1e-3, "{f:?}");
        assert!((next.v[mid] - st.v[mid]).abs() / dt <= 1e-3, "{f:?}");
    }
}

#[test]
fn bounds_and_monotone_front_on_short_runs() {
    for f in [
        Family::Compact { radius: 2.0 },
        Family::CritLog { beta: -1.0 },
        Family::LogLog { alpha: 1.0, beta: 3.0 },
    ] {
        let mut p = params(f);
        p.init.amp_u = 2.0;
        p.init.amp_v = 0.1;
        let (ub, vb) = (p.u_bound() + 1e-9, p.v_bound() + 1e-9);
        let (steps, dt) = evolution::step_plan(&p, 20.0).unwrap();
        let mut sim = Simulation::new(&p).unwrap();
        let mut h = sim.state().h;
        for _ in 0..steps {
            sim.step(dt).unwrap();
            let st = sim.state();
            assert!(st.h >= h);
            h = st.h;
            assert!(st.u.iter().all(|&u| (0.0..=ub).contains(&u)));
            assert!(st.v.iter().all(|&v| (0.0..=vb).contains(&v)));
        }
    }
}

#[test]
fn larger_expansion_rate_never_slows_the_front() {
    let base = params(Family::PowerLaw { gamma: 1.5 });
    let mut last: Option<Vec<(f64, f64)>> = None;
    for mu in [0.25, 0.5, 1.0, 2.0] {
        let mut p = base.clone();
        p.mu1 = mu;
        p.mu2 = mu;
        let tr = evolution::run(&p, 20.0, &[], None).unwrap();
        if let Some(prev) = &last {
            assert_eq!(prev.len(), tr.h_series.len());
            for (a, b) in prev.iter().zip(&tr.h_series) {
                assert!(b.1 >= a.1 - 1e-10, "mu={mu} t={}: {} < {}", a.0, b.1, a.1);
            }
        }
        last = Some(tr.h_series);
    }
}

#[test]
fn refinement_changes_front_by_under_two_percent() {
    let coarse = params(Family::AlgLog { gamma: 1.5, beta: 0.0 });
    let mut fine = coarse.clone();
    fine.numerics.dx *= 0.5;
    fine.numerics.cfl *= 0.5;
    let t_end = 40.0;
    let a = evolution::run(&coarse, t_end, &[], None).unwrap();
    let b = evolution::run(&fine, t_end, &[], None).unwrap();
    assert!((b.dt / a.dt - 0.5).abs() < 1e-12);
    let (ha, hb) = (a.h_series.last().unwrap().1, b.h_series.last().unwrap().1);
    assert!((ha / hb - 1.0).abs() <= 0.02, "h = {ha} vs {hb}");
}

#[test]
fn snapshots_land_on_requested_times() {
    let p = params(Family::Compact { radius: 1.0 });
    let times = evolution::geometric_times(0.5, 2.0, 10.0);
    let tr = evolution::run(&p, 10.0, &times, None).unwrap();
    assert_eq!(tr.snapshots.len(), times.len());
    for (s, t) in tr.snapshots.iter().zip(&times) {
        assert!((s.t - t).abs() <= 0.5 * tr.dt + 1e-12);
    }
    assert!(tr.h_series.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1));
    assert_eq!(tr.h_series.len(), tr.steps + 1);
}

#[test]
fn deterministic_trajectories() {
    let p = params(Family::CritLog { beta: 0.0 });
    let a = evolution::run(&p, 5.0, &[5.0], None).unwrap();
    let b = evolution::run(&p, 5.0, &[5.0], None).unwrap();
    assert_eq!(a, b);
}

#[test]
fn budget_is_enforced() {
    let p = params(Family::PowerLaw { gamma: 1.5 });
    let err = evolution::run(&p, 1e6, &[], Some(0.05)).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}
