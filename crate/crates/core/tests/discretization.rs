use frontier_core::discretization::{
    boundary_flux, extend_domain, nonlocal_apply, nonlocal_apply_direct, quadrature_weights, Convolver, Grid,
    KernelSamples, SimState,
};
use frontier_core::kernels::{Family, KernelSpec};
use frontier_core::quadrature::{integrate_pieces, QuadOptions};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

fn kernels() -> Vec<KernelSpec> {
    [
        Family::Compact { radius: 1.7 },
        Family::PowerLaw { gamma: 1.5 },
        Family::AlgLog { gamma: 1.3, beta: 1.0 },
        Family::CritLog { beta: -1.0 },
        Family::LogLog { alpha: 1.0, beta: 2.0 },
    ]
    .into_iter()
    .map(|f| KernelSpec::new(f).unwrap())
    .collect()
}

#[test]
fn fft_matches_direct_sum() {
    let mut rng = StdRng::seed_from_u64(3);
    for k in kernels() {
        for n in [1usize, 2, 64, 257, 1024, 4097] {
            let dx = 0.3;
            let h = (n as f64 - 1.0 + rng.random_range(0.0..1.0)) * dx;
            let grid = Grid::covering(dx, h, 0);
            assert_eq!(grid.n, n);
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = nonlocal_apply(&k, &w, &grid, h).unwrap();
            let mut samples = KernelSamples::new(k.clone(), dx);
            let slow = nonlocal_apply_direct(&mut samples, &w, &grid, h).unwrap();
            let err = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-10, "{:?} n={n}: {err:e}", k.family());
        }
    }
}

#[test]
fn convolver_reuse_across_growing_grids() {
    let k = KernelSpec::new(Family::PowerLaw { gamma: 1.8 }).unwrap();
    let dx = 0.25;
    let mut conv = Convolver::new(k.clone(), dx);
    for n in [10usize, 700, 33, 2000] {
        let h = (n - 1) as f64 * dx;
        let grid = Grid::covering(dx, h, 0);
        let w: Vec<f64> = (0..n).map(|j| (j as f64 * 0.1).sin()).collect();
        let a = conv.apply(&w, &grid, h).unwrap();
        let b = nonlocal_apply(&k, &w, &grid, h).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
    }
}

/// `∫_0^h J(x - y) cos(πy / 2h) dy` by adaptive quadrature, split at the kernel cusp.
fn exact_apply(k: &KernelSpec, x: f64, h: f64) -> f64 {
    let mut pts = vec![0.0, x, h];
    if let Some(r) = k.support() {
        pts.extend([x - r, x + r].into_iter().filter(|p| *p > 0.0 && *p < h));
    }
    pts.sort_by(f64::total_cmp);
    let f = |y: f64| k.evaluate(x - y) * (std::f64::consts::FRAC_PI_2 * y / h).cos();
    integrate_pieces(
        f,
        &pts,
        QuadOptions {
            rel_tol: 1e-13,
            ..QuadOptions::default()
        },
    )
    .unwrap()
}

#[test]
fn second_order_under_refinement() {
    let h = 10.0;
    for k in [
        KernelSpec::new(Family::Compact { radius: 2.0 }).unwrap(),
        KernelSpec::new(Family::PowerLaw { gamma: 1.5 }).unwrap(),
    ] {
        let errs: Vec<f64> = [0.5, 0.25, 0.125, 0.0625]
            .iter()
            .map(|&dx| {
                let grid = Grid::covering(dx, h, 0);
                let w: Vec<f64> = (0..grid.n)
                    .map(|j| (std::f64::consts::FRAC_PI_2 * grid.x(j) / h).cos())
                    .collect();
                let out = nonlocal_apply(&k, &w, &grid, h).unwrap();
                [2.0, 5.0, 7.5]
                    .iter()
                    .map(|&x| (out[(x / dx).round() as usize] - exact_apply(&k, x, h)).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        let orders: Vec<f64> = errs.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
        let last = orders[orders.len() - 1];
        assert!(last >= 1.8, "{:?}: errors {errs:?}, orders {orders:?}", k.family());
    }
}

#[test]
fn compact_flux_matches_first_moment() {
    // u ≡ 1 on [0, h]: flux = μ ∫_0^h tail(z) dz = μ ∫_0^R y J(y) dy = μ · 5R/32
    let radius = 1.0;
    let k = KernelSpec::new(Family::Compact { radius }).unwrap();
    let dx = 1e-3;
    let h = 4000.0 * dx + 1e-7;
    let mut st = SimState::zeros(dx, h, 0);
    for j in 0..st.grid.n {
        st.u[j] = 1.0;
    }
    for mu in [0.5, 1.0, 2.0] {
        let flux = boundary_flux(&st, &k, &k, mu, 1.0);
        assert!((flux - mu * 5.0 * radius / 32.0).abs() < 1e-6, "mu={mu}: {flux}");
    }
}

#[test]
fn weights_integrate_constants_exactly() {
    for (dx, h) in [(0.25, 10.0), (0.25, 10.1), (0.3, 0.1), (0.5, 7.49)] {
        let g = Grid::covering(dx, h, 0);
        let total: f64 = quadrature_weights(&g, h).iter().sum::<f64>() * dx;
        // the trapezoid rule with a fractional last cell is exact for linear data on [0, x_last]
        // and applies a half-cell to the remainder
        let frac = h - g.last_x();
        let expect = if g.n == 1 { 0.5 * frac } else { g.last_x() + 0.5 * frac };
        assert!((total - expect).abs() < 1e-12, "dx={dx} h={h}");
    }
}

#[test]
fn extension_keeps_fields_and_zeroes_new_nodes() {
    let mut st = SimState::zeros(0.25, 5.0, 4);
    for j in 0..st.grid.n {
        st.u[j] = 1.0 + j as f64;
    }
    st.impose_dirichlet();
    let before = st.u.clone();
    st.h = 40.3;
    let st = extend_domain(st);
    assert_eq!(st.grid.n, Grid::covering(0.25, 40.3, 0).n);
    assert!(st.grid.capacity >= st.grid.n);
    assert_eq!(&st.u[..before.len()], &before[..]);
    assert!(st.u[before.len()..].iter().all(|&x| x == 0.0));
}

#[test]
fn constant_field_sees_missing_tails() {
    // w ≡ 1: ∫_0^h J(x - y) dy = 1 - tail(x) - tail(h - x), reached at second order
    let h = 20.0;
    let x = 8.0;
    for k in [
        KernelSpec::new(Family::PowerLaw { gamma: 1.5 }).unwrap(),
        KernelSpec::new(Family::CritLog { beta: 0.0 }).unwrap(),
    ] {
        let exact = 1.0 - k.tail_mass(x) - k.tail_mass(h - x);
        let errs: Vec<f64> = [0.5, 0.25, 0.125]
            .iter()
            .map(|&dx| {
                let grid = Grid::covering(dx, h, 0);
                let out = nonlocal_apply(&k, &vec![1.0; grid.n], &grid, h).unwrap();
                (out[(x / dx).round() as usize] - exact).abs()
            })
            .collect();
        let order = (errs[1] / errs[2]).log2();
        assert!(order >= 1.8, "{:?}: errors {errs:?}", k.family());
    }
}
