use cusumkit::cusum::{arl_sweep, DEFAULT_TAIL_TOL};
use cusumkit::{
    arl_direct, arl_via_sprt, run_length_moments, run_length_survival, CusumConfig, CusumReport, ObservationModel,
};

fn config(theta: f64, h: f64, w: f64) -> CusumConfig {
    CusumConfig::new(h, w, ObservationModel::gaussian_shift(theta).unwrap()).unwrap()
}

#[test]
fn survival_sum_reproduces_arl() {
    for (theta, h, w) in [(1.0, 4.0, 0.0), (1.0, 2.0, 1.0), (0.5, 3.0, 0.0), (2.0, 6.0, 3.0)] {
        let c = config(theta, h, w);
        let grid = c.grid(256).unwrap();
        let arl = arl_via_sprt(&c, &grid).unwrap();
        let m = run_length_moments(&c, &grid, 1, DEFAULT_TAIL_TOL).unwrap();
        for (mu, l) in [(m.moments0[0], arl.arl0), (m.moments1[0], arl.arl1)] {
            assert!((mu - l).abs() <= 1e-3 * l, "theta={theta} h={h} w={w}: {mu} vs {l}");
        }
    }
}

#[test]
fn log_survival_slope_matches_tail_ratio() {
    let c = config(1.0, 4.0, 0.0);
    let grid = c.grid(256).unwrap();
    let m = run_length_moments(&c, &grid, 1, DEFAULT_TAIL_TOL).unwrap();
    let horizon = 400;
    let s = run_length_survival(&c, &grid, horizon).unwrap();
    for (curve, rho) in [(&s.survival0, m.rho0), (&s.survival1, m.rho1)] {
        // late-n slope, over a window where the tail is geometric but not underflowed
        let (n1, n2) = if rho > 0.9 { (300, 400) } else { (20, 30) };
        let slope = (curve[n2].ln() - curve[n1].ln()) / (n2 - n1) as f64;
        assert!(
            (slope - rho.ln()).abs() <= 0.01 * rho.ln().abs(),
            "{slope} vs {}",
            rho.ln()
        );
    }
}

#[test]
fn theta_sign_flip_is_a_relabeling() {
    // K0 depends on theta^2 only, so results are identical under theta -> -theta.
    for (h, w) in [(2.0, 0.0), (4.0, 1.0)] {
        let p = config(0.8, h, w);
        let n = config(-0.8, h, w);
        let grid = p.grid(128).unwrap();
        assert_eq!(
            arl_via_sprt(&p, &grid).unwrap().arl0,
            arl_via_sprt(&n, &grid).unwrap().arl0
        );
        assert_eq!(arl_direct(&p, &grid).unwrap().arl1, arl_direct(&n, &grid).unwrap().arl1);
    }
}

#[test]
fn atom_vanishes_far_from_zero() {
    // F0(-x) ~ 0 near x = h for large h: the reflection term F0(-x) L0(0) is
    // negligible next to L0(h-) itself.
    let h = 12.0;
    let x = h - 1e-3;
    let from_zero = config(1.0, h, 0.0);
    let near_limit = config(1.0, h, x);
    let grid = from_zero.grid(256).unwrap();
    let l0_zero = arl_direct(&from_zero, &grid).unwrap().arl0;
    let l0_near = arl_direct(&near_limit, &grid).unwrap().arl0;
    let atom = from_zero.model().f0(-x) * l0_zero;
    assert!(atom <= 1e-12 * l0_near, "atom {atom} vs L0 {l0_near}");
    let via = arl_via_sprt(&near_limit, &grid).unwrap().arl0;
    assert!((l0_near - via).abs() <= 1e-6 * via);
}

#[test]
fn headstart_sweep_is_monotone() {
    let c = config(1.0, 4.0, 0.0);
    let arls = arl_sweep(&c, &c.grid(512).unwrap(), &[0.0, 1.0, 2.0, 3.0]).unwrap();
    for pair in arls.windows(2) {
        assert!(pair[1].1 < pair[0].1);
    }
}

#[test]
fn report_is_internally_consistent() {
    let c = config(1.0, 4.0, 2.0);
    let r = CusumReport::compute(&c, &c.grid(256).unwrap(), Some(60), 3, DEFAULT_TAIL_TOL).unwrap();
    assert_eq!(r.survival0.len(), 61);
    assert_eq!(r.diagnostics.factorizations, 1);
    assert_eq!(r.diagnostics.assemblies, 1);
    assert!((r.moments.moments0[0] - r.arl0).abs() <= 1e-4 * r.arl0);
    assert!((r.moments.moments1[0] - r.arl1).abs() <= 1e-4 * r.arl1);
    for s in [&r.survival0, &r.survival1] {
        assert_eq!(s[0], 1.0);
        assert!(s.windows(2).all(|p| p[1] <= p[0]));
    }
}
