use cusumkit::{Grid, Hypothesis, ObservationModel};
use proptest::prelude::*;

const THETAS: [f64; 8] = [0.25, -0.25, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0];

fn direct_k1(theta: f64, z: f64) -> f64 {
    let var = theta * theta;
    let d = z - 0.5 * var;
    (-d * d / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Interval covering both log-LR densities out to 12 standard deviations.
fn wide(theta: f64) -> (f64, f64) {
    let half = 0.5 * theta * theta;
    (-half - 12.0 * theta.abs(), half + 12.0 * theta.abs())
}

proptest! {
    #[test]
    fn kernel_linkage_holds_relatively(x in -10.0f64..10.0, y in -10.0f64..10.0, t in 0usize..8) {
        let m = ObservationModel::gaussian_shift(THETAS[t]).unwrap();
        let lhs = (-y).exp() * m.k1(y - x);
        let rhs = (-x).exp() * m.k0(y - x);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn k1_matches_closed_form(z in -30.0f64..30.0, t in 0usize..8) {
        let m = ObservationModel::gaussian_shift(THETAS[t]).unwrap();
        prop_assert!((m.k1(z) - direct_k1(THETAS[t], z)).abs() <= 1e-12);
    }

    #[test]
    fn cdfs_are_nondecreasing(z in -40.0f64..40.0, dz in 0.0f64..5.0, t in 0usize..8) {
        let m = ObservationModel::gaussian_shift(THETAS[t]).unwrap();
        for h in Hypothesis::BOTH {
            prop_assert!(m.log_lr_cdf(h, z) <= m.log_lr_cdf(h, z + dz));
        }
    }
}

#[test]
fn densities_integrate_to_one() {
    for theta in THETAS {
        let m = ObservationModel::gaussian_shift(theta).unwrap();
        let (lo, hi) = wide(theta);
        let grid = Grid::gauss_legendre(lo, hi, 400).unwrap();
        for h in Hypothesis::BOTH {
            let total = grid.integrate(|z| m.log_lr_pdf(h, z));
            assert!((total - 1.0).abs() <= 1e-8, "theta={theta} {h:?}: {total}");
        }
    }
}

#[test]
fn cdf_matches_integrated_density() {
    for theta in THETAS {
        let m = ObservationModel::gaussian_shift(theta).unwrap();
        let (lo, _) = wide(theta);
        for h in Hypothesis::BOTH {
            for z in [-3.0, -1.0, -0.2, 0.0, 0.3, 1.7, 4.0] {
                let grid = Grid::gauss_legendre(lo, z, 400).unwrap();
                let numeric = grid.integrate(|u| m.log_lr_pdf(h, u));
                let closed = m.log_lr_cdf(h, z);
                assert!(
                    (numeric - closed).abs() <= 1e-8,
                    "theta={theta} {h:?} z={z}: {numeric} vs {closed}"
                );
            }
        }
    }
}
