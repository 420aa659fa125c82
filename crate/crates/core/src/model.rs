//! Observation models, described through the distribution of the one-step
//! log-likelihood ratio.
//!
//! A model supplies the pre-change log-LR density `K0` and both cdfs. The
//! post-change density is never given separately: it is always
//! `K1(z) = e^z K0(z)`, which follows from the likelihood-ratio change of
//! measure `dP1 = LR dP0`.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Hypothesis {
    /// Pre-change (in-control) regime.
    H0,
    /// Post-change (out-of-control) regime.
    H1,
}

impl Hypothesis {
    pub const BOTH: [Hypothesis; 2] = [Hypothesis::H0, Hypothesis::H1];

    pub fn index(self) -> u8 {
        match self {
            Hypothesis::H0 => 0,
            Hypothesis::H1 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[non_exhaustive]
pub enum ModelKind {
    /// `N(0,1)` before the change, `N(theta,1)` after; the log-LR of one
    /// observation is `theta X - theta^2 / 2`.
    GaussianShift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservationModel {
    kind: ModelKind,
    theta: f64,
}

fn std_normal_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / SQRT_2)
}

impl ObservationModel {
    pub fn gaussian_shift(theta: f64) -> Result<Self> {
        if !theta.is_finite() || theta == 0.0 {
            return Err(invalid(format!("theta must be finite and nonzero, got {theta}")));
        }
        Ok(Self {
            kind: ModelKind::GaussianShift,
            theta,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Mean of the log-LR under H0 (always negative).
    fn drift0(&self) -> f64 {
        -0.5 * self.theta * self.theta
    }

    fn scale(&self) -> f64 {
        self.theta.abs()
    }

    /// `ln K0(z)`; finite for every finite `z`.
    pub fn log_k0(&self, z: f64) -> f64 {
        match self.kind {
            ModelKind::GaussianShift => {
                let s = self.scale();
                let t = (z - self.drift0()) / s;
                -0.5 * t * t - (s * (2.0 * PI).sqrt()).ln()
            }
        }
    }

    /// Pre-change log-LR density `K0(z)`.
    pub fn k0(&self, z: f64) -> f64 {
        match self.kind {
            ModelKind::GaussianShift => {
                let s = self.scale();
                let t = (z - self.drift0()) / s;
                (-0.5 * t * t).exp() / (s * (2.0 * PI).sqrt())
            }
        }
    }

    /// Post-change log-LR density, `e^z K0(z)`.
    ///
    /// Where `K0` underflows to zero the product resolves to its true limit
    /// of zero, even if `e^z` alone would overflow.
    pub fn k1(&self, z: f64) -> f64 {
        let k0 = self.k0(z);
        if k0 == 0.0 {
            return 0.0;
        }
        let e = z.exp();
        if e.is_finite() {
            e * k0
        } else {
            (z + self.log_k0(z)).exp()
        }
    }

    pub fn log_lr_pdf(&self, hypothesis: Hypothesis, z: f64) -> f64 {
        match hypothesis {
            Hypothesis::H0 => self.k0(z),
            Hypothesis::H1 => self.k1(z),
        }
    }

    /// `F_i(z) = Pr_i(log LR <= z)`.
    pub fn log_lr_cdf(&self, hypothesis: Hypothesis, z: f64) -> f64 {
        match self.kind {
            ModelKind::GaussianShift => {
                let mean = match hypothesis {
                    Hypothesis::H0 => self.drift0(),
                    Hypothesis::H1 => -self.drift0(),
                };
                std_normal_cdf((z - mean) / self.scale())
            }
        }
    }

    pub fn f0(&self, z: f64) -> f64 {
        self.log_lr_cdf(Hypothesis::H0, z)
    }

    pub fn f1(&self, z: f64) -> f64 {
        self.log_lr_cdf(Hypothesis::H1, z)
    }

    /// One draw of the log-LR under `hypothesis`.
    pub fn sample_log_lr<R: Rng + ?Sized>(&self, hypothesis: Hypothesis, rng: &mut R) -> f64 {
        match self.kind {
            ModelKind::GaussianShift => {
                let noise: f64 = rng.sample(StandardNormal);
                let x = match hypothesis {
                    Hypothesis::H0 => noise,
                    Hypothesis::H1 => noise + self.theta,
                };
                self.theta * x - 0.5 * self.theta * self.theta
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian_pdf(z: f64, mean: f64, var: f64) -> f64 {
        (-(z - mean) * (z - mean) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }

    #[test]
    fn rejects_zero_and_nonfinite_theta() {
        assert!(ObservationModel::gaussian_shift(0.0).is_err());
        assert!(ObservationModel::gaussian_shift(f64::NAN).is_err());
        assert!(ObservationModel::gaussian_shift(f64::INFINITY).is_err());
    }

    #[test]
    fn k0_at_its_mean() {
        let m = ObservationModel::gaussian_shift(1.0).unwrap();
        let v = m.log_lr_pdf(Hypothesis::H0, -0.5);
        assert!((v - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert!((v - 0.398942).abs() < 1e-6);
    }

    #[test]
    fn k1_equals_k0_at_zero() {
        let m = ObservationModel::gaussian_shift(1.0).unwrap();
        assert_eq!(m.log_lr_pdf(Hypothesis::H1, 0.0), m.log_lr_pdf(Hypothesis::H0, 0.0));
    }

    #[test]
    fn k1_matches_direct_post_change_density() {
        let m = ObservationModel::gaussian_shift(0.5).unwrap();
        let direct = gaussian_pdf(1.3, 0.125, 0.25);
        let expected = 1.3f64.exp() * gaussian_pdf(1.3, -0.125, 0.25);
        assert!((m.k1(1.3) - direct).abs() < 1e-12);
        assert!((m.k1(1.3) - expected).abs() < 1e-15);
    }

    #[test]
    fn k1_far_tail_resolves_to_zero() {
        let m = ObservationModel::gaussian_shift(0.5).unwrap();
        assert_eq!(m.k1(800.0), 0.0);
        assert_eq!(m.k1(-800.0), 0.0);
        // wide kernel: K0 is still positive where e^z overflows
        let wide = ObservationModel::gaussian_shift(40.0).unwrap();
        let v = wide.k1(710.0);
        assert!(v.is_finite() && v > 0.0);
        assert!((v - gaussian_pdf(710.0, 800.0, 1600.0)).abs() / v < 1e-10);
    }

    #[test]
    fn cdf_values() {
        let m = ObservationModel::gaussian_shift(1.0).unwrap();
        assert!((m.log_lr_cdf(Hypothesis::H0, -0.5) - 0.5).abs() < 1e-15);
        assert!((m.log_lr_cdf(Hypothesis::H1, 0.5) - 0.5).abs() < 1e-15);
        for h in Hypothesis::BOTH {
            assert!(m.log_lr_cdf(h, -1e6) == 0.0);
            assert!(m.log_lr_cdf(h, 1e6) == 1.0);
        }
    }

    #[test]
    fn sign_of_theta_is_irrelevant_to_the_kernel() {
        let p = ObservationModel::gaussian_shift(0.7).unwrap();
        let n = ObservationModel::gaussian_shift(-0.7).unwrap();
        for z in [-3.0, -0.2, 0.0, 0.4, 2.5] {
            assert_eq!(p.k0(z), n.k0(z));
            assert_eq!(p.f1(z), n.f1(z));
        }
    }

    #[test]
    fn sampling_moments_and_determinism() {
        let m = ObservationModel::gaussian_shift(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| m.sample_log_lr(Hypothesis::H0, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
        assert!((mean + 0.5).abs() < 3e-3, "mean {mean}");
        // sd of the sample variance of a normal is var*sqrt(2/(n-1))
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt(), "var {var}");

        let mut a = ChaCha8Rng::seed_from_u64(99);
        let mut b = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            assert_eq!(
                m.sample_log_lr(Hypothesis::H1, &mut a),
                m.sample_log_lr(Hypothesis::H1, &mut b)
            );
        }
    }
}
