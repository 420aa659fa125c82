//! Dense LU factorization with partial pivoting, `P A = L U`.
//!
//! Storage is row-major; `L` (unit diagonal, implicit) and `U` share one
//! buffer. The factors are immutable once built, so any number of threads may
//! solve against them at once.

use crate::instrument;

#[derive(Debug, Clone)]
pub(crate) struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    /// Row `i` of `P A` is row `perm[i]` of `A`.
    perm: Vec<usize>,
    norm1: f64,
}

/// Zero pivot at this elimination step.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ZeroPivot;

impl LuFactors {
    /// Factors the row-major `n x n` matrix held in `a`.
    pub(crate) fn factor(mut a: Vec<f64>, n: usize) -> Result<Self, ZeroPivot> {
        assert_eq!(a.len(), n * n);
        instrument::record_factorization();
        let norm1 = (0..n)
            .map(|j| (0..n).map(|i| a[i * n + j].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, a[i * n + k].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(ZeroPivot);
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let (upper, lower) = a.split_at_mut((k + 1) * n);
            let pivot_row = &upper[k * n..];
            let diag = pivot_row[k];
            for row in lower.chunks_exact_mut(n) {
                let l = row[k] / diag;
                row[k] = l;
                if l != 0.0 {
                    for (r, &u) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                        *r -= l * u;
                    }
                }
            }
        }
        Ok(Self { n, lu: a, perm, norm1 })
    }

    pub(crate) fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`.
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, y)| u * y).sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    /// Solves `A^T x = b`.
    pub(crate) fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        // U^T z = b
        let mut z = b.to_vec();
        for i in 0..n {
            z[i] /= self.lu[i * n + i];
            let zi = z[i];
            let row = &self.lu[i * n..(i + 1) * n];
            for (zj, &u) in z[i + 1..].iter_mut().zip(&row[i + 1..]) {
                *zj -= u * zi;
            }
        }
        // L^T y = z
        for i in (0..n).rev() {
            let yi = z[i];
            let row = &self.lu[i * n..i * n + i];
            for (zj, &l) in z[..i].iter_mut().zip(row) {
                *zj -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }

    /// Estimate of the 1-norm condition number `||A||_1 ||A^{-1}||_1`
    /// (Hager's method with Higham's alternating-sign safeguard).
    pub(crate) fn condition_estimate(&self) -> f64 {
        let n = self.n;
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for iter in 0..5 {
            let y = self.solve(&x);
            let norm: f64 = y.iter().map(|v| v.abs()).sum();
            if !norm.is_finite() {
                return f64::INFINITY;
            }
            if iter > 0 && norm <= est {
                break;
            }
            est = norm;
            let signs: Vec<f64> = y.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_transpose(&signs);
            let (j, zj) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.abs()))
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zj <= ztx {
                break;
            }
            x.iter_mut().for_each(|v| *v = 0.0);
            x[j] = 1.0;
        }
        let alt: Vec<f64> = (0..n)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * (1.0 + i as f64 / (n.max(2) - 1) as f64)
            })
            .collect();
        let alt_norm: f64 = self.solve(&alt).iter().map(|v| v.abs()).sum();
        est = est.max(2.0 * alt_norm / (3.0 * n as f64));
        self.norm1 * est
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matvec(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
        (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
    }

    fn test_matrix(n: usize) -> Vec<f64> {
        // deterministic, nonsymmetric, needs pivoting (zero leading entry)
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = ((i * 7 + j * 13) % 11) as f64 - 5.0 + if i == j { 0.5 } else { 0.0 };
            }
        }
        a[0] = 0.0;
        a
    }

    #[test]
    fn solves_and_transposed_solves() {
        let n = 9;
        let a = test_matrix(n);
        let lu = LuFactors::factor(a.clone(), n).unwrap();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = matvec(&a, n, &x);
        let got = lu.solve(&b);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-10);
        }
        let mut at = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                at[j * n + i] = a[i * n + j];
            }
        }
        let bt = matvec(&at, n, &x);
        let got = lu.solve_transpose(&bt);
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = vec![1.0, 2.0, 2.0, 4.0];
        assert!(LuFactors::factor(a, 2).is_err());
    }

    #[test]
    fn condition_estimate_on_diagonal() {
        let n = 4;
        let mut a = vec![0.0; n * n];
        for (i, d) in [1.0, 10.0, 1e-3, 2.0].iter().enumerate() {
            a[i * n + i] = *d;
        }
        let lu = LuFactors::factor(a, n).unwrap();
        let c = lu.condition_estimate();
        assert!((c - 1e4).abs() / 1e4 < 1e-12, "{c}");
    }

    #[test]
    fn condition_estimate_bounds_true_value() {
        // 2x2 with known inverse: [[1, 1], [0, eps]]
        let eps = 1e-6;
        let lu = LuFactors::factor(vec![1.0, 1.0, 0.0, eps], 2).unwrap();
        // ||A||_1 = 1 + eps, ||A^{-1}||_1 = (1 + 1) / eps
        let exact = (1.0 + eps) * 2.0 / eps;
        let est = lu.condition_estimate();
        assert!(est <= exact * (1.0 + 1e-12) && est >= exact / 3.0, "{est} vs {exact}");
    }
}
