use std::fmt;
use std::sync::Arc;

use super::grid::Grid;
use super::lu::LuFactors;
use crate::error::{Error, Result};
use crate::instrument;
use crate::model::ObservationModel;

/// Condition estimates above this mark `I - K` as numerically singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

type KernelFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Nyström discretization of `u ↦ ∫_a^b K(y - x) u(y) dy`, together with a
/// cached factorization of `I - K`.
///
/// Entry `(i, j)` is `w_j K(x_j - x_i)`: row `i` is the equation collocated at
/// node `x_i`.
#[derive(Clone)]
pub struct KernelMatrix {
    grid: Grid,
    entries: Vec<f64>,
    kernel: KernelFn,
    lu: LuFactors,
    condition: f64,
}

impl fmt::Debug for KernelMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelMatrix")
            .field("n", &self.grid.len())
            .field("a", &self.grid.a())
            .field("b", &self.grid.b())
            .field("condition", &self.condition)
            .finish_non_exhaustive()
    }
}

impl KernelMatrix {
    /// Assembles the matrix for the pre-change density `K0` of `model`.
    pub fn assemble(model: &ObservationModel, grid: &Grid) -> Result<Self> {
        let model = *model;
        Self::from_fn(grid, move |z| model.k0(z))
    }

    /// Assembles the matrix for an arbitrary kernel density.
    pub fn from_fn<F>(grid: &Grid, kernel: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        instrument::record_assembly();
        let n = grid.len();
        let nodes = grid.nodes();
        let weights = grid.weights();
        let mut entries = vec![0.0; n * n];
        for (i, row) in entries.chunks_exact_mut(n).enumerate() {
            let xi = nodes[i];
            for (j, e) in row.iter_mut().enumerate() {
                *e = weights[j] * kernel(nodes[j] - xi);
            }
        }
        let system: Vec<f64> = entries
            .iter()
            .enumerate()
            .map(|(idx, &e)| if idx / n == idx % n { 1.0 - e } else { -e })
            .collect();
        let lu = LuFactors::factor(system, n).map_err(|_| Error::Singular {
            condition: f64::INFINITY,
            limit: SINGULAR_CONDITION,
        })?;
        let condition = lu.condition_estimate();
        if condition.is_nan() || condition > SINGULAR_CONDITION {
            return Err(Error::Singular {
                condition,
                limit: SINGULAR_CONDITION,
            });
        }
        Ok(Self {
            grid: grid.clone(),
            entries,
            kernel: Arc::new(kernel),
            lu,
            condition,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.lu.dim()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim() + j]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// 1-norm condition estimate of `I - K`.
    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    /// Kernel density at `z`.
    pub fn kernel(&self, z: f64) -> f64 {
        (self.kernel)(z)
    }

    /// Weights `w_j K(x_j - x)` that carry node values to an arbitrary `x`.
    pub fn extension_row(&self, x: f64) -> Vec<f64> {
        self.grid
            .nodes()
            .iter()
            .zip(self.grid.weights())
            .map(|(&xj, &wj)| wj * self.kernel(xj - x))
            .collect()
    }

    /// `K u` at the nodes.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.entries.chunks_exact(self.dim()).map(|row| dot(row, u)).collect()
    }

    /// Solves `(I - K) u = rhs` for one right-hand side.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(0, rhs)?;
        Ok(self.lu.solve(rhs))
    }

    /// Solves `(I - K) U = [rhs_1, ..., rhs_m]` against the single cached
    /// factorization.
    pub fn solve_grouped(&self, rhs_columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        for (index, col) in rhs_columns.iter().enumerate() {
            self.check_len(index, col)?;
        }
        Ok(rhs_columns.iter().map(|col| self.lu.solve(col)).collect())
    }

    /// Evaluates the solution of `u = v + K u` at any `x` in `[a, b]`:
    /// `u(x) = v(x) + Σ_j w_j K(x_j - x) u_j`.
    pub fn nystrom_extend(&self, node_values: &[f64], inhomogeneous_term: impl Fn(f64) -> f64, x: f64) -> Result<f64> {
        self.check_len(0, node_values)?;
        self.check_inside(x)?;
        Ok(inhomogeneous_term(x) + dot(&self.extension_row(x), node_values))
    }

    pub(crate) fn check_inside(&self, x: f64) -> Result<()> {
        if self.grid.contains(x) {
            Ok(())
        } else {
            Err(Error::OutOfInterval {
                x,
                a: self.grid.a(),
                b: self.grid.b(),
            })
        }
    }

    fn check_len(&self, index: usize, v: &[f64]) -> Result<()> {
        if v.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                index,
                got: v.len(),
                expected: self.dim(),
            })
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `assemble_kernel` under its operational name.
pub fn assemble_kernel(model: &ObservationModel, grid: &Grid) -> Result<KernelMatrix> {
    KernelMatrix::assemble(model, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gauss(z: f64, mean: f64, var: f64) -> f64 {
        (-(z - mean) * (z - mean) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }

    fn model(theta: f64) -> ObservationModel {
        ObservationModel::gaussian_shift(theta).unwrap()
    }

    #[test]
    fn three_by_three_entries() {
        let grid = Grid::gauss_legendre(0.0, 4.0, 3).unwrap();
        let k = KernelMatrix::assemble(&model(1.0), &grid).unwrap();
        // nodes 2 ∓ 2 sqrt(3/5), 2; weights 2 * {5/9, 8/9, 5/9}
        let r = 2.0 * (0.6f64).sqrt();
        let x = [2.0 - r, 2.0, 2.0 + r];
        let w = [10.0 / 9.0, 16.0 / 9.0, 10.0 / 9.0];
        for i in 0..3 {
            for j in 0..3 {
                let expected = w[j] * gauss(x[j] - x[i], -0.5, 1.0);
                assert!((k.entry(i, j) - expected).abs() < 1e-14, "({i},{j})");
            }
        }
    }

    #[test]
    fn diagonal_under_equal_weights() {
        // midpoint rule: equal weights, so every diagonal entry is w K(0)
        let m = model(1.0);
        let grid = Grid::gauss_legendre(0.0, 1.0, 2).unwrap();
        let k = KernelMatrix::assemble(&m, &grid).unwrap();
        assert_eq!(grid.weights()[0], grid.weights()[1]);
        assert_eq!(k.entry(0, 0), k.entry(1, 1));
        assert_eq!(k.entry(0, 0), grid.weights()[0] * m.k0(0.0));
    }

    #[test]
    fn wide_interval_rows_are_substochastic() {
        let m = model(1.0);
        let grid = Grid::gauss_legendre(-8.0, 8.0, 128).unwrap();
        let k = KernelMatrix::assemble(&m, &grid).unwrap();
        assert!(k.entries().iter().all(|&e| e >= 0.0));
        for (i, &x) in grid.nodes().iter().enumerate() {
            let row: f64 = (0..grid.len()).map(|j| k.entry(i, j)).sum();
            let exact = m.f0(8.0 - x) - m.f0(-8.0 - x);
            assert!(row <= 1.0);
            assert!((row - exact).abs() < 1e-10, "row {i}: {row} vs {exact}");
        }
    }

    #[test]
    fn solves_and_round_trips() {
        let m = model(1.0);
        let grid = Grid::gauss_legendre(-2.0, 2.0, 64).unwrap();
        let k = KernelMatrix::assemble(&m, &grid).unwrap();
        let zero = k.solve(&vec![0.0; 64]).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));

        let v: Vec<f64> = grid.nodes().iter().map(|x| (3.0 * x).cos() + x).collect();
        let kv = k.apply(&v);
        let rhs: Vec<f64> = v.iter().zip(&kv).map(|(a, b)| a - b).collect();
        let back = k.solve(&rhs).unwrap();
        for (g, e) in back.iter().zip(&v) {
            assert!((g - e).abs() <= 1e-10 * e.abs().max(1.0));
        }
    }

    #[test]
    fn grouped_equals_columnwise_bitwise() {
        let m = model(0.5);
        let grid = Grid::gauss_legendre(-1.0, 3.0, 48).unwrap();
        let k = KernelMatrix::assemble(&m, &grid).unwrap();
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|c| grid.nodes().iter().map(|x| (x * (c + 1) as f64).sin() + 1.0).collect())
            .collect();
        let grouped = k.solve_grouped(&cols).unwrap();
        for (c, col) in cols.iter().enumerate() {
            assert_eq!(grouped[c], k.solve(col).unwrap());
        }
    }

    #[test]
    fn dimension_and_interval_checks() {
        let grid = Grid::gauss_legendre(0.0, 1.0, 8).unwrap();
        let k = KernelMatrix::assemble(&model(1.0), &grid).unwrap();
        assert!(matches!(
            k.solve_grouped(&[vec![0.0; 8], vec![0.0; 7]]),
            Err(Error::DimensionMismatch {
                index: 1,
                got: 7,
                expected: 8
            })
        ));
        assert!(matches!(
            k.nystrom_extend(&[0.0; 8], |_| 1.0, 1.5),
            Err(Error::OutOfInterval { .. })
        ));
    }

    #[test]
    fn extension_reproduces_node_values() {
        let m = model(1.0);
        let grid = Grid::gauss_legendre(0.0, 4.0, 96).unwrap();
        let k = KernelMatrix::assemble(&m, &grid).unwrap();
        let u = k.solve(&vec![1.0; 96]).unwrap();
        for (idx, &x) in grid.nodes().iter().enumerate() {
            let e = k.nystrom_extend(&u, |_| 1.0, x).unwrap();
            assert!((e - u[idx]).abs() <= 1e-10 * u[idx]);
        }
    }

    #[test]
    fn zero_kernel_extends_to_inhomogeneous_term() {
        let grid = Grid::gauss_legendre(-1.0, 1.0, 5).unwrap();
        let k = KernelMatrix::from_fn(&grid, |_| 0.0).unwrap();
        let u = k.solve(&[1.0; 5]).unwrap();
        for x in [-1.0, -0.3, 0.0, 0.77, 1.0] {
            assert_eq!(k.nystrom_extend(&u, |_| 1.0, x).unwrap(), 1.0);
        }
    }

    #[test]
    fn near_unit_spectral_radius_is_singular() {
        // a kernel that integrates to one over the whole grid makes I - K singular
        let grid = Grid::gauss_legendre(0.0, 1.0, 16).unwrap();
        let err = KernelMatrix::from_fn(&grid, |_| 1.0).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }), "{err:?}");
    }
}
