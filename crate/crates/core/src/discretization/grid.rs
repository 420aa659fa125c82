use serde::Serialize;

use crate::error::{invalid, Result};

/// Largest supported node count; dense `n x n` storage beyond this is not
/// worth it.
pub const MAX_NODES: usize = 4096;

/// Node count used when the caller does not pick one.
pub const DEFAULT_NODES: usize = 256;

/// Gauss-Legendre nodes and weights on `[a, b]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn gauss_legendre(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(invalid(format!("interval endpoints must be finite, got [{a}, {b}]")));
        }
        if a >= b {
            return Err(invalid(format!("need a < b, got a = {a}, b = {b}")));
        }
        if n < 2 {
            return Err(invalid(format!("need at least 2 nodes, got {n}")));
        }
        if n > MAX_NODES {
            return Err(invalid(format!("at most {MAX_NODES} nodes supported, got {n}")));
        }
        let (t, wt) = legendre_rule(n);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let nodes = t.iter().map(|&t| mid + half * t).collect();
        let weights = wt.iter().map(|&w| half * w).collect();
        Ok(Self { a, b, nodes, weights })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }

    /// Quadrature approximation of `∫_a^b f`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// `build_grid` under its operational name.
pub fn build_grid(a: f64, b: f64, n: usize) -> Result<Grid> {
    Grid::gauss_legendre(a, b, n)
}

/// Evaluates `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let k = k as f64;
        let next = ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k;
        p_prev = p;
        p = next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Ascending nodes and weights on `[-1, 1]`.
fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi's initial guess for the i-th largest root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..30 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 2.0 * f64::EPSILON {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_rule() {
        let g = Grid::gauss_legendre(-1.0, 1.0, 2).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert!((g.nodes()[0] + r).abs() < 1e-15);
        assert!((g.nodes()[1] - r).abs() < 1e-15);
        assert!((g.weights()[0] - 1.0).abs() < 1e-15);
        assert!((g.weights()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_length() {
        for n in [2, 3, 7, 64, 255, 256, 1024, 4096] {
            let g = Grid::gauss_legendre(0.0, 4.0, n).unwrap();
            let s: f64 = g.weights().iter().sum();
            assert!((s - 4.0).abs() < 1e-10, "n={n}: {s}");
            assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
            assert!(g.nodes().iter().all(|&x| x > 0.0 && x < 4.0));
            assert!(g.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn exact_on_cubics() {
        let g = Grid::gauss_legendre(0.0, 4.0, 64).unwrap();
        assert!((g.integrate(|y| y * y * y) - 64.0).abs() < 1e-12);
        // 3 nodes integrate degree 5 exactly
        let g = Grid::gauss_legendre(-1.0, 2.0, 3).unwrap();
        let exact = (2f64.powi(6) - 1.0) / 6.0;
        assert!((g.integrate(|y| y.powi(5)) - exact).abs() < 1e-13);
    }

    #[test]
    fn odd_rule_has_midpoint_node() {
        let g = Grid::gauss_legendre(1.0, 3.0, 5).unwrap();
        assert_eq!(g.nodes()[2], 2.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_grid(1.0, 1.0, 8).is_err());
        assert!(build_grid(2.0, 1.0, 8).is_err());
        assert!(build_grid(0.0, 1.0, 1).is_err());
        assert!(build_grid(0.0, 1.0, MAX_NODES + 1).is_err());
        assert!(build_grid(f64::NEG_INFINITY, 1.0, 8).is_err());
    }
}
