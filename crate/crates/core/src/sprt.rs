//! ASN and OC functions of Wald's SPRT under both hypotheses.
//!
//! All four functions are solved against the single pre-change kernel `K0`.
//! The post-change pair is carried in exponentially tilted form: `e^x N1(x)`
//! and `e^x P1(x)` satisfy the same integral equation as `N0` and `P0`, with
//! right-hand sides `e^x` and `e^x F1(a - x)`. One factorization of
//! `I - K0` serves all four columns.

use serde::Serialize;

use crate::discretization::{dot, Grid, KernelMatrix};
use crate::error::{invalid, Error, Result};
use crate::instrument::{self, Counters};
use crate::model::ObservationModel;

/// Boundaries beyond this magnitude (log-LR units) would push `e^x` towards
/// overflow in the tilted right-hand sides.
pub const MAX_BOUNDARY: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SprtConfig {
    a: f64,
    b: f64,
    model: ObservationModel,
}

impl SprtConfig {
    pub fn new(a: f64, b: f64, model: ObservationModel) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(invalid(format!("boundaries must be finite, got a = {a}, b = {b}")));
        }
        if !(a <= 0.0 && 0.0 < b) {
            return Err(invalid(format!(
                "boundaries must satisfy a <= 0 < b, got a = {a}, b = {b}"
            )));
        }
        if b > MAX_BOUNDARY || a < -MAX_BOUNDARY {
            return Err(invalid(format!(
                "boundaries must lie within [-{MAX_BOUNDARY}, {MAX_BOUNDARY}] log-LR units, got a = {a}, b = {b}"
            )));
        }
        Ok(Self { a, b, model })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn model(&self) -> &ObservationModel {
        &self.model
    }

    /// Default Gauss-Legendre grid on `[a, b]`.
    pub fn grid(&self, n: usize) -> Result<Grid> {
        Grid::gauss_legendre(self.a, self.b, n)
    }
}

/// `N0, P0, N1, P1` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SprtValues {
    pub n0: f64,
    pub p0: f64,
    pub n1: f64,
    pub p1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveDiagnostics {
    pub grid_size: usize,
    pub condition_estimate: f64,
    pub assemblies: u64,
    pub factorizations: u64,
}

impl SolveDiagnostics {
    pub(crate) fn new(kernel: &KernelMatrix, counters: Counters) -> Self {
        Self {
            grid_size: kernel.dim(),
            condition_estimate: kernel.condition_estimate(),
            assemblies: counters.assemblies,
            factorizations: counters.factorizations,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SprtSolution {
    config: SprtConfig,
    kernel: KernelMatrix,
    n0: Vec<f64>,
    p0: Vec<f64>,
    /// `e^{x_j} N1(x_j)`
    n1_tilted: Vec<f64>,
    /// `e^{x_j} P1(x_j)`
    p1_tilted: Vec<f64>,
    n1: Vec<f64>,
    p1: Vec<f64>,
    diagnostics: SolveDiagnostics,
}

pub(crate) fn check_span(grid: &Grid, a: f64, b: f64) -> Result<()> {
    if grid.a() == a && grid.b() == b {
        Ok(())
    } else {
        Err(Error::GridMismatch {
            grid_a: grid.a(),
            grid_b: grid.b(),
            a,
            b,
        })
    }
}

/// The four right-hand sides `[1, F0(a-x), e^x, e^x F1(a-x)]` at the nodes.
pub(crate) fn grouped_rhs(model: &ObservationModel, a: f64, nodes: &[f64]) -> Vec<Vec<f64>> {
    vec![
        vec![1.0; nodes.len()],
        nodes.iter().map(|&x| model.f0(a - x)).collect(),
        nodes.iter().map(|&x| x.exp()).collect(),
        nodes.iter().map(|&x| x.exp() * model.f1(a - x)).collect(),
    ]
}

/// Solves for all four characteristics with one assembly and one
/// factorization of `I - K0`.
pub fn solve_characteristics(config: &SprtConfig, grid: &Grid) -> Result<SprtSolution> {
    check_span(grid, config.a, config.b)?;
    let start = instrument::snapshot();
    let kernel = KernelMatrix::assemble(&config.model, grid)?;
    let mut solution = SprtSolution::from_kernel(*config, kernel)?;
    solution.diagnostics = SolveDiagnostics::new(&solution.kernel, instrument::snapshot().since(start));
    Ok(solution)
}

impl SprtSolution {
    /// Solves against an already assembled `K0` matrix on `[a, b]`.
    pub(crate) fn from_kernel(config: SprtConfig, kernel: KernelMatrix) -> Result<Self> {
        check_span(kernel.grid(), config.a, config.b)?;
        let nodes = kernel.grid().nodes();
        let rhs = grouped_rhs(&config.model, config.a, nodes);
        let mut cols = kernel.solve_grouped(&rhs)?.into_iter();
        let (n0, p0, n1_tilted, p1_tilted) = (
            cols.next().unwrap(),
            cols.next().unwrap(),
            cols.next().unwrap(),
            cols.next().unwrap(),
        );
        let untilt = |v: &[f64]| -> Vec<f64> { v.iter().zip(nodes).map(|(&u, &x)| (-x).exp() * u).collect() };
        let n1 = untilt(&n1_tilted);
        let p1 = untilt(&p1_tilted);
        let diagnostics = SolveDiagnostics::new(&kernel, Counters::default());
        Ok(Self {
            config,
            kernel,
            n0,
            p0,
            n1_tilted,
            p1_tilted,
            n1,
            p1,
            diagnostics,
        })
    }

    pub fn config(&self) -> &SprtConfig {
        &self.config
    }

    pub fn grid(&self) -> &Grid {
        self.kernel.grid()
    }

    pub fn kernel(&self) -> &KernelMatrix {
        &self.kernel
    }

    pub fn diagnostics(&self) -> &SolveDiagnostics {
        &self.diagnostics
    }

    /// Node values of `N0`.
    pub fn n0(&self) -> &[f64] {
        &self.n0
    }

    pub fn p0(&self) -> &[f64] {
        &self.p0
    }

    pub fn n1(&self) -> &[f64] {
        &self.n1
    }

    pub fn p1(&self) -> &[f64] {
        &self.p1
    }

    /// All four functions at any `x` in `[a, b]`, by Nyström extension of
    /// each equation with its own inhomogeneous term.
    pub fn evaluate(&self, x: f64) -> Result<SprtValues> {
        self.kernel.check_inside(x)?;
        let model = &self.config.model;
        let a = self.config.a;
        let row = self.kernel.extension_row(x);
        let tilt = x.exp();
        let n1_tilted = tilt + dot(&row, &self.n1_tilted);
        let p1_tilted = tilt * model.f1(a - x) + dot(&row, &self.p1_tilted);
        Ok(SprtValues {
            n0: 1.0 + dot(&row, &self.n0),
            p0: model.f0(a - x) + dot(&row, &self.p0),
            n1: (-x).exp() * n1_tilted,
            p1: (-x).exp() * p1_tilted,
        })
    }
}
