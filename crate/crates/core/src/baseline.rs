//! The conventional two-pass solve, kept as a benchmark reference.
//!
//! Each hypothesis gets its own kernel matrix (`K0`, then `K1`), its own
//! factorization and a two-column solve. Production code paths never use
//! this; it exists to measure what the single grouped solve saves.

use serde::Serialize;

use crate::discretization::{Grid, KernelMatrix};
use crate::error::Result;
use crate::instrument::{self, Counters};
use crate::sprt::{check_span, SprtConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparateSolution {
    pub n0: Vec<f64>,
    pub p0: Vec<f64>,
    pub n1: Vec<f64>,
    pub p1: Vec<f64>,
    pub counters: Counters,
}

/// Node values of `N0, P0, N1, P1` from two independent
/// assemble-factorize-solve passes.
pub fn solve_separately(config: &SprtConfig, grid: &Grid) -> Result<SeparateSolution> {
    check_span(grid, config.a(), config.b())?;
    let start = instrument::snapshot();
    let model = *config.model();
    let a = config.a();
    let nodes = grid.nodes();

    let k0 = KernelMatrix::from_fn(grid, move |z| model.k0(z))?;
    let rhs0 = vec![vec![1.0; nodes.len()], nodes.iter().map(|&x| model.f0(a - x)).collect()];
    let mut h0 = k0.solve_grouped(&rhs0)?.into_iter();

    let k1 = KernelMatrix::from_fn(grid, move |z| model.k1(z))?;
    let rhs1 = vec![vec![1.0; nodes.len()], nodes.iter().map(|&x| model.f1(a - x)).collect()];
    let mut h1 = k1.solve_grouped(&rhs1)?.into_iter();

    Ok(SeparateSolution {
        n0: h0.next().unwrap(),
        p0: h0.next().unwrap(),
        n1: h1.next().unwrap(),
        p1: h1.next().unwrap(),
        counters: instrument::snapshot().since(start),
    })
}
