//! Performance evaluation of the one-sided CUSUM chart and Wald's SPRT by
//! integral equations.
//!
//! The distribution of the one-step log-likelihood ratio under the
//! post-change regime is tied to the pre-change one by `K1(z) = e^z K0(z)`.
//! Every post-change equation can therefore be rewritten in terms of `K0`
//! alone, and both regimes are solved against one factorized kernel matrix:
//!
//! * [`sprt`]: ASN and OC functions `N0, P0, N1, P1` from one grouped solve.
//! * [`cusum`]: zero-state ARLs (two independent routes), the run-length
//!   survival function and its moments.
//! * [`mc_oracle`]: seeded, worker-count-independent Monte Carlo simulators
//!   used to check the analytic results.
//!
//! Boundaries, thresholds and headstarts are all in log-likelihood-ratio units.

pub mod baseline;
pub mod cusum;
pub mod discretization;
pub mod error;
pub mod instrument;
pub mod mc_oracle;
pub mod model;
pub mod sprt;

pub use cusum::{
    arl_direct, arl_via_sprt, run_length_moments, run_length_survival, ArlMethod, ArlPair, CusumConfig, CusumReport,
    MomentTable, SurvivalCurves,
};
pub use discretization::{assemble_kernel, build_grid, Grid, KernelMatrix};
pub use error::{Error, Result};
pub use mc_oracle::{simulate_cusum, simulate_sprt, SimOptions, SimResult, SprtSim};
pub use model::{Hypothesis, ModelKind, ObservationModel};
pub use sprt::{solve_characteristics, SolveDiagnostics, SprtConfig, SprtSolution, SprtValues};
