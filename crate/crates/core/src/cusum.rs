//! Zero-state performance of the generalized (headstarted) CUSUM chart.
//!
//! Everything here runs off one assembly of the pre-change kernel `K0` on
//! `[0, h]`. Post-change quantities are carried in tilted form `e^x u(x)`,
//! which turns their `K1` equations into `K0` equations. The reflection of
//! the statistic at zero shows up as the atom term `F_i(-x) u(0)`.

use serde::Serialize;

use crate::discretization::{dot, Grid, KernelMatrix};
use crate::error::{invalid, Error, Result};
use crate::instrument::{self, Counters};
use crate::model::{Hypothesis, ObservationModel};
use crate::sprt::{check_span, SolveDiagnostics, SprtConfig, SprtSolution, MAX_BOUNDARY};

/// `P_i(0; 0, h)` at or above `1 - DEGENERATE_OC_GAP` is rejected.
pub const DEGENERATE_OC_GAP: f64 = 1e-12;

/// Upper bound on the default survival horizon.
pub const MAX_SURVIVAL_STEPS: usize = 1_000_000;

/// Width of the window used to estimate the geometric tail ratio.
pub const RATIO_WINDOW: usize = 10;

/// Default relative stabilisation tolerance for the tail ratio.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CusumConfig {
    h: f64,
    w: f64,
    model: ObservationModel,
}

impl CusumConfig {
    pub fn new(h: f64, w: f64, model: ObservationModel) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid(format!("control limit h must be positive, got {h}")));
        }
        if h > MAX_BOUNDARY {
            return Err(invalid(format!(
                "control limit h must not exceed {MAX_BOUNDARY} log-LR units, got {h}"
            )));
        }
        if !(w.is_finite() && 0.0 <= w && w < h) {
            return Err(invalid(format!(
                "headstart must satisfy 0 <= w < h, got w = {w}, h = {h}"
            )));
        }
        Ok(Self { h, w, model })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn model(&self) -> &ObservationModel {
        &self.model
    }

    /// Gauss-Legendre grid on `[0, h]`.
    pub fn grid(&self, n: usize) -> Result<Grid> {
        Grid::gauss_legendre(0.0, self.h, n)
    }

    /// The SPRT with boundaries `0` and `h` that the chart repeats.
    pub fn sprt(&self) -> SprtConfig {
        SprtConfig::new(0.0, self.h, self.model).expect("0 < h <= MAX_BOUNDARY")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArlMethod {
    ViaSprt,
    Direct,
}

impl ArlMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ArlMethod::ViaSprt => "via-sprt",
            ArlMethod::Direct => "direct",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArlPair {
    pub arl0: f64,
    pub arl1: f64,
    pub method: ArlMethod,
    pub diagnostics: SolveDiagnostics,
}

impl ArlPair {
    pub fn get(&self, hypothesis: Hypothesis) -> f64 {
        match hypothesis {
            Hypothesis::H0 => self.arl0,
            Hypothesis::H1 => self.arl1,
        }
    }
}

fn assemble(config: &CusumConfig, grid: &Grid) -> Result<KernelMatrix> {
    check_span(grid, 0.0, config.h)?;
    KernelMatrix::assemble(&config.model, grid)
}

fn with_counters<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, Counters)> {
    let start = instrument::snapshot();
    let out = f()?;
    Ok((out, instrument::snapshot().since(start)))
}

/// ARLs through the renewal relation with the SPRT on `(0, h)`:
/// `L_i(w) = N_i(0) P_i(w) / (1 - P_i(0)) + N_i(w)`.
pub fn arl_via_sprt(config: &CusumConfig, grid: &Grid) -> Result<ArlPair> {
    let ((arl0, arl1, kernel), counters) = with_counters(|| {
        let kernel = assemble(config, grid)?;
        let (l0, l1) = via_sprt_from_kernel(config, &kernel)?;
        Ok((l0, l1, kernel))
    })?;
    Ok(ArlPair {
        arl0,
        arl1,
        method: ArlMethod::ViaSprt,
        diagnostics: SolveDiagnostics::new(&kernel, counters),
    })
}

fn via_sprt_from_kernel(config: &CusumConfig, kernel: &KernelMatrix) -> Result<(f64, f64)> {
    let sprt = SprtSolution::from_kernel(config.sprt(), kernel.clone())?;
    let at0 = sprt.evaluate(0.0)?;
    let atw = sprt.evaluate(config.w)?;
    let renewal = |hyp: u8, n_0: f64, p_0: f64, n_w: f64, p_w: f64| {
        if p_0 >= 1.0 - DEGENERATE_OC_GAP {
            return Err(Error::DegenerateGeometry {
                hypothesis: hyp,
                oc: p_0,
            });
        }
        Ok(n_0 * p_w / (1.0 - p_0) + n_w)
    };
    Ok((
        renewal(0, at0.n0, at0.p0, atw.n0, atw.p0)?,
        renewal(1, at0.n1, at0.p1, atw.n1, atw.p1)?,
    ))
}

/// ARLs from Page's renewal equation
/// `L_i(x) = 1 + L_i(0) F_i(-x) + ∫_0^h K_i(y - x) L_i(y) dy`,
/// collocated at the Gauss nodes plus one extra row at `x = 0`.
///
/// The bordered `(n+1)`-system is reduced to the `n x n` block `I - K0` by
/// eliminating `L_i(0)`, so both hypotheses share one factorization.
pub fn arl_direct(config: &CusumConfig, grid: &Grid) -> Result<ArlPair> {
    let ((arl0, arl1, kernel), counters) = with_counters(|| {
        let kernel = assemble(config, grid)?;
        let (l0, l1) = direct_from_kernel(config, &kernel, true)?;
        Ok((l0, l1, kernel))
    })?;
    Ok(ArlPair {
        arl0,
        arl1,
        method: ArlMethod::Direct,
        diagnostics: SolveDiagnostics::new(&kernel, counters),
    })
}

fn direct_from_kernel(config: &CusumConfig, kernel: &KernelMatrix, with_atom: bool) -> Result<(f64, f64)> {
    let model = &config.model;
    let nodes = kernel.grid().nodes();
    let atom_scale = if with_atom { 1.0 } else { 0.0 };
    // Right-hand sides and atom columns, H1 multiplied through by e^x.
    let rhs = vec![
        vec![1.0; nodes.len()],
        nodes.iter().map(|&x| atom_scale * model.f0(-x)).collect(),
        nodes.iter().map(|&x| x.exp()).collect(),
        nodes.iter().map(|&x| atom_scale * x.exp() * model.f1(-x)).collect(),
    ];
    let sol = kernel.solve_grouped(&rhs)?;
    let row0 = kernel.extension_row(0.0);
    let roww = kernel.extension_row(config.w);

    // Row at x = 0: s = 1 + F(0) s + k·u with u = alpha + beta s.
    let at_zero = |hyp: u8, f_at_0: f64, alpha: &[f64], beta: &[f64]| -> Result<f64> {
        let denom = 1.0 - atom_scale * f_at_0 - dot(&row0, beta);
        if denom <= DEGENERATE_OC_GAP {
            return Err(Error::DegenerateGeometry {
                hypothesis: hyp,
                oc: 1.0 - denom,
            });
        }
        Ok((1.0 + dot(&row0, alpha)) / denom)
    };
    let s0 = at_zero(0, model.f0(0.0), &sol[0], &sol[1])?;
    let s1 = at_zero(1, model.f1(0.0), &sol[2], &sol[3])?;
    let nodes_h0: Vec<f64> = sol[0].iter().zip(&sol[1]).map(|(a, b)| a + b * s0).collect();
    let nodes_h1: Vec<f64> = sol[2].iter().zip(&sol[3]).map(|(a, b)| a + b * s1).collect();

    let w = config.w;
    let l0 = 1.0 + atom_scale * model.f0(-w) * s0 + dot(&roww, &nodes_h0);
    let l1_tilted = w.exp() + atom_scale * w.exp() * model.f1(-w) * s1 + dot(&roww, &nodes_h1);
    Ok((l0, (-w).exp() * l1_tilted))
}

/// Joint run-length recursion for both hypotheses.
///
/// State holds the node values followed by the values at `x = 0` and
/// `x = w`. One step computes `v'(x) = F(-x) v(0) + Σ_j w_j K0(x_j - x) v_j`
/// at every state point for both hypotheses in a single sweep over the
/// matrix rows; the post-change state is tilted by `e^x`.
struct SurvivalRecursion {
    n: usize,
    /// `(n + 2) x n` rows: the kernel matrix, then the rows at 0 and w.
    rows: Vec<f64>,
    atom: [Vec<f64>; 2],
    state: [Vec<f64>; 2],
    next: [Vec<f64>; 2],
    untilt_w: f64,
}

impl SurvivalRecursion {
    fn new(config: &CusumConfig, kernel: &KernelMatrix) -> Self {
        let model = &config.model;
        let nodes = kernel.grid().nodes();
        let n = nodes.len();
        let w = config.w;
        let mut rows = Vec::with_capacity((n + 2) * n);
        rows.extend_from_slice(kernel.entries());
        rows.extend(kernel.extension_row(0.0));
        rows.extend(kernel.extension_row(w));

        let points: Vec<f64> = nodes.iter().copied().chain([0.0, w]).collect();
        let atom0 = points.iter().map(|&x| model.f0(-x)).collect();
        let atom1 = points.iter().map(|&x| x.exp() * model.f1(-x)).collect();
        let state1: Vec<f64> = points.iter().map(|&x| x.exp()).collect();
        Self {
            n,
            rows,
            atom: [atom0, atom1],
            state: [vec![1.0; n + 2], state1],
            next: [vec![0.0; n + 2], vec![0.0; n + 2]],
            untilt_w: (-w).exp(),
        }
    }

    fn step(&mut self) {
        let n = self.n;
        let (u0, u1) = (&self.state[0][..n], &self.state[1][..n]);
        let (z0, z1) = (self.state[0][n], self.state[1][n]);
        for (i, row) in self.rows.chunks_exact(n).enumerate() {
            let mut s0 = 0.0;
            let mut s1 = 0.0;
            for ((k, a), b) in row.iter().zip(u0).zip(u1) {
                s0 += k * a;
                s1 += k * b;
            }
            self.next[0][i] = self.atom[0][i] * z0 + s0;
            self.next[1][i] = self.atom[1][i] * z1 + s1;
        }
        std::mem::swap(&mut self.state, &mut self.next);
    }

    /// Current `Pr_i(C > step)` at the headstart.
    fn at_headstart(&self) -> [f64; 2] {
        let idx = self.n + 1;
        [self.state[0][idx], self.untilt_w * self.state[1][idx]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalCurves {
    /// `Pr_0(C > n)` for `n = 0..=n_max`.
    pub survival0: Vec<f64>,
    pub survival1: Vec<f64>,
    pub diagnostics: SolveDiagnostics,
}

impl SurvivalCurves {
    pub fn get(&self, hypothesis: Hypothesis) -> &[f64] {
        match hypothesis {
            Hypothesis::H0 => &self.survival0,
            Hypothesis::H1 => &self.survival1,
        }
    }
}

/// `Pr_i(C_h^w > n)` for `n = 0..=n_max`, both hypotheses.
pub fn run_length_survival(config: &CusumConfig, grid: &Grid, n_max: usize) -> Result<SurvivalCurves> {
    if n_max < 1 {
        return Err(invalid("n_max must be at least 1"));
    }
    let ((s0, s1, kernel), counters) = with_counters(|| {
        let kernel = assemble(config, grid)?;
        let (s0, s1) = survival_from_kernel(config, &kernel, n_max);
        Ok((s0, s1, kernel))
    })?;
    Ok(SurvivalCurves {
        survival0: s0,
        survival1: s1,
        diagnostics: SolveDiagnostics::new(&kernel, counters),
    })
}

fn survival_from_kernel(config: &CusumConfig, kernel: &KernelMatrix, n_max: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rec = SurvivalRecursion::new(config, kernel);
    let mut s0 = Vec::with_capacity(n_max + 1);
    let mut s1 = Vec::with_capacity(n_max + 1);
    s0.push(1.0);
    s1.push(1.0);
    for _ in 0..n_max {
        rec.step();
        let [a, b] = rec.at_headstart();
        s0.push(a);
        s1.push(b);
    }
    (s0, s1)
}

/// `ceil(5 * arl)` clamped to `[1, MAX_SURVIVAL_STEPS]`.
pub fn default_survival_horizon(arl: f64) -> usize {
    let n = (5.0 * arl).ceil();
    if n.is_finite() {
        (n as usize).clamp(1, MAX_SURVIVAL_STEPS)
    } else {
        MAX_SURVIVAL_STEPS
    }
}

/// Moments `E_i[C^k]` for `k = 1..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTable {
    /// `moments0[k - 1] = E_0[C^k]`.
    pub moments0: Vec<f64>,
    pub moments1: Vec<f64>,
    /// Estimated geometric decay ratio of the survival tail.
    pub rho0: f64,
    pub rho1: f64,
    /// Number of survival terms summed before the geometric tail took over.
    pub steps0: usize,
    pub steps1: usize,
    pub diagnostics: SolveDiagnostics,
}

impl MomentTable {
    pub fn moments(&self, hypothesis: Hypothesis) -> &[f64] {
        match hypothesis {
            Hypothesis::H0 => &self.moments0,
            Hypothesis::H1 => &self.moments1,
        }
    }

    pub fn rho(&self, hypothesis: Hypothesis) -> f64 {
        match hypothesis {
            Hypothesis::H0 => self.rho0,
            Hypothesis::H1 => self.rho1,
        }
    }
}

/// Moments of the run length, by summing
/// `((n+1)^k - n^k) Pr_i(C > n)` over the survival recursion and closing the
/// tail geometrically once the decay ratio stabilises to within `tail_tol`.
pub fn run_length_moments(config: &CusumConfig, grid: &Grid, k_max: usize, tail_tol: f64) -> Result<MomentTable> {
    check_moment_args(k_max, tail_tol)?;
    let ((table, kernel), counters) = with_counters(|| {
        let kernel = assemble(config, grid)?;
        let (l0, l1) = via_sprt_from_kernel(config, &kernel)?;
        let table = moments_from_kernel(config, &kernel, k_max, tail_tol, [l0, l1])?;
        Ok((table, kernel))
    })?;
    Ok(MomentTable {
        diagnostics: SolveDiagnostics::new(&kernel, counters),
        ..table
    })
}

fn check_moment_args(k_max: usize, tail_tol: f64) -> Result<()> {
    if k_max < 1 {
        return Err(invalid("k_max must be at least 1"));
    }
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(invalid(format!("tail tolerance must lie in (0, 1), got {tail_tol}")));
    }
    Ok(())
}

/// `(n+1)^k - n^k` for `k = 1..=k_max`, expanded binomially to avoid
/// cancellation.
fn moment_increments(n: f64, k_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k_max);
    // powers[j] = n^j
    let powers: Vec<f64> = (0..k_max)
        .scan(1.0, |p, _| {
            let cur = *p;
            *p *= n;
            Some(cur)
        })
        .collect();
    for k in 1..=k_max {
        let mut binom = 1.0;
        let mut s = 0.0;
        for (j, &p) in powers.iter().enumerate().take(k) {
            s += binom * p;
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
        out.push(s);
    }
    out
}

/// `Σ_{m>=1} ((N+m+1)^k - (N+m)^k) ρ^m` for `k = 1..=k_max`, in closed form.
///
/// With `T_j = Σ_{m>=1} m^j ρ^m`, the sums obey
/// `(1-ρ) T_j = ρ (1 + Σ_{i=0}^{j-1} C(j,i) T_i)` for `j >= 1`, `T_0 = ρ/(1-ρ)`;
/// the increment is a polynomial in `m` whose coefficients come from the
/// binomial expansion around `N`.
pub fn geometric_tail_weights(last: usize, rho: f64, k_max: usize) -> Vec<f64> {
    if rho <= 0.0 {
        return vec![0.0; k_max];
    }
    let q = 1.0 - rho;
    let binom = |n: usize, k: usize| -> f64 { (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64) };
    let mut t = Vec::with_capacity(k_max);
    t.push(rho / q);
    for j in 1..k_max {
        let mut s = 1.0 + t[0];
        for (i, ti) in t.iter().enumerate().skip(1) {
            s += binom(j, i) * ti;
        }
        t.push(rho * s / q);
    }
    let nn = last as f64;
    (1..=k_max)
        .map(|k| {
            // (N+1+m)^k - (N+m)^k = Σ_{j<k} C(k,j) m^j [(N+1)^{k-j} - N^{k-j}]
            (0..k)
                .map(|j| {
                    let e = (k - j) as i32;
                    binom(k, j) * ((nn + 1.0).powi(e) - nn.powi(e)) * t[j]
                })
                .sum()
        })
        .collect()
}

struct TailTracker {
    history: Vec<f64>,
    partial: Vec<f64>,
    prev_rho: Option<f64>,
    done: Option<(f64, usize, Vec<f64>)>,
}

impl TailTracker {
    fn new(k_max: usize) -> Self {
        Self {
            history: Vec::new(),
            partial: vec![0.0; k_max],
            prev_rho: None,
            done: None,
        }
    }

    /// Feeds `Pr(C > n)` for the next `n`; returns true once the tail is closed.
    fn push(&mut self, survival: f64, tail_tol: f64) -> bool {
        if self.done.is_some() {
            return true;
        }
        let n = self.history.len();
        let k_max = self.partial.len();
        for (acc, g) in self.partial.iter_mut().zip(moment_increments(n as f64, k_max)) {
            *acc += g * survival;
        }
        self.history.push(survival);
        if survival <= f64::MIN_POSITIVE {
            let rho = self.prev_rho.unwrap_or(0.0);
            self.done = Some((rho, n, self.partial.clone()));
            return true;
        }
        if n < RATIO_WINDOW {
            return false;
        }
        let rho = (survival / self.history[n - RATIO_WINDOW]).powf(1.0 / RATIO_WINDOW as f64);
        let stable = match self.prev_rho {
            Some(prev) => n >= 2 * RATIO_WINDOW && (rho - prev).abs() <= tail_tol * prev,
            None => false,
        };
        self.prev_rho = Some(rho);
        if stable && rho < 1.0 {
            let tail = geometric_tail_weights(n, rho, k_max);
            let moments = self.partial.iter().zip(tail).map(|(p, t)| p + survival * t).collect();
            self.done = Some((rho, n, moments));
            return true;
        }
        false
    }
}

fn moments_from_kernel(
    config: &CusumConfig,
    kernel: &KernelMatrix,
    k_max: usize,
    tail_tol: f64,
    arl_estimate: [f64; 2],
) -> Result<MomentTable> {
    let caps = arl_estimate.map(|l| ((10.0 * l).ceil() as usize).max(1000));
    let mut rec = SurvivalRecursion::new(config, kernel);
    let mut trackers = [TailTracker::new(k_max), TailTracker::new(k_max)];
    trackers[0].push(1.0, tail_tol);
    trackers[1].push(1.0, tail_tol);
    let mut step = 0;
    loop {
        let done0 = trackers[0].done.is_some();
        let done1 = trackers[1].done.is_some();
        if done0 && done1 {
            break;
        }
        for (h, tracker) in trackers.iter().enumerate() {
            if tracker.done.is_none() && step >= caps[h] {
                return Err(Error::NonConvergence {
                    hypothesis: h as u8,
                    steps: caps[h],
                });
            }
        }
        rec.step();
        step += 1;
        let s = rec.at_headstart();
        for (tracker, value) in trackers.iter_mut().zip(s) {
            tracker.push(value, tail_tol);
        }
    }
    let [t0, t1] = trackers;
    let (rho0, steps0, moments0) = t0.done.expect("closed");
    let (rho1, steps1, moments1) = t1.done.expect("closed");
    Ok(MomentTable {
        moments0,
        moments1,
        rho0,
        rho1,
        steps0,
        steps1,
        diagnostics: SolveDiagnostics::new(kernel, Counters::default()),
    })
}

/// ARLs, survival curves and moments from a single kernel assembly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CusumReport {
    pub arl0: f64,
    pub arl1: f64,
    pub survival0: Vec<f64>,
    pub survival1: Vec<f64>,
    pub moments: MomentTable,
    pub diagnostics: SolveDiagnostics,
}

impl CusumReport {
    /// `n_max = None` picks [`default_survival_horizon`] from the larger ARL.
    pub fn compute(
        config: &CusumConfig,
        grid: &Grid,
        n_max: Option<usize>,
        k_max: usize,
        tail_tol: f64,
    ) -> Result<Self> {
        check_moment_args(k_max, tail_tol)?;
        let (report, counters) = with_counters(|| {
            let kernel = assemble(config, grid)?;
            let (arl0, arl1) = via_sprt_from_kernel(config, &kernel)?;
            let horizon = n_max.unwrap_or_else(|| default_survival_horizon(arl0.max(arl1)));
            if horizon < 1 {
                return Err(invalid("n_max must be at least 1"));
            }
            let (survival0, survival1) = survival_from_kernel(config, &kernel, horizon);
            let moments = moments_from_kernel(config, &kernel, k_max, tail_tol, [arl0, arl1])?;
            Ok((arl0, arl1, survival0, survival1, moments, kernel))
        })?;
        let (arl0, arl1, survival0, survival1, moments, kernel) = report;
        let diagnostics = SolveDiagnostics::new(&kernel, counters);
        Ok(Self {
            arl0,
            arl1,
            survival0,
            survival1,
            moments: MomentTable { diagnostics, ..moments },
            diagnostics,
        })
    }
}

/// ARL at several headstarts from one kernel (via the SPRT relation).
pub fn arl_sweep(config: &CusumConfig, grid: &Grid, headstarts: &[f64]) -> Result<Vec<(f64, f64)>> {
    let kernel = assemble(config, grid)?;
    headstarts
        .iter()
        .map(|&w| {
            let c = CusumConfig::new(config.h, w, config.model)?;
            via_sprt_from_kernel(&c, &kernel)
        })
        .collect()
}
