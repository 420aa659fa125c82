//! Subcommand implementations: validate, compute, build a [`Report`].

use std::time::Instant;

use cusumkit::baseline::solve_separately;
use cusumkit::cusum::default_survival_horizon;
use cusumkit::{
    arl_direct, arl_via_sprt, run_length_moments, run_length_survival, simulate_cusum, simulate_sprt,
    solve_characteristics, CusumConfig, Error, Grid, Hypothesis, ObservationModel, SimOptions, SimResult,
    SolveDiagnostics, SprtConfig,
};
use serde_json::{json, Map, Value};

use crate::output::{num, Cell, Report};
use crate::{Chart, ChartArgs, Method, OutputArgs};

pub const THREADS_VAR: &str = "CUSUMKIT_THREADS";

/// Evaluation points used by `sprt` when `--at` is not given.
const DEFAULT_POINTS: usize = 11;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::InvalidParameter(_)
            | Error::OutOfInterval { .. }
            | Error::DimensionMismatch { .. }
            | Error::GridMismatch { .. } => 2,
            _ => 3,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn emit(report: &Report, out: &OutputArgs) -> CliResult<()> {
    report.emit(out.format, out.output.as_deref()).map_err(|e| CliError {
        code: 1,
        message: format!("writing output: {e}"),
    })
}

fn model(theta: f64) -> CliResult<ObservationModel> {
    Ok(ObservationModel::gaussian_shift(theta)?)
}

fn solve_diagnostics(report: &mut Report, d: &SolveDiagnostics) {
    report.diag("grid_size", json!(d.grid_size));
    report.diag("condition_estimate", num(d.condition_estimate));
    report.diag("assembly_count", json!(d.assemblies));
    report.diag("factorization_count", json!(d.factorizations));
}

fn chart_config(chart: &ChartArgs) -> CliResult<(CusumConfig, Grid)> {
    let config = CusumConfig::new(chart.h, chart.w, model(chart.theta)?)?;
    let grid = config.grid(chart.n)?;
    Ok((config, grid))
}

fn chart_spec(chart: &ChartArgs) -> Map<String, Value> {
    let mut spec = Map::new();
    spec.insert("theta".into(), num(chart.theta));
    spec.insert("h".into(), num(chart.h));
    spec.insert("w".into(), num(chart.w));
    spec.insert("n".into(), json!(chart.n));
    spec
}

pub fn sprt(theta: f64, a: f64, b: f64, n: usize, at: &[f64]) -> CliResult<Report> {
    let config = SprtConfig::new(a, b, model(theta)?)?;
    let grid = config.grid(n)?;
    let points: Vec<f64> = if at.is_empty() {
        let step = (b - a) / (DEFAULT_POINTS - 1) as f64;
        (0..DEFAULT_POINTS)
            .map(|i| {
                if i + 1 == DEFAULT_POINTS {
                    b
                } else {
                    a + step * i as f64
                }
            })
            .collect()
    } else {
        at.to_vec()
    };
    for &x in &points {
        if !(x >= a && x <= b) {
            return Err(CliError::usage(format!("--at {x} lies outside [a, b] = [{a}, {b}]")));
        }
    }
    let solution = solve_characteristics(&config, &grid)?;

    let mut spec = Map::new();
    spec.insert("theta".into(), num(theta));
    spec.insert("a".into(), num(a));
    spec.insert("b".into(), num(b));
    spec.insert("n".into(), json!(n));
    spec.insert("at".into(), Value::Array(points.iter().map(|&x| num(x)).collect()));
    let mut report = Report::new("sprt", spec, vec!["x", "N0", "P0", "N1", "P1"]);
    for &x in &points {
        let v = solution.evaluate(x)?;
        report.push(vec![x.into(), v.n0.into(), v.p0.into(), v.n1.into(), v.p1.into()]);
    }
    let mut labels = Map::new();
    labels.insert("N0".into(), json!("expected sample size under H0"));
    labels.insert("P0".into(), json!("probability of accepting H0 (lower exit) under H0"));
    labels.insert("N1".into(), json!("expected sample size under H1"));
    labels.insert("P1".into(), json!("probability of accepting H0 (lower exit) under H1"));
    report.labels = Some(labels);
    solve_diagnostics(&mut report, solution.diagnostics());
    Ok(report)
}

pub fn cusum_arl(chart: &ChartArgs, method: Method) -> CliResult<Report> {
    let (config, grid) = chart_config(chart)?;
    let pair = match method {
        Method::ViaSprt => arl_via_sprt(&config, &grid)?,
        Method::Direct => arl_direct(&config, &grid)?,
    };
    let mut spec = chart_spec(chart);
    spec.insert("method".into(), json!(pair.method.as_str()));
    let mut report = Report::new("cusum-arl", spec, vec!["h", "w", "L0", "L1", "method"]);
    report.push(vec![
        chart.h.into(),
        chart.w.into(),
        pair.arl0.into(),
        pair.arl1.into(),
        pair.method.as_str().into(),
    ]);
    solve_diagnostics(&mut report, &pair.diagnostics);
    Ok(report)
}

pub fn rl_dist(chart: &ChartArgs, n_max: Option<usize>) -> CliResult<Report> {
    let (config, grid) = chart_config(chart)?;
    let horizon = match n_max {
        Some(0) => return Err(CliError::usage("--n-max must be at least 1")),
        Some(n) => n,
        None => {
            let pair = arl_via_sprt(&config, &grid)?;
            default_survival_horizon(pair.arl0.max(pair.arl1))
        }
    };
    let curves = run_length_survival(&config, &grid, horizon)?;
    let mut spec = chart_spec(chart);
    spec.insert("n_max".into(), json!(horizon));
    let mut report = Report::new("rl-dist", spec, vec!["n", "survival0", "survival1"]);
    for (i, (&s0, &s1)) in curves.survival0.iter().zip(&curves.survival1).enumerate() {
        report.push(vec![i.into(), s0.into(), s1.into()]);
    }
    solve_diagnostics(&mut report, &curves.diagnostics);
    Ok(report)
}

pub fn moments(chart: &ChartArgs, k_max: usize, tail_tol: f64) -> CliResult<Report> {
    let (config, grid) = chart_config(chart)?;
    let table = run_length_moments(&config, &grid, k_max, tail_tol)?;
    let mut spec = chart_spec(chart);
    spec.insert("k_max".into(), json!(k_max));
    spec.insert("tail_tol".into(), num(tail_tol));
    let mut report = Report::new("moments", spec, vec!["k", "mu0", "mu1"]);
    for (k, (&m0, &m1)) in table.moments0.iter().zip(&table.moments1).enumerate() {
        report.push(vec![(k + 1).into(), m0.into(), m1.into()]);
    }
    report.diag("rho0", num(table.rho0));
    report.diag("rho1", num(table.rho1));
    report.diag("steps0", json!(table.steps0));
    report.diag("steps1", json!(table.steps1));
    solve_diagnostics(&mut report, &table.diagnostics);
    Ok(report)
}

/// Worker count from `CUSUMKIT_THREADS`; unset or 0 means automatic.
pub fn workers_from_env() -> CliResult<usize> {
    match std::env::var(THREADS_VAR) {
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(CliError::usage(format!("{THREADS_VAR}: {e}"))),
        Ok(v) if v.trim().is_empty() => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("{THREADS_VAR} must be a non-negative integer, got {v:?}"))),
    }
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub chart: Chart,
    pub theta: f64,
    pub h: Option<f64>,
    pub w: f64,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub start: f64,
    pub reps: u64,
    pub seed: u64,
    pub step_cap: Option<u64>,
    pub n_max: Option<usize>,
}

fn hyp_label(h: Hypothesis) -> &'static str {
    match h {
        Hypothesis::H0 => "H0",
        Hypothesis::H1 => "H1",
    }
}

fn sim_row(report: &mut Report, hyp: Hypothesis, quantity: &str, n: Option<usize>, mean: f64, se: f64, reps: u64) {
    report.push(vec![
        hyp_label(hyp).into(),
        quantity.into(),
        n.map_or(Cell::Empty, Cell::from),
        mean.into(),
        se.into(),
        reps.into(),
    ]);
}

fn cap_diagnostics(report: &mut Report, hyp: Hypothesis, r: &SimResult) {
    let i = hyp.index();
    report.diag(&format!("step_cap{i}"), json!(r.step_cap));
    report.diag(&format!("cap_hits{i}"), json!(r.cap_hits));
}

pub fn simulate(args: &SimulateArgs) -> CliResult<Report> {
    let workers = workers_from_env()?;
    let model = model(args.theta)?;
    let mut options = SimOptions::new(args.reps, args.seed).workers(workers);
    if let Some(cap) = args.step_cap {
        options = options.step_cap(cap);
    }
    let mut spec = Map::new();
    spec.insert(
        "chart".into(),
        json!(match args.chart {
            Chart::Cusum => "cusum",
            Chart::Sprt => "sprt",
        }),
    );
    spec.insert("theta".into(), num(args.theta));
    let columns = vec!["hypothesis", "quantity", "n", "mean", "std_error", "reps"];

    match args.chart {
        Chart::Cusum => {
            let h = args
                .h
                .ok_or_else(|| CliError::usage("simulate --chart cusum requires --h"))?;
            if args.a.is_some() || args.b.is_some() {
                return Err(CliError::usage("--a/--b apply to --chart sprt only"));
            }
            let config = CusumConfig::new(h, args.w, model)?;
            if let Some(n) = args.n_max {
                options = options.survival_horizon(n);
            }
            spec.insert("h".into(), num(h));
            spec.insert("w".into(), num(args.w));
            spec.insert("reps".into(), json!(args.reps));
            spec.insert("seed".into(), json!(args.seed));
            if let Some(cap) = args.step_cap {
                spec.insert("step_cap".into(), json!(cap));
            }
            if let Some(n) = args.n_max {
                spec.insert("n_max".into(), json!(n));
            }
            let mut report = Report::new("simulate", spec, columns);
            for hyp in Hypothesis::BOTH {
                let r = simulate_cusum(&config, hyp, &options)?;
                sim_row(&mut report, hyp, "arl", None, r.mean, r.std_error, r.reps);
                sim_row(
                    &mut report,
                    hyp,
                    "second_moment",
                    None,
                    r.second_moment,
                    r.second_moment_std_error,
                    r.reps,
                );
                if let Some(n_max) = args.n_max {
                    for n in 0..=n_max {
                        let (p, se) = r.survival(n).expect("horizon recorded");
                        sim_row(&mut report, hyp, "survival", Some(n), p, se, r.reps);
                    }
                }
                cap_diagnostics(&mut report, hyp, &r);
            }
            Ok(report)
        }
        Chart::Sprt => {
            let (a, b) = match (args.a, args.b) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(CliError::usage("simulate --chart sprt requires --a and --b")),
            };
            if args.h.is_some() || args.n_max.is_some() {
                return Err(CliError::usage("--h/--n-max apply to --chart cusum only"));
            }
            let config = SprtConfig::new(a, b, model)?;
            spec.insert("a".into(), num(a));
            spec.insert("b".into(), num(b));
            spec.insert("start".into(), num(args.start));
            spec.insert("reps".into(), json!(args.reps));
            spec.insert("seed".into(), json!(args.seed));
            if let Some(cap) = args.step_cap {
                spec.insert("step_cap".into(), json!(cap));
            }
            let mut report = Report::new("simulate", spec, columns);
            for hyp in Hypothesis::BOTH {
                let r = simulate_sprt(&config, hyp, args.start, &options)?;
                sim_row(&mut report, hyp, "asn", None, r.asn.mean, r.asn.std_error, r.asn.reps);
                sim_row(&mut report, hyp, "oc", None, r.oc.mean, r.oc.std_error, r.oc.reps);
                cap_diagnostics(&mut report, hyp, &r.asn);
            }
            Ok(report)
        }
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// One row of the benchmark table.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub n: usize,
    pub grouped_ms: f64,
    pub separate_ms: f64,
    pub grouped_factorizations: u64,
    pub separate_factorizations: u64,
    pub max_abs_diff: f64,
}

impl BenchRow {
    pub fn speedup(&self) -> f64 {
        self.separate_ms / self.grouped_ms
    }
}

pub fn bench_size(config: &SprtConfig, n: usize, runs: usize) -> CliResult<BenchRow> {
    let grid = config.grid(n)?;
    // Warm-up pass, also the one whose outputs are compared.
    let grouped = solve_characteristics(config, &grid)?;
    let separate = solve_separately(config, &grid)?;
    let diff = [
        max_abs_diff(grouped.n0(), &separate.n0),
        max_abs_diff(grouped.p0(), &separate.p0),
        max_abs_diff(grouped.n1(), &separate.n1),
        max_abs_diff(grouped.p1(), &separate.p1),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let mut t_grouped = Vec::with_capacity(runs);
    let mut t_separate = Vec::with_capacity(runs);
    for _ in 0..runs {
        let t = Instant::now();
        std::hint::black_box(solve_characteristics(config, &grid)?);
        t_grouped.push(t.elapsed().as_secs_f64() * 1e3);
        let t = Instant::now();
        std::hint::black_box(solve_separately(config, &grid)?);
        t_separate.push(t.elapsed().as_secs_f64() * 1e3);
    }
    Ok(BenchRow {
        n,
        grouped_ms: median(t_grouped),
        separate_ms: median(t_separate),
        grouped_factorizations: grouped.diagnostics().factorizations,
        separate_factorizations: separate.counters.factorizations,
        max_abs_diff: diff,
    })
}

pub fn bench(theta: f64, a: f64, b: f64, sizes: &[usize], runs: usize) -> CliResult<Report> {
    if runs < 5 {
        return Err(CliError::usage(format!("--runs must be at least 5, got {runs}")));
    }
    if sizes.is_empty() {
        return Err(CliError::usage("--sizes must list at least one grid size"));
    }
    let config = SprtConfig::new(a, b, model(theta)?)?;
    let mut spec = Map::new();
    spec.insert("theta".into(), num(theta));
    spec.insert("a".into(), num(a));
    spec.insert("b".into(), num(b));
    spec.insert("sizes".into(), json!(sizes));
    spec.insert("runs".into(), json!(runs));
    let mut report = Report::new(
        "bench",
        spec,
        vec![
            "n",
            "grouped_ms",
            "separate_ms",
            "speedup",
            "grouped_factorizations",
            "separate_factorizations",
            "max_abs_diff",
        ],
    );
    for &n in sizes {
        let row = bench_size(&config, n, runs)?;
        report.push(vec![
            row.n.into(),
            row.grouped_ms.into(),
            row.separate_ms.into(),
            row.speedup().into(),
            row.grouped_factorizations.into(),
            row.separate_factorizations.into(),
            row.max_abs_diff.into(),
        ]);
    }
    report.diag("timing", json!("wall-clock median over runs, milliseconds"));
    Ok(report)
}
