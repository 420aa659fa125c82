//! `cusumkit`: CUSUM and SPRT performance evaluation from the command line.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(
    name = "cusumkit",
    version,
    about = "Integral-equation performance evaluation of the CUSUM chart and the SPRT"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct ChartArgs {
    /// Post-change mean shift of the Gaussian model.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: f64,
    /// Control limit (log-LR units).
    #[arg(long)]
    pub h: f64,
    /// Headstart, 0 <= w < h.
    #[arg(long, default_value_t = 0.0)]
    pub w: f64,
    /// Quadrature nodes.
    #[arg(long, default_value_t = cusumkit::discretization::DEFAULT_NODES)]
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    ViaSprt,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Chart {
    Cusum,
    Sprt,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// ASN and OC functions of the SPRT under both hypotheses.
    Sprt {
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        /// Lower boundary, a <= 0.
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        /// Upper boundary, b > 0.
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, default_value_t = cusumkit::discretization::DEFAULT_NODES)]
        n: usize,
        /// Evaluation points (repeat or comma-separate); default 11 points spanning [a, b].
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        at: Vec<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Zero-state ARLs L0(w; h) and L1(w; h).
    CusumArl {
        #[command(flatten)]
        chart: ChartArgs,
        #[arg(long, value_enum, default_value_t = Method::ViaSprt)]
        method: Method,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run-length survival function Pr(C > n) under both hypotheses.
    RlDist {
        #[command(flatten)]
        chart: ChartArgs,
        /// Last n reported; default ceil(5 * max ARL), capped at 10^6.
        #[arg(long)]
        n_max: Option<usize>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run-length moments E[C^k], k = 1..k_max.
    Moments {
        #[command(flatten)]
        chart: ChartArgs,
        #[arg(long, default_value_t = 2)]
        k_max: usize,
        #[arg(long, default_value_t = cusumkit::cusum::DEFAULT_TAIL_TOL)]
        tail_tol: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Monte Carlo estimates (workers capped by CUSUMKIT_THREADS).
    Simulate {
        #[arg(long, value_enum, default_value_t = Chart::Cusum)]
        chart: Chart,
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        w: f64,
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        b: Option<f64>,
        /// SPRT starting point.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        start: f64,
        #[arg(long, default_value_t = 100_000)]
        reps: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Per-replication step cap; default 100x a pilot estimate.
        #[arg(long)]
        step_cap: Option<u64>,
        /// Also report empirical Pr(RL > n) for n = 0..=n_max (CUSUM only).
        #[arg(long)]
        n_max: Option<usize>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Times the grouped single-factorization SPRT solve against two
    /// per-hypothesis factorize-and-solve passes.
    Bench {
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, value_delimiter = ',', default_values_t = vec![128usize, 256, 512, 1024])]
        sizes: Vec<usize>,
        /// Timed repetitions per size (median is reported).
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sprt {
            theta,
            a,
            b,
            n,
            at,
            out,
        } => commands::sprt(theta, a, b, n, &at).and_then(|r| commands::emit(&r, &out)),
        Command::CusumArl { chart, method, out } => {
            commands::cusum_arl(&chart, method).and_then(|r| commands::emit(&r, &out))
        }
        Command::RlDist { chart, n_max, out } => {
            commands::rl_dist(&chart, n_max).and_then(|r| commands::emit(&r, &out))
        }
        Command::Moments {
            chart,
            k_max,
            tail_tol,
            out,
        } => commands::moments(&chart, k_max, tail_tol).and_then(|r| commands::emit(&r, &out)),
        Command::Simulate {
            chart,
            theta,
            h,
            w,
            a,
            b,
            start,
            reps,
            seed,
            step_cap,
            n_max,
            out,
        } => {
            let sim = commands::SimulateArgs {
                chart,
                theta,
                h,
                w,
                a,
                b,
                start,
                reps,
                seed,
                step_cap,
                n_max,
            };
            commands::simulate(&sim).and_then(|r| commands::emit(&r, &out))
        }
        Command::Bench {
            theta,
            a,
            b,
            sizes,
            runs,
            out,
        } => commands::bench(theta, a, b, &sizes, runs).and_then(|r| commands::emit(&r, &out)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}
