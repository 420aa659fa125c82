//! Reproducible Monte Carlo simulation of the SPRT and the CUSUM chart.
//!
//! Replications are cut into fixed chunks of [`CHUNK_SIZE`]. Chunk `c` draws
//! from ChaCha8 keyed by `seed` (via `seed_from_u64`) on stream `c`, so the
//! random numbers a replication sees depend only on `(seed, replication
//! index)`, never on how many workers ran. Chunk tallies are exact integer
//! sums merged in chunk order; results are bit-identical for any worker
//! count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cusum::CusumConfig;
use crate::error::{invalid, Error, Result};
use crate::model::{Hypothesis, ObservationModel};
use crate::sprt::SprtConfig;

pub const CHUNK_SIZE: u64 = 4096;

/// Replications in the pilot run that sizes the default step cap.
pub const PILOT_REPS: u64 = 1000;

/// Per-replication step limit inside the pilot run.
pub const PILOT_STEP_LIMIT: u64 = 1_000_000;

/// Largest tolerated fraction of replications that hit the step cap.
pub const MAX_CAP_FRACTION: f64 = 1e-3;

/// Key perturbation for the pilot stream, keeping it disjoint from the main run.
const PILOT_KEY: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub reps: u64,
    pub seed: u64,
    /// Worker threads; 0 lets rayon decide.
    pub workers: usize,
    /// Per-replication step cap; `None` uses 100x a pilot ARL estimate.
    pub step_cap: Option<u64>,
    /// Record `#{runs with RL > n}` for `n = 0..=horizon`.
    pub survival_horizon: Option<usize>,
}

impl SimOptions {
    pub fn new(reps: u64, seed: u64) -> Self {
        Self {
            reps,
            seed,
            workers: 0,
            step_cap: None,
            survival_horizon: None,
        }
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn step_cap(mut self, cap: u64) -> Self {
        self.step_cap = Some(cap);
        self
    }

    pub fn survival_horizon(mut self, horizon: usize) -> Self {
        self.survival_horizon = Some(horizon);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub mean: f64,
    pub std_error: f64,
    pub reps: u64,
    /// Sample mean of the squared statistic and its standard error (stopping
    /// times only; zero for indicator results).
    pub second_moment: f64,
    pub second_moment_std_error: f64,
    pub cap_hits: u64,
    pub step_cap: u64,
    /// `survival_counts[n]` = number of runs with run length `> n`.
    pub survival_counts: Option<Vec<u64>>,
}

impl SimResult {
    /// Empirical `Pr(RL > n)` and its binomial standard error.
    pub fn survival(&self, n: usize) -> Option<(f64, f64)> {
        let counts = self.survival_counts.as_ref()?;
        let p = *counts.get(n)? as f64 / self.reps as f64;
        Some((p, (p * (1.0 - p) / self.reps as f64).sqrt()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SprtSim {
    /// Stopping time.
    pub asn: SimResult,
    /// Indicator of a lower-boundary exit.
    pub oc: SimResult,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    count: u64,
    sum: [u128; 4],
    lower_exits: u64,
    cap_hits: u64,
    ends: Vec<u64>,
}

impl Tally {
    fn with_horizon(horizon: Option<usize>) -> Self {
        Self {
            ends: horizon.map(|h| vec![0; h + 1]).unwrap_or_default(),
            ..Self::default()
        }
    }

    fn record(&mut self, steps: u64, lower_exit: bool, capped: bool) {
        self.count += 1;
        let s = steps as u128;
        self.sum[0] += s;
        self.sum[1] += s * s;
        self.sum[2] += s * s * s;
        self.sum[3] += s * s * s * s;
        self.lower_exits += lower_exit as u64;
        self.cap_hits += capped as u64;
        if let Some(slot) = self.ends.get_mut(steps as usize) {
            *slot += 1;
        }
    }

    fn merge(mut self, other: &Tally) -> Self {
        self.count += other.count;
        for (a, b) in self.sum.iter_mut().zip(other.sum) {
            *a += b;
        }
        self.lower_exits += other.lower_exits;
        self.cap_hits += other.cap_hits;
        for (a, b) in self.ends.iter_mut().zip(&other.ends) {
            *a += b;
        }
        self
    }

    fn stopping_time(&self, step_cap: u64, horizon: Option<usize>) -> SimResult {
        let n = self.count as f64;
        let m: Vec<f64> = self.sum.iter().map(|&s| s as f64 / n).collect();
        let se = |mean: f64, mean_sq: f64| {
            if self.count < 2 {
                0.0
            } else {
                ((mean_sq - mean * mean).max(0.0) * n / (n - 1.0) / n).sqrt()
            }
        };
        let survival_counts = horizon.map(|_| {
            let mut remaining = self.count;
            self.ends
                .iter()
                .map(|&e| {
                    remaining -= e;
                    remaining
                })
                .collect()
        });
        SimResult {
            mean: m[0],
            std_error: se(m[0], m[1]),
            reps: self.count,
            second_moment: m[1],
            second_moment_std_error: se(m[1], m[3]),
            cap_hits: self.cap_hits,
            step_cap,
            survival_counts,
        }
    }

    fn lower_exit_fraction(&self, step_cap: u64) -> SimResult {
        let n = self.count as f64;
        let p = self.lower_exits as f64 / n;
        let std_error = if self.count < 2 {
            0.0
        } else {
            (p * (1.0 - p) / (n - 1.0)).sqrt()
        };
        SimResult {
            mean: p,
            std_error,
            reps: self.count,
            second_moment: 0.0,
            second_moment_std_error: 0.0,
            cap_hits: self.cap_hits,
            step_cap,
            survival_counts: None,
        }
    }
}

/// RNG for chunk `chunk` of the run keyed by `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Runs `reps` replications of `one_run` in chunks and merges the tallies.
fn run_chunks<F>(reps: u64, seed: u64, workers: usize, horizon: Option<usize>, one_run: F) -> Tally
where
    F: Fn(&mut ChaCha8Rng) -> (u64, bool, bool) + Sync,
{
    let chunks = reps.div_ceil(CHUNK_SIZE);
    let run_chunk = |c: u64| {
        let mut rng = chunk_rng(seed, c);
        let mut tally = Tally::with_horizon(horizon);
        let len = CHUNK_SIZE.min(reps - c * CHUNK_SIZE);
        for _ in 0..len {
            let (steps, lower, capped) = one_run(&mut rng);
            tally.record(steps, lower, capped);
        }
        tally
    };
    let tallies: Vec<Tally> = if workers == 1 {
        (0..chunks).map(run_chunk).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        pool.install(|| (0..chunks).into_par_iter().map(run_chunk).collect())
    };
    tallies.iter().fold(Tally::with_horizon(horizon), |acc, t| acc.merge(t))
}

fn sprt_run(
    model: &ObservationModel,
    hyp: Hypothesis,
    a: f64,
    b: f64,
    start: f64,
    cap: u64,
    rng: &mut ChaCha8Rng,
) -> (u64, bool, bool) {
    let mut z = start;
    let mut n = 0;
    loop {
        n += 1;
        z += model.sample_log_lr(hyp, rng);
        if z <= a {
            return (n, true, false);
        }
        if z >= b {
            return (n, false, false);
        }
        if n >= cap {
            return (n, false, true);
        }
    }
}

fn cusum_run(
    model: &ObservationModel,
    hyp: Hypothesis,
    h: f64,
    w: f64,
    cap: u64,
    rng: &mut ChaCha8Rng,
) -> (u64, bool, bool) {
    let mut stat = w;
    let mut n = 0;
    loop {
        n += 1;
        stat = (stat + model.sample_log_lr(hyp, rng)).max(0.0);
        if stat >= h {
            return (n, false, false);
        }
        if n >= cap {
            return (n, false, true);
        }
    }
}

fn check_reps(reps: u64) -> Result<()> {
    if reps == 0 {
        Err(invalid("reps must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_cap(tally: &Tally, cap: u64) -> Result<()> {
    let fraction = tally.cap_hits as f64 / tally.count as f64;
    if fraction > MAX_CAP_FRACTION {
        return Err(Error::CapExceeded {
            cap,
            hits: tally.cap_hits,
            reps: tally.count,
            fraction,
        });
    }
    Ok(())
}

/// Default cap: 100 times the mean run length of a pilot run.
fn pilot_cap<F>(seed: u64, workers: usize, one_run: F) -> Result<u64>
where
    F: Fn(u64, &mut ChaCha8Rng) -> (u64, bool, bool) + Sync,
{
    let tally = run_chunks(PILOT_REPS, seed ^ PILOT_KEY, workers, None, |rng| {
        one_run(PILOT_STEP_LIMIT, rng)
    });
    if tally.cap_hits > 0 {
        return Err(Error::CapExceeded {
            cap: PILOT_STEP_LIMIT,
            hits: tally.cap_hits,
            reps: tally.count,
            fraction: tally.cap_hits as f64 / tally.count as f64,
        });
    }
    let mean = tally.sum[0] as f64 / tally.count as f64;
    Ok(((100.0 * mean).ceil() as u64).max(100))
}

/// ASN and OC of the SPRT started at `start`, by simulation.
///
/// `start` may sit on the lower boundary (the chart restarts there); it must
/// be below `b`.
pub fn simulate_sprt(config: &SprtConfig, hypothesis: Hypothesis, start: f64, options: &SimOptions) -> Result<SprtSim> {
    check_reps(options.reps)?;
    let (a, b) = (config.a(), config.b());
    if !(start >= a && start < b) {
        return Err(invalid(format!("start must lie in [{a}, {b}), got {start}")));
    }
    let model = *config.model();
    let run = |cap: u64, rng: &mut ChaCha8Rng| sprt_run(&model, hypothesis, a, b, start, cap, rng);
    let cap = match options.step_cap {
        Some(c) => c,
        None => pilot_cap(options.seed, options.workers, run)?,
    };
    let tally = run_chunks(options.reps, options.seed, options.workers, None, |rng| run(cap, rng));
    check_cap(&tally, cap)?;
    Ok(SprtSim {
        asn: tally.stopping_time(cap, None),
        oc: tally.lower_exit_fraction(cap),
    })
}

/// Run length of the CUSUM chart started at the configured headstart.
pub fn simulate_cusum(config: &CusumConfig, hypothesis: Hypothesis, options: &SimOptions) -> Result<SimResult> {
    check_reps(options.reps)?;
    let (h, w) = (config.h(), config.w());
    let model = *config.model();
    let run = |cap: u64, rng: &mut ChaCha8Rng| cusum_run(&model, hypothesis, h, w, cap, rng);
    let cap = match options.step_cap {
        Some(c) => c,
        None => pilot_cap(options.seed, options.workers, run)?,
    };
    let horizon = options.survival_horizon;
    let tally = run_chunks(options.reps, options.seed, options.workers, horizon, |rng| {
        run(cap, rng)
    });
    check_cap(&tally, cap)?;
    Ok(tally.stopping_time(cap, horizon))
}
