//! Seeded parameter sweeps and their CSV form.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use super::config::ScenarioConfig;
use super::pipeline::{run_pipeline, PipelineConfig};
use super::scenario::generate_scenario;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str =
    "pb_watts,n_uavs,seed,throughput_p11_bps,throughput_p14_bps,newton_iters,wall_ms";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub pb_watts: f64,
    pub n_uavs: usize,
    pub seed: u64,
    pub throughput_p11: f64,
    pub throughput_p14: f64,
    pub newton_iters: usize,
    /// Zero unless wall-time recording is enabled.
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; zero for a single trial.
    pub std: f64,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Stat {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Stat::default();
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat { mean, std }
    }

    /// Standard error of the mean over `n` trials.
    pub fn std_error(&self, n: usize) -> f64 {
        self.std / (n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub pb_watts: f64,
    pub n_uavs: usize,
    pub trials: usize,
    pub p11: Stat,
    pub p14: Stat,
    pub newton_iters: Stat,
    pub wall_ms: Stat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Per-seed rows, grouped by `(pb, n)` in grid order and by seed within.
    pub rows: Vec<SweepRow>,
    /// One per grid point, same order as `rows`.
    pub aggregates: Vec<Aggregate>,
}

/// Runs the pipeline for every `(pb, n)` pair and `trials` seeds starting at
/// `base.seed`. Power budgets form the outer loop.
///
/// Trials run in parallel; the output order and contents do not depend on
/// scheduling.
pub fn run_sweep(
    base: &ScenarioConfig,
    pb_values: &[f64],
    n_values: &[usize],
) -> Result<SweepResult> {
    base.validate()?;
    let pbs = if pb_values.is_empty() {
        vec![base.power_budget_w]
    } else {
        pb_values.to_vec()
    };
    let ns = if n_values.is_empty() {
        vec![base.n_uavs]
    } else {
        n_values.to_vec()
    };

    let mut jobs = Vec::new();
    for &pb in &pbs {
        for &n in &ns {
            let cfg = ScenarioConfig {
                power_budget_w: pb,
                n_uavs: n,
                ..base.clone()
            };
            cfg.validate()?;
            for t in 0..base.trials {
                jobs.push(ScenarioConfig {
                    seed: base.seed.wrapping_add(t as u64),
                    ..cfg.clone()
                });
            }
        }
    }

    let rows = jobs
        .par_iter()
        .map(run_trial)
        .collect::<Result<Vec<SweepRow>>>()?;

    let aggregates = rows
        .chunks(base.trials)
        .map(|chunk| Aggregate {
            pb_watts: chunk[0].pb_watts,
            n_uavs: chunk[0].n_uavs,
            trials: chunk.len(),
            p11: Stat::of(chunk.iter().map(|r| r.throughput_p11)),
            p14: Stat::of(chunk.iter().map(|r| r.throughput_p14)),
            newton_iters: Stat::of(chunk.iter().map(|r| r.newton_iters as f64)),
            wall_ms: Stat::of(chunk.iter().map(|r| r.wall_ms)),
        })
        .collect();
    Ok(SweepResult { rows, aggregates })
}

/// Generates the scenario for `cfg.seed` and runs the pipeline on it.
pub fn run_trial(cfg: &ScenarioConfig) -> Result<SweepRow> {
    let wrap = |e: Error| e.in_scenario(cfg.seed, cfg.n_uavs);
    let start = Instant::now();
    let scenario = generate_scenario(cfg).map_err(wrap)?;
    let pcfg = PipelineConfig {
        power_budget_w: cfg.power_budget_w,
        edge_weight: cfg.edge_weight,
        solver: cfg.solver,
    };
    let out = run_pipeline(&scenario.topology, &pcfg).map_err(wrap)?;
    let wall_ms = if cfg.record_wall_time {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    Ok(SweepRow {
        pb_watts: cfg.power_budget_w,
        n_uavs: cfg.n_uavs,
        seed: cfg.seed,
        throughput_p11: out.throughput_p11,
        throughput_p14: out.throughput_p14,
        newton_iters: out.newton_iters,
        wall_ms,
    })
}

impl SweepResult {
    /// Writes per-seed rows, then for each grid point a `mean` and a `std`
    /// row in the `seed` column.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        wr.write_record(CSV_HEADER.split(','))?;
        for r in &self.rows {
            wr.write_record([
                r.pb_watts.to_string(),
                r.n_uavs.to_string(),
                r.seed.to_string(),
                r.throughput_p11.to_string(),
                r.throughput_p14.to_string(),
                r.newton_iters.to_string(),
                format!("{:.3}", r.wall_ms),
            ])?;
        }
        for a in &self.aggregates {
            for (label, pick) in [("mean", 0), ("std", 1)] {
                let f = |s: &Stat| if pick == 0 { s.mean } else { s.std };
                wr.write_record([
                    a.pb_watts.to_string(),
                    a.n_uavs.to_string(),
                    label.to_string(),
                    f(&a.p11).to_string(),
                    f(&a.p14).to_string(),
                    f(&a.newton_iters).to_string(),
                    format!("{:.3}", f(&a.wall_ms)),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}
