//! Sweep orchestration over (policy, compromise-fraction) cells and
//! CSV / plot-data emission.
//!
//! A sweep flattens into independent (cell, run) jobs. With the
//! `parallel` feature the jobs run on rayon's pool; the sequential path
//! is always available and produces bit-identical output because every
//! job's seed derives from (master seed, policy, fraction, run index)
//! and aggregation folds results in job order.

use std::fmt::Write as _;
use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::engine::{aggregate, simulate_run, MetricsReport, RunMetrics};
use crate::error::{Error, Result};
use crate::rng::cell_seed;
use crate::routing::RoutingPolicy;

/// Compromise fractions matching the reference sweep.
pub const DEFAULT_FRACTIONS: [f64; 7] = [0.0, 0.05, 0.10, 0.20, 0.30, 0.40, 0.50];

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    /// Compromise fractions, ascending, each in [0, 1].
    pub fractions: Vec<f64>,
    /// Policies in declaration (output column) order.
    pub policies: Vec<RoutingPolicy>,
}

impl SweepSpec {
    pub fn new(base: ScenarioConfig) -> Self {
        SweepSpec {
            base,
            fractions: DEFAULT_FRACTIONS.to_vec(),
            policies: RoutingPolicy::ALL.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.policies.is_empty() {
            return Err(Error::config("sweep needs at least one policy"));
        }
        if self.fractions.is_empty() {
            return Err(Error::config("sweep needs at least one fraction"));
        }
        for pair in self.fractions.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::config(
                    "fractions must be strictly ascending",
                ));
            }
        }
        if self
            .fractions
            .iter()
            .any(|f| !(0.0..=1.0).contains(f))
        {
            return Err(Error::config("fractions must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Scenario for one cell: the base config with the cell's policy,
    /// fraction and derived seed.
    pub fn cell_config(&self, policy: RoutingPolicy, fraction: f64) -> ScenarioConfig {
        ScenarioConfig {
            policy,
            compromise_fraction: fraction,
            seed: cell_seed(self.base.seed, policy.id(), fraction),
            ..self.base.clone()
        }
    }
}

/// Results of a sweep, one [`MetricsReport`] per (policy, fraction) cell
/// in policy-major order.
#[derive(Clone, Debug)]
pub struct SweepTable {
    pub rows: Vec<MetricsReport>,
    pub policies: Vec<RoutingPolicy>,
    pub fractions: Vec<f64>,
    pub master_seed: u64,
}

impl SweepTable {
    pub fn row(&self, policy: RoutingPolicy, fraction_index: usize) -> &MetricsReport {
        let p = self
            .policies
            .iter()
            .position(|&q| q == policy)
            .expect("policy in sweep");
        &self.rows[p * self.fractions.len() + fraction_index]
    }
}

struct Job {
    cell: usize,
    run: u32,
}

fn execute(spec: &SweepSpec, parallel: bool) -> Result<SweepTable> {
    spec.validate()?;
    let mut cells = Vec::new();
    for &policy in &spec.policies {
        for &fraction in &spec.fractions {
            cells.push(spec.cell_config(policy, fraction));
        }
    }
    let jobs: Vec<Job> = cells
        .iter()
        .enumerate()
        .flat_map(|(cell, config)| (0..config.runs).map(move |run| Job { cell, run }))
        .collect();

    let run_job = |job: &Job| -> Result<RunMetrics> {
        let config = &cells[job.cell];
        simulate_run(config, job.run, false)
            .map(|(metrics, _)| metrics)
            .map_err(|e| {
                Error::Config(format!(
                    "cell {} f={:.2} run {}: {e}",
                    config.policy, config.compromise_fraction, job.run
                ))
            })
    };

    #[cfg(feature = "parallel")]
    let results: Result<Vec<RunMetrics>> = if parallel {
        jobs.par_iter().map(run_job).collect()
    } else {
        jobs.iter().map(run_job).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Result<Vec<RunMetrics>> = {
        let _ = parallel;
        jobs.iter().map(run_job).collect()
    };
    let results = results?;

    let rows = cells
        .iter()
        .enumerate()
        .map(|(i, config)| {
            let runs = config.runs as usize;
            aggregate(
                config.policy,
                config.compromise_fraction,
                &results[i * runs..(i + 1) * runs],
            )
        })
        .collect();
    Ok(SweepTable {
        rows,
        policies: spec.policies.clone(),
        fractions: spec.fractions.clone(),
        master_seed: spec.base.seed,
    })
}

/// Runs the sweep, data-parallel over (cell, run) jobs when built with
/// the `parallel` feature.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    execute(spec, true)
}

/// Single-threaded sweep; same results as [`run_sweep`], bit for bit.
pub fn run_sweep_sequential(spec: &SweepSpec) -> Result<SweepTable> {
    execute(spec, false)
}

/// Runs the sweep on a dedicated pool of `jobs` worker threads (0 uses
/// the default pool). Without the `parallel` feature this runs
/// sequentially regardless of `jobs`.
pub fn run_sweep_jobs(spec: &SweepSpec, jobs: usize) -> Result<SweepTable> {
    #[cfg(feature = "parallel")]
    {
        if jobs == 0 {
            return run_sweep(spec);
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot build a {jobs}-thread pool: {e}")))?;
        pool.install(|| run_sweep(spec))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        run_sweep_sequential(spec)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => String::new(),
    }
}

fn fmt_opt_plot(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "nan".to_owned(),
    }
}

/// Sweep results as CSV, one row per cell. Reals carry 6 decimals;
/// undefined ratios (nothing sent / nothing delivered) are empty fields.
pub fn csv_string(table: &SweepTable) -> String {
    let mut out =
        String::from("policy,fraction,pdr,drop_rate,throughput,avg_delay,messages_compromised,runs,seed\n");
    for row in &table.rows {
        let _ = writeln!(
            out,
            "{},{:.6},{},{},{:.6},{},{:.6},{},{}",
            row.policy,
            row.compromise_fraction,
            fmt_opt(row.pdr),
            fmt_opt(row.drop_rate),
            row.throughput,
            fmt_opt(row.avg_delay),
            row.messages_compromised_per_run(),
            row.runs,
            table.master_seed,
        );
    }
    out
}

pub fn emit_csv(table: &SweepTable, path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(table)).map_err(|e| Error::io(path, e))
}

/// The four figure data files as (name, content) pairs: rows are
/// fractions, columns are policies in declaration order,
/// whitespace-delimited with a header line.
pub fn plotdata_strings(table: &SweepTable) -> [(&'static str, String); 4] {
    let metric = |name: &'static str, get: fn(&MetricsReport) -> Option<f64>| {
        let mut out = String::from("fraction");
        for p in &table.policies {
            let _ = write!(out, " {p}");
        }
        out.push('\n');
        for (fi, fraction) in table.fractions.iter().enumerate() {
            let _ = write!(out, "{fraction:.6}");
            for &p in &table.policies {
                let _ = write!(out, " {}", fmt_opt_plot(get(table.row(p, fi))));
            }
            out.push('\n');
        }
        (name, out)
    };
    [
        metric("pdr.dat", |r| r.pdr),
        metric("drop.dat", |r| r.drop_rate),
        metric("throughput.dat", |r| Some(r.throughput)),
        metric("delay.dat", |r| r.avg_delay),
    ]
}

/// Writes `pdr.dat`, `drop.dat`, `throughput.dat` and `delay.dat` into
/// `dir`.
pub fn emit_plotdata(table: &SweepTable, dir: &Path) -> Result<()> {
    for (name, content) in plotdata_strings(table) {
        let path = dir.join(name);
        std::fs::write(&path, content).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
