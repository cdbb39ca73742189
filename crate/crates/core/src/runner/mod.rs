//! Orchestration: deterministic fan-out of trajectories over worker threads,
//! reduction of their moments, and the run report.
//!
//! Trajectory `i` always uses the random stream `(master_seed, i)` and belongs
//! to a fixed contiguous batch. Batches are reduced in index order, so every
//! output byte is a function of the configuration alone, whatever the worker
//! count.

mod compare;
mod config;
mod output;

use std::ops::Range;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Integrator, TrajectoryState};
use crate::error::{Error, Result};
use crate::model::Representation;
use crate::observables::{finalize, MomentAccumulator, SampleGrid, TimeSeries};
use crate::rng::TrajectoryRng;
use crate::sampling::sample_initial;

pub use compare::{compare_runs, Agreement, CompareOptions, ObservableAgreement, OBSERVABLES};
pub use config::{
    parse_config, OutputPaths, RunConfig, DEFAULT_BATCHES, DEFAULT_POSITIVE_P_TRAJECTORIES,
    DEFAULT_WIGNER_TRAJECTORIES,
};
pub use output::{emit_outputs, read_table, write_table, TABLE_COLUMNS};

/// Overall verdict of a run, mapped onto CLI exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    ConvergedWithWarnings,
    /// At least one positive-P trajectory diverged.
    DivergenceInvalidated,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Converged => 0,
            RunStatus::ConvergedWithWarnings => 2,
            RunStatus::DivergenceInvalidated => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceHistogram {
    /// `counts.len() + 1` edges spanning [0, t_p].
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Largest |imaginary part| / stderr of the positive-P estimators over the
/// grid. Means of positive-P estimators are only real for an infinite
/// ensemble.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImaginaryDiagnostics {
    pub populations: [f64; 3],
    pub xi13: f64,
}

/// Change of each observable when dt is halved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtHalving {
    /// N1, N2, N3, xi13.
    pub max_abs_delta: [f64; 4],
    /// Largest |delta| / stderr(fine run) over the grid; infinite when the
    /// observable has no statistical error.
    pub max_delta_over_stderr: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub wall_time_s: f64,
    pub trajectories_started: u64,
    pub trajectories_completed: u64,
    pub divergence_count: u64,
    pub divergence_histogram: DivergenceHistogram,
    pub imaginary: ImaginaryDiagnostics,
    pub dt_halving: Option<DtHalving>,
    pub warnings: Vec<String>,
    pub status: RunStatus,
    /// True when no trajectory diverged.
    pub converged: bool,
}

const HISTOGRAM_BINS: usize = 20;

/// Batch holding trajectory `index` when `n` trajectories are split into
/// `batches` contiguous blocks.
pub fn batch_of(index: u64, n: u64, batches: usize) -> usize {
    (((index as u128 + 1) * batches as u128 - 1) / n as u128) as usize
}

/// First trajectory index of `batch`.
pub fn batch_start(batch: usize, n: u64, batches: usize) -> u64 {
    (batch as u128 * n as u128 / batches as u128) as u64
}

fn grid_of(config: &RunConfig) -> SampleGrid {
    SampleGrid {
        t_p: config.model.t_p,
        intervals: config.integration.sample_intervals(),
    }
}

/// Moments of trajectories `range`, plus the divergence step of each
/// divergent one.
#[derive(Clone, Debug)]
pub struct PartialRun {
    pub moments: MomentAccumulator,
    pub diverged_steps: Vec<usize>,
}

impl PartialRun {
    pub fn merge(mut self, other: PartialRun) -> Result<PartialRun> {
        self.moments = self.moments.merge(other.moments)?;
        self.diverged_steps.extend(other.diverged_steps);
        Ok(self)
    }
}

fn integrator_for(config: &RunConfig) -> Integrator {
    Integrator::new(config.model.clone(), config.integration.clone())
}

fn run_range(config: &RunConfig, integrator: &Integrator, range: Range<u64>) -> Result<PartialRun> {
    let mut moments = MomentAccumulator::new(config.representation, grid_of(config));
    let mut diverged_steps = Vec::new();
    let n = config.n_trajectories;
    let mut i = range.start;
    while i < range.end {
        let batch = batch_of(i, n, config.n_batches);
        let end = batch_start(batch + 1, n, config.n_batches).min(range.end);
        let sums = moments.batch_mut(batch);
        for idx in i..end {
            let mut rng = TrajectoryRng::new(config.master_seed, idx);
            let amps = sample_initial(&config.initial, config.representation, &mut rng)?;
            let state = TrajectoryState::new(config.representation, amps)?;
            let summary = integrator.integrate(state, &mut rng, |s, a| sums[s].record(a))?;
            if let Some(k) = summary.diverged_at {
                diverged_steps.push(k);
            }
        }
        i = end;
    }
    Ok(PartialRun {
        moments,
        diverged_steps,
    })
}

/// Integrates trajectories `range` of `config` on the calling thread.
pub fn accumulate_range(config: &RunConfig, range: Range<u64>) -> Result<PartialRun> {
    run_range(config, &integrator_for(config), range)
}

fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    builder
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))
}

/// Runs every trajectory, one batch per task, and reduces the batches in
/// index order.
pub fn simulate(config: &RunConfig) -> Result<PartialRun> {
    let integrator = integrator_for(config);
    let n = config.n_trajectories;
    let b = config.n_batches;
    let pool = thread_pool(config.workers)?;
    let parts: Vec<PartialRun> = pool.install(|| {
        (0..b)
            .into_par_iter()
            .map(|batch| {
                let range = batch_start(batch, n, b)..batch_start(batch + 1, n, b);
                run_range(config, &integrator, range)
            })
            .collect::<Result<_>>()
    })?;
    let empty = PartialRun {
        moments: MomentAccumulator::new(config.representation, grid_of(config)),
        diverged_steps: Vec::new(),
    };
    parts.into_iter().try_fold(empty, PartialRun::merge)
}

fn imaginary_diagnostics(acc: &MomentAccumulator, ts: &TimeSeries) -> Result<ImaginaryDiagnostics> {
    let mut out = ImaginaryDiagnostics::default();
    if acc.representation() != Representation::PositiveP {
        return Ok(out);
    }
    let counts = acc.counts();
    let ratio = |im: f64, se: f64| if se > 0.0 { im.abs() / se } else if im == 0.0 { 0.0 } else { f64::INFINITY };
    for i in 0..ts.len() {
        if counts[i] == 0 {
            continue;
        }
        for j in 0..3 {
            let r = ratio(acc.population_imag(j, i)?, ts.populations[j][i].stderr);
            out.populations[j] = out.populations[j].max(r);
        }
        out.xi13 = out.xi13.max(ratio(acc.xi13_imag(i)?, ts.xi13[i].stderr));
    }
    Ok(out)
}

/// Executes `config` and returns the time series with its report.
pub fn run(config: &RunConfig) -> Result<(TimeSeries, RunReport)> {
    let start = Instant::now();
    let partial = simulate(config)?;
    let counts = partial.moments.counts();
    let started = counts[0];
    let diverged = partial.diverged_steps.len() as u64;
    if started > 0 && diverged == started {
        return Err(Error::AllDiverged(started as usize));
    }
    let ts = finalize(&partial.moments)?;
    let imaginary = imaginary_diagnostics(&partial.moments, &ts)?;

    let steps = config.integration.steps;
    let mut hist = vec![0u64; HISTOGRAM_BINS];
    for &k in &partial.diverged_steps {
        let bin = ((k.saturating_sub(1)) * HISTOGRAM_BINS / steps).min(HISTOGRAM_BINS - 1);
        hist[bin] += 1;
    }
    let bin_edges = (0..=HISTOGRAM_BINS)
        .map(|i| config.model.t_p * i as f64 / HISTOGRAM_BINS as f64)
        .collect();

    let mut warnings = config.warnings.clone();
    if diverged > 0 {
        warnings.push(format!(
            "{diverged} of {started} trajectories diverged and were excluded from later samples"
        ));
    }
    let status = if diverged > 0 {
        RunStatus::DivergenceInvalidated
    } else if !warnings.is_empty() {
        RunStatus::ConvergedWithWarnings
    } else {
        RunStatus::Converged
    };
    let report = RunReport {
        config: config.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
        trajectories_started: started,
        trajectories_completed: started - diverged,
        divergence_count: diverged,
        divergence_histogram: DivergenceHistogram {
            bin_edges,
            counts: hist,
        },
        imaginary,
        dt_halving: None,
        warnings,
        status,
        converged: diverged == 0,
    };
    log::info!(
        "{} run: {} trajectories in {:.2} s, {} diverged",
        config.representation,
        started,
        report.wall_time_s,
        diverged
    );
    Ok((ts, report))
}

/// Runs `config` at its step and at half its step and reports how much each
/// observable moves. Positive-P runs reuse the same Brownian path on both
/// grids: the coarse run sums pairs of the fine increments.
pub fn dt_halving_check(config: &RunConfig) -> Result<(TimeSeries, TimeSeries, DtHalving)> {
    let mut coarse = config.clone();
    coarse.integration.noise_substeps *= 2;
    let mut fine = config.clone();
    fine.integration = config.integration.halved(config.model.t_p);
    let (a, _) = run(&coarse)?;
    let (b, _) = run(&fine)?;
    let mut max_abs = [0.0f64; 4];
    let mut max_ratio = [0.0f64; 4];
    for i in 0..a.len() {
        let pairs = [
            (a.populations[0][i], b.populations[0][i]),
            (a.populations[1][i], b.populations[1][i]),
            (a.populations[2][i], b.populations[2][i]),
            (a.xi13[i], b.xi13[i]),
        ];
        for (k, (x, y)) in pairs.iter().enumerate() {
            let d = (x.value - y.value).abs();
            max_abs[k] = max_abs[k].max(d);
            let r = if y.stderr > 0.0 {
                d / y.stderr
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            max_ratio[k] = max_ratio[k].max(r);
        }
    }
    Ok((
        a,
        b,
        DtHalving {
            max_abs_delta: max_abs,
            max_delta_over_stderr: max_ratio,
        },
    ))
}
