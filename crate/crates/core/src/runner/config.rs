//! Run configuration file.
//!
//! A TOML document with five sections. Every key is optional unless marked,
//! and unknown keys or sections are rejected.
//!
//! ```toml
//! [model]
//! omega = 10.0          # required
//! t_p = 40.0            # required
//! chi = 1e-3            # required
//! e = [0.0, 1.0, 0.0]   # default [0, 0.1 omega, 0]
//! n_total = 200.0       # default: mean atom number of [state]
//!
//! [state.well1]         # wells default to vacuum
//! kind = "coherent"     # "vacuum" | "coherent" | "fock"
//! mean_number = 200.0   # coherent: either mean_number (+ phase) ...
//! # alpha = [14.1, 0.0] # ... or the complex amplitude
//! # n = 200             # fock: number of atoms
//!
//! [integration]
//! dt = 0.00244          # default t_p/2^14 (positive-p: t_p/2^15), rounded down to fit the grid
//! sample_intervals = 400
//! divergence_factor = 1e6
//! midpoint_iterations = 3
//! noise_substeps = 1
//!
//! [run]
//! representation = "wigner"   # required: "gpe" | "wigner" | "positive-p"
//! trajectories = 100000       # default 1e5 wigner, 1e4 positive-p; gpe uses 1
//! seed = 1
//! batches = 100
//! workers = 4                 # default: all cores
//!
//! [output]
//! dir = "out"
//! table = "timeseries.tsv"
//! report = "report.json"
//! plot = true
//! ```

use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{IntegrationConfig, DEFAULT_SAMPLE_INTERVALS};
use crate::error::{Error, Result};
use crate::model::{ModelParams, Representation};
use crate::sampling::{InitialStateSpec, WellState};

pub const DEFAULT_BATCHES: usize = 100;
pub const DEFAULT_WIGNER_TRAJECTORIES: u64 = 100_000;
pub const DEFAULT_POSITIVE_P_TRAJECTORIES: u64 = 10_000;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    #[serde(default)]
    state: RawState,
    #[serde(default)]
    integration: RawIntegration,
    run: RawRun,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    omega: f64,
    t_p: f64,
    chi: f64,
    e: Option<[f64; 3]>,
    n_total: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    well1: Option<RawWell>,
    well2: Option<RawWell>,
    well3: Option<RawWell>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum WellKind {
    Vacuum,
    Coherent,
    Fock,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWell {
    kind: WellKind,
    alpha: Option<[f64; 2]>,
    mean_number: Option<f64>,
    phase: Option<f64>,
    n: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegration {
    dt: Option<f64>,
    sample_intervals: Option<usize>,
    divergence_factor: Option<f64>,
    midpoint_iterations: Option<usize>,
    noise_substeps: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    representation: Representation,
    trajectories: Option<u64>,
    seed: Option<u64>,
    batches: Option<usize>,
    workers: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    table: Option<String>,
    report: Option<String>,
    plot: Option<bool>,
}

/// Where a run writes its files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub dir: PathBuf,
    pub table: String,
    pub report: String,
    pub plot: bool,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            table: "timeseries.tsv".into(),
            report: "report.json".into(),
            plot: true,
        }
    }
}

impl OutputPaths {
    pub fn table_path(&self) -> PathBuf {
        self.dir.join(&self.table)
    }

    pub fn report_path(&self) -> PathBuf {
        self.dir.join(&self.report)
    }
}

/// A validated run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelParams,
    pub representation: Representation,
    pub initial: InitialStateSpec,
    pub integration: IntegrationConfig,
    pub n_trajectories: u64,
    pub master_seed: u64,
    pub n_batches: usize,
    /// Worker threads; `None` uses every available core. Results do not
    /// depend on this value.
    pub workers: Option<usize>,
    pub output: OutputPaths,
    /// Non-fatal findings from validation.
    pub warnings: Vec<String>,
}

impl RunConfig {
    /// Builds and validates a configuration with default integration and
    /// batching settings.
    pub fn new(
        model: ModelParams,
        representation: Representation,
        initial: InitialStateSpec,
        n_trajectories: u64,
        master_seed: u64,
    ) -> Result<Self> {
        let integration =
            IntegrationConfig::new(&model, representation, None, DEFAULT_SAMPLE_INTERVALS)?;
        let mut cfg = Self {
            model,
            representation,
            initial,
            integration,
            n_trajectories,
            master_seed,
            n_batches: DEFAULT_BATCHES,
            workers: None,
            output: OutputPaths::default(),
            warnings: Vec::new(),
        };
        cfg.revalidate()?;
        Ok(cfg)
    }

    /// Re-applies every validation rule after fields were edited, replacing
    /// the warning list. Mean-field runs are forced to one trajectory.
    pub fn revalidate(&mut self) -> Result<()> {
        let checked = self.model.clone().validate(self.representation)?;
        let mut warnings = checked.warnings;
        warnings.extend(self.initial.check(self.representation)?);

        let mean = self.initial.mean_number();
        if (mean - self.model.n_total).abs() > 1e-9 * mean.max(1.0) {
            warnings.push(format!(
                "n_total = {} differs from the initial mean atom number {mean}",
                self.model.n_total
            ));
        }

        let mut bad = Vec::new();
        if self.representation.is_stochastic() {
            if self.n_batches < 2 {
                bad.push(format!("batches must be at least 2 (got {})", self.n_batches));
            }
            if self.n_trajectories < self.n_batches as u64 {
                bad.push(format!(
                    "trajectories ({}) must be at least batches ({})",
                    self.n_trajectories, self.n_batches
                ));
            }
        } else {
            self.n_trajectories = 1;
            self.n_batches = 1;
        }
        if self.workers == Some(0) {
            bad.push("workers must be at least 1".into());
        }
        let ic = &self.integration;
        if ic.steps == 0 || ic.sample_stride == 0 || ic.steps % ic.sample_stride != 0 {
            bad.push("integration steps must be a positive multiple of the sample stride".into());
        }
        if ic.midpoint_iterations == 0 || ic.noise_substeps == 0 {
            bad.push("midpoint_iterations and noise_substeps must be at least 1".into());
        }
        if !(ic.divergence_threshold > 0.0) {
            bad.push("divergence threshold must be positive".into());
        }
        if !bad.is_empty() {
            return Err(Error::Validation(bad));
        }
        self.warnings = warnings;
        Ok(())
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn parse_well(raw: Option<RawWell>, j: usize, bad: &mut Vec<String>) -> WellState {
    let Some(w) = raw else {
        return WellState::Vacuum;
    };
    let name = format!("state.well{}", j + 1);
    let mut unused = |field: &str, present: bool| {
        if present {
            bad.push(format!("{name}.{field} is not used by kind = {:?}", w.kind));
        }
    };
    match w.kind {
        WellKind::Vacuum => {
            unused("alpha", w.alpha.is_some());
            unused("mean_number", w.mean_number.is_some());
            unused("phase", w.phase.is_some());
            unused("n", w.n.is_some());
            WellState::Vacuum
        }
        WellKind::Fock => {
            unused("alpha", w.alpha.is_some());
            unused("mean_number", w.mean_number.is_some());
            unused("phase", w.phase.is_some());
            match w.n {
                Some(n) => WellState::Fock(n),
                None => {
                    bad.push(format!("{name}.n is required for a Fock state"));
                    WellState::Vacuum
                }
            }
        }
        WellKind::Coherent => {
            unused("n", w.n.is_some());
            match (w.alpha, w.mean_number) {
                (Some([re, im]), None) => {
                    if w.phase.is_some() {
                        bad.push(format!("{name}.phase cannot be combined with alpha"));
                    }
                    WellState::Coherent(Complex64::new(re, im))
                }
                (None, Some(n)) if n >= 0.0 => {
                    WellState::Coherent(Complex64::from_polar(n.sqrt(), w.phase.unwrap_or(0.0)))
                }
                (None, Some(n)) => {
                    bad.push(format!("{name}.mean_number must be non-negative (got {n})"));
                    WellState::Vacuum
                }
                _ => {
                    bad.push(format!(
                        "{name} needs exactly one of alpha or mean_number for a coherent state"
                    ));
                    WellState::Vacuum
                }
            }
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| line_col(text, s.start))
            .unwrap_or((0, 0));
        Error::Parse {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;

    let mut bad = Vec::new();
    let wells = [
        parse_well(raw.state.well1, 0, &mut bad),
        parse_well(raw.state.well2, 1, &mut bad),
        parse_well(raw.state.well3, 2, &mut bad),
    ];
    if !bad.is_empty() {
        return Err(Error::Validation(bad));
    }
    let initial = InitialStateSpec { wells };

    let mut model = ModelParams::new(raw.model.omega, raw.model.t_p, raw.model.chi, 0.0);
    if let Some(e) = raw.model.e {
        model.e = e;
    }
    model.n_total = raw.model.n_total.unwrap_or_else(|| initial.mean_number());
    let representation = raw.run.representation;
    // fail early with the model's own messages before building the grid
    model.clone().validate(representation)?;

    let ri = raw.integration;
    let mut integration = IntegrationConfig::new(
        &model,
        representation,
        ri.dt,
        ri.sample_intervals.unwrap_or(DEFAULT_SAMPLE_INTERVALS),
    )?;
    if let Some(f) = ri.divergence_factor {
        integration.divergence_threshold = f * model.n_total.max(1.0);
    }
    if let Some(m) = ri.midpoint_iterations {
        integration.midpoint_iterations = m;
    }
    if let Some(s) = ri.noise_substeps {
        integration.noise_substeps = s;
    }

    let n_trajectories = raw.run.trajectories.unwrap_or(match representation {
        Representation::Gpe => 1,
        Representation::Wigner => DEFAULT_WIGNER_TRAJECTORIES,
        Representation::PositiveP => DEFAULT_POSITIVE_P_TRAJECTORIES,
    });
    let defaults = OutputPaths::default();
    let output = OutputPaths {
        dir: raw.output.dir.unwrap_or(defaults.dir),
        table: raw.output.table.unwrap_or(defaults.table),
        report: raw.output.report.unwrap_or(defaults.report),
        plot: raw.output.plot.unwrap_or(defaults.plot),
    };

    let mut cfg = RunConfig {
        model,
        representation,
        initial,
        integration,
        n_trajectories,
        master_seed: raw.run.seed.unwrap_or(0),
        n_batches: raw.run.batches.unwrap_or(DEFAULT_BATCHES),
        workers: raw.run.workers,
        output,
        warnings: Vec::new(),
    };
    cfg.revalidate()?;
    Ok(cfg)
}
