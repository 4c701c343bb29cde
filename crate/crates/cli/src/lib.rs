//! Batch front end for `alpha-lattice`: a TOML spec goes in; CSV tables, a
//! JSON summary, a text digest and a checksummed manifest come out.
//!
//! All randomness flows from `sim.seed`. Worker count and output location do
//! not enter the results, so the same resolved spec always produces the same
//! file checksums.

pub mod commands;
pub mod report;
pub mod spec;

use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

pub use report::{emit_report, Check, Report, RunInfo, RunManifest, Table};
pub use spec::{parse_spec, Command, ExperimentSpec, SpecError};

/// The shipped standard small model.
pub const STANDARD_SPEC: &str = include_str!("../specs/standard.toml");

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Per-invocation settings that do not change results, plus overrides that do
/// (and are therefore folded into the resolved spec).
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub paths: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub report: Report,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    pub fn pass(&self) -> bool {
        self.report.pass()
    }
}

/// Loads a spec document, or the spec embedded in a run manifest.
pub fn load_spec(path: &Path) -> Result<ExperimentSpec, RunError> {
    let io_err = |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    };
    let text = std::fs::read_to_string(path).map_err(io_err)?;
    if path.extension().is_some_and(|e| e == "json") {
        let m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| io_err(io::Error::new(io::ErrorKind::InvalidData, e)))?;
        let mut spec = parse_spec(&m.spec)?;
        if spec.output_dir.is_none() {
            spec.output_dir = m.output_dir;
        }
        return Ok(spec);
    }
    Ok(parse_spec(&text)?)
}

fn section(spec: &ExperimentSpec, command: Command) -> serde_json::Value {
    let v = match command {
        Command::KernelCheck => serde_json::to_value(&spec.kernel_check),
        Command::Moments => serde_json::to_value(&spec.moments),
        Command::Simulate => serde_json::to_value(&spec.simulate),
        Command::GradientDecay => serde_json::to_value(&spec.gradient_decay),
        Command::FiniteSpeed => serde_json::to_value(&spec.finite_speed),
        Command::TripleNorm => serde_json::to_value(&spec.triple_norm),
        Command::Galerkin => serde_json::to_value(&spec.galerkin),
        Command::Mixing => serde_json::to_value(&spec.mixing),
        Command::Duhamel => serde_json::to_value(&spec.duhamel),
        Command::Limit => serde_json::to_value(&spec.limit),
    };
    serde_json::json!({
        "model": spec.model,
        "stable": spec.stable,
        "sim": spec.sim,
        command.name(): v.expect("sections serialize"),
    })
}

/// Applies overrides, runs `command`, writes the artifacts and the manifest.
///
/// A checker error does not abort the run: the partial report is written with
/// status `incomplete` and the outcome fails.
pub fn run(spec: &ExperimentSpec, command: Command, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let mut spec = spec.resolved(command);
    if let Some(seed) = opts.seed {
        spec.sim.seed = seed;
    }
    if let Some(paths) = opts.paths {
        spec.sim.n_paths = paths;
    }
    if let Some(out) = &opts.out {
        spec.output_dir = Some(out.clone());
    }
    spec.validate()?;
    let model = spec.build_model()?;
    let out_dir = spec
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(command.name()));
    let info = RunInfo {
        command: command.name().to_string(),
        spec_hash: spec.hash(),
        seed: spec.sim.seed,
        n_paths: spec.sim.n_paths,
        parameters: section(&spec, command),
    };

    let start = Instant::now();
    let mut report = Report::default();
    if let Err(e) = commands::dispatch(&spec, command, &model, opts.workers, &mut report) {
        report.error = Some(e.to_string());
    }
    let io_err = |source| RunError::Io {
        path: out_dir.clone(),
        source,
    };
    let outputs = emit_report(&info, &report, &out_dir).map_err(io_err)?;
    let mut manifest = report::manifest(&info, &report, outputs, spec.to_toml(), start.elapsed().as_secs_f64());
    manifest.output_dir = spec.output_dir.clone();
    manifest.write(&out_dir).map_err(io_err)?;
    Ok(RunOutcome {
        manifest,
        report,
        out_dir,
    })
}
