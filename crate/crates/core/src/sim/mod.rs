//! Euler–Maruyama simulation of the Galerkin system
//! `dX_i = [-X_i + Σ_j a_ij X_j + U_i(X)] dt + dZ_i` on a cube.

pub mod engine;
mod io;
mod stats;

use thiserror::Error;

use crate::lattice::{ball_membership, CylinderObservable, InteractionModel, LatticeError, LatticeIndex, LatticeState};
use crate::stable::{KernelError, StableParams};
use engine::{Engine, FnObserver};

pub use io::{
    format_float, read_snapshots, write_ensemble_csv, write_trajectory_csv, write_snapshots, SnapshotHeader,
    SNAPSHOT_MAGIC, SNAPSHOT_VERSION,
};
pub use stats::RunningStats;

/// Largest admissible time step.
pub const MAX_DT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct StepFailure {
    pub path: u64,
    /// Index of the coupled system that blew up.
    pub system: usize,
    pub step: u64,
    pub time: f64,
    pub site: LatticeIndex,
}

impl std::fmt::Display for StepFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "path {} (system {}): non-finite value at site {} after step {} (t = {})",
            self.path, self.system, self.site, self.step, self.time
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("{0}")]
    StepFailure(StepFailure),
    #[error("{total} path(s) failed; first: {}", failures.first().map(|f| f.to_string()).unwrap_or_default())]
    StepFailures { total: usize, failures: Vec<StepFailure> },
}

/// Noise switch; `Off` turns the scheme into explicit Euler for the drift alone.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum NoiseMode {
    #[default]
    Stable,
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub stable: StableParams,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub n_paths: u64,
    pub record_stride: u64,
    pub noise: NoiseMode,
    /// Run every path a second time with negated increments and average the two.
    pub antithetic: bool,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    pub workers: Option<usize>,
}

impl SimConfig {
    pub fn new(stable: StableParams, dt: f64, t_end: f64, seed: u64, n_paths: u64) -> Self {
        SimConfig {
            stable,
            dt,
            t_end,
            seed,
            n_paths,
            record_stride: 1,
            noise: NoiseMode::Stable,
            antithetic: false,
            workers: None,
        }
    }

    fn check(&self) -> Result<(), SimError> {
        if !(self.dt.is_finite() && self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(SimError::InvalidConfig(format!("dt must lie in (0, {MAX_DT}], got {}", self.dt)));
        }
        if self.n_paths == 0 {
            return Err(SimError::InvalidConfig("n_paths must be positive".into()));
        }
        if self.n_paths > u32::MAX as u64 {
            return Err(SimError::InvalidConfig("n_paths exceeds the 32-bit path counter".into()));
        }
        if self.record_stride == 0 {
            return Err(SimError::InvalidConfig("record_stride must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(SimError::InvalidConfig("workers must be positive".into()));
        }
        Ok(())
    }

    /// Number of steps to `time`, which must be a whole multiple of `dt`.
    pub fn steps_to(&self, time: f64) -> Result<u64, SimError> {
        if !(time.is_finite() && time >= 0.0) {
            return Err(SimError::InvalidConfig(format!("time must be finite and >= 0, got {time}")));
        }
        let n = (time / self.dt).round();
        if (n * self.dt - time).abs() > 1e-9 * time.max(self.dt) {
            return Err(SimError::InvalidConfig(format!("time {time} is not a multiple of dt = {}", self.dt)));
        }
        Ok(n as u64)
    }

    /// Total steps, checked against `t_end` and the recording stride.
    pub fn n_steps(&self) -> Result<u64, SimError> {
        self.check()?;
        let n = self.steps_to(self.t_end)?;
        if n % self.record_stride != 0 {
            return Err(SimError::InvalidConfig(format!(
                "{n} steps are not a multiple of record_stride = {}",
                self.record_stride
            )));
        }
        Ok(n)
    }

    fn record_steps(&self) -> Result<Vec<u64>, SimError> {
        let n = self.n_steps()?;
        Ok((0..=n).step_by(self.record_stride as usize).collect())
    }
}

/// A recorded path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<LatticeState>,
    /// Non-fatal remarks, such as an initial state outside the model's ball.
    pub advisories: Vec<String>,
}

fn advisories(model: &InteractionModel, x0: &LatticeState) -> Vec<String> {
    match model.ball() {
        Some(ball) if !ball_membership(x0, &ball) => vec![format!(
            "initial state lies outside B(R = {}, rho = {})",
            ball.r, ball.rho
        )],
        _ => Vec::new(),
    }
}

fn check_state(model: &InteractionModel, x: &LatticeState) -> Result<(), SimError> {
    if x.cube() != model.cube() {
        return Err(LatticeError::StateSize {
            expected: model.cube().len(),
            found: x.values().len(),
        }
        .into());
    }
    Ok(())
}

/// `x'_i = x_i + drift_i(x) dt + dt^{1/α} ξ_i` for standard stable draws `ξ`.
pub fn euler_maruyama_step(
    model: &InteractionModel,
    x: &LatticeState,
    dt: f64,
    stable: StableParams,
    noise: &[f64],
) -> Result<LatticeState, SimError> {
    check_state(model, x)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SimError::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    if noise.len() != x.values().len() {
        return Err(SimError::InvalidConfig(format!(
            "{} noise values for {} sites",
            noise.len(),
            x.values().len()
        )));
    }
    let scale = dt.powf(1.0 / stable.alpha());
    let mut drift = vec![0.0; noise.len()];
    model.drift_into(x.values(), &mut drift);
    let next: Vec<f64> = x.values().iter().zip(&drift).zip(noise).map(|((v, f), z)| v + f * dt + scale * z).collect();
    if let Some(k) = next.iter().position(|v| !v.is_finite()) {
        return Err(SimError::StepFailure(StepFailure {
            path: 0,
            system: 0,
            step: 1,
            time: dt,
            site: model.cube().site(k),
        }));
    }
    Ok(LatticeState::new(model.cube(), next)?)
}

fn trajectories(
    model: &InteractionModel,
    starts: &[&LatticeState],
    config: &SimConfig,
    path_index: u64,
) -> Result<Vec<Trajectory>, SimError> {
    for x in starts {
        check_state(model, x)?;
    }
    let steps = config.record_steps()?;
    let systems = starts.iter().map(|x| (model, x.values().to_vec())).collect();
    let engine = Engine::new(systems, config, steps.clone())?;
    let n = model.cube().len();
    let k = starts.len();
    let obs = FnObserver {
        width: n * k,
        f: |_: usize, states: &[&[f64]], out: &mut [f64], _: &mut Vec<f64>| {
            for (s, chunk) in states.iter().zip(out.chunks_mut(n)) {
                chunk.copy_from_slice(s);
            }
        },
    };
    let rows = engine.collect(path_index..path_index + 1, &obs).map_err(|e| match e {
        SimError::StepFailures { mut failures, .. } if failures.len() == 1 => SimError::StepFailure(failures.remove(0)),
        other => other,
    })?;
    let times: Vec<f64> = steps.iter().map(|&s| s as f64 * config.dt).collect();
    (0..k)
        .map(|sys| {
            let states = (0..steps.len())
                .map(|r| {
                    let base = r * n * k + sys * n;
                    LatticeState::new(model.cube(), rows[base..base + n].to_vec())
                })
                .collect::<Result<_, _>>()?;
            Ok(Trajectory {
                times: times.clone(),
                states,
                advisories: advisories(model, starts[sys]),
            })
        })
        .collect()
}

/// One path, recorded every `record_stride` steps; a pure function of `(seed, path_index)`.
pub fn simulate_trajectory(
    model: &InteractionModel,
    x0: &LatticeState,
    config: &SimConfig,
    path_index: u64,
) -> Result<Trajectory, SimError> {
    Ok(trajectories(model, &[x0], config, path_index)?.remove(0))
}

/// Two paths from different starts driven by the same noise realization.
pub fn coupled_pair_simulate(
    model: &InteractionModel,
    x0a: &LatticeState,
    x0b: &LatticeState,
    config: &SimConfig,
    path_index: u64,
) -> Result<(Trajectory, Trajectory), SimError> {
    let mut pair = trajectories(model, &[x0a, x0b], config, path_index)?;
    let b = pair.remove(1);
    Ok((pair.remove(0), b))
}

/// Per-record ensemble averages.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub n_paths: u64,
    pub observable_names: Vec<String>,
    /// `sites[r][k]`: statistics of `x_k` at record `r`.
    pub sites: Vec<Vec<RunningStats>>,
    /// `observables[r][j]`: statistics of observable `j` at record `r`.
    pub observables: Vec<Vec<RunningStats>>,
    pub advisories: Vec<String>,
}

/// Runs `n_paths` independent paths (path `p` uses stream `(seed, p)`).
pub fn run_ensemble(
    model: &InteractionModel,
    x0: &LatticeState,
    config: &SimConfig,
    observables: &[CylinderObservable],
) -> Result<EnsembleStats, SimError> {
    check_state(model, x0)?;
    let cube = model.cube();
    let bound = observables.iter().map(|f| f.bind(&cube)).collect::<Result<Vec<_>, _>>()?;
    let steps = config.record_steps()?;
    let engine = Engine::new(vec![(model, x0.values().to_vec())], config, steps.clone())?;
    let n = cube.len();
    let width = n + bound.len();
    let obs = FnObserver {
        width,
        f: |_: usize, states: &[&[f64]], out: &mut [f64], scratch: &mut Vec<f64>| {
            out[..n].copy_from_slice(states[0]);
            for (o, f) in out[n..].iter_mut().zip(&bound) {
                *o = f.eval(states[0], scratch);
            }
        },
    };
    let stats = engine.stats(0..config.n_paths, &obs)?;
    let rows: Vec<&[RunningStats]> = stats.chunks(width).collect();
    Ok(EnsembleStats {
        times: steps.iter().map(|&s| s as f64 * config.dt).collect(),
        n_paths: config.n_paths,
        observable_names: observables.iter().map(|f| f.name().to_string()).collect(),
        sites: rows.iter().map(|r| r[..n].to_vec()).collect(),
        observables: rows.iter().map(|r| r[n..].to_vec()).collect(),
        advisories: advisories(model, x0),
    })
}
