//! Monte-Carlo estimators of `P_t^N f` and its gradients, and numerical checks
//! of the semigroup bounds built on them.
//!
//! Gradients are central differences on common random numbers: the shifted
//! starts `x0 ± h e_i` for every requested site run as coupled systems on one
//! shared noise realization, so all sites come out of a single ensemble.

mod checks;
pub mod stats;

use serde::Serialize;
use thiserror::Error;

use crate::lattice::{CylinderObservable, InteractionModel, LatticeError, LatticeIndex, LatticeState};
use crate::sim::engine::{Engine, FnObserver};
use crate::sim::{RunningStats, SimConfig, SimError};
use crate::stable::KernelError;

pub use checks::{
    duhamel_residual, finite_speed_profile, finite_speed_scan, galerkin_gap, gradient_decay_fit, long_time_limit,
    mixing_distance, moment_growth_check, triple_norm_check, triple_norm_scan, DecayFit, DuhamelReport, GapEntry,
    GapReport, GradientProfile, Increment, LimitReport, MixingReport, MixingRow, MomentReport, MomentRow,
    ProfileEntry, TripleNormReport, MOMENT_SAFETY_FACTOR,
};

/// Default finite-difference step.
pub const DEFAULT_H: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("gradient at t = {t} is {value:e} ± {se:e}, at the Monte-Carlo noise floor; increase n_paths")]
    NoiseFloor { t: f64, value: f64, se: f64 },
}

/// Monte-Carlo value with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemigroupEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: u64,
    pub t: f64,
    pub observable_id: String,
    pub x0_id: String,
}

/// Short stable label of a state (FNV-1a over the value bits).
pub fn state_id(x: &LatticeState) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in x.values() {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

pub(crate) fn estimate(s: &RunningStats, t: f64, f: &CylinderObservable, x0: &LatticeState) -> SemigroupEstimate {
    SemigroupEstimate {
        value: s.mean(),
        std_error: s.std_error(),
        n_paths: s.count(),
        t,
        observable_id: f.name().to_string(),
        x0_id: state_id(x0),
    }
}

pub(crate) fn record_steps(times: &[f64], config: &SimConfig) -> Result<Vec<u64>, LabError> {
    let steps = times.iter().map(|&t| config.steps_to(t)).collect::<Result<Vec<_>, _>>()?;
    if steps.is_empty() || steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::InvalidArgument("times must be non-empty, increasing and on distinct steps".into()));
    }
    Ok(steps)
}

pub(crate) fn check_h(h: f64) -> Result<(), LabError> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(LabError::InvalidArgument(format!("finite-difference step must be > 0, got {h}")))
    }
}

pub(crate) fn check_start(model: &InteractionModel, x0: &LatticeState) -> Result<(), LabError> {
    if x0.cube() != model.cube() {
        return Err(LatticeError::StateSize {
            expected: model.cube().len(),
            found: x0.values().len(),
        }
        .into());
    }
    Ok(())
}

pub(crate) fn shifted(x0: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut x = x0.to_vec();
    for &(k, d) in moves {
        x[k] += d;
    }
    x
}

/// `P_t f(x0)` at each time, as per-record statistics.
pub(crate) fn semigroup_stats(
    model: &InteractionModel,
    f: &CylinderObservable,
    x0: &LatticeState,
    times: &[f64],
    config: &SimConfig,
) -> Result<Vec<RunningStats>, LabError> {
    check_start(model, x0)?;
    let bound = f.bind(&model.cube())?;
    let engine = Engine::new(vec![(model, x0.values().to_vec())], config, record_steps(times, config)?)?;
    let obs = FnObserver {
        width: 1,
        f: |_: usize, s: &[&[f64]], out: &mut [f64], scratch: &mut Vec<f64>| out[0] = bound.eval(s[0], scratch),
    };
    Ok(engine.stats(0..config.n_paths, &obs)?)
}

/// Central-difference gradients `[time][site]` for the given cube positions.
pub(crate) fn gradient_stats(
    model: &InteractionModel,
    f: &CylinderObservable,
    x0: &LatticeState,
    sites: &[usize],
    times: &[f64],
    h: f64,
    config: &SimConfig,
) -> Result<Vec<Vec<RunningStats>>, LabError> {
    check_start(model, x0)?;
    check_h(h)?;
    let bound = f.bind(&model.cube())?;
    let mut systems = Vec::with_capacity(2 * sites.len());
    for &k in sites {
        systems.push((model, shifted(x0.values(), &[(k, h)])));
        systems.push((model, shifted(x0.values(), &[(k, -h)])));
    }
    let engine = Engine::new(systems, config, record_steps(times, config)?)?;
    let obs = FnObserver {
        width: sites.len(),
        f: |_: usize, s: &[&[f64]], out: &mut [f64], scratch: &mut Vec<f64>| {
            for (j, o) in out.iter_mut().enumerate() {
                let up = bound.eval(s[2 * j], scratch);
                let down = bound.eval(s[2 * j + 1], scratch);
                *o = (up - down) / (2.0 * h);
            }
        },
    };
    let flat = engine.stats(0..config.n_paths, &obs)?;
    Ok(flat.chunks(sites.len().max(1)).map(|c| c.to_vec()).collect())
}

/// Ensemble estimate of `P_t^N f(x0) = E f(X^N(t))`.
pub fn estimate_semigroup(
    model: &InteractionModel,
    f: &CylinderObservable,
    x0: &LatticeState,
    t: f64,
    config: &SimConfig,
) -> Result<SemigroupEstimate, LabError> {
    let s = semigroup_stats(model, f, x0, &[t], config)?;
    Ok(estimate(&s[0], t, f, x0))
}

/// `[P_t f(x0 + h e_i) - P_t f(x0 - h e_i)] / 2h` on common noise.
pub fn estimate_gradient(
    model: &InteractionModel,
    f: &CylinderObservable,
    i: &LatticeIndex,
    x0: &LatticeState,
    t: f64,
    h: f64,
    config: &SimConfig,
) -> Result<SemigroupEstimate, LabError> {
    let k = model.cube().require(i)?;
    let s = gradient_stats(model, f, x0, &[k], &[t], h, config)?;
    Ok(estimate(&s[0][0], t, f, x0))
}

/// Mixed second difference
/// `[P f(x+he_j+he_k) - P f(x+he_j-he_k) - P f(x-he_j+he_k) + P f(x-he_j-he_k)] / 4h²` on common noise.
#[allow(clippy::too_many_arguments)]
pub fn estimate_second_gradient(
    model: &InteractionModel,
    f: &CylinderObservable,
    j: &LatticeIndex,
    k: &LatticeIndex,
    x0: &LatticeState,
    t: f64,
    h: f64,
    config: &SimConfig,
) -> Result<SemigroupEstimate, LabError> {
    check_start(model, x0)?;
    check_h(h)?;
    let (a, b) = (model.cube().require(j)?, model.cube().require(k)?);
    let bound = f.bind(&model.cube())?;
    let x = x0.values();
    let systems = vec![
        (model, shifted(x, &[(a, h), (b, h)])),
        (model, shifted(x, &[(a, h), (b, -h)])),
        (model, shifted(x, &[(a, -h), (b, h)])),
        (model, shifted(x, &[(a, -h), (b, -h)])),
    ];
    let engine = Engine::new(systems, config, record_steps(&[t], config)?)?;
    let obs = FnObserver {
        width: 1,
        f: |_: usize, s: &[&[f64]], out: &mut [f64], scratch: &mut Vec<f64>| {
            let v: Vec<f64> = s.iter().map(|x| bound.eval(x, scratch)).collect();
            out[0] = (v[0] - v[1] - v[2] + v[3]) / (4.0 * h * h);
        },
    };
    let s = engine.stats(0..config.n_paths, &obs)?;
    Ok(estimate(&s[0], t, f, x0))
}
