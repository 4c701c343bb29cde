//! Multi-system Euler–Maruyama engine on shared counter-based noise.
//!
//! Several (model, initial state) systems advance in lockstep; the stable
//! increment on a site is drawn once per step from its site code and reused by
//! every system containing that site. Paths are processed in fixed chunks and
//! the per-chunk results are merged in path order, so the output does not
//! depend on the number of worker threads.

use std::collections::HashMap;
use std::ops::Range;

use rayon::prelude::*;

use super::{NoiseMode, SimConfig, SimError, StepFailure};
use crate::lattice::InteractionModel;
use crate::rng::NoiseStream;
use crate::stable::sample_standard_stable;

const CHUNK: u64 = 512;
const MAX_REPORTED_FAILURES: usize = 16;

/// Per-record observation of all systems on one path.
pub trait Observer: Sync {
    /// Values produced per record.
    fn width(&self) -> usize;
    /// `states[s]` is the state of system `s` (in its cube order).
    fn observe(&self, record: usize, states: &[&[f64]], out: &mut [f64], scratch: &mut Vec<f64>);
}

struct System<'a> {
    model: &'a InteractionModel,
    x0: Vec<f64>,
    offset: usize,
    to_noise: Vec<u32>,
}

pub struct Engine<'a> {
    systems: Vec<System<'a>>,
    codes: Vec<u32>,
    total: usize,
    config: SimConfig,
    record_steps: Vec<u64>,
}

struct Workspace {
    x: Vec<f64>,
    next: Vec<f64>,
    drift: Vec<f64>,
    noise: Vec<f64>,
    row: Vec<f64>,
    mirror: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Engine<'a> {
    /// `record_steps` must be strictly increasing; step 0 records the initial states.
    pub fn new(
        systems: Vec<(&'a InteractionModel, Vec<f64>)>,
        config: &SimConfig,
        record_steps: Vec<u64>,
    ) -> Result<Self, SimError> {
        config.check()?;
        if systems.is_empty() {
            return Err(SimError::InvalidConfig("engine needs at least one system".into()));
        }
        if record_steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimError::InvalidConfig("record steps must be strictly increasing".into()));
        }
        let d = systems[0].0.dim();
        let mut index: HashMap<u32, u32> = HashMap::new();
        let mut codes = Vec::new();
        let mut built = Vec::with_capacity(systems.len());
        let mut offset = 0;
        for (model, x0) in systems {
            if model.dim() != d {
                return Err(SimError::InvalidConfig("all coupled systems must share the lattice dimension".into()));
            }
            if x0.len() != model.cube().len() {
                return Err(SimError::InvalidConfig(format!(
                    "initial state has {} values, cube has {} sites",
                    x0.len(),
                    model.cube().len()
                )));
            }
            if let Some(k) = x0.iter().position(|v| !v.is_finite()) {
                return Err(SimError::InvalidConfig(format!("initial value at site {} is not finite", model.cube().site(k))));
            }
            let to_noise = model
                .site_codes()
                .iter()
                .map(|&c| {
                    *index.entry(c).or_insert_with(|| {
                        codes.push(c);
                        codes.len() as u32 - 1
                    })
                })
                .collect();
            let n = x0.len();
            built.push(System {
                model,
                x0,
                offset,
                to_noise,
            });
            offset += n;
        }
        Ok(Engine {
            systems: built,
            codes,
            total: offset,
            config: config.clone(),
            record_steps,
        })
    }

    pub fn records(&self) -> usize {
        self.record_steps.len()
    }

    fn workspace(&self, width: usize) -> Workspace {
        let max_sites = self.systems.iter().map(|s| s.x0.len()).max().unwrap_or(0);
        Workspace {
            x: vec![0.0; self.total],
            next: vec![0.0; self.total],
            drift: vec![0.0; max_sites],
            noise: vec![0.0; self.codes.len()],
            row: vec![0.0; width * self.record_steps.len()],
            mirror: vec![0.0; width * self.record_steps.len()],
            scratch: Vec::new(),
        }
    }

    fn observe_into<O: Observer>(&self, obs: &O, record: usize, x: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
        let states: Vec<&[f64]> = self.systems.iter().map(|s| &x[s.offset..s.offset + s.x0.len()]).collect();
        let w = obs.width();
        obs.observe(record, &states, &mut out[record * w..(record + 1) * w], scratch);
    }

    /// Simulates one path with the noise multiplied by `sign`, filling `ws.row`.
    fn run_path<O: Observer>(&self, obs: &O, path: u64, sign: f64, ws: &mut Workspace) -> Result<(), StepFailure> {
        let cfg = &self.config;
        let stream = NoiseStream::new(cfg.seed);
        let alpha = cfg.stable.alpha();
        let scale = sign * cfg.dt.powf(1.0 / alpha);
        for s in &self.systems {
            ws.x[s.offset..s.offset + s.x0.len()].copy_from_slice(&s.x0);
        }
        let mut rec = 0;
        if self.record_steps.first() == Some(&0) {
            self.observe_into(obs, 0, &ws.x, &mut ws.row, &mut ws.scratch);
            rec = 1;
        }
        let last = self.record_steps.last().copied().unwrap_or(0);
        for step in 0..last {
            match cfg.noise {
                NoiseMode::Stable => {
                    for (slot, &code) in ws.noise.iter_mut().zip(&self.codes) {
                        let (u1, u2) = stream.uniforms(path, step, code);
                        *slot = scale * sample_standard_stable(cfg.stable, u1, u2);
                    }
                }
                NoiseMode::Off => ws.noise.iter_mut().for_each(|v| *v = 0.0),
            }
            for (si, s) in self.systems.iter().enumerate() {
                let n = s.x0.len();
                let x = &ws.x[s.offset..s.offset + n];
                let drift = &mut ws.drift[..n];
                s.model.drift_into(x, drift);
                let next = &mut ws.next[s.offset..s.offset + n];
                for i in 0..n {
                    let v = x[i] + cfg.dt * drift[i] + ws.noise[s.to_noise[i] as usize];
                    if !v.is_finite() {
                        return Err(StepFailure {
                            path,
                            system: si,
                            step: step + 1,
                            time: (step + 1) as f64 * cfg.dt,
                            site: s.model.cube().site(i),
                        });
                    }
                    next[i] = v;
                }
            }
            std::mem::swap(&mut ws.x, &mut ws.next);
            if self.record_steps[rec] == step + 1 {
                self.observe_into(obs, rec, &ws.x, &mut ws.row, &mut ws.scratch);
                rec += 1;
            }
        }
        Ok(())
    }

    /// Folds per-path rows (`records × width` values) over `paths`, in path order.
    pub fn fold<O, T, I, F, M>(&self, paths: Range<u64>, obs: &O, init: I, fold: F, merge: M) -> Result<T, SimError>
    where
        O: Observer,
        T: Send,
        I: Fn() -> T + Sync,
        F: Fn(&mut T, u64, &[f64]) + Sync,
        M: Fn(&mut T, T),
    {
        let width = obs.width();
        let n_chunks = (paths.end.saturating_sub(paths.start)).div_ceil(CHUNK);
        let work = || {
            (0..n_chunks)
                .into_par_iter()
                .map(|c| {
                    let lo = paths.start + c * CHUNK;
                    let hi = (lo + CHUNK).min(paths.end);
                    let mut acc = init();
                    let mut failures = Vec::new();
                    let mut ws = self.workspace(width);
                    for p in lo..hi {
                        let outcome = self.run_path(obs, p, 1.0, &mut ws).and_then(|_| {
                            if self.config.antithetic {
                                std::mem::swap(&mut ws.row, &mut ws.mirror);
                                self.run_path(obs, p, -1.0, &mut ws)?;
                                for (a, b) in ws.row.iter_mut().zip(&ws.mirror) {
                                    *a = 0.5 * (*a + b);
                                }
                            }
                            Ok(())
                        });
                        match outcome {
                            Ok(()) => fold(&mut acc, p, &ws.row),
                            Err(f) => failures.push(f),
                        }
                    }
                    (acc, failures)
                })
                .collect::<Vec<_>>()
        };
        let parts = match self.config.workers {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| SimError::InvalidConfig(format!("thread pool: {e}")))?
                .install(work),
            None => work(),
        };
        let mut total = init();
        let mut failures = Vec::new();
        let mut failed = 0;
        for (acc, f) in parts {
            failed += f.len();
            failures.extend(f.into_iter().take(MAX_REPORTED_FAILURES.saturating_sub(failures.len())));
            merge(&mut total, acc);
        }
        if failed > 0 {
            return Err(SimError::StepFailures { total: failed, failures });
        }
        Ok(total)
    }

    /// Collects every path's row, concatenated in path order.
    pub fn collect<O: Observer>(&self, paths: Range<u64>, obs: &O) -> Result<Vec<f64>, SimError> {
        self.fold(paths, obs, Vec::new, |acc, _, row| acc.extend_from_slice(row), |a, b| a.extend(b))
    }

    /// Running statistics for every entry of the row.
    pub fn stats<O: Observer>(&self, paths: Range<u64>, obs: &O) -> Result<Vec<super::RunningStats>, SimError> {
        let len = obs.width() * self.records();
        self.fold(
            paths,
            obs,
            || vec![super::RunningStats::new(); len],
            |acc, _, row| acc.iter_mut().zip(row).for_each(|(s, &v)| s.push(v)),
            |a, b| a.iter_mut().zip(&b).for_each(|(s, o)| s.merge(o)),
        )
    }
}

/// Observer built from a closure.
pub struct FnObserver<F> {
    pub width: usize,
    pub f: F,
}

impl<F> Observer for FnObserver<F>
where
    F: Fn(usize, &[&[f64]], &mut [f64], &mut Vec<f64>) + Sync,
{
    fn width(&self) -> usize {
        self.width
    }

    fn observe(&self, record: usize, states: &[&[f64]], out: &mut [f64], scratch: &mut Vec<f64>) {
        (self.f)(record, states, out, scratch)
    }
}
