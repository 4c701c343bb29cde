//! Experiment documents.
//!
//! A spec is a flat TOML document: `[model]`, `[stable]` and `[sim]` describe
//! the system, and one optional section per command carries that command's
//! parameters. Every table rejects unknown keys. Sections for commands other
//! than the one being run are validated but ignored, so one file can drive a
//! whole suite.

use std::fmt;
use std::path::PathBuf;

use alpha_lattice::lattice::ModelSpec;
use alpha_lattice::{
    validate_assumptions, CylinderObservable, InteractionModel, LatticeIndex, LatticeState, SimConfig, StableParams,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    KernelCheck,
    Moments,
    Simulate,
    GradientDecay,
    FiniteSpeed,
    TripleNorm,
    Galerkin,
    Mixing,
    Duhamel,
    Limit,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::KernelCheck,
        Command::Moments,
        Command::Simulate,
        Command::GradientDecay,
        Command::FiniteSpeed,
        Command::TripleNorm,
        Command::Galerkin,
        Command::Mixing,
        Command::Duhamel,
        Command::Limit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::KernelCheck => "kernel-check",
            Command::Moments => "moments",
            Command::Simulate => "simulate",
            Command::GradientDecay => "gradient-decay",
            Command::FiniteSpeed => "finite-speed",
            Command::TripleNorm => "triple-norm",
            Command::Galerkin => "galerkin",
            Command::Mixing => "mixing",
            Command::Duhamel => "duhamel",
            Command::Limit => "limit",
        }
    }

    pub fn from_name(name: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("syntax error: {0}")]
    SyntaxNoSpan(String),
    #[error("[{clause}]: {message}")]
    Semantic { clause: String, message: String },
}

fn semantic(clause: impl Into<String>, message: impl fmt::Display) -> SpecError {
    SpecError::Semantic {
        clause: clause.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub seed: u64,
    pub n_paths: u64,
    /// Horizon for `simulate`; the checks derive theirs from their own times.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub antithetic: bool,
}

/// Initial state on the model's cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Constant { value: f64 },
    /// `+value` on sites of even `|i|`, `-value` on odd ones.
    Alternating { value: f64 },
    /// Values in row-major cube order.
    Values { values: Vec<f64> },
}

impl StateSpec {
    pub fn build(&self, model: &InteractionModel) -> Result<LatticeState, String> {
        let cube = model.cube();
        match self {
            StateSpec::Constant { value } => LatticeState::from_fn(cube, |_| *value),
            StateSpec::Alternating { value } => {
                LatticeState::from_fn(cube, |i| if i.norm() % 2 == 0 { *value } else { -*value })
            }
            StateSpec::Values { values } => LatticeState::new(cube, values.clone()),
        }
        .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineTerm {
    pub site: LatticeIndex,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Constant {
        value: f64,
    },
    Coordinate {
        site: LatticeIndex,
    },
    Tanh {
        site: LatticeIndex,
    },
    Abs {
        site: LatticeIndex,
    },
    Gaussian {
        site: LatticeIndex,
    },
    Affine {
        #[serde(default)]
        constant: f64,
        terms: Vec<AffineTerm>,
    },
}

impl ObservableSpec {
    pub fn build(&self) -> Result<CylinderObservable, String> {
        Ok(match self {
            ObservableSpec::Constant { value } => CylinderObservable::constant(*value),
            ObservableSpec::Coordinate { site } => CylinderObservable::coordinate(site.clone()),
            ObservableSpec::Tanh { site } => CylinderObservable::tanh(site.clone()),
            ObservableSpec::Abs { site } => CylinderObservable::abs(site.clone()),
            ObservableSpec::Gaussian { site } => CylinderObservable::gaussian(site.clone()),
            ObservableSpec::Affine { constant, terms } => CylinderObservable::affine(
                *constant,
                terms.iter().map(|t| (t.site.clone(), t.coeff)).collect(),
            )
            .map_err(|e| e.to_string())?,
        })
    }
}

fn origin() -> LatticeIndex {
    LatticeIndex::new([0])
}
fn tanh0() -> ObservableSpec {
    ObservableSpec::Tanh { site: origin() }
}
fn coord0() -> ObservableSpec {
    ObservableSpec::Coordinate { site: origin() }
}
fn default_h() -> f64 {
    alpha_lattice::DEFAULT_H
}
fn zero_state() -> StateSpec {
    StateSpec::Constant { value: 0.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelCheckParams {
    /// Closed-form comparisons; each entry must be 1 (Cauchy) or 2 (Gaussian).
    pub closed_form_alphas: Vec<f64>,
    pub times: Vec<f64>,
    /// Grid `x - y` on `[-x_max, x_max]` with `points` nodes, per time.
    pub x_max: f64,
    pub points: usize,
    pub tolerance: f64,
    /// Normalization and Chapman–Kolmogorov of the OU kernel.
    pub kernel_alphas: Vec<f64>,
    pub normalization_tolerance: f64,
    pub composition_tolerance: f64,
}

impl Default for KernelCheckParams {
    fn default() -> Self {
        KernelCheckParams {
            closed_form_alphas: vec![2.0, 1.0],
            times: vec![0.1, 0.5, 1.0, 2.0, 5.0],
            x_max: 10.0,
            points: 20,
            tolerance: 1e-6,
            kernel_alphas: vec![1.2, 1.5, 1.8, 2.0],
            normalization_tolerance: 1e-6,
            composition_tolerance: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentsParams {
    /// Orders for the OU scaling law, each in `[1, α)`.
    pub betas: Vec<f64>,
    pub times: Vec<f64>,
    pub tolerance: f64,
    /// Sites for the lattice moment envelope; empty skips the Monte-Carlo part.
    pub sites: Vec<LatticeIndex>,
    pub lattice_times: Vec<f64>,
    pub x0: StateSpec,
}

impl Default for MomentsParams {
    fn default() -> Self {
        MomentsParams {
            betas: vec![1.0],
            times: vec![0.1, 0.5, 1.0, 2.0, 5.0],
            tolerance: 1e-8,
            sites: Vec::new(),
            lattice_times: vec![0.0, 1.0, 2.0, 3.0],
            x0: zero_state(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateParams {
    pub x0: StateSpec,
    pub observables: Vec<ObservableSpec>,
    pub record_stride: u64,
    /// Index of the path written out in full.
    pub trajectory_path: u64,
}

impl Default for SimulateParams {
    fn default() -> Self {
        SimulateParams {
            x0: zero_state(),
            observables: Vec::new(),
            record_stride: 1,
            trajectory_path: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradientDecayParams {
    pub observable: ObservableSpec,
    pub times: Vec<f64>,
    pub h: f64,
}

impl Default for GradientDecayParams {
    fn default() -> Self {
        GradientDecayParams {
            observable: tanh0(),
            times: vec![0.5, 1.0, 2.0, 3.0, 4.0],
            h: default_h(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiniteSpeedParams {
    pub observable: ObservableSpec,
    pub times: Vec<f64>,
    #[serde(rename = "A")]
    pub a: f64,
    pub h: f64,
}

impl Default for FiniteSpeedParams {
    fn default() -> Self {
        FiniteSpeedParams {
            observable: coord0(),
            times: vec![0.25, 0.5],
            a: 0.5,
            h: default_h(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TripleNormParams {
    pub observable: ObservableSpec,
    pub times: Vec<f64>,
    pub h: f64,
}

impl Default for TripleNormParams {
    fn default() -> Self {
        TripleNormParams {
            observable: tanh0(),
            times: vec![0.5, 1.0, 2.0],
            h: default_h(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GalerkinParams {
    pub observable: ObservableSpec,
    /// Nested cube radii; the model's own radius is ignored.
    pub radii: Vec<u32>,
    pub t: f64,
    /// Start on the largest cube, restricted to the smaller ones.
    pub x0: StateSpec,
}

impl Default for GalerkinParams {
    fn default() -> Self {
        GalerkinParams {
            observable: coord0(),
            radii: vec![4, 8, 16],
            t: 1.0,
            x0: StateSpec::Constant { value: 1.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixingParams {
    pub x0a: StateSpec,
    pub x0b: StateSpec,
    pub sites: Vec<LatticeIndex>,
    pub times: Vec<f64>,
    /// Threshold on W₁ at the last time; without it only KS is checked.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w1_max: Option<f64>,
}

impl Default for MixingParams {
    fn default() -> Self {
        MixingParams {
            x0a: StateSpec::Constant { value: 2.0 },
            x0b: StateSpec::Constant { value: -2.0 },
            sites: vec![origin()],
            times: vec![0.0, 1.0, 2.0, 5.0, 10.0],
            w1_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DuhamelParams {
    pub observable: ObservableSpec,
    pub t: f64,
    pub x: StateSpec,
    /// Repeat at `dt/2` and check the residual ratio.
    pub halving: bool,
    pub ratio_range: [f64; 2],
}

impl Default for DuhamelParams {
    fn default() -> Self {
        DuhamelParams {
            observable: coord0(),
            t: 1.0,
            x: zero_state(),
            halving: false,
            ratio_range: [0.3, 0.8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitParams {
    pub observable: ObservableSpec,
    pub times: Vec<f64>,
    /// Increments per unit time must not grow past this time.
    pub monotone_after: f64,
}

impl Default for LimitParams {
    fn default() -> Self {
        LimitParams {
            observable: tanh0(),
            times: vec![1.0, 3.0, 5.0, 7.0, 9.0, 11.0],
            monotone_after: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    /// Default output directory; not part of the spec hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub model: ModelSpec,
    pub stable: StableParams,
    pub sim: SimSection,
    #[serde(default, rename = "kernel-check", skip_serializing_if = "Option::is_none")]
    pub kernel_check: Option<KernelCheckParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<MomentsParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateParams>,
    #[serde(default, rename = "gradient-decay", skip_serializing_if = "Option::is_none")]
    pub gradient_decay: Option<GradientDecayParams>,
    #[serde(default, rename = "finite-speed", skip_serializing_if = "Option::is_none")]
    pub finite_speed: Option<FiniteSpeedParams>,
    #[serde(default, rename = "triple-norm", skip_serializing_if = "Option::is_none")]
    pub triple_norm: Option<TripleNormParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub galerkin: Option<GalerkinParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixing: Option<MixingParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duhamel: Option<DuhamelParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<LimitParams>,
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parses and validates a spec document.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec, SpecError> {
    let spec: ExperimentSpec = toml::from_str(text).map_err(|e| match e.span() {
        Some(span) => {
            let (line, column) = line_col(text, span.start);
            SpecError::Syntax {
                line,
                column,
                message: e.message().to_string(),
            }
        }
        None => SpecError::SyntaxNoSpan(e.message().to_string()),
    })?;
    spec.validate()?;
    Ok(spec)
}

fn check_times(clause: &str, times: &[f64], dt: f64) -> Result<(), SpecError> {
    if times.is_empty() {
        return Err(semantic(clause, "times must not be empty"));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(semantic(clause, "times must be strictly increasing"));
    }
    for &t in times {
        if !(t.is_finite() && t >= 0.0) {
            return Err(semantic(clause, format!("time {t} must be finite and >= 0")));
        }
        let n = (t / dt).round();
        if (n * dt - t).abs() > 1e-9 * t.max(dt) {
            return Err(semantic(clause, format!("time {t} is not a multiple of dt = {dt}")));
        }
    }
    Ok(())
}

fn check_observable(clause: &str, f: &ObservableSpec, model: &InteractionModel) -> Result<CylinderObservable, SpecError> {
    let f = f.build().map_err(|m| semantic(clause, m))?;
    let cube = model.cube();
    for s in f.support() {
        cube.require(s).map_err(|e| semantic(clause, e))?;
    }
    Ok(f)
}

fn check_sites(clause: &str, sites: &[LatticeIndex], model: &InteractionModel) -> Result<(), SpecError> {
    for s in sites {
        model.cube().require(s).map_err(|e| semantic(clause, e))?;
    }
    Ok(())
}

fn check_state(clause: &str, x: &StateSpec, model: &InteractionModel) -> Result<LatticeState, SpecError> {
    x.build(model).map_err(|m| semantic(clause, m))
}

fn check_positive(clause: &str, v: f64) -> Result<(), SpecError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(semantic(clause, format!("must be finite and > 0, got {v}")))
    }
}

impl ExperimentSpec {
    /// The system section as a model, with the interaction assumptions checked.
    pub fn build_model(&self) -> Result<InteractionModel, SpecError> {
        let model = InteractionModel::from_spec(&self.model).map_err(|e| semantic("model", e))?;
        let report = validate_assumptions(&model);
        let failed: Vec<&str> = [
            (report.linear_ok, "non-negative off-diagonal linear part"),
            (report.bounded_ok, "bounded interaction"),
            (report.finite_range_ok, "finite range property"),
            (report.eta_finite, "finite eta"),
        ]
        .iter()
        .filter(|(ok, _)| !ok)
        .map(|(_, name)| *name)
        .collect();
        if !failed.is_empty() {
            return Err(semantic("model", format!("violates: {}", failed.join(", "))));
        }
        Ok(model)
    }

    /// A simulation config for times up to `t_end`.
    pub fn sim_config(&self, t_end: f64) -> SimConfig {
        let mut c = SimConfig::new(self.stable, self.sim.dt, t_end, self.sim.seed, self.sim.n_paths);
        c.antithetic = self.sim.antithetic;
        c
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let model = self.build_model()?;
        let sim = &self.sim;
        if !(sim.dt.is_finite() && sim.dt > 0.0 && sim.dt <= alpha_lattice::sim::MAX_DT) {
            return Err(semantic("sim.dt", format!("must lie in (0, {}], got {}", alpha_lattice::sim::MAX_DT, sim.dt)));
        }
        if sim.n_paths == 0 || sim.n_paths > u32::MAX as u64 / 2 {
            return Err(semantic("sim.n_paths", format!("must lie in [1, {}], got {}", u32::MAX / 2, sim.n_paths)));
        }
        let dt = sim.dt;
        let alpha = self.stable.alpha();

        if let Some(p) = &self.kernel_check {
            let c = "kernel-check";
            for &a in &p.closed_form_alphas {
                if a != 1.0 && a != 2.0 {
                    return Err(semantic(
                        format!("{c}.closed_form_alphas"),
                        format!("closed forms exist only at alpha = 1 and 2, got {a}"),
                    ));
                }
            }
            for &a in &p.kernel_alphas {
                StableParams::new(a).map_err(|e| semantic(format!("{c}.kernel_alphas"), e))?;
            }
            if p.times.is_empty() || p.times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                return Err(semantic(format!("{c}.times"), "times must be non-empty and > 0"));
            }
            check_positive(&format!("{c}.x_max"), p.x_max)?;
            if p.points < 2 {
                return Err(semantic(format!("{c}.points"), "need at least two points"));
            }
        }
        if let Some(p) = &self.moments {
            let c = "moments";
            for &b in &p.betas {
                if !(b >= 1.0 && b < alpha) {
                    return Err(semantic(format!("{c}.betas"), format!("order {b} must satisfy 1 <= beta < alpha = {alpha}")));
                }
            }
            if p.times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                return Err(semantic(format!("{c}.times"), "times must be > 0"));
            }
            if !p.sites.is_empty() {
                check_sites(&format!("{c}.sites"), &p.sites, &model)?;
                check_times(&format!("{c}.lattice_times"), &p.lattice_times, dt)?;
                check_state(&format!("{c}.x0"), &p.x0, &model)?;
                if model.ball().is_none() {
                    return Err(semantic("model.ball", "the lattice moment check needs a ball B(R, rho)"));
                }
            }
        }
        if let Some(p) = &self.simulate {
            let c = "simulate";
            check_state(&format!("{c}.x0"), &p.x0, &model)?;
            for f in &p.observables {
                check_observable(&format!("{c}.observables"), f, &model)?;
            }
            if p.record_stride == 0 {
                return Err(semantic(format!("{c}.record_stride"), "must be positive"));
            }
            if p.trajectory_path >= sim.n_paths {
                return Err(semantic(format!("{c}.trajectory_path"), "must be below sim.n_paths"));
            }
        }
        if self.command == Some(Command::Simulate) {
            match sim.t_end {
                Some(t) => check_times("sim.t_end", &[t], dt)?,
                None => return Err(semantic("sim.t_end", "simulate needs a horizon")),
            }
        }
        if let Some(p) = &self.gradient_decay {
            let c = "gradient-decay";
            check_observable(&format!("{c}.observable"), &p.observable, &model)?;
            check_times(&format!("{c}.times"), &p.times, dt)?;
            if p.times.len() < 2 {
                return Err(semantic(format!("{c}.times"), "the fit needs at least two times"));
            }
            check_positive(&format!("{c}.h"), p.h)?;
        }
        if let Some(p) = &self.finite_speed {
            let c = "finite-speed";
            check_observable(&format!("{c}.observable"), &p.observable, &model)?;
            check_times(&format!("{c}.times"), &p.times, dt)?;
            check_positive(&format!("{c}.A"), p.a)?;
            check_positive(&format!("{c}.h"), p.h)?;
        }
        if let Some(p) = &self.triple_norm {
            let c = "triple-norm";
            check_observable(&format!("{c}.observable"), &p.observable, &model)?;
            check_times(&format!("{c}.times"), &p.times, dt)?;
            check_positive(&format!("{c}.h"), p.h)?;
        }
        if let Some(p) = &self.galerkin {
            let c = "galerkin";
            let mut radii = p.radii.clone();
            radii.sort_unstable();
            radii.dedup();
            if radii.len() < 2 || radii.len() != p.radii.len() {
                return Err(semantic(format!("{c}.radii"), "need at least two distinct radii"));
            }
            let smallest = model.with_radius(radii[0]).map_err(|e| semantic(format!("{c}.radii"), e))?;
            let largest = model.with_radius(*radii.last().unwrap()).map_err(|e| semantic(format!("{c}.radii"), e))?;
            check_observable(&format!("{c}.observable"), &p.observable, &smallest)?;
            check_state(&format!("{c}.x0"), &p.x0, &largest)?;
            check_times(&format!("{c}.t"), &[p.t], dt)?;
        }
        if let Some(p) = &self.mixing {
            let c = "mixing";
            check_state(&format!("{c}.x0a"), &p.x0a, &model)?;
            check_state(&format!("{c}.x0b"), &p.x0b, &model)?;
            if p.sites.is_empty() {
                return Err(semantic(format!("{c}.sites"), "need at least one site"));
            }
            check_sites(&format!("{c}.sites"), &p.sites, &model)?;
            check_times(&format!("{c}.times"), &p.times, dt)?;
            if let Some(w) = p.w1_max {
                check_positive(&format!("{c}.w1_max"), w)?;
            }
        }
        if let Some(p) = &self.duhamel {
            let c = "duhamel";
            check_observable(&format!("{c}.observable"), &p.observable, &model)?;
            check_state(&format!("{c}.x"), &p.x, &model)?;
            check_times(&format!("{c}.t"), &[p.t], dt)?;
            if p.halving {
                check_times(&format!("{c}.t"), &[p.t], dt / 2.0)?;
            }
            let [lo, hi] = p.ratio_range;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(semantic(format!("{c}.ratio_range"), "need lo < hi"));
            }
        }
        if let Some(p) = &self.limit {
            let c = "limit";
            check_observable(&format!("{c}.observable"), &p.observable, &model)?;
            check_times(&format!("{c}.times"), &p.times, dt)?;
            if p.times.len() < 2 {
                return Err(semantic(format!("{c}.times"), "need at least two times"));
            }
        }
        Ok(())
    }

    /// Canonical TOML rendering.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("specs always serialize")
    }

    /// SHA-256 of the canonical rendering with `output_dir` cleared.
    pub fn hash(&self) -> String {
        let mut s = self.clone();
        s.output_dir = None;
        hex::encode(Sha256::digest(s.to_toml().as_bytes()))
    }

    /// Copy with `command` set and its parameter section materialized, so the
    /// resolved document is self-contained.
    pub fn resolved(&self, command: Command) -> ExperimentSpec {
        let mut s = self.clone();
        s.command = Some(command);
        match command {
            Command::KernelCheck => {
                s.kernel_check.get_or_insert_with(Default::default);
            }
            Command::Moments => {
                s.moments.get_or_insert_with(Default::default);
            }
            Command::Simulate => {
                s.simulate.get_or_insert_with(Default::default);
            }
            Command::GradientDecay => {
                s.gradient_decay.get_or_insert_with(Default::default);
            }
            Command::FiniteSpeed => {
                s.finite_speed.get_or_insert_with(Default::default);
            }
            Command::TripleNorm => {
                s.triple_norm.get_or_insert_with(Default::default);
            }
            Command::Galerkin => {
                s.galerkin.get_or_insert_with(Default::default);
            }
            Command::Mixing => {
                s.mixing.get_or_insert_with(Default::default);
            }
            Command::Duhamel => {
                s.duhamel.get_or_insert_with(Default::default);
            }
            Command::Limit => {
                s.limit.get_or_insert_with(Default::default);
            }
        }
        s
    }
}
