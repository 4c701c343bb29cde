use std::collections::HashMap;

use serde::Serialize;

use super::stats::{ks_critical_two_sample, ks_two_sample, linear_fit, t_quantile, wasserstein1};
use super::{check_h, check_start, estimate, gradient_stats, record_steps, semigroup_stats, shifted, LabError, SemigroupEstimate};
use crate::lattice::{
    ball_membership, beta_lower_bound, choose_b, validate_assumptions, BallParams, CylinderObservable,
    InteractionModel, LatticeIndex, LatticeState, ObservableKind,
};
use crate::sim::engine::{Engine, FnObserver};
use crate::sim::{RunningStats, SimConfig};
use crate::stable::{ou_apply, KernelGrid, LineFunction};

/// Multiplier on the calibrated moment constant.
pub const MOMENT_SAFETY_FACTOR: f64 = 2.0;

const KS_LEVEL: f64 = 0.01;

fn all_sites(model: &InteractionModel) -> Vec<usize> {
    (0..model.cube().len()).collect()
}

fn quadrature_sum(se: impl Iterator<Item = f64>) -> f64 {
    se.map(|s| s * s).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripleNormReport {
    pub t: f64,
    /// `Σ_i |∂_i P_t f(0)|`.
    pub lhs: f64,
    pub std_error: f64,
    /// `e^{(η+1)t} |||f|||₁`.
    pub bound: f64,
    pub eta: f64,
    pub pass: bool,
    /// Per-site gradient estimates in cube order.
    pub gradients: Vec<f64>,
    pub gradient_se: Vec<f64>,
}

/// Sum of gradient magnitudes at `x = 0` against `e^{(η+1)t}|||f|||₁`.
pub fn triple_norm_check(
    model: &InteractionModel,
    f: &CylinderObservable,
    t: f64,
    config: &SimConfig,
    h: f64,
) -> Result<TripleNormReport, LabError> {
    Ok(triple_norm_scan(model, f, &[t], config, h)?.remove(0))
}

/// [`triple_norm_check`] at several times from one ensemble.
pub fn triple_norm_scan(
    model: &InteractionModel,
    f: &CylinderObservable,
    times: &[f64],
    config: &SimConfig,
    h: f64,
) -> Result<Vec<TripleNormReport>, LabError> {
    let eta = validate_assumptions(model).eta;
    let x0 = LatticeState::zeros(model.cube());
    let grads = gradient_stats(model, f, &x0, &all_sites(model), times, h, config)?;
    Ok(times
        .iter()
        .zip(grads)
        .map(|(&t, row)| {
            let lhs = row.iter().map(|s| s.mean().abs()).sum();
            let se = quadrature_sum(row.iter().map(RunningStats::std_error));
            let bound = ((eta + 1.0) * t).exp() * f.triple_norm1();
            TripleNormReport {
                t,
                lhs,
                std_error: se,
                bound,
                eta,
                pass: lhs <= bound + 3.0 * se,
                gradients: row.iter().map(RunningStats::mean).collect(),
                gradient_se: row.iter().map(RunningStats::std_error).collect(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileEntry {
    pub site: LatticeIndex,
    /// `⌊dist(k, Λ(f)) / K⌋`.
    pub n_k: u64,
    pub estimate: f64,
    pub std_error: f64,
    /// `e^{-At-An_k} |||f|||₁`.
    pub bound: f64,
    /// `n_k > Bt`: the bound is claimed here.
    pub applicable: bool,
    /// `|estimate| ≤ bound + 3 SE`.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientProfile {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub eta: f64,
    pub entries: Vec<ProfileEntry>,
    /// Applicable sites where the bound fails.
    pub violations: usize,
    pub applicable_sites: usize,
}

impl GradientProfile {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

/// Gradient at `x = 0` on every site against `e^{-At-An_k}|||f|||₁`, with `B = choose_b(A, η)`.
pub fn finite_speed_profile(
    model: &InteractionModel,
    f: &CylinderObservable,
    t: f64,
    a: f64,
    config: &SimConfig,
    h: f64,
) -> Result<GradientProfile, LabError> {
    Ok(finite_speed_scan(model, f, &[t], a, config, h)?.remove(0))
}

pub fn finite_speed_scan(
    model: &InteractionModel,
    f: &CylinderObservable,
    times: &[f64],
    a: f64,
    config: &SimConfig,
    h: f64,
) -> Result<Vec<GradientProfile>, LabError> {
    if !(a.is_finite() && a > 0.0) {
        return Err(LabError::InvalidArgument(format!("A must be > 0, got {a}")));
    }
    let eta = validate_assumptions(model).eta;
    let b = choose_b(a, eta);
    let cube = model.cube();
    let hops = cube.sites().map(|k| f.hops(&k, model.range())).collect::<Result<Vec<_>, _>>()?;
    let x0 = LatticeState::zeros(cube);
    let grads = gradient_stats(model, f, &x0, &all_sites(model), times, h, config)?;
    Ok(times
        .iter()
        .zip(grads)
        .map(|(&t, row)| {
            let entries: Vec<ProfileEntry> = row
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let n_k = hops[k];
                    let bound = (-a * t - a * n_k as f64).exp() * f.triple_norm1();
                    ProfileEntry {
                        site: cube.site(k),
                        n_k,
                        estimate: s.mean(),
                        std_error: s.std_error(),
                        bound,
                        applicable: n_k as f64 > b * t,
                        holds: s.mean().abs() <= bound + 3.0 * s.std_error(),
                    }
                })
                .collect();
            GradientProfile {
                t,
                a,
                b,
                eta,
                violations: entries.iter().filter(|e| e.applicable && !e.holds).count(),
                applicable_sites: entries.iter().filter(|e| e.applicable).count(),
                entries,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub times: Vec<f64>,
    /// `max_i |∂_i P_t f(0)|` and its SE at each time.
    pub max_gradient: Vec<f64>,
    pub max_gradient_se: Vec<f64>,
    pub argmax: Vec<LatticeIndex>,
    /// Minus the slope of `ln max|∂P_t f|` against `t`.
    pub rate: f64,
    pub rate_se: f64,
    /// 95% interval for the rate.
    pub ci: (f64, f64),
    pub beta_lower: f64,
    /// Times where `max|∂P_t f| > e^{-βt}|||f|||₁ + 3 SE`.
    pub violations: usize,
    pub pass: bool,
}

/// Log-linear fit of the largest gradient at `x = 0` against time.
///
/// The interval combines the regression residual with the Monte-Carlo error
/// of each point, propagated through the fit weights.
pub fn gradient_decay_fit(
    model: &InteractionModel,
    f: &CylinderObservable,
    times: &[f64],
    config: &SimConfig,
    h: f64,
) -> Result<DecayFit, LabError> {
    let beta = beta_lower_bound(model);
    if beta <= 0.0 {
        return Err(LabError::Precondition(format!("beta_lower = {beta} is not positive")));
    }
    if times.len() < 2 {
        return Err(LabError::InvalidArgument("the decay fit needs at least two times".into()));
    }
    let cube = model.cube();
    let x0 = LatticeState::zeros(cube);
    let grads = gradient_stats(model, f, &x0, &all_sites(model), times, h, config)?;
    let (mut m, mut se, mut argmax) = (Vec::new(), Vec::new(), Vec::new());
    for (&t, row) in times.iter().zip(&grads) {
        let (k, s) = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.mean().abs().total_cmp(&b.1.mean().abs()))
            .expect("cube is non-empty");
        let (v, e) = (s.mean().abs(), s.std_error());
        if v <= 3.0 * e || v == 0.0 {
            return Err(LabError::NoiseFloor { t, value: v, se: e });
        }
        m.push(v);
        se.push(e);
        argmax.push(cube.site(k));
    }
    let logs: Vec<f64> = m.iter().map(|v| v.ln()).collect();
    let fit = linear_fit(times, &logs).ok_or_else(|| LabError::InvalidArgument("times must not all coincide".into()))?;
    let mc_var: f64 = fit.lever.iter().zip(m.iter().zip(&se)).map(|(l, (v, e))| (l * e / v).powi(2)).sum();
    let rate_se = (fit.slope_se.powi(2) + mc_var).sqrt();
    let half = t_quantile(0.975, fit.dof) * rate_se;
    let rate = -fit.slope;
    let norm = f.triple_norm1();
    let violations = times
        .iter()
        .zip(m.iter().zip(&se))
        .filter(|(t, (v, e))| **v > (-beta * **t).exp() * norm + 3.0 * **e)
        .count();
    Ok(DecayFit {
        times: times.to_vec(),
        max_gradient: m,
        max_gradient_se: se,
        argmax,
        rate,
        rate_se,
        ci: (rate - half, rate + half),
        beta_lower: beta,
        violations,
        pass: rate >= beta - half && violations == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRow {
    pub site: LatticeIndex,
    pub t: f64,
    pub estimate: f64,
    pub std_error: f64,
    /// `C (1+|k|)^ρ e^{ρd(1+η)t}`.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub ball: BallParams,
    /// Calibrated constant, safety factor included.
    pub c: f64,
    pub safety_factor: f64,
    pub eta: f64,
    pub rows: Vec<MomentRow>,
}

impl MomentReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// `P_t[|y_k|](x0)` against `C(1+|k|)^ρ e^{ρd(1+η)t}`.
///
/// `C` is the largest envelope ratio `R(|k|^ρ+1)/(1+|k|)^ρ` over the cube,
/// times [`MOMENT_SAFETY_FACTOR`]: the worst `t = 0` ratio over the ball.
pub fn moment_growth_check(
    model: &InteractionModel,
    sites: &[LatticeIndex],
    x0: &LatticeState,
    ball: BallParams,
    times: &[f64],
    config: &SimConfig,
) -> Result<MomentReport, LabError> {
    check_start(model, x0)?;
    if !ball_membership(x0, &ball) {
        return Err(LabError::Precondition(format!("x0 lies outside B(R = {}, rho = {})", ball.r, ball.rho)));
    }
    let cube = model.cube();
    let idx = sites.iter().map(|s| cube.require(s)).collect::<Result<Vec<_>, _>>()?;
    let eta = validate_assumptions(model).eta;
    let d = model.dim() as f64;
    let weight = |k: &LatticeIndex| (1.0 + k.norm() as f64).powf(ball.rho);
    let c = MOMENT_SAFETY_FACTOR * cube.sites().map(|k| ball.envelope(&k) / weight(&k)).fold(0.0, f64::max);
    let engine = Engine::new(vec![(model, x0.values().to_vec())], config, record_steps(times, config)?)?;
    let obs = FnObserver {
        width: idx.len(),
        f: |_: usize, s: &[&[f64]], out: &mut [f64], _: &mut Vec<f64>| {
            for (o, &k) in out.iter_mut().zip(&idx) {
                *o = s[0][k].abs();
            }
        },
    };
    let stats = engine.stats(0..config.n_paths, &obs)?;
    let mut rows = Vec::new();
    for (r, &t) in times.iter().enumerate() {
        for (j, site) in sites.iter().enumerate() {
            let s = &stats[r * idx.len() + j];
            let bound = c * weight(site) * (ball.rho * d * (1.0 + eta) * t).exp();
            rows.push(MomentRow {
                site: site.clone(),
                t,
                estimate: s.mean(),
                std_error: s.std_error(),
                bound,
                pass: s.mean() <= bound + 3.0 * s.std_error(),
            });
        }
    }
    Ok(MomentReport {
        ball,
        c,
        safety_factor: MOMENT_SAFETY_FACTOR,
        eta,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapEntry {
    pub n: u32,
    pub m: u32,
    /// `P_t^M f(x0) - P_t^N f(x0)`.
    pub difference: f64,
    /// SE of the difference from per-path differences on common noise.
    pub std_error: f64,
}

impl GapEntry {
    pub fn gap(&self) -> f64 {
        self.difference.abs()
    }

    /// The gap exceeds three standard errors.
    pub fn resolved(&self) -> bool {
        self.gap() > 3.0 * self.std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub t: f64,
    pub radii: Vec<u32>,
    pub values: Vec<SemigroupEstimate>,
    /// Every pair `n < m` of the requested radii.
    pub gaps: Vec<GapEntry>,
}

impl GapReport {
    pub fn gap(&self, n: u32, m: u32) -> Option<&GapEntry> {
        self.gaps.iter().find(|g| g.n == n && g.m == m)
    }
}

/// `P_t^N f(x0)` for nested cubes on one shared noise realization, and all pairwise gaps.
///
/// `x0` lives on the largest cube and is restricted to the smaller ones.
pub fn galerkin_gap(
    model: &InteractionModel,
    radii: &[u32],
    f: &CylinderObservable,
    t: f64,
    x0: &LatticeState,
    config: &SimConfig,
) -> Result<GapReport, LabError> {
    let mut radii = radii.to_vec();
    radii.sort_unstable();
    radii.dedup();
    if radii.len() < 2 {
        return Err(LabError::InvalidArgument("a gap needs at least two distinct radii".into()));
    }
    let models = radii.iter().map(|&r| model.with_radius(r)).collect::<Result<Vec<_>, _>>()?;
    let largest = models.last().expect("two radii");
    check_start(largest, x0)?;
    let bound = models.iter().map(|m| f.bind(&m.cube())).collect::<Result<Vec<_>, _>>()?;
    let systems = models
        .iter()
        .map(|m| Ok((m, x0.resized(m.cube())?.into_values())))
        .collect::<Result<Vec<_>, LabError>>()?;
    let engine = Engine::new(systems, config, record_steps(&[t], config)?)?;
    let pairs: Vec<(usize, usize)> =
        (0..radii.len()).flat_map(|i| (i + 1..radii.len()).map(move |j| (i, j))).collect();
    let r = radii.len();
    let obs = FnObserver {
        width: r + pairs.len(),
        f: |_: usize, s: &[&[f64]], out: &mut [f64], scratch: &mut Vec<f64>| {
            for (k, b) in bound.iter().enumerate() {
                out[k] = b.eval(s[k], scratch);
            }
            for (p, &(i, j)) in pairs.iter().enumerate() {
                out[r + p] = out[j] - out[i];
            }
        },
    };
    let stats = engine.stats(0..config.n_paths, &obs)?;
    Ok(GapReport {
        t,
        values: (0..r).map(|k| estimate(&stats[k], t, f, x0)).collect(),
        gaps: pairs
            .iter()
            .enumerate()
            .map(|(p, &(i, j))| GapEntry {
                n: radii[i],
                m: radii[j],
                difference: stats[r + p].mean(),
                std_error: stats[r + p].std_error(),
            })
            .collect(),
        radii,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingRow {
    pub t: f64,
    pub site: LatticeIndex,
    pub ks: f64,
    pub w1: f64,
    /// Two-sample KS critical value at the 1% level.
    pub ks_critical: f64,
    pub n_a: u64,
    pub n_b: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingReport {
    pub rows: Vec<MixingRow>,
    /// Whether each start lies in the model's ball, when the model has one.
    pub x0a_in_ball: Option<bool>,
    pub x0b_in_ball: Option<bool>,
}

impl MixingReport {
    /// Rows at time `t`.
    pub fn at(&self, t: f64) -> impl Iterator<Item = &MixingRow> {
        self.rows.iter().filter(move |r| r.t == t)
    }
}

/// KS and W₁ between single-site marginals of two independent ensembles.
///
/// Ensemble `a` uses paths `0..n` and ensemble `b` uses `n..2n`, so the two
/// never share noise.
pub fn mixing_distance(
    model: &InteractionModel,
    x0a: &LatticeState,
    x0b: &LatticeState,
    sites: &[LatticeIndex],
    times: &[f64],
    config: &SimConfig,
) -> Result<MixingReport, LabError> {
    check_start(model, x0a)?;
    check_start(model, x0b)?;
    let cube = model.cube();
    let idx = sites.iter().map(|s| cube.require(s)).collect::<Result<Vec<_>, _>>()?;
    let steps = record_steps(times, config)?;
    let obs = FnObserver {
        width: idx.len(),
        f: |_: usize, s: &[&[f64]], out: &mut [f64], _: &mut Vec<f64>| {
            for (o, &k) in out.iter_mut().zip(&idx) {
                *o = s[0][k];
            }
        },
    };
    let n = config.n_paths;
    let run = |x0: &LatticeState, paths| -> Result<Vec<f64>, LabError> {
        let engine = Engine::new(vec![(model, x0.values().to_vec())], config, steps.clone())?;
        Ok(engine.collect(paths, &obs)?)
    };
    let a = run(x0a, 0..n)?;
    let b = run(x0b, n..2 * n)?;
    let width = idx.len();
    let row_len = width * times.len();
    let column = |flat: &[f64], r: usize, j: usize| -> Vec<f64> { flat.chunks(row_len).map(|row| row[r * width + j]).collect() };
    let mut rows = Vec::new();
    for (r, &t) in times.iter().enumerate() {
        for (j, site) in sites.iter().enumerate() {
            let (sa, sb) = (column(&a, r, j), column(&b, r, j));
            rows.push(MixingRow {
                t,
                site: site.clone(),
                ks: ks_two_sample(&sa, &sb),
                w1: wasserstein1(&sa, &sb),
                ks_critical: ks_critical_two_sample(sa.len(), sb.len(), KS_LEVEL),
                n_a: sa.len() as u64,
                n_b: sb.len() as u64,
            });
        }
    }
    let ball = model.ball();
    Ok(MixingReport {
        rows,
        x0a_in_ball: ball.map(|b| ball_membership(x0a, &b)),
        x0b_in_ball: ball.map(|b| ball_membership(x0b, &b)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Increment {
    pub t1: f64,
    pub t2: f64,
    /// `P_{t₂} f(0) - P_{t₁} f(0)` on one ensemble.
    pub difference: f64,
    pub std_error: f64,
}

impl Increment {
    pub fn magnitude(&self) -> f64 {
        self.difference.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitReport {
    pub estimates: Vec<SemigroupEstimate>,
    pub increments: Vec<Increment>,
    /// The value at the last time.
    pub ell_estimate: f64,
    pub ell_std_error: f64,
}

/// `P_t f(0)` along increasing times, with successive differences.
pub fn long_time_limit(
    model: &InteractionModel,
    f: &CylinderObservable,
    times: &[f64],
    config: &SimConfig,
) -> Result<LimitReport, LabError> {
    let x0 = LatticeState::zeros(model.cube());
    let bound = f.bind(&model.cube())?;
    let engine = Engine::new(vec![(model, x0.values().to_vec())], config, record_steps(times, config)?)?;
    let obs = FnObserver {
        width: 1,
        f: |_: usize, s: &[&[f64]], out: &mut [f64], scratch: &mut Vec<f64>| out[0] = bound.eval(s[0], scratch),
    };
    let n = times.len();
    let empty = || (vec![RunningStats::new(); n], vec![RunningStats::new(); n.saturating_sub(1)]);
    let (values, diffs) = engine.fold(
        0..config.n_paths,
        &obs,
        empty,
        |(v, d), _, row| {
            for (s, x) in v.iter_mut().zip(row) {
                s.push(*x);
            }
            for (s, w) in d.iter_mut().zip(row.windows(2)) {
                s.push(w[1] - w[0]);
            }
        },
        |(v, d), (v2, d2)| {
            v.iter_mut().zip(&v2).for_each(|(a, b)| a.merge(b));
            d.iter_mut().zip(&d2).for_each(|(a, b)| a.merge(b));
        },
    )?;
    let estimates: Vec<SemigroupEstimate> = values.iter().zip(times).map(|(s, &t)| estimate(s, t, f, &x0)).collect();
    let last = estimates.last().expect("times are non-empty");
    Ok(LimitReport {
        ell_estimate: last.value,
        ell_std_error: last.std_error,
        increments: diffs
            .iter()
            .zip(times.windows(2))
            .map(|(s, w)| Increment {
                t1: w[0],
                t2: w[1],
                difference: s.mean(),
                std_error: s.std_error(),
            })
            .collect(),
        estimates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DuhamelReport {
    pub t: f64,
    pub dt: f64,
    /// `P_t f(x)`.
    pub lhs: f64,
    pub lhs_se: f64,
    /// `S_t f(x)` by quadrature.
    pub free: f64,
    /// Trapezoid value of `∫₀ᵗ S_{t-s}[Σ_i H_i ∂_i P_s f](x) ds`.
    pub integral: f64,
    /// `lhs - free - integral`.
    pub signed_residual: f64,
    pub std_error: f64,
}

impl DuhamelReport {
    pub fn residual(&self) -> f64 {
        self.signed_residual.abs()
    }
}

/// The split of `f` the Du Hamel check can evaluate: `constant + Σ c_k x_k`
/// or a bounded function of a single uncoupled coordinate.
enum DuhamelTarget {
    Affine(f64, Vec<(usize, f64)>),
    Single(usize, LineFunction),
}

fn duhamel_target(model: &InteractionModel, f: &CylinderObservable) -> Result<DuhamelTarget, LabError> {
    let cube = model.cube();
    let support = f.support().iter().map(|s| cube.require(s)).collect::<Result<Vec<_>, _>>()?;
    match f.kind() {
        ObservableKind::Constant(c) => return Ok(DuhamelTarget::Affine(*c, vec![])),
        ObservableKind::Coordinate => return Ok(DuhamelTarget::Affine(0.0, vec![(support[0], 1.0)])),
        ObservableKind::Affine { constant, coeffs } => {
            return Ok(DuhamelTarget::Affine(*constant, support.iter().copied().zip(coeffs.iter().copied()).collect()))
        }
        _ => {}
    }
    if support.len() == 1 && model.couplings().is_empty() && f.sup_bound().is_finite() {
        let g = f.clone();
        return Ok(DuhamelTarget::Single(support[0], LineFunction::new(move |y| g.eval_local(&[y]))));
    }
    Err(LabError::Unsupported(format!(
        "Du Hamel check needs an affine observable or a bounded single-site one without couplings, got {}",
        f.name()
    )))
}

/// `P_t f(x) - S_t f(x) - ∫₀ᵗ S_{t-s}[Σ_i H_i ∂_i P_s f](x) ds` for `U ≡ 0`,
/// where `S` is the product OU semigroup and `H_i(y) = Σ_{j≠i} a_{ij} y_j`.
///
/// For affine `f` the gradient `∂_i P_s f` does not depend on the state, so the
/// integrand is `Σ_i ∂_i P_s f · Σ_{j≠i} a_{ij} S_{t-s}[y ↦ y](x_j)`: one-site
/// quadratures times common-noise gradients. The time integral is the
/// trapezoid rule on the step grid.
pub fn duhamel_residual(
    model: &InteractionModel,
    f: &CylinderObservable,
    t: f64,
    x: &LatticeState,
    config: &SimConfig,
    grid: &KernelGrid,
) -> Result<DuhamelReport, LabError> {
    if !model.potential().vanishes() {
        return Err(LabError::Unsupported("Du Hamel check requires U = 0".into()));
    }
    check_start(model, x)?;
    let target = duhamel_target(model, f)?;
    let params = config.stable;
    let dt = config.dt;
    let n = config.steps_to(t)?;
    if let DuhamelTarget::Single(k, line) = &target {
        let s = semigroup_stats(model, f, x, &[t], config)?;
        let free = ou_apply(line, t, x.values()[*k], params, grid)?;
        return Ok(DuhamelReport {
            t,
            dt,
            lhs: s[0].mean(),
            lhs_se: s[0].std_error(),
            free,
            integral: 0.0,
            signed_residual: s[0].mean() - free,
            std_error: s[0].std_error(),
        });
    }
    let DuhamelTarget::Affine(constant, terms) = target else { unreachable!() };
    let xs = x.values();
    let sites = all_sites(model);
    let h = 1.0;
    check_h(h)?;

    // S_τ[y ↦ y](x_j), cached on (τ, x_j).
    let identity = LineFunction::identity();
    let mut cache: HashMap<(u64, u64), f64> = HashMap::new();
    let mut ou_mean = |tau: f64, y: f64| -> Result<f64, LabError> {
        if let Some(v) = cache.get(&(tau.to_bits(), y.to_bits())) {
            return Ok(*v);
        }
        let v = ou_apply(&identity, tau, y, params, grid)?;
        cache.insert((tau.to_bits(), y.to_bits()), v);
        Ok(v)
    };
    let free = constant + terms.iter().map(|&(k, c)| Ok(c * ou_mean(t, xs[k])?)).sum::<Result<f64, LabError>>()?;
    // weights[m][i] = trapezoid weight × H_i pushed through S_{t - s_m}, evaluated at x.
    let mut weights = vec![vec![0.0; sites.len()]; n as usize + 1];
    for (m, w) in weights.iter_mut().enumerate() {
        let s = m as f64 * dt;
        let tau = (t - s).max(0.0);
        let trap = if m == 0 || m == n as usize { 0.5 * dt } else { dt };
        for (i, wi) in w.iter_mut().enumerate() {
            let mut hsum = 0.0;
            for (j, a) in model.linear_neighbours(i) {
                hsum += a * ou_mean(tau, xs[j])?;
            }
            *wi = trap * hsum;
        }
    }

    let mut systems = vec![(model, xs.to_vec())];
    for &k in &sites {
        systems.push((model, shifted(xs, &[(k, h)])));
        systems.push((model, shifted(xs, &[(k, -h)])));
    }
    let engine = Engine::new(systems, config, (0..=n).collect())?;
    let affine = |y: &[f64]| constant + terms.iter().map(|&(k, c)| c * y[k]).sum::<f64>();
    let width = 1 + sites.len();
    let obs = FnObserver {
        width,
        f: |_: usize, s: &[&[f64]], out: &mut [f64], _: &mut Vec<f64>| {
            out[0] = affine(s[0]);
            for i in 0..sites.len() {
                out[1 + i] = (affine(s[1 + 2 * i]) - affine(s[2 + 2 * i])) / (2.0 * h);
            }
        },
    };
    let (lhs, integral, resid) = engine.fold(
        0..config.n_paths,
        &obs,
        || (RunningStats::new(), RunningStats::new(), RunningStats::new()),
        |(l, g, r), _, row| {
            let value = row[n as usize * width];
            let mut integ = 0.0;
            for (m, w) in weights.iter().enumerate() {
                let grad = &row[m * width + 1..(m + 1) * width];
                integ += grad.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            }
            l.push(value);
            g.push(integ);
            r.push(value - free - integ);
        },
        |(l, g, r), (l2, g2, r2)| {
            l.merge(&l2);
            g.merge(&g2);
            r.merge(&r2);
        },
    )?;
    Ok(DuhamelReport {
        t,
        dt,
        lhs: lhs.mean(),
        lhs_se: lhs.std_error(),
        free,
        integral: integral.mean(),
        signed_residual: resid.mean(),
        std_error: resid.std_error(),
    })
}
