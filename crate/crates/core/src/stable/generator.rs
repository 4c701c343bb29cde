use std::f64::consts::{FRAC_1_PI, PI};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use super::ou::effective_time;
use super::{KernelError, KernelGrid, StableParams};
use crate::quadrature::{graded_breaks, integrate_pieces, panel_nodes, Tolerance};

/// `f̂` must fall below this (times `λ^α`) at the declared cutoff.
const DECAY_FLOOR: f64 = 1e-12;

/// One trigonometric component `cos·cos(freq·x) + sin·sin(freq·x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierMode {
    pub freq: f64,
    pub cos: f64,
    pub sin: f64,
}

type Transform = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// A real function given through its Fourier data:
/// `f(x) = c + Σ modes + (1/2π)∫ f̂(λ) e^{iλx} dλ`, with `f̂` negligible beyond `cutoff`.
#[derive(Clone, Default)]
pub struct SpectralFunction {
    constant: f64,
    modes: Vec<FourierMode>,
    transform: Option<(Transform, f64)>,
}

impl fmt::Debug for SpectralFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralFunction")
            .field("constant", &self.constant)
            .field("modes", &self.modes)
            .field("cutoff", &self.transform.as_ref().map(|t| t.1))
            .finish()
    }
}

impl SpectralFunction {
    pub fn constant(c: f64) -> Self {
        SpectralFunction {
            constant: c,
            ..Default::default()
        }
    }

    pub fn cosine(freq: f64) -> Self {
        SpectralFunction::default().with_mode(FourierMode { freq, cos: 1.0, sin: 0.0 })
    }

    /// `e^{-x²}`, whose transform is `√π e^{-λ²/4}`.
    pub fn gaussian() -> Self {
        SpectralFunction::default().with_transform(|l| Complex64::new(PI.sqrt() * (-l * l / 4.0).exp(), 0.0), 13.0)
    }

    pub fn with_mode(mut self, mode: FourierMode) -> Self {
        self.modes.push(mode);
        self
    }

    /// Adds a continuous part with transform `f̂` (Hermitian, `f̂(-λ) = conj f̂(λ)`).
    pub fn with_transform(mut self, fhat: impl Fn(f64) -> Complex64 + Send + Sync + 'static, cutoff: f64) -> Self {
        self.transform = Some((Arc::new(fhat), cutoff));
        self
    }

    /// Applies `symbol(|λ|)` to every frequency and evaluates at `x`.
    fn apply_symbol(&self, x: f64, grid: &KernelGrid, symbol: impl Fn(f64) -> f64) -> Result<f64, KernelError> {
        let mut acc = symbol(0.0) * self.constant;
        for m in &self.modes {
            let (s, c) = (m.freq * x).sin_cos();
            acc += symbol(m.freq.abs()) * (m.cos * c + m.sin * s);
        }
        if let Some((fhat, cutoff)) = &self.transform {
            let edge = symbol(*cutoff).abs().max(1.0) * fhat(*cutoff).norm();
            if edge > DECAY_FLOOR {
                return Err(KernelError::InsufficientDecay {
                    cutoff: *cutoff,
                    magnitude: edge,
                });
            }
            let panels = (grid.n_nodes / 16).max(4);
            let part: f64 = panel_nodes(&graded_breaks(*cutoff, panels, 6))
                .into_iter()
                .map(|(l, w)| w * symbol(l) * (fhat(l) * Complex64::from_polar(1.0, l * x)).re)
                .sum();
            acc += FRAC_1_PI * part;
        }
        Ok(acc)
    }

    pub fn value(&self, x: f64, grid: &KernelGrid) -> Result<f64, KernelError> {
        self.apply_symbol(x, grid, |_| 1.0)
    }

    /// The OU semigroup applied for time `t`: frequencies contract by `e^{-t}`
    /// and are damped by `exp(-τ|λ|^α)`.
    pub fn ou_evolved(&self, t: f64, params: StableParams) -> SpectralFunction {
        let alpha = params.alpha();
        let tau = effective_time(t, alpha);
        let shrink = (-t).exp();
        let modes = self
            .modes
            .iter()
            .map(|m| {
                let damp = (-tau * m.freq.abs().powf(alpha)).exp();
                FourierMode {
                    freq: m.freq * shrink,
                    cos: m.cos * damp,
                    sin: m.sin * damp,
                }
            })
            .collect();
        let transform = self.transform.as_ref().map(|(fhat, cutoff)| {
            let fhat = Arc::clone(fhat);
            let grow = t.exp();
            let rate = (grow.powf(alpha) - 1.0) / alpha;
            let evolved: Transform =
                Arc::new(move |l: f64| grow * fhat(grow * l) * (-rate * l.abs().powf(alpha)).exp());
            (evolved, cutoff * shrink)
        });
        SpectralFunction {
            constant: self.constant,
            modes,
            transform,
        }
    }
}

/// Generator of the stable semigroup, the Fourier multiplier `-|λ|^α`,
/// evaluated at `x`. At `α = 2` it is `f''`.
pub fn fractional_generator_apply(
    f: &SpectralFunction,
    x: f64,
    params: StableParams,
    grid: &KernelGrid,
) -> Result<f64, KernelError> {
    let alpha = params.alpha();
    f.apply_symbol(x, grid, |l| if l == 0.0 { 0.0 } else { -l.powf(alpha) })
}

/// `C_α = ∫ (1 - cos y) |y|^{-1-α} dy` over `ℝ \ {0}`, for `0 < α < 2`.
pub fn compute_c_alpha(params: StableParams) -> Result<f64, KernelError> {
    let alpha = params.alpha();
    if alpha >= 2.0 {
        return Err(KernelError::LocalGenerator);
    }
    let tol = Tolerance::new(1e-14, 1e-13);
    let s = 1.0 + alpha;
    // On (0, 1] substitute y = u^p, p = 1/(2-α): the Jacobian cancels y^{1-α}
    // exactly and the integrand becomes p(1 - cos y)/y², bounded by p/2.
    let p = 1.0 / (2.0 - alpha);
    let near = integrate_pieces(
        |u: f64| {
            let y = u.powf(p);
            let half = 0.5 * y;
            let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
            0.5 * p * sinc * sinc
        },
        &[0.0, 0.5, 1.0],
        tol,
    )?;
    // On [1, ∞): ∫ y^{-s} = 1/α minus the oscillating part, integrated period by
    // period up to Y = 2πn and closed with two integration-by-parts terms.
    let periods = 200;
    let top = 2.0 * PI * periods as f64;
    let mut breaks = vec![1.0];
    breaks.extend((1..=periods).map(|k| 2.0 * PI * k as f64));
    let wave = integrate_pieces(|y: f64| y.cos() * y.powf(-s), &breaks, Tolerance::new(1e-12, 1e-12))?;
    let wave_tail = -top.sin() * top.powf(-s) + s * top.cos() * top.powf(-s - 1.0);
    let far = 1.0 / alpha - (wave.value + wave_tail);
    Ok(2.0 * (near.value + far))
}
