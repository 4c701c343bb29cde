//! One-dimensional symmetric α-stable laws and the α-stable Ornstein–Uhlenbeck
//! process.
//!
//! Convention: a unit-rate increment over duration `t` has characteristic
//! function `exp(-t|λ|^α)`. At `α = 2` this is a Gaussian with variance `2t`
//! and the generator is the full second derivative.

mod density;
mod generator;
mod ou;
mod sampler;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::QuadratureError;

pub use density::{stable_density, StableCdf, StableDensity};
pub use generator::{compute_c_alpha, fractional_generator_apply, FourierMode, SpectralFunction};
pub use ou::{
    effective_time, kernel_tv_distance, ou_abs_moment, ou_apply, ou_kernel, ou_stationary_density,
    LineFunction, OUKernelQuery,
};
pub use sampler::sample_standard_stable;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("stability index {0} outside (0, 2]")]
    InvalidAlpha(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("Fourier cutoff {lambda_max} too small for time {t}: need at least {needed}")]
    Truncation { t: f64, lambda_max: f64, needed: f64 },
    #[error("kernel needs {needed} panels at |x-y| = {distance}, above the limit {limit}")]
    Resolution { distance: f64, needed: usize, limit: usize },
    #[error("density {value:e} at |x-y| = {distance} is negative beyond round-off; grid under-resolved")]
    NegativeDensity { value: f64, distance: f64 },
    #[error("kernel at t = 0 is a point mass and has no density")]
    DegenerateKernel,
    #[error("moment of order {beta} requires 1 <= beta < alpha = {alpha}")]
    MomentOrder { beta: f64, alpha: f64 },
    #[error("C_alpha diverges at alpha = 2 (the generator is local)")]
    LocalGenerator,
    #[error("Fourier transform still {magnitude:e} at the declared cutoff {cutoff}")]
    InsufficientDecay { cutoff: f64, magnitude: f64 },
    #[error("integral against the kernel did not reach tolerance: {0}")]
    TailBound(#[from] QuadratureError),
}

/// Stability index of the driving noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct StableParams {
    alpha: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    alpha: f64,
}

impl TryFrom<RawParams> for StableParams {
    type Error = KernelError;
    fn try_from(raw: RawParams) -> Result<Self, Self::Error> {
        StableParams::new(raw.alpha)
    }
}

impl From<StableParams> for RawParams {
    fn from(p: StableParams) -> Self {
        RawParams { alpha: p.alpha }
    }
}

impl StableParams {
    pub fn new(alpha: f64) -> Result<Self, KernelError> {
        if alpha.is_finite() && alpha > 0.0 && alpha <= 2.0 {
            Ok(StableParams { alpha })
        } else {
            Err(KernelError::InvalidAlpha(alpha))
        }
    }

    #[inline]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Leading constant of the tail `p(1;0,y) ~ c |y|^{-1-α}`; zero at `α = 2`.
    pub fn tail_constant(&self) -> f64 {
        let a = self.alpha;
        statrs::function::gamma::gamma(1.0 + a) * (std::f64::consts::PI * a / 2.0).sin()
            / std::f64::consts::PI
    }
}

/// Discretization of the Fourier inversion and of integrals against the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelGrid {
    /// Largest admissible Fourier truncation radius.
    pub lambda_max: f64,
    /// Quadrature nodes on the real-axis inversion grid.
    pub n_nodes: usize,
    /// Inner integration window, in units of the kernel scale `τ^{1/α}`.
    pub y_max: f64,
}

impl Default for KernelGrid {
    fn default() -> Self {
        KernelGrid {
            lambda_max: 1e5,
            n_nodes: 1 << 10,
            y_max: 50.0,
        }
    }
}

impl KernelGrid {
    /// Grid whose cutoff resolves every time `t >= t_min`.
    pub fn for_min_time(t_min: f64, params: StableParams) -> Self {
        KernelGrid {
            lambda_max: density::cutoff(t_min, params.alpha()) * 1.01,
            ..KernelGrid::default()
        }
    }
}
