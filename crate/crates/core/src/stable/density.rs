use std::f64::consts::{FRAC_1_PI, PI};

use super::{KernelError, KernelGrid, StableParams};
use statrs::function::gamma::ln_gamma;

use crate::quadrature::{graded_breaks, integrate, panel_nodes, Tolerance};

/// `-ln` of the largest neglected Fourier weight, e^{-37} < 1e-16.
const TAIL_EXPONENT: f64 = 37.0;
/// Beyond this many kernel scales the inversion moves onto a rotated ray.
const RAY_SWITCH: f64 = 4.0;
/// Beyond this many kernel scales the tail series replaces the ray integral.
const SERIES_SWITCH: f64 = 200.0;
const SERIES_TERMS: usize = 40;
/// At `α = 2` the density beyond this many scales is treated as zero.
const GAUSS_FLOOR: f64 = 40.0;
const GRADING_LEVELS: usize = 12;
const MAX_RAY_PANELS: usize = 1 << 14;

pub(super) fn cutoff(tau: f64, alpha: f64) -> f64 {
    (TAIL_EXPONENT / tau).powf(1.0 / alpha)
}

/// Density `p(τ; 0, z)` of a symmetric α-stable law at a fixed time `τ`.
///
/// Near the centre this is the cosine transform `(1/π)∫_0^L e^{-τλ^α} cos(zλ) dλ`
/// on a fixed panel grid; far out the same integral is taken along the ray
/// `λ = r e^{iφ}`, where the oscillating factor decays exponentially.
#[derive(Debug, Clone)]
pub struct StableDensity {
    tau: f64,
    alpha: f64,
    scale: f64,
    table: Vec<(f64, f64)>,
}

impl StableDensity {
    pub fn new(tau: f64, params: StableParams, grid: &KernelGrid) -> Result<Self, KernelError> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(KernelError::InvalidArgument(format!(
                "stable density needs t > 0, got {tau}"
            )));
        }
        let alpha = params.alpha();
        let len = cutoff(tau, alpha);
        if len > grid.lambda_max {
            return Err(KernelError::Truncation {
                t: tau,
                lambda_max: grid.lambda_max,
                needed: len,
            });
        }
        let panels = (grid.n_nodes / 16).max(4);
        let table = panel_nodes(&graded_breaks(len, panels, GRADING_LEVELS))
            .into_iter()
            .map(|(l, w)| (l, w * (-tau * l.powf(alpha)).exp()))
            .collect();
        Ok(StableDensity {
            tau,
            alpha,
            scale: tau.powf(1.0 / alpha),
            table,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Width `τ^{1/α}` of the law.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Density at displacement `z = x - y`.
    pub fn at(&self, z: f64) -> Result<f64, KernelError> {
        if !z.is_finite() {
            return Err(KernelError::InvalidArgument(format!("non-finite displacement {z}")));
        }
        let z = z.abs();
        let raw = if z <= RAY_SWITCH * self.scale {
            FRAC_1_PI * self.table.iter().map(|&(l, w)| w * (z * l).cos()).sum::<f64>()
        } else if self.alpha == 2.0 && z > GAUSS_FLOOR * self.scale {
            // below e^{-400}, far under the ray integral's round-off
            0.0
        } else if z <= SERIES_SWITCH * self.scale || self.alpha == 2.0 {
            self.along_ray(z)?
        } else {
            self.tail_series(z)
        };
        if raw >= 0.0 {
            Ok(raw)
        } else if raw > -1e-12 {
            Ok(0.0)
        } else {
            Err(KernelError::NegativeDensity {
                value: raw,
                distance: z,
            })
        }
    }

    /// `(1/π) Σ_k (-1)^{k+1} Γ(kα+1)/k! sin(kπα/2) τ^k z^{-kα-1}`, summed until
    /// the terms stop shrinking.
    fn tail_series(&self, z: f64) -> f64 {
        let (tau, alpha) = (self.tau, self.alpha);
        let x = tau * z.powf(-alpha);
        let mut sum = 0.0f64;
        let mut prev = f64::INFINITY;
        for k in 1..=SERIES_TERMS {
            let kf = k as f64;
            let log_mag = ln_gamma(kf * alpha + 1.0) - ln_gamma(kf + 1.0) + kf * x.ln();
            // stop on the envelope: the sine factor vanishes at some k without the series ending
            let mag = log_mag.exp();
            if mag > prev || mag <= 1e-17 * sum.abs() {
                break;
            }
            prev = mag;
            let term = mag * (kf * PI * alpha / 2.0).sin();
            sum += if k % 2 == 1 { term } else { -term };
        }
        FRAC_1_PI * sum / z
    }

    fn along_ray(&self, z: f64) -> Result<f64, KernelError> {
        let (tau, alpha) = (self.tau, self.alpha);
        let phi = PI / (4.0 * alpha.max(1.0));
        let (sin_p, cos_p) = phi.sin_cos();
        let (sin_ap, cos_ap) = (alpha * phi).sin_cos();
        let reach = (40.0 / (z * sin_p)).min((40.0 / (tau * cos_ap)).powf(1.0 / alpha));
        let turns = reach * z * cos_p + tau * reach.powf(alpha) * sin_ap;
        let panels = (turns / PI).ceil() as usize + 4;
        if panels > MAX_RAY_PANELS {
            return Err(KernelError::Resolution {
                distance: z,
                needed: panels,
                limit: MAX_RAY_PANELS,
            });
        }
        let sum: f64 = panel_nodes(&graded_breaks(reach, panels, GRADING_LEVELS))
            .into_iter()
            .map(|(r, w)| {
                let ra = tau * r.powf(alpha);
                let re = -ra * cos_ap - z * r * sin_p;
                let im = -ra * sin_ap + z * r * cos_p;
                w * re.exp() * (im + phi).cos()
            })
            .sum();
        Ok(FRAC_1_PI * sum)
    }
}

/// `p(t; x, y) = (1/2π)∫ e^{-t|λ|^α + i(x-y)λ} dλ`.
pub fn stable_density(
    t: f64,
    x: f64,
    y: f64,
    params: StableParams,
    grid: &KernelGrid,
) -> Result<f64, KernelError> {
    StableDensity::new(t, params, grid)?.at(x - y)
}

/// Distribution function of `p(τ; 0, ·)`, tabulated by integrating the density.
#[derive(Debug, Clone)]
pub struct StableCdf {
    scale: f64,
    alpha: f64,
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    /// `1 - F` at the last knot.
    tail: f64,
}

impl StableCdf {
    pub fn new(tau: f64, params: StableParams, grid: &KernelGrid) -> Result<Self, KernelError> {
        let density = StableDensity::new(tau, params, grid)?;
        let s = density.scale();
        let mut knots = Vec::new();
        let mut y = 0.0;
        while y < 20.0 {
            knots.push(y * s);
            y += 0.02;
        }
        while y < 2.0e4 {
            knots.push(y * s);
            y *= 1.02;
        }
        let tol = Tolerance::new(1e-14, 1e-12);
        let mut values = Vec::with_capacity(knots.len());
        let mut slopes = Vec::with_capacity(knots.len());
        let mut acc = 0.5;
        values.push(acc);
        slopes.push(density.at(0.0)?);
        for w in knots.windows(2) {
            let mut failure = None;
            let piece = integrate(
                |u| {
                    density.at(u).unwrap_or_else(|e| {
                        failure = Some(e);
                        0.0
                    })
                },
                w[0],
                w[1],
                tol,
            )?;
            if let Some(e) = failure {
                return Err(e);
            }
            acc += piece.value;
            values.push(acc);
            slopes.push(density.at(w[1])?);
        }
        Ok(StableCdf {
            scale: s,
            alpha: params.alpha(),
            tail: (1.0 - acc).max(0.0),
            knots,
            values,
            slopes,
        })
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y < 0.0 {
            return 1.0 - self.cdf(-y);
        }
        let last = *self.knots.last().expect("table is non-empty");
        if y >= last {
            return if self.alpha < 2.0 {
                1.0 - self.tail * (last / y).powf(self.alpha)
            } else {
                1.0
            };
        }
        let k = match self.knots.binary_search_by(|v| v.total_cmp(&y)) {
            Ok(k) => return self.values[k],
            Err(k) => k - 1,
        };
        let (y0, y1) = (self.knots[k], self.knots[k + 1]);
        let h = y1 - y0;
        let s = (y - y0) / h;
        let (f0, f1) = (self.values[k], self.values[k + 1]);
        let (d0, d1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        (h00 * f0 + h10 * d0 + h01 * f1 + h11 * d1).clamp(0.0, 1.0)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}
