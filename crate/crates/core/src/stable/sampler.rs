use std::f64::consts::{FRAC_PI_2, PI};

use super::StableParams;

/// One draw with characteristic function `exp(-|λ|^α)` from two uniforms in (0, 1).
///
/// Chambers–Mallows–Stuck transform for the symmetric case; `α = 2` takes the
/// Box–Muller branch (variance 2) and `α = 1` the Cauchy tangent.
#[inline]
pub fn sample_standard_stable(params: StableParams, u1: f64, u2: f64) -> f64 {
    debug_assert!(u1 > 0.0 && u1 < 1.0 && u2 > 0.0 && u2 < 1.0);
    let alpha = params.alpha();
    if alpha == 2.0 {
        return 2.0 * (-u2.ln()).sqrt() * (2.0 * PI * u1).cos();
    }
    let v = PI * u1 - FRAC_PI_2;
    if alpha == 1.0 {
        return v.tan();
    }
    let w = -u2.ln();
    let cv = v.cos();
    (alpha * v).sin() / cv.powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}
