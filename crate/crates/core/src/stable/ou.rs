use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use super::density::StableDensity;
use super::{KernelError, KernelGrid, StableParams};
use crate::quadrature::{integrate_pieces, integrate_tail, Integral, QuadratureError, Tolerance};

const TOL: Tolerance = Tolerance::new(1e-12, 1e-11);

/// Pointwise query of the OU transition density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OUKernelQuery {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Time at which a free stable increment has the spread of the OU kernel at `t`:
/// `(1 - e^{-αt}) / α`, equal to `1/α` at `t = ∞`.
pub fn effective_time(t: f64, alpha: f64) -> f64 {
    if t == f64::INFINITY {
        1.0 / alpha
    } else {
        -(-alpha * t).exp_m1() / alpha
    }
}

fn check_time(t: f64) -> Result<(), KernelError> {
    if t.is_nan() || t < 0.0 {
        Err(KernelError::InvalidArgument(format!("time must be >= 0, got {t}")))
    } else {
        Ok(())
    }
}

/// `p((1 - e^{-αt})/α; e^{-t}x, y)`.
pub fn ou_kernel(q: OUKernelQuery, params: StableParams, grid: &KernelGrid) -> Result<f64, KernelError> {
    check_time(q.t)?;
    if !(q.x.is_finite() && q.y.is_finite()) {
        return Err(KernelError::InvalidArgument("kernel query points must be finite".into()));
    }
    if q.t == 0.0 {
        return Err(KernelError::DegenerateKernel);
    }
    let tau = effective_time(q.t, params.alpha());
    StableDensity::new(tau, params, grid)?.at(q.y - (-q.t).exp() * q.x)
}

/// Stationary law of the OU process, `p(1/α; 0, y)`.
pub fn ou_stationary_density(y: f64, params: StableParams, grid: &KernelGrid) -> Result<f64, KernelError> {
    StableDensity::new(1.0 / params.alpha(), params, grid)?.at(y)
}

/// A function of one variable with a declared tail: supported on a finite
/// interval, or growing at most like `|y|^growth` (bounded when `growth = 0`).
#[derive(Clone)]
pub struct LineFunction {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    support: Option<(f64, f64)>,
    growth: f64,
}

impl fmt::Debug for LineFunction {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("LineFunction")
            .field("support", &self.support)
            .field("growth", &self.growth)
            .finish_non_exhaustive()
    }
}

impl LineFunction {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        LineFunction {
            f: Arc::new(f),
            support: None,
            growth: 0.0,
        }
    }

    /// `y ↦ y`.
    pub fn identity() -> Self {
        LineFunction::new(|y| y).with_growth(1.0)
    }

    /// Declares `|f(y)| ≤ C(1 + |y|^growth)`.
    pub fn with_growth(mut self, growth: f64) -> Self {
        self.growth = growth.max(0.0);
        self
    }

    /// Declares that `f` vanishes outside `[lo, hi]`.
    pub fn with_support(mut self, lo: f64, hi: f64) -> Self {
        self.support = Some((lo.min(hi), lo.max(hi)));
        self
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        self.support
    }

    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        (self.f)(y)
    }
}

/// Runs a quadrature whose integrand may fail, surfacing the first failure.
fn guarded<F>(
    mut g: F,
    run: impl FnOnce(&mut dyn FnMut(f64) -> f64) -> Result<Integral, QuadratureError>,
) -> Result<f64, KernelError>
where
    F: FnMut(f64) -> Result<f64, KernelError>,
{
    let failure = RefCell::new(None);
    let mut h = |y: f64| match g(y) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let out = run(&mut h);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(out?.value)
}

/// `∫ g` over the whole line, with `g` concentrated in `centre ± width` and
/// decaying at least like `|y|^{-1-α}` outside.
fn whole_line<F>(g: F, centre: f64, width: f64, q: f64) -> Result<f64, KernelError>
where
    F: FnMut(f64) -> Result<f64, KernelError>,
{
    guarded(g, |h| {
        let inner = integrate_pieces(&mut *h, &[centre - width, centre, centre + width], TOL)?;
        let right = integrate_tail(&mut *h, centre + width, 1.0, width, q, TOL)?;
        let left = integrate_tail(&mut *h, centre - width, -1.0, width, q, TOL)?;
        Ok(inner + right + left)
    })
}

/// `S_t f(x) = ∫ p((1 - e^{-αt})/α; e^{-t}x, y) f(y) dy`; exactly `f(x)` at `t = 0`.
pub fn ou_apply(
    f: &LineFunction,
    t: f64,
    x: f64,
    params: StableParams,
    grid: &KernelGrid,
) -> Result<f64, KernelError> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(f.eval(x));
    }
    let alpha = params.alpha();
    let kernel = StableDensity::new(effective_time(t, alpha), params, grid)?;
    let centre = (-t).exp() * x;
    let width = grid.y_max * kernel.scale();
    let g = |y: f64| Ok(kernel.at(y - centre)? * f.eval(y));
    match f.support {
        Some((lo, hi)) => {
            let mut breaks = vec![lo, hi];
            for b in [centre - width, centre, centre + width] {
                if b > lo && b < hi {
                    breaks.push(b);
                }
            }
            breaks.sort_by(f64::total_cmp);
            guarded(g, |h| integrate_pieces(h, &breaks, TOL))
        }
        None => {
            if alpha < 2.0 && f.growth >= alpha {
                return Err(KernelError::InvalidArgument(format!(
                    "a function growing like |y|^{} is not integrable against the alpha = {alpha} kernel",
                    f.growth
                )));
            }
            let q = if alpha < 2.0 { 2.0 / (alpha - f.growth) } else { 2.0 };
            whole_line(g, centre, width, q)
        }
    }
}

/// `S_t[|·|^β](0)`, the β-th absolute moment of the OU process started at 0.
/// Accepts `t = ∞` for the stationary moment.
pub fn ou_abs_moment(t: f64, beta: f64, params: StableParams, grid: &KernelGrid) -> Result<f64, KernelError> {
    let alpha = params.alpha();
    if !(beta >= 1.0 && beta < alpha) {
        return Err(KernelError::MomentOrder { beta, alpha });
    }
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let unit = StableDensity::new(1.0, params, grid)?;
    let width = grid.y_max;
    let half = guarded(
        |y| Ok(unit.at(y)? * y.abs().powf(beta)),
        |h| {
            let inner = integrate_pieces(&mut *h, &[0.0, 1.0, width], TOL)?;
            let tail = integrate_tail(&mut *h, width, 1.0, width, 2.0 / (alpha - beta), TOL)?;
            Ok(inner + tail)
        },
    )?;
    Ok(effective_time(t, alpha).powf(beta / alpha) * 2.0 * half)
}

/// `∫ |p(τ(t₂); 0, y) - p(τ(t₁); 0, y)| dy` with `τ(t) = (1 - e^{-αt})/α`.
pub fn kernel_tv_distance(t1: f64, t2: f64, params: StableParams, grid: &KernelGrid) -> Result<f64, KernelError> {
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(KernelError::InvalidArgument(format!(
            "kernel distance needs positive times, got {t1} and {t2}"
        )));
    }
    if t1 == t2 {
        return Ok(0.0);
    }
    let alpha = params.alpha();
    let p1 = StableDensity::new(effective_time(t1, alpha), params, grid)?;
    let p2 = StableDensity::new(effective_time(t2, alpha), params, grid)?;
    let width = grid.y_max * p1.scale().max(p2.scale());
    let half = guarded(
        |y| Ok((p2.at(y)? - p1.at(y)?).abs()),
        |h| {
            let inner = integrate_pieces(&mut *h, &[0.0, 0.1 * width, width], TOL)?;
            let tail = integrate_tail(&mut *h, width, 1.0, width, 2.0 / alpha, TOL)?;
            Ok(inner + tail)
        },
    )?;
    Ok(2.0 * half)
}
