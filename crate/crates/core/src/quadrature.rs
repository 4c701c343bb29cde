//! Numerical integration: adaptive Gauss–Kronrod on finite intervals, power
//! maps for semi-infinite ones, and fixed Gauss–Legendre panels.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("quadrature did not converge: estimate {estimate:e}, error {error:e} after {intervals} intervals")]
pub struct QuadratureError {
    pub estimate: f64,
    pub error: f64,
    pub intervals: usize,
}

/// Value and estimated absolute error of an integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

impl std::ops::Add for Integral {
    type Output = Integral;
    fn add(self, rhs: Integral) -> Integral {
        Integral {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Tolerance {
            abs,
            rel,
            max_intervals: 4000,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::new(1e-12, 1e-10)
    }
}

// QUADPACK 15-point Kronrod abscissae and weights; the 7-point Gauss rule
// sits on the odd-indexed nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Integral {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Integral { value, error: err }
}

struct Piece {
    a: f64,
    b: f64,
    est: Integral,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<Integral, QuadratureError> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
        });
    }
    let first = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    let mut total = first;
    heap.push(Piece { a, b, est: first });
    loop {
        if !total.value.is_finite() || !total.error.is_finite() {
            return Err(QuadratureError {
                estimate: total.value,
                error: total.error,
                intervals: heap.len(),
            });
        }
        if total.error <= tol.abs.max(tol.rel * total.value.abs()) {
            return Ok(total);
        }
        if heap.len() >= tol.max_intervals {
            return Err(QuadratureError {
                estimate: total.value,
                error: total.error,
                intervals: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // interval below floating-point resolution
            if worst.est.error > 16.0 * f64::EPSILON * total.value.abs() {
                return Err(QuadratureError {
                    estimate: total.value,
                    error: total.error,
                    intervals: heap.len() + 1,
                });
            }
            heap.push(Piece {
                est: Integral {
                    value: worst.est.value,
                    error: 0.0,
                },
                ..worst
            });
            total.error -= worst.est.error;
            continue;
        }
        let left = gk15(&mut f, worst.a, mid);
        let right = gk15(&mut f, mid, worst.b);
        total.value += left.value + right.value - worst.est.value;
        total.error += left.error + right.error - worst.est.error;
        heap.push(Piece {
            a: worst.a,
            b: mid,
            est: left,
        });
        heap.push(Piece {
            a: mid,
            b: worst.b,
            est: right,
        });
        // re-sum periodically to shed accumulated cancellation drift
        if heap.len() % 64 == 0 {
            total = heap.iter().fold(
                Integral {
                    value: 0.0,
                    error: 0.0,
                },
                |acc, p| acc + p.est,
            );
        }
    }
}

/// Integrates over consecutive breakpoints, sharing the tolerance budget.
pub fn integrate_pieces<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Integral, QuadratureError> {
    let n = breaks.len().saturating_sub(1).max(1) as f64;
    let mut total = Integral {
        value: 0.0,
        error: 0.0,
    };
    for w in breaks.windows(2) {
        let piece = integrate(
            &mut f,
            w[0],
            w[1],
            Tolerance {
                abs: tol.abs / n,
                ..tol
            },
        )?;
        total = total + piece;
    }
    Ok(total)
}

/// ∫ over `[a, a + dir·∞)` using `y = a + dir·scale·(u^{-q} − 1)`, `u ∈ (0, 1]`.
///
/// `q` is chosen by the caller from the integrand's power-law decay so that the
/// mapped integrand stays bounded at `u → 0`.
pub fn integrate_tail<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    dir: f64,
    scale: f64,
    q: f64,
    tol: Tolerance,
) -> Result<Integral, QuadratureError> {
    let mapped = |u: f64| {
        let up = u.powf(-q);
        let y = a + dir * scale * (up - 1.0);
        if !y.is_finite() {
            return 0.0;
        }
        let jac = scale * q * up / u;
        let v = f(y) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(mapped, 0.0, 1.0, tol)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Cached 16-point rule used by the fixed-panel kernels.
pub fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// Nodes and weights of the 16-point rule mapped onto each panel `[b_k, b_{k+1}]`.
pub fn panel_nodes(breaks: &[f64]) -> Vec<(f64, f64)> {
    let (x, w) = gl16();
    let mut out = Vec::with_capacity(16 * breaks.len());
    for p in breaks.windows(2) {
        let c = 0.5 * (p[0] + p[1]);
        let h = 0.5 * (p[1] - p[0]);
        for (xi, wi) in x.iter().zip(w) {
            out.push((c + h * xi, h * wi));
        }
    }
    out
}

/// Breakpoints for `[0, len]`: `panels` uniform panels with the first one
/// split geometrically towards 0 (integrands here carry a `λ^α` cusp there).
pub fn graded_breaks(len: f64, panels: usize, levels: usize) -> Vec<f64> {
    let h = len / panels as f64;
    let mut breaks = Vec::with_capacity(panels + levels + 2);
    breaks.push(0.0);
    let ratio: f64 = 0.15;
    for k in (1..=levels).rev() {
        breaks.push(h * ratio.powi(k as i32));
    }
    for k in 1..=panels {
        breaks.push(h * k as f64);
    }
    breaks
}
