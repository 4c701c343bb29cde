//! Closed forms and dense linear algebra the checks are compared against.
#![allow(dead_code)]

use std::f64::consts::PI;

use alpha_lattice::InteractionModel;
use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::gamma;

/// `-I + (a_ij)` on the model's cube.
pub fn linear_matrix(model: &InteractionModel) -> DMatrix<f64> {
    let cube = model.cube();
    let n = cube.len();
    let mut a = -DMatrix::<f64>::identity(n, n);
    for (i, site) in cube.sites().enumerate() {
        for (o, w) in model.couplings() {
            if let Some(j) = cube.index_of(&site.offset_by(o)) {
                a[(i, j)] += w;
            }
        }
    }
    a
}

pub fn expm(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    (a * t).exp()
}

/// Mean map of `n` explicit Euler steps.
pub fn euler_map(a: &DMatrix<f64>, dt: f64, n: usize) -> DMatrix<f64> {
    let step = DMatrix::<f64>::identity(a.nrows(), a.ncols()) + a * dt;
    (0..n).fold(DMatrix::identity(a.nrows(), a.ncols()), |acc, _| &step * acc)
}

pub fn ones(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0)
}

pub fn gaussian(t: f64, z: f64) -> f64 {
    (-z * z / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

pub fn cauchy(t: f64, z: f64) -> f64 {
    t / (PI * (t * t + z * z))
}

/// `E|X|^β` for `E e^{iλX} = e^{-τ|λ|^α}`.
pub fn stable_abs_moment(tau: f64, alpha: f64, beta: f64) -> f64 {
    tau.powf(beta / alpha) * 2f64.powf(beta) * gamma((1.0 + beta) / 2.0) * gamma(1.0 - beta / alpha)
        / (PI.sqrt() * gamma(1.0 - beta / 2.0))
}

/// `∫ g` over the line by composite Simpson after `y = c + s·sinh(u)`.
pub fn line_integral(g: impl Fn(f64) -> f64, c: f64, s: f64, u_max: f64, h: f64) -> f64 {
    let n = (2.0 * u_max / h).ceil() as usize / 2 * 2;
    let h = 2.0 * u_max / n as f64;
    let f = |k: usize| {
        let u = -u_max + k as f64 * h;
        g(c + s * u.sinh()) * s * u.cosh()
    };
    let mut total = f(0) + f(n);
    for k in 1..n {
        total += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k);
    }
    total * h / 3.0
}

/// Mass of `p(τ; ·)` beyond `±l` from the leading tail term.
pub fn two_sided_tail(tau: f64, alpha: f64, l: f64) -> f64 {
    if alpha == 2.0 {
        return 0.0;
    }
    2.0 * tau * gamma(alpha) * (PI * alpha / 2.0).sin() / (PI * l.powf(alpha))
}

/// Root of `2 - ln B + ln(1+η) + (1+η)/B + 2A`, by Newton in `x = ln B`.
pub fn speed_constant(a: f64, eta: f64) -> f64 {
    let c = 2.0 + 2.0 * a + (1.0 + eta).ln();
    let mut x = c;
    for _ in 0..100 {
        let h = c - x + (1.0 + eta) * (-x).exp();
        let dh = -1.0 - (1.0 + eta) * (-x).exp();
        x -= h / dh;
        if h.abs() < 1e-15 {
            break;
        }
    }
    x.exp()
}
