#![allow(dead_code)]

use alpha_lattice::{InteractionModel, StableParams};
use alpha_lattice::SimConfig;
use nalgebra::{DMatrix, DVector};

/// Dense `A = -I + (a_ij)` of a linear model, built from the coupling list.
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

/// `(I + A dt)^n`: the mean map of explicit Euler.
pub fn euler_map(a: &DMatrix<f64>, dt: f64, n: u64) -> DMatrix<f64> {
    let step = DMatrix::<f64>::identity(a.nrows(), a.ncols()) + a * dt;
    let mut out = DMatrix::<f64>::identity(a.nrows(), a.ncols());
    for _ in 0..n {
        out = &step * out;
    }
    out
}

pub fn ones(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0)
}

pub fn config(alpha: f64, dt: f64, t_end: f64, seed: u64, paths: u64) -> SimConfig {
    SimConfig::new(StableParams::new(alpha).unwrap(), dt, t_end, seed, paths)
}

/// A priori bound on `max_ij |(e^{At} - (I + A dt)^n)_ij|` with `t = n dt`:
/// `n (e^{‖A‖dt} - 1 - ‖A‖dt) M^{n-1}` where `M` bounds both one-step maps
/// in the ∞-norm (through the logarithmic norm for `e^{A dt}`).
pub fn euler_bias_bound(a: &DMatrix<f64>, t: f64, dt: f64) -> f64 {
    let n = (t / dt).round();
    let rows = 0..a.nrows();
    let norm = rows.clone().map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let log_norm = rows
        .clone()
        .map(|i| a[(i, i)] + (0..a.ncols()).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let step = DMatrix::<f64>::identity(a.nrows(), a.ncols()) + a * dt;
    let step_norm = rows.map(|i| step.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let m = step_norm.max((log_norm * dt).exp());
    let local = (norm * dt).exp() - 1.0 - norm * dt;
    n * local * m.powf((n - 1.0).max(0.0))
}
