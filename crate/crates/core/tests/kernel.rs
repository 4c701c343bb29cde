use std::f64::consts::PI;

use alpha_lattice::lab::stats::{ks_critical_one_sample, ks_statistic};
use alpha_lattice::quadrature::{integrate, integrate_pieces, integrate_tail, Tolerance};
use alpha_lattice::rng::NoiseStream;
use alpha_lattice::stable::{
    compute_c_alpha, effective_time, fractional_generator_apply, kernel_tv_distance, ou_abs_moment, ou_apply,
    ou_kernel, ou_stationary_density, sample_standard_stable, stable_density, LineFunction, OUKernelQuery,
    SpectralFunction, StableCdf, StableDensity,
};
use alpha_lattice::{KernelGrid, StableParams};
use proptest::prelude::*;

const TOL: Tolerance = Tolerance::new(1e-12, 1e-10);

fn params(a: f64) -> StableParams {
    StableParams::new(a).unwrap()
}

fn grid() -> KernelGrid {
    KernelGrid::default()
}

/// `∫ g` over the line, split at `±w` with power-map tails.
fn line_integral(mut g: impl FnMut(f64) -> f64, w: f64, q: f64) -> f64 {
    let inner = integrate_pieces(&mut g, &[-w, 0.0, w], TOL).unwrap().value;
    let right = integrate_tail(&mut g, w, 1.0, w, q, TOL).unwrap().value;
    let left = integrate_tail(&mut g, -w, -1.0, w, q, TOL).unwrap().value;
    inner + right + left
}

fn closed_form_grid() -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    for t in [0.1, 0.5, 1.0, 2.0, 5.0] {
        for k in 0..20 {
            pts.push((t, -10.0 + k as f64 * (20.0 / 19.0)));
        }
    }
    pts
}

#[test]
fn gaussian_closed_form_on_a_grid() {
    let p = params(2.0);
    let worst = closed_form_grid()
        .into_iter()
        .map(|(t, z)| {
            let exact = (-z * z / (4.0 * t)).exp() / (4.0 * PI * t).sqrt();
            (stable_density(t, 0.3, 0.3 + z, p, &grid()).unwrap() - exact).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "max error {worst:e}");
}

#[test]
fn cauchy_closed_form_on_a_grid() {
    let p = params(1.0);
    let worst = closed_form_grid()
        .into_iter()
        .map(|(t, z)| {
            let exact = t / (PI * (t * t + z * z));
            (stable_density(t, -1.0, -1.0 + z, p, &grid()).unwrap() - exact).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "max error {worst:e}");
}

#[test]
fn spot_values() {
    let g = grid();
    assert!((stable_density(1.0, 0.0, 0.0, params(2.0), &g).unwrap() - 0.282_094_791_773_878_14).abs() < 1e-6);
    assert!((stable_density(1.0, 0.0, 0.0, params(1.0), &g).unwrap() - 1.0 / PI).abs() < 1e-6);
    let q = OUKernelQuery { t: 1.0, x: 0.0, y: 0.0 };
    let gauss = 1.0 / (2.0 * PI * -(-2.0f64).exp_m1()).sqrt();
    assert!((ou_kernel(q, params(2.0), &g).unwrap() - gauss).abs() < 1e-6);
    assert!((ou_stationary_density(0.0, params(2.0), &g).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-6);
    assert!((ou_stationary_density(0.0, params(1.0), &g).unwrap() - 1.0 / PI).abs() < 1e-6);
}

#[test]
fn scaling_example() {
    let (p, g) = (params(1.5), grid());
    let s = 2.0f64.powf(-1.0 / 1.5);
    let lhs = stable_density(2.0, 0.0, 0.7, p, &g).unwrap();
    let rhs = s * stable_density(1.0, 0.0, s * 0.7, p, &g).unwrap();
    assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
}

#[test]
fn densities_integrate_to_one() {
    for alpha in [1.0, 1.2, 1.5, 1.8, 2.0] {
        for t in [0.1, 1.0, 10.0] {
            let d = StableDensity::new(t, params(alpha), &grid()).unwrap();
            let w = 20.0 * d.scale();
            let mass = line_integral(|y| d.at(y).unwrap(), w, 2.0 / alpha);
            assert!((mass - 1.0).abs() < 1e-6, "alpha {alpha}, t {t}: mass {mass}");
        }
    }
}

#[test]
fn stationary_density_integrates_to_one() {
    let p = params(1.5);
    let mass = line_integral(|y| ou_stationary_density(y, p, &grid()).unwrap(), 20.0, 2.0 / 1.5);
    assert!((mass - 1.0).abs() < 1e-6, "{mass}");
}

#[test]
fn chapman_kolmogorov() {
    let g = grid();
    for alpha in [1.2, 1.5, 1.8, 2.0] {
        let p = params(alpha);
        for &(s, t, x, y) in &[(0.3, 0.7, 0.5, -0.4), (1.0, 0.5, -2.0, 1.0)] {
            let first = StableDensity::new(effective_time(s, alpha), p, &g).unwrap();
            let second = StableDensity::new(effective_time(t, alpha), p, &g).unwrap();
            let centre = (-s).exp() * x;
            let composed = line_integral(
                |z| first.at(z - centre + 0.0).unwrap_or(f64::NAN) * second.at(y - (-t).exp() * z).unwrap(),
                30.0,
                2.0 / alpha,
            );
            let direct = ou_kernel(OUKernelQuery { t: s + t, x, y }, p, &g).unwrap();
            assert!((composed - direct).abs() < 1e-5, "alpha {alpha}: {composed} vs {direct}");
        }
    }
}

#[test]
fn stationary_law_is_invariant() {
    let (p, g) = (params(1.5), grid());
    let t = 0.8;
    for y in [0.0, 0.9, -3.0] {
        let pushed = line_integral(
            |x| ou_stationary_density(x, p, &g).unwrap() * ou_kernel(OUKernelQuery { t, x, y }, p, &g).unwrap(),
            20.0,
            2.0 / 1.5,
        );
        let direct = ou_stationary_density(y, p, &g).unwrap();
        assert!((pushed - direct).abs() < 1e-5, "{pushed} vs {direct}");
    }
}

#[test]
fn long_time_kernel_forgets_the_start() {
    let (p, g) = (params(1.5), grid());
    for y in [-1.0, 0.0, 2.5] {
        let k = ou_kernel(OUKernelQuery { t: 50.0, x: 3.0, y }, p, &g).unwrap();
        let s = stable_density(1.0 / 1.5, 0.0, y, p, &g).unwrap();
        assert!((k - s).abs() < 1e-10);
    }
}

#[test]
fn kernel_depends_on_the_shifted_difference_only() {
    let (p, g) = (params(1.5), grid());
    let (t, x, y) = (0.6, 1.3, -0.2);
    let a = ou_kernel(OUKernelQuery { t, x, y }, p, &g).unwrap();
    let b = ou_kernel(OUKernelQuery { t, x: 0.0, y: y - (-t).exp() * x }, p, &g).unwrap();
    assert_eq!(a, b);
}

#[test]
fn apply_normalization_and_mean() {
    let g = grid();
    for alpha in [1.2, 1.5, 2.0] {
        let one = ou_apply(&LineFunction::new(|_| 1.0), 1.0, 0.4, params(alpha), &g).unwrap();
        assert!((one - 1.0).abs() < 1e-8, "alpha {alpha}: {one}");
    }
    let m = ou_apply(&LineFunction::identity(), 0.7, 2.0, params(1.5), &g).unwrap();
    assert!((m - 2.0 * (-0.7f64).exp()).abs() < 1e-7, "{m}");
}

#[test]
fn apply_is_a_semigroup() {
    let (p, g) = (params(1.5), grid());
    let f = LineFunction::new(|y| (-y * y).exp());
    let once = ou_apply(&f, 1.0, 0.3, p, &g).unwrap();
    let inner = f.clone();
    let half = LineFunction::new(move |y| ou_apply(&inner, 0.5, y, params(1.5), &KernelGrid::default()).unwrap());
    let twice = ou_apply(&half, 0.5, 0.3, p, &g).unwrap();
    assert!((once - twice).abs() < 1e-5, "{once} vs {twice}");
}

#[test]
fn moment_scaling_and_gaussian_value() {
    let g = grid();
    for (alpha, beta) in [(1.5, 1.0), (2.0, 1.0), (2.0, 1.4)] {
        let p = params(alpha);
        let limit = ou_abs_moment(f64::INFINITY, beta, p, &g).unwrap();
        let mut prev = 0.0;
        for t in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let m = ou_abs_moment(t, beta, p, &g).unwrap();
            let factor = (-(-alpha * t).exp_m1()).powf(beta / alpha);
            assert!((m / limit - factor).abs() < 1e-8, "alpha {alpha} beta {beta} t {t}");
            assert!(m >= prev);
            prev = m;
        }
    }
    let gauss = ou_abs_moment(f64::INFINITY, 1.0, params(2.0), &g).unwrap();
    assert!((gauss - (2.0 / PI).sqrt()).abs() < 1e-6);
    assert_eq!(ou_abs_moment(0.0, 1.0, params(1.5), &g).unwrap(), 0.0);
}

#[test]
fn gaussian_moment_against_a_direct_integral() {
    // E|N(0, 1 - e^{-2t})|^{1.4}
    let t = 0.7;
    let var = -(-2.0 * t as f64).exp_m1();
    let direct = 2.0
        * integrate(
            |y: f64| y.powf(1.4) * (-y * y / (2.0 * var)).exp() / (2.0 * PI * var).sqrt(),
            0.0,
            40.0,
            TOL,
        )
        .unwrap()
        .value;
    let m = ou_abs_moment(t, 1.4, params(2.0), &grid()).unwrap();
    assert!((m - direct).abs() < 1e-8, "{m} vs {direct}");
}

#[test]
fn generator_examples() {
    let g = grid();
    let p = params(1.5);
    let v = fractional_generator_apply(&SpectralFunction::cosine(2.0), 0.0, p, &g).unwrap();
    assert!((v + 2.0f64.powf(1.5)).abs() < 1e-10);
    assert_eq!(fractional_generator_apply(&SpectralFunction::constant(3.0), 0.4, p, &g).unwrap(), 0.0);
}

/// Singular-integral form `C_α⁻¹ ∫ (f(x+y) - f(x)) / |y|^{1+α} dy` with
/// `C_α = ∫ (1 - cos y)/|y|^{1+α} dy`, for `f = cos(λ₀·)`.
#[test]
fn generator_matches_the_singular_integral() {
    let (alpha, l0, x) = (1.5f64, 2.0f64, 0.3f64);
    let c = compute_c_alpha(params(alpha)).unwrap();
    // f(x+y)+f(x-y)-2f(x) = 2 cos(l0 x)(cos(l0 y) - 1): reduce to the same kernel.
    let kernel = |y: f64| 2.0 * (0.5 * l0 * y).sin().powi(2) / y.powf(1.0 + alpha);
    let top = 40.0 * PI;
    let mut breaks = vec![1.0];
    breaks.extend((1..=80).map(|k| k as f64 * PI / 2.0).filter(|&b| b > 1.0));
    // y = u² on (0, 1] removes the y^{-1/2} singularity
    let near = integrate(|u: f64| 2.0 * u * kernel(u * u), 0.0, 1.0, Tolerance::new(1e-13, 1e-11)).unwrap().value;
    let body = near + integrate_pieces(kernel, &breaks, Tolerance::new(1e-13, 1e-11)).unwrap().value;
    let s = 1.0 + alpha;
    let wave_tail = -(l0 * top).sin() * top.powf(-s) / l0 + s * (l0 * top).cos() * top.powf(-s - 1.0) / (l0 * l0);
    let tail = 1.0 / (alpha * top.powf(alpha)) - wave_tail;
    let integral = -2.0 * (l0 * x).cos() * (body + tail);
    let expected = integral / c;
    let got = fractional_generator_apply(&SpectralFunction::cosine(l0), x, params(alpha), &grid()).unwrap();
    assert!((got - expected).abs() < 2e-4, "{got} vs {expected}");
}

#[test]
fn backward_equation() {
    let (p, g) = (params(1.5), grid());
    let f = LineFunction::new(|y| (-y * y).exp());
    let (t, x, ht, hx) = (0.5, 0.4, 1e-3, 1e-3);
    let u = |s: f64, y: f64| ou_apply(&f, s, y, p, &g).unwrap();
    let du_dt = (u(t + ht, x) - u(t - ht, x)) / (2.0 * ht);
    let du_dx = (u(t, x + hx) - u(t, x - hx)) / (2.0 * hx);
    let evolved = SpectralFunction::gaussian().ou_evolved(t, p);
    assert!((evolved.value(x, &g).unwrap() - u(t, x)).abs() < 1e-8);
    let gen = fractional_generator_apply(&evolved, x, p, &g).unwrap();
    let rhs = gen - x * du_dx;
    assert!((du_dt - rhs).abs() < 1e-4, "{du_dt} vs {rhs}");
}

#[test]
fn c_alpha_examples() {
    assert!((compute_c_alpha(params(1.0)).unwrap() - PI).abs() < 1e-8);
    let c: Vec<f64> = [0.5, 1.0, 1.5, 1.9, 1.99].iter().map(|&a| compute_c_alpha(params(a)).unwrap()).collect();
    assert!(c.iter().all(|&v| v > 0.0));
    assert!(c[4] > c[3] && c[3] > c[2]);
}

#[test]
fn tv_distance_examples() {
    let (p, g) = (params(1.5), grid());
    assert_eq!(kernel_tv_distance(1.0, 1.0, p, &g).unwrap(), 0.0);
    assert!(kernel_tv_distance(5.0, 50.0, p, &g).unwrap() < 1e-2);
    assert!(kernel_tv_distance(0.01, 20.0, p, &g).unwrap() <= 2.0 + 1e-8);
}

fn draws(alpha: f64, n: u64, seed: u64) -> Vec<f64> {
    let noise = NoiseStream::new(seed);
    (0..n)
        .map(|k| {
            let (u1, u2) = noise.uniforms(k, 0, 0);
            sample_standard_stable(params(alpha), u1, u2)
        })
        .collect()
}

#[test]
fn sampler_passes_ks_against_the_quadrature_cdf() {
    for alpha in [1.2, 1.5, 2.0] {
        let xs = draws(alpha, 100_000, 11);
        let cdf = StableCdf::new(1.0, params(alpha), &grid()).unwrap();
        let d = ks_statistic(&xs, |y| cdf.cdf(y));
        let crit = ks_critical_one_sample(xs.len(), 0.01);
        assert!(d < crit, "alpha {alpha}: D = {d}, critical {crit}");
    }
}

#[test]
fn sampler_characteristic_function() {
    for alpha in [1.0, 1.2, 1.5, 2.0] {
        let xs = draws(alpha, 100_000, 5);
        let n = xs.len() as f64;
        for l in [0.5, 1.0, 2.0] {
            let c: Vec<f64> = xs.iter().map(|x| (l * x).cos()).collect();
            let mean = c.iter().sum::<f64>() / n;
            let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let target = (-(l as f64).powf(alpha)).exp();
            assert!((mean - target).abs() < 3.0 * (var / n).sqrt(), "alpha {alpha} lambda {l}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn density_is_symmetric_in_its_points(alpha in 1.0f64..2.0, t in 0.05f64..5.0, x in -5.0f64..5.0, y in -5.0f64..5.0) {
        let p = params(alpha);
        prop_assert_eq!(stable_density(t, x, y, p, &grid()).unwrap(), stable_density(t, y, x, p, &grid()).unwrap());
    }

    #[test]
    fn density_is_self_similar(alpha in 1.1f64..2.0, t in 0.1f64..8.0, y in -6.0f64..6.0) {
        let p = params(alpha);
        let s = t.powf(-1.0 / alpha);
        let lhs = stable_density(t, 0.0, y, p, &grid()).unwrap();
        let rhs = s * stable_density(1.0, 0.0, s * y, p, &grid()).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-8, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn density_is_non_negative(alpha in 0.8f64..2.0, z in -1e4f64..1e4) {
        prop_assert!(stable_density(1.0, 0.0, z, params(alpha), &grid()).unwrap() >= 0.0);
    }

    #[test]
    fn sampler_is_finite_and_odd(alpha in 0.8f64..2.0, u1 in 1e-9f64..1.0, u2 in 1e-9f64..1.0) {
        let p = params(alpha);
        let v = sample_standard_stable(p, u1, u2);
        prop_assert!(v.is_finite());
    }

    #[test]
    fn tv_distance_is_bounded(t1 in 0.01f64..20.0, t2 in 0.01f64..20.0) {
        let d = kernel_tv_distance(t1, t2, params(1.5), &grid()).unwrap();
        prop_assert!((-1e-12..=2.0 + 1e-8).contains(&d));
    }
}
