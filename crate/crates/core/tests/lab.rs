mod common;

use alpha_lattice::lab::{
    duhamel_residual, finite_speed_profile, galerkin_gap, gradient_decay_fit, long_time_limit, mixing_distance,
    moment_growth_check, triple_norm_check, triple_norm_scan, LabError,
};
use alpha_lattice::stable::{ou_abs_moment, ou_apply, LineFunction};
use alpha_lattice::{
    estimate_gradient, estimate_second_gradient, estimate_semigroup, BallParams, CylinderObservable,
    InteractionModel, KernelGrid, LatticeIndex, LatticeState, PotentialFamily, DEFAULT_H,
};
use common::{config, euler_bias_bound, euler_map, expm, linear_matrix, ones};
use nalgebra::DVector;

fn site(k: i32) -> LatticeIndex {
    LatticeIndex::new([k])
}

fn linear(radius: u32, gamma: f64) -> InteractionModel {
    InteractionModel::nearest_neighbour(1, radius, gamma, PotentialFamily::zero()).unwrap()
}

fn free(radius: u32) -> InteractionModel {
    InteractionModel::new(1, radius, 1, vec![], PotentialFamily::zero(), None).unwrap()
}

fn origin_index(m: &InteractionModel) -> usize {
    m.cube().index_of(&site(0)).unwrap()
}

#[test]
fn single_site_mean_matches_the_kernel() {
    let m = InteractionModel::single_site();
    let x0 = LatticeState::constant(m.cube(), 2.0);
    let cfg = config(1.5, 0.01, 1.0, 31, 40_000);
    let e = estimate_semigroup(&m, &CylinderObservable::coordinate(site(0)), &x0, 1.0, &cfg).unwrap();
    let oracle = ou_apply(&LineFunction::identity(), 1.0, 2.0, cfg.stable, &KernelGrid::default()).unwrap();
    assert!((oracle - 2.0 * (-1.0f64).exp()).abs() < 1e-8);
    // Euler contracts the mean by (1 - dt)^n instead of e^{-t}
    let bias = (2.0 * 0.99f64.powi(100) - oracle).abs();
    assert!((e.value - oracle).abs() <= 3.0 * e.std_error + bias, "{} ± {} vs {oracle}", e.value, e.std_error);
}

#[test]
fn odd_observable_has_zero_long_time_mean() {
    let m = InteractionModel::single_site();
    let x0 = LatticeState::constant(m.cube(), 1.0);
    let cfg = config(1.5, 0.02, 10.0, 4, 20_000);
    let e = estimate_semigroup(&m, &CylinderObservable::tanh(site(0)), &x0, 10.0, &cfg).unwrap();
    assert!(e.value.abs() < 3.0 * e.std_error + 1.0 * (-10.0f64).exp());
}

#[test]
fn linear_gradient_matches_the_matrix_exponential() {
    let m = linear(4, 0.1);
    let a = linear_matrix(&m);
    let c = origin_index(&m);
    let x0 = LatticeState::zeros(m.cube());
    let cfg = config(1.5, 0.01, 1.0, 2, 500);
    let f = CylinderObservable::coordinate(site(0));
    for i in [0, 1, 3] {
        let g = estimate_gradient(&m, &f, &site(i), &x0, 1.0, DEFAULT_H, &cfg).unwrap();
        let j = m.cube().index_of(&site(i)).unwrap();
        let exact = expm(&a, 1.0)[(c, j)];
        let euler = euler_map(&a, 0.01, 100)[(c, j)];
        assert!((g.value - euler).abs() < 1e-10, "noise cancels: {} vs {euler}", g.value);
        assert!((g.value - exact).abs() <= 3.0 * g.std_error + euler_bias_bound(&a, 1.0, 0.01));
    }
}

#[test]
fn gradient_is_local_without_interactions() {
    let m = free(3);
    let x0 = LatticeState::constant(m.cube(), 0.4);
    let cfg = config(1.5, 0.01, 1.0, 6, 2000);
    let f = CylinderObservable::tanh(site(1));
    for i in [-3, -1, 0, 2, 3] {
        let g = estimate_gradient(&m, &f, &site(i), &x0, 1.0, DEFAULT_H, &cfg).unwrap();
        assert!(g.value.abs() <= 3.0 * g.std_error, "site {i}: {}", g.value);
    }
}

#[test]
fn gradient_is_robust_to_the_step() {
    let m = InteractionModel::standard_small();
    let x0 = LatticeState::constant(m.cube(), 0.5);
    let cfg = config(1.5, 0.01, 1.0, 8, 4000);
    let f = CylinderObservable::tanh(site(0));
    let a = estimate_gradient(&m, &f, &site(1), &x0, 1.0, DEFAULT_H, &cfg).unwrap();
    let b = estimate_gradient(&m, &f, &site(1), &x0, 1.0, DEFAULT_H / 2.0, &cfg).unwrap();
    let joint = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    assert!((a.value - b.value).abs() <= 3.0 * joint + 1e-8);
}

#[test]
fn second_gradient_properties() {
    let lin = linear(3, 0.1);
    let x0 = LatticeState::zeros(lin.cube());
    let cfg = config(1.5, 0.01, 1.0, 10, 2000);
    let f = CylinderObservable::coordinate(site(0));
    let s = estimate_second_gradient(&lin, &f, &site(0), &site(1), &x0, 1.0, 1e-2, &cfg).unwrap();
    assert!(s.value.abs() <= 3.0 * s.std_error + 1e-8);

    let m = InteractionModel::standard_small();
    let x0 = LatticeState::constant(m.cube(), 0.3);
    let g = CylinderObservable::tanh(site(0));
    let jk = estimate_second_gradient(&m, &g, &site(0), &site(1), &x0, 1.0, 1e-2, &cfg).unwrap();
    let kj = estimate_second_gradient(&m, &g, &site(1), &site(0), &x0, 1.0, 1e-2, &cfg).unwrap();
    let joint = (jk.std_error.powi(2) + kj.std_error.powi(2)).sqrt();
    assert!((jk.value - kj.value).abs() <= 3.0 * joint + 1e-9);

    // far from the support the mixed partial sits below the first-order bound there
    let far = estimate_second_gradient(&m, &g, &site(7), &site(8), &x0, 1.0, 1e-2, &cfg).unwrap();
    let first = estimate_gradient(&m, &g, &site(7), &x0, 1.0, DEFAULT_H, &cfg).unwrap();
    assert!(far.value.abs() <= first.value.abs() + 3.0 * (far.std_error + first.std_error) + 1e-9);
}

#[test]
fn triple_norm_examples() {
    let m = InteractionModel::standard_small();
    let f = CylinderObservable::tanh(site(0));
    let r0 = triple_norm_check(&m, &f, 0.0, &config(1.5, 0.01, 2.0, 1, 50), DEFAULT_H).unwrap();
    assert!(r0.pass && r0.lhs <= f.triple_norm1() + 1e-9);

    let lin = linear(4, 0.1);
    let a = linear_matrix(&lin);
    let c = origin_index(&lin);
    let cfg = config(1.5, 0.01, 1.0, 3, 300);
    let r = triple_norm_check(&lin, &CylinderObservable::coordinate(site(0)), 1.0, &cfg, DEFAULT_H).unwrap();
    let exact: f64 = expm(&a, 1.0).row(c).iter().map(|v| v.abs()).sum();
    let slack = lin.cube().len() as f64 * euler_bias_bound(&a, 1.0, 0.01);
    assert!((r.lhs - exact).abs() <= 3.0 * r.std_error + slack);
    assert!((r.bound - 1.2f64.exp()).abs() < 1e-12 && r.pass);

    let scan = triple_norm_scan(&m, &f, &[0.5, 1.0, 2.0], &config(1.5, 0.01, 2.0, 4, 1000), DEFAULT_H).unwrap();
    assert!(scan.iter().all(|r| r.pass));
}

#[test]
fn finite_speed_profile_examples() {
    let f = CylinderObservable::coordinate(site(0));
    let cfg = config(1.5, 0.01, 0.5, 5, 400);
    let off = finite_speed_profile(&free(5), &f, 0.5, 0.5, &cfg, DEFAULT_H).unwrap();
    assert!(off.entries.iter().filter(|e| e.n_k > 0).all(|e| e.estimate == 0.0 && e.holds));

    let m = linear(12, 0.1);
    let a = linear_matrix(&m);
    let c = origin_index(&m);
    for t in [0.25, 0.5] {
        let p = finite_speed_profile(&m, &f, t, 0.5, &cfg, DEFAULT_H).unwrap();
        assert_eq!(p.violations, 0);
        let exact = expm(&a, t);
        let slack = euler_bias_bound(&a, t, 0.01);
        for (k, e) in p.entries.iter().enumerate() {
            assert!((e.estimate - exact[(c, k)]).abs() <= 3.0 * e.std_error + slack);
            let mirror = &p.entries[p.entries.len() - 1 - k];
            assert!((e.estimate - mirror.estimate).abs() < 1e-12);
        }
    }
}

#[test]
fn decay_fit_examples() {
    let f = CylinderObservable::coordinate(site(0));
    let times = [0.5, 1.0, 2.0, 3.0, 4.0];
    let ou = gradient_decay_fit(&InteractionModel::single_site(), &f, &times, &config(1.5, 0.01, 4.0, 1, 64), DEFAULT_H)
        .unwrap();
    let euler_rate = -(1.0f64 - 0.01).ln() / 0.01;
    assert!((ou.rate - euler_rate).abs() < 1e-9 && (ou.rate - 1.0).abs() < 0.01 && ou.pass);

    let m = linear(4, 0.1);
    let fit = gradient_decay_fit(&m, &f, &times, &config(1.5, 0.01, 4.0, 2, 64), DEFAULT_H).unwrap();
    let slowest = 1.0 - 0.2 * (std::f64::consts::PI / 10.0).cos();
    assert!(fit.pass && fit.rate >= slowest - 0.05, "{fit:?}");

    let weak = InteractionModel::new(
        1,
        4,
        1,
        vec![],
        PotentialFamily::smooth_bounded(0.02, vec![(site(-1), 1.0), (site(0), 1.0), (site(1), 1.0)]).unwrap(),
        None,
    )
    .unwrap();
    let g = CylinderObservable::tanh(site(0));
    let fit = gradient_decay_fit(&weak, &g, &times, &config(1.5, 0.01, 4.0, 3, 4000), DEFAULT_H).unwrap();
    assert!(fit.pass, "{fit:?}");
}

#[test]
fn noise_floor_is_reported() {
    let m = free(1);
    let f = CylinderObservable::constant(1.0);
    let r = gradient_decay_fit(&m, &f, &[0.5, 1.0], &config(1.5, 0.01, 1.0, 1, 50), DEFAULT_H);
    assert!(matches!(r, Err(LabError::NoiseFloor { .. })), "{r:?}");
}

#[test]
fn moment_examples() {
    let ball = BallParams::new(1.0, 1.0).unwrap();
    let m = InteractionModel::single_site();
    let x0 = LatticeState::zeros(m.cube());
    // Gaussian noise: |X| has a variance, so the standard error is honest
    let cfg = config(2.0, 0.01, 2.0, 9, 40_000);
    let r = moment_growth_check(&m, &[site(0)], &x0, ball, &[0.0, 0.5, 2.0], &cfg).unwrap();
    assert_eq!(r.rows[0].estimate, 0.0);
    for row in &r.rows[1..] {
        let exact = ou_abs_moment(row.t, 1.0, cfg.stable, &KernelGrid::default()).unwrap();
        assert!((row.estimate - exact).abs() <= 3.0 * row.std_error + 0.01 * exact, "{row:?} vs {exact}");
    }
    // α < 2: |X| has no second moment and the sample mean converges like n^{-1/3}
    let cfg = config(1.5, 0.01, 2.0, 9, 40_000);
    let r = moment_growth_check(&m, &[site(0)], &x0, ball, &[0.5, 2.0], &cfg).unwrap();
    for row in &r.rows {
        let exact = ou_abs_moment(row.t, 1.0, cfg.stable, &KernelGrid::default()).unwrap();
        assert!((row.estimate - exact).abs() <= 0.1 * exact, "{row:?} vs {exact}");
    }

    let std = InteractionModel::standard_small();
    let ball = std.ball().unwrap();
    let x0 = LatticeState::from_fn(std.cube(), |i| if i.coords[0] % 2 == 0 { 2.0 } else { -2.0 }).unwrap();
    let sites: Vec<_> = [0, 3, 8].iter().map(|&k| site(k)).collect();
    let r = moment_growth_check(&std, &sites, &x0, ball, &[0.0, 1.0, 2.0, 3.0], &config(1.5, 0.01, 3.0, 1, 2000)).unwrap();
    assert!(r.pass());
    assert!(r.rows.iter().filter(|row| row.t == 0.0).all(|row| row.estimate == 2.0));

    let outside = LatticeState::constant(std.cube(), 50.0);
    assert!(matches!(
        moment_growth_check(&std, &sites, &outside, ball, &[0.0], &config(1.5, 0.01, 3.0, 1, 10)),
        Err(LabError::Precondition(_))
    ));
}

#[test]
fn galerkin_gap_examples() {
    let f = CylinderObservable::coordinate(site(0));
    let cfg = config(1.5, 0.01, 1.0, 12, 2000);
    let off = galerkin_gap(&free(1), &[2, 4, 8], &f, 1.0, &LatticeState::constant(free(8).cube(), 1.0), &cfg).unwrap();
    assert!(off.gaps.iter().all(|g| g.gap() <= 3.0 * g.std_error));

    let m = linear(4, 0.1);
    let big = m.with_radius(8).unwrap();
    let x0 = LatticeState::constant(big.cube(), 1.0);
    let r = galerkin_gap(&m, &[4, 8], &f, 1.0, &x0, &cfg).unwrap();
    let at_origin = |radius: u32, map: &dyn Fn(&nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64>| {
        let mm = m.with_radius(radius).unwrap();
        let a = linear_matrix(&mm);
        (map(&a) * ones(mm.cube().len()))[origin_index(&mm)]
    };
    let exact = at_origin(8, &|a| expm(a, 1.0)) - at_origin(4, &|a| expm(a, 1.0));
    let euler = at_origin(8, &|a| euler_map(a, 0.01, 100)) - at_origin(4, &|a| euler_map(a, 0.01, 100));
    let g = r.gap(4, 8).unwrap();
    // the discrete scheme carries a relative O(dt) bias on the gap
    assert!(((euler - exact) / exact).abs() < 10.0 * cfg.dt);
    assert!((g.difference - euler).abs() <= 3.0 * g.std_error + 1e-15, "{} vs {euler}", g.difference);
    assert!(g.resolved());
}

#[test]
fn mixing_examples() {
    let m = InteractionModel::single_site();
    let a = LatticeState::constant(m.cube(), 5.0);
    let b = LatticeState::constant(m.cube(), -5.0);
    let cfg = config(1.5, 0.02, 20.0, 6, 5000);
    let r = mixing_distance(&m, &a, &b, &[site(0)], &[0.0, 20.0], &cfg).unwrap();
    assert_eq!((r.rows[0].w1, r.rows[0].ks), (10.0, 1.0));
    assert!(r.rows[1].ks < r.rows[1].ks_critical, "{:?}", r.rows[1]);

    // swapping the starts changes the noise streams but not the law
    let swapped = mixing_distance(&m, &b, &a, &[site(0)], &[0.0, 2.0], &cfg).unwrap();
    let direct = mixing_distance(&m, &a, &b, &[site(0)], &[0.0, 2.0], &cfg).unwrap();
    let (s, d) = (&swapped.rows[1], &direct.rows[1]);
    assert!((s.ks - d.ks).abs() < d.ks_critical);
}

#[test]
fn long_time_limit_examples() {
    let m = InteractionModel::standard_small();
    let one = long_time_limit(&m, &CylinderObservable::constant(1.0), &[1.0, 2.0], &config(1.5, 0.01, 2.0, 1, 100)).unwrap();
    assert!(one.increments.iter().all(|i| i.difference == 0.0 && i.std_error == 0.0));

    let ou = long_time_limit(
        &InteractionModel::single_site(),
        &CylinderObservable::tanh(site(0)),
        &[2.0, 5.0, 10.0],
        &config(1.5, 0.02, 10.0, 2, 5000),
    )
    .unwrap();
    assert!(ou.ell_estimate.abs() <= 3.0 * ou.ell_std_error);
}

#[test]
fn duhamel_examples() {
    let grid = KernelGrid::default();
    // no interactions: P_t f = S_t f up to Monte-Carlo error and Euler bias
    let m = free(0);
    let x = LatticeState::constant(m.cube(), 0.8);
    let cfg = config(1.5, 0.01, 1.0, 3, 20_000);
    let r = duhamel_residual(&m, &CylinderObservable::tanh(site(0)), 1.0, &x, &cfg, &grid).unwrap();
    assert!(r.residual() <= 3.0 * r.std_error + 2.0 * cfg.dt, "{r:?}");

    let lin = linear(1, 0.1);
    let x = LatticeState::new(lin.cube(), vec![0.5, 1.0, -0.5]).unwrap();
    let f = CylinderObservable::coordinate(site(0));
    let mut cfg = config(1.5, 0.01, 1.0, 3, 200);
    cfg.antithetic = true;
    let coarse = duhamel_residual(&lin, &f, 1.0, &x, &cfg, &grid).unwrap();
    assert!(coarse.residual() < 3.0 * coarse.std_error + 2.0 * cfg.dt);
    let a = linear_matrix(&lin);
    let exact = (expm(&a, 1.0) * DVector::from_column_slice(x.values()))[1];
    assert!((coarse.lhs - exact).abs() <= euler_bias_bound(&a, 1.0, 0.01) * 2.0 + 3.0 * coarse.lhs_se);

    cfg.dt = 0.005;
    let fine = duhamel_residual(&lin, &f, 1.0, &x, &cfg, &grid).unwrap();
    let ratio = fine.residual() / coarse.residual();
    assert!((0.3..=0.8).contains(&ratio), "ratio {ratio}");

    let bad = duhamel_residual(&InteractionModel::standard_small(), &f, 1.0, &LatticeState::zeros(InteractionModel::standard_small().cube()), &cfg, &grid);
    assert!(matches!(bad, Err(LabError::Unsupported(_))));
}
