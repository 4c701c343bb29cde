//! One function per command: run the checker, lay its numbers out as tables
//! and pass/fail checks.

use std::f64::consts::PI;

use alpha_lattice::lab::{
    duhamel_residual, finite_speed_scan, galerkin_gap, gradient_decay_fit, long_time_limit, mixing_distance,
    moment_growth_check, triple_norm_scan, LabError,
};
use alpha_lattice::sim::{simulate_trajectory, write_ensemble_csv, write_snapshots, write_trajectory_csv, SnapshotHeader};
use alpha_lattice::stable::{effective_time, ou_abs_moment, ou_apply, stable_density, LineFunction, StableDensity};
use alpha_lattice::{run_ensemble, InteractionModel, KernelError, KernelGrid, SimConfig, SimError, StableParams};
use serde::Serialize;
use thiserror::Error;

use crate::report::{Check, Report, Table};
use crate::spec::{Command, ExperimentSpec};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0}")]
    Other(String),
}

type Outcome = Result<(), CommandError>;

fn details<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn last(times: &[f64]) -> f64 {
    times.last().copied().unwrap_or(0.0)
}

/// Runs `command` on a resolved spec, filling `report` as results arrive.
/// On error the partial report is kept.
pub fn dispatch(
    spec: &ExperimentSpec,
    command: Command,
    model: &InteractionModel,
    workers: Option<usize>,
    report: &mut Report,
) -> Outcome {
    let config = |t_end: f64| {
        let mut c = spec.sim_config(t_end);
        c.workers = workers;
        c
    };
    let missing = || CommandError::Other(format!("spec has no [{command}] section"));
    match command {
        Command::KernelCheck => kernel_check(spec, report),
        Command::Moments => {
            let p = spec.moments.as_ref().ok_or_else(missing)?;
            moments(spec, p, model, &config(last(&p.lattice_times)), report)
        }
        Command::Simulate => {
            let p = spec.simulate.as_ref().ok_or_else(missing)?;
            let mut c = config(spec.sim.t_end.ok_or_else(|| CommandError::Other("simulate needs sim.t_end".into()))?);
            c.record_stride = p.record_stride;
            simulate(spec, p, model, &c, report)
        }
        Command::GradientDecay => {
            let p = spec.gradient_decay.as_ref().ok_or_else(missing)?;
            let f = p.observable.build().map_err(CommandError::Other)?;
            let fit = gradient_decay_fit(model, &f, &p.times, &config(last(&p.times)), p.h)?;
            let mut t = Table::new("decay", &["t", "max_gradient", "std_error", "argmax", "envelope"]);
            for k in 0..fit.times.len() {
                let envelope = (-fit.beta_lower * fit.times[k]).exp() * f.triple_norm1();
                t.push(vec![
                    fit.times[k].into(),
                    fit.max_gradient[k].into(),
                    fit.max_gradient_se[k].into(),
                    fit.argmax[k].to_string().into(),
                    envelope.into(),
                ]);
            }
            report.tables.push(t);
            let half = fit.rate - fit.ci.0;
            report.checks.push(
                Check::at_least(
                    "decay rate",
                    fit.rate,
                    fit.beta_lower,
                    half,
                    "Gershgorin lower bound beta_lower; tolerance is the 95% half-width of the fitted rate",
                )
                .with_se(fit.rate_se),
            );
            report.checks.push(Check::at_most(
                "envelope violations",
                fit.violations as f64,
                0.0,
                0.0,
                "count of times with max gradient > e^{-beta t}|||f|||_1 + 3 SE",
            ));
            report.details = details(&fit);
            Ok(())
        }
        Command::FiniteSpeed => {
            let p = spec.finite_speed.as_ref().ok_or_else(missing)?;
            let f = p.observable.build().map_err(CommandError::Other)?;
            let profiles = finite_speed_scan(model, &f, &p.times, p.a, &config(last(&p.times)), p.h)?;
            let mut t = Table::new(
                "finite_speed",
                &["t", "site", "n_k", "estimate", "std_error", "bound", "applicable", "holds"],
            );
            for prof in &profiles {
                for e in &prof.entries {
                    t.push(vec![
                        prof.t.into(),
                        e.site.to_string().into(),
                        e.n_k.into(),
                        e.estimate.into(),
                        e.std_error.into(),
                        e.bound.into(),
                        e.applicable.into(),
                        e.holds.into(),
                    ]);
                }
                if prof.applicable_sites == 0 {
                    report.advisories.push(format!(
                        "t = {}: no site has n_k > B t = {:.3}; the bound is vacuous on this cube",
                        prof.t,
                        prof.b * prof.t
                    ));
                }
                report.checks.push(Check::at_most(
                    format!("finite speed violations at t = {}", prof.t),
                    prof.violations as f64,
                    0.0,
                    0.0,
                    format!(
                        "sites with n_k > B t (B = {:.4}, {} applicable) and |grad| > e^(-At-An_k)|||f|||_1 + 3 SE",
                        prof.b, prof.applicable_sites
                    ),
                ));
            }
            report.tables.push(t);
            report.details = details(&profiles);
            Ok(())
        }
        Command::TripleNorm => {
            let p = spec.triple_norm.as_ref().ok_or_else(missing)?;
            let f = p.observable.build().map_err(CommandError::Other)?;
            let scan = triple_norm_scan(model, &f, &p.times, &config(last(&p.times)), p.h)?;
            let mut t = Table::new("triple_norm", &["t", "lhs", "std_error", "bound", "eta"]);
            for r in &scan {
                t.push(vec![r.t.into(), r.lhs.into(), r.std_error.into(), r.bound.into(), r.eta.into()]);
                report.checks.push(
                    Check::at_most(
                        format!("triple norm at t = {}", r.t),
                        r.lhs,
                        r.bound,
                        3.0 * r.std_error,
                        "e^{(eta+1)t}|||f|||_1; tolerance 3 SE",
                    )
                    .with_se(r.std_error),
                );
            }
            report.tables.push(t);
            report.details = details(&scan);
            Ok(())
        }
        Command::Galerkin => {
            let p = spec.galerkin.as_ref().ok_or_else(missing)?;
            let f = p.observable.build().map_err(CommandError::Other)?;
            let largest = model
                .with_radius(*p.radii.iter().max().expect("validated"))
                .map_err(|e| CommandError::Other(e.to_string()))?;
            let x0 = p.x0.build(&largest).map_err(CommandError::Other)?;
            let r = galerkin_gap(model, &p.radii, &f, p.t, &x0, &config(p.t))?;
            let mut values = Table::new("galerkin_values", &["radius", "value", "std_error"]);
            for (radius, v) in r.radii.iter().zip(&r.values) {
                values.push(vec![(*radius).into(), v.value.into(), v.std_error.into()]);
            }
            let mut gaps = Table::new("galerkin_gaps", &["n", "m", "difference", "std_error", "resolved"]);
            for g in &r.gaps {
                gaps.push(vec![g.n.into(), g.m.into(), g.difference.into(), g.std_error.into(), g.resolved().into()]);
            }
            for w in r.radii.windows(3) {
                let (a, b) = (r.gap(w[0], w[1]).expect("pair"), r.gap(w[1], w[2]).expect("pair"));
                let joint = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
                let name = format!("gap({},{}) < gap({},{})", w[1], w[2], w[0], w[1]);
                if !a.resolved() && !b.resolved() {
                    let mut c = Check::at_most(name, a.gap().max(b.gap()), 3.0 * a.std_error.max(b.std_error), 0.0, "both gaps below the 3 SE noise floor");
                    c.pass = true;
                    report.checks.push(c);
                } else {
                    report.checks.push(
                        Check::at_least(
                            name,
                            a.gap() - b.gap(),
                            3.0 * joint,
                            0.0,
                            "difference of consecutive gaps exceeds 3 joint SE (independent-error combination)",
                        )
                        .with_se(joint),
                    );
                }
            }
            report.tables.push(values);
            report.tables.push(gaps);
            report.details = details(&r);
            Ok(())
        }
        Command::Mixing => {
            let p = spec.mixing.as_ref().ok_or_else(missing)?;
            let xa = p.x0a.build(model).map_err(CommandError::Other)?;
            let xb = p.x0b.build(model).map_err(CommandError::Other)?;
            let r = mixing_distance(model, &xa, &xb, &p.sites, &p.times, &config(last(&p.times)))?;
            let mut t = Table::new("mixing", &["t", "site", "ks", "ks_critical", "w1", "n_paths"]);
            for row in &r.rows {
                t.push(vec![
                    row.t.into(),
                    row.site.to_string().into(),
                    row.ks.into(),
                    row.ks_critical.into(),
                    row.w1.into(),
                    row.n_a.into(),
                ]);
            }
            for (which, inside) in [("x0a", r.x0a_in_ball), ("x0b", r.x0b_in_ball)] {
                if inside == Some(false) {
                    report.advisories.push(format!("{which} lies outside the model's ball"));
                }
            }
            let end = last(&p.times);
            for row in r.at(end) {
                report.checks.push(Check::at_most(
                    format!("KS at t = {end}, site {}", row.site),
                    row.ks,
                    row.ks_critical,
                    0.0,
                    "two-sample KS critical value at the 1% level",
                ));
                if let Some(w1_max) = p.w1_max {
                    report.checks.push(Check::at_most(
                        format!("W1 at t = {end}, site {}", row.site),
                        row.w1,
                        w1_max,
                        0.0,
                        "configured W1 threshold",
                    ));
                }
            }
            report.tables.push(t);
            report.details = details(&r);
            Ok(())
        }
        Command::Duhamel => {
            let p = spec.duhamel.as_ref().ok_or_else(missing)?;
            let f = p.observable.build().map_err(CommandError::Other)?;
            let x = p.x.build(model).map_err(CommandError::Other)?;
            let grid = KernelGrid::default();
            let cfg = config(p.t);
            let mut rows = vec![duhamel_residual(model, &f, p.t, &x, &cfg, &grid)?];
            if p.halving {
                let mut fine = cfg.clone();
                fine.dt /= 2.0;
                rows.push(duhamel_residual(model, &f, p.t, &x, &fine, &grid)?);
            }
            let mut t = Table::new(
                "duhamel",
                &["dt", "lhs", "lhs_se", "free", "integral", "signed_residual", "std_error"],
            );
            for r in &rows {
                t.push(vec![
                    r.dt.into(),
                    r.lhs.into(),
                    r.lhs_se.into(),
                    r.free.into(),
                    r.integral.into(),
                    r.signed_residual.into(),
                    r.std_error.into(),
                ]);
            }
            let r = &rows[0];
            report.checks.push(
                Check::at_most(
                    format!("Du Hamel residual at dt = {}", r.dt),
                    r.residual(),
                    0.0,
                    3.0 * r.std_error + 2.0 * r.dt,
                    "zero; tolerance 3 SE + 2 dt",
                )
                .with_se(r.std_error),
            );
            if let [coarse, fine] = rows.as_slice() {
                let ratio = fine.residual() / coarse.residual();
                let [lo, hi] = p.ratio_range;
                let mut c = Check::close(
                    "residual ratio under dt halving",
                    ratio,
                    0.5 * (lo + hi),
                    0.5 * (hi - lo),
                    format!("first-order scheme; accepted range [{lo}, {hi}]"),
                );
                c.pass = ratio.is_finite() && (lo..=hi).contains(&ratio);
                report.checks.push(c);
            }
            report.tables.push(t);
            report.details = details(&rows);
            Ok(())
        }
        Command::Limit => {
            let p = spec.limit.as_ref().ok_or_else(missing)?;
            let f = p.observable.build().map_err(CommandError::Other)?;
            let r = long_time_limit(model, &f, &p.times, &config(last(&p.times)))?;
            let mut values = Table::new("limit", &["t", "estimate", "std_error"]);
            for e in &r.estimates {
                values.push(vec![e.t.into(), e.value.into(), e.std_error.into()]);
            }
            let mut inc = Table::new("increments", &["t1", "t2", "difference", "std_error", "rate"]);
            for i in &r.increments {
                inc.push(vec![
                    i.t1.into(),
                    i.t2.into(),
                    i.difference.into(),
                    i.std_error.into(),
                    (i.magnitude() / (i.t2 - i.t1)).into(),
                ]);
            }
            let late: Vec<_> = r.increments.iter().filter(|i| i.t1 >= p.monotone_after).collect();
            for w in late.windows(2) {
                let (a, b) = (w[0], w[1]);
                let (ra, rb) = (a.magnitude() / (a.t2 - a.t1), b.magnitude() / (b.t2 - b.t1));
                let joint = ((a.std_error / (a.t2 - a.t1)).powi(2) + (b.std_error / (b.t2 - b.t1)).powi(2)).sqrt();
                report.checks.push(
                    Check::at_most(
                        format!("increment rate [{}, {}] <= [{}, {}]", b.t1, b.t2, a.t1, a.t2),
                        rb,
                        ra,
                        3.0 * joint,
                        "previous increment per unit time; tolerance 3 joint SE",
                    )
                    .with_se(joint),
                );
            }
            report.tables.push(values);
            report.tables.push(inc);
            report.details = details(&r);
            Ok(())
        }
    }
}

fn closed_form(alpha: f64, t: f64, z: f64) -> f64 {
    if alpha == 2.0 {
        (-z * z / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
    } else {
        t / (PI * (t * t + z * z))
    }
}

/// Fixed `(s, t, x, y)` probes for the composition identity.
const COMPOSITION_PROBES: [(f64, f64, f64, f64); 3] = [(0.3, 0.7, 0.5, -0.4), (1.0, 0.5, -2.0, 1.0), (0.5, 2.0, 0.0, 0.3)];

fn kernel_check(spec: &ExperimentSpec, report: &mut Report) -> Outcome {
    let p = spec.kernel_check.clone().unwrap_or_default();
    let grid = KernelGrid::default();
    let zs: Vec<f64> = (0..p.points)
        .map(|k| -p.x_max + 2.0 * p.x_max * k as f64 / (p.points - 1) as f64)
        .collect();

    let mut density = Table::new("density", &["t", "x", "y", "p"]);
    for &t in &p.times {
        for &y in &zs {
            density.push(vec![t.into(), 0.0.into(), y.into(), stable_density(t, 0.0, y, spec.stable, &grid)?.into()]);
        }
    }
    report.tables.push(density);

    let mut closed = Table::new("closed_form", &["alpha", "t", "x_minus_y", "p", "closed_form", "abs_err"]);
    for &alpha in &p.closed_form_alphas {
        let params = StableParams::new(alpha)?;
        let mut worst = 0.0f64;
        for &t in &p.times {
            for &z in &zs {
                let v = stable_density(t, z, 0.0, params, &grid)?;
                let exact = closed_form(alpha, t, z);
                worst = worst.max((v - exact).abs());
                closed.push(vec![alpha.into(), t.into(), z.into(), v.into(), exact.into(), (v - exact).abs().into()]);
            }
        }
        let oracle = if alpha == 2.0 { "Gaussian density with variance 2t" } else { "Cauchy density t/(pi(t^2+z^2))" };
        report
            .checks
            .push(Check::at_most(format!("closed form alpha = {alpha}"), worst, 0.0, p.tolerance, oracle));
    }
    report.tables.push(closed);

    let mut norm = Table::new("normalization", &["alpha", "t", "integral", "abs_err"]);
    let mut comp = Table::new("composition", &["alpha", "s", "t", "x", "y", "composed", "direct", "abs_err"]);
    let one = LineFunction::new(|_| 1.0);
    for &alpha in &p.kernel_alphas {
        let params = StableParams::new(alpha)?;
        let mut worst = 0.0f64;
        for &t in &p.times {
            let v = ou_apply(&one, t, 0.7, params, &grid)?;
            worst = worst.max((v - 1.0).abs());
            norm.push(vec![alpha.into(), t.into(), v.into(), (v - 1.0).abs().into()]);
        }
        report.checks.push(Check::at_most(
            format!("normalization alpha = {alpha}"),
            worst,
            0.0,
            p.normalization_tolerance,
            "integral of the OU kernel is 1",
        ));
        let mut worst = 0.0f64;
        for &(s, t, x, y) in &COMPOSITION_PROBES {
            let second = StableDensity::new(effective_time(t, alpha), params, &grid)?;
            let decay = (-t).exp();
            let g = LineFunction::new(move |z| second.at(y - decay * z).unwrap_or(f64::NAN));
            let composed = ou_apply(&g, s, x, params, &grid)?;
            let direct = StableDensity::new(effective_time(s + t, alpha), params, &grid)?.at(y - (-(s + t)).exp() * x)?;
            worst = worst.max((composed - direct).abs());
            comp.push(vec![
                alpha.into(),
                s.into(),
                t.into(),
                x.into(),
                y.into(),
                composed.into(),
                direct.into(),
                (composed - direct).abs().into(),
            ]);
        }
        report.checks.push(Check::at_most(
            format!("Chapman-Kolmogorov alpha = {alpha}"),
            worst,
            0.0,
            p.composition_tolerance,
            "OU kernel at s + t",
        ));
    }
    report.tables.push(norm);
    report.tables.push(comp);
    report.details = details(&p);
    Ok(())
}

fn moments(
    spec: &ExperimentSpec,
    p: &crate::spec::MomentsParams,
    model: &InteractionModel,
    config: &SimConfig,
    report: &mut Report,
) -> Outcome {
    let grid = KernelGrid::default();
    let alpha = spec.stable.alpha();
    let mut scaling = Table::new(
        "moment_scaling",
        &["alpha", "beta", "t", "moment", "stationary", "ratio", "closed_form", "abs_err"],
    );
    for &beta in &p.betas {
        let stationary = ou_abs_moment(f64::INFINITY, beta, spec.stable, &grid)?;
        let mut worst = 0.0f64;
        for &t in &p.times {
            let m = ou_abs_moment(t, beta, spec.stable, &grid)?;
            let exact = (-(-alpha * t).exp_m1()).powf(beta / alpha);
            let err = (m / stationary - exact).abs();
            worst = worst.max(err);
            scaling.push(vec![
                alpha.into(),
                beta.into(),
                t.into(),
                m.into(),
                stationary.into(),
                (m / stationary).into(),
                exact.into(),
                err.into(),
            ]);
        }
        report.checks.push(Check::at_most(
            format!("moment scaling beta = {beta}"),
            worst,
            0.0,
            p.tolerance,
            "(1 - e^{-alpha t})^{beta/alpha}",
        ));
        if alpha == 2.0 && beta == 1.0 {
            report.checks.push(Check::close(
                "stationary first moment",
                stationary,
                (2.0 / PI).sqrt(),
                1e-6,
                "sqrt(2/pi) for the unit-variance Gaussian",
            ));
        }
    }
    report.tables.push(scaling);

    let mut lattice = Table::new("moments", &["site", "t", "estimate", "std_error", "bound"]);
    if !p.sites.is_empty() {
        let x0 = p.x0.build(model).map_err(CommandError::Other)?;
        let ball = model.ball().ok_or_else(|| CommandError::Other("model has no ball".into()))?;
        let r = moment_growth_check(model, &p.sites, &x0, ball, &p.lattice_times, config)?;
        for row in &r.rows {
            lattice.push(vec![
                row.site.to_string().into(),
                row.t.into(),
                row.estimate.into(),
                row.std_error.into(),
                row.bound.into(),
            ]);
        }
        let worst = r
            .rows
            .iter()
            .map(|row| (row.estimate - 3.0 * row.std_error) / row.bound)
            .fold(f64::NEG_INFINITY, f64::max);
        report.checks.push(Check::at_most(
            "moment envelope",
            worst,
            1.0,
            0.0,
            format!("max of (estimate - 3 SE) / (C (1+|k|)^rho e^(rho d (1+eta) t)), C = {:.4}", r.c),
        ));
        report.details = details(&r);
    }
    report.tables.push(lattice);
    Ok(())
}

fn simulate(
    spec: &ExperimentSpec,
    p: &crate::spec::SimulateParams,
    model: &InteractionModel,
    config: &SimConfig,
    report: &mut Report,
) -> Outcome {
    let x0 = p.x0.build(model).map_err(CommandError::Other)?;
    let fs = p.observables.iter().map(|f| f.build()).collect::<Result<Vec<_>, _>>().map_err(CommandError::Other)?;
    let stats = run_ensemble(model, &x0, config, &fs)?;
    let mut sites = Table::new("site_means", &["time", "site", "mean", "se", "n"]);
    let cube = model.cube();
    for (r, t) in stats.times.iter().enumerate() {
        for (k, s) in stats.sites[r].iter().enumerate() {
            sites.push(vec![(*t).into(), cube.site(k).to_string().into(), s.mean().into(), s.std_error().into(), s.count().into()]);
        }
    }
    report.tables.push(sites);
    let mut ensemble = Vec::new();
    write_ensemble_csv(&stats, &mut ensemble).map_err(|e| CommandError::Other(e.to_string()))?;
    report.files.push(("ensemble.csv".into(), ensemble));

    let traj = simulate_trajectory(model, &x0, config, p.trajectory_path)?;
    let mut csv = Vec::new();
    write_trajectory_csv(&traj, &mut csv).map_err(|e| CommandError::Other(e.to_string()))?;
    report.files.push(("trajectory.csv".into(), csv));
    let header = SnapshotHeader {
        d: model.dim() as u16,
        radius: model.radius(),
        dt: config.dt,
        seed: spec.sim.seed,
    };
    let mut bin = Vec::new();
    write_snapshots(&header, &traj, &mut bin).map_err(|e| CommandError::Other(e.to_string()))?;
    report.files.push(("snapshots.bin".into(), bin));
    report.advisories.extend(stats.advisories.iter().cloned());
    report.details = serde_json::json!({
        "records": stats.times.len(),
        "n_paths": stats.n_paths,
        "observables": stats.observable_names,
        "trajectory_path": p.trajectory_path,
    });
    Ok(())
}
