//! Goodness-of-fit distances and small regression helpers.

use statrs::distribution::{ContinuousCDF, StudentsT};

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `sup_y |F_n(y) - F(y)|` for a sample against a continuous CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let v = sorted(sample);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(k, &y)| {
            let f = cdf(y);
            (f - k as f64 / n).max((k + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// `sup_y |F_a(y) - F_b(y)|` between two empirical laws.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut best) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let y = a[i].min(b[j]);
        while i < a.len() && a[i] <= y {
            i += 1;
        }
        while j < b.len() && b[j] <= y {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    best
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²λ²}`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// `λ` with `Q(λ) = level` (1.6276 at the 1% level).
pub fn kolmogorov_quantile(level: f64) -> f64 {
    let (mut lo, mut hi) = (0.2, 5.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_survival(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn stephens(n_eff: f64, level: f64) -> f64 {
    let r = n_eff.sqrt();
    kolmogorov_quantile(level) / (r + 0.12 + 0.11 / r)
}

/// Critical value of the one-sample statistic for `n` draws.
pub fn ks_critical_one_sample(n: usize, level: f64) -> f64 {
    stephens(n as f64, level)
}

/// Critical value of the two-sample statistic for sizes `n` and `m`.
pub fn ks_critical_two_sample(n: usize, m: usize, level: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    stephens(n * m / (n + m), level)
}

/// `∫ |F_a - F_b|`, the 1-Wasserstein distance between two empirical laws.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    if a.len() == b.len() {
        return a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = a[0].min(b[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let y = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&z)) => x.min(z),
            (Some(&x), None) => x,
            (None, Some(&z)) => z,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (y - prev);
        prev = y;
        while i < a.len() && a[i] <= y {
            i += 1;
        }
        while j < b.len() && b[j] <= y {
            j += 1;
        }
    }
    total
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residuals.
    pub slope_se: f64,
    pub dof: usize,
    /// `(x_j - x̄) / Σ(x - x̄)²`: the slope is `Σ lever_j y_j`.
    pub lever: Vec<f64>,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let lever: Vec<f64> = x.iter().map(|v| (v - mx) / sxx).collect();
    let slope: f64 = lever.iter().zip(y).map(|(l, v)| l * v).sum();
    let intercept = my - slope * mx;
    let dof = n - 2;
    let slope_se = if dof == 0 {
        0.0
    } else {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / dof as f64 / sxx).sqrt()
    };
    Some(LinearFit {
        slope,
        intercept,
        slope_se,
        dof,
        lever,
    })
}

/// Two-sided Student-t quantile; falls back to the normal value without residual dof.
pub fn t_quantile(p: f64, dof: usize) -> f64 {
    if dof == 0 {
        return statrs::distribution::Normal::standard().inverse_cdf(p);
    }
    StudentsT::new(0.0, 1.0, dof as f64).expect("valid Student-t").inverse_cdf(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_one_percent_point() {
        assert!((kolmogorov_quantile(0.01) - 1.6276).abs() < 1e-4);
        assert!((kolmogorov_quantile(0.05) - 1.3581).abs() < 1e-4);
    }

    #[test]
    fn ks_of_a_perfect_grid() {
        let n = 100;
        let xs: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, |y| y.clamp(0.0, 1.0));
        assert!((d - 0.005).abs() < 1e-12);
        assert_eq!(ks_two_sample(&xs, &xs), 0.0);
    }

    #[test]
    fn wasserstein_of_shifted_laws() {
        let a: Vec<f64> = (0..50).map(|k| k as f64).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 0.25).collect();
        assert!((wasserstein1(&a, &b) - 0.25).abs() < 1e-12);
        let c: Vec<f64> = (0..100).map(|k| (k / 2) as f64 + 0.25).collect();
        assert!((wasserstein1(&a, &c) - 0.25).abs() < 1e-12);
        assert_eq!(wasserstein1(&[2.0], &[-2.0, -2.0]), 4.0);
    }

    #[test]
    fn exact_line_has_zero_slope_error() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-15 && f.slope_se < 1e-15);
    }
}
