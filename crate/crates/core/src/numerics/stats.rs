//! Small statistics helpers: sample moments, log-linear decay fits and the
//! two-sample Kolmogorov–Smirnov test.

use serde::{Deserialize, Serialize};

/// Sample mean and standard error of the mean, accumulated in index order.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return (xs[0], 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n as f64 - 1.0) / n as f64).sqrt())
}

/// One time point entering a decay fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub t: f64,
    pub value: f64,
    pub std_error: f64,
    pub used: bool,
}

/// Fit of `value(t) ≈ C·exp(-β t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub c_hat: f64,
    pub beta_hat: f64,
    pub beta_se: f64,
    pub r_squared: f64,
    pub time_window: (f64, f64),
    pub points: Vec<DecayPoint>,
    /// Fewer than two usable points; `beta_hat` is then only a lower bound
    /// (or NaN when nothing at all was measurable).
    pub degenerate: bool,
}

/// Minimum signal-to-noise ratio for a point to enter the fit.
pub const FIT_SNR: f64 = 10.0;

/// Weighted least squares of `ln value` on `t` over points with
/// `value > FIT_SNR · std_error`.
pub fn fit_exponential(times: &[f64], values: &[f64], std_errors: &[f64]) -> RateFit {
    let mut points: Vec<DecayPoint> = times
        .iter()
        .zip(values)
        .zip(std_errors)
        .map(|((&t, &value), &std_error)| DecayPoint {
            t,
            value,
            std_error,
            used: value > 0.0 && value.is_finite() && value > FIT_SNR * std_error,
        })
        .collect();
    let used: Vec<&DecayPoint> = points.iter().filter(|p| p.used).collect();
    if used.len() < 2 {
        // A lower bound on β from the last measurable point, when there is one.
        let (beta, c, window) = match (used.first(), points.first()) {
            (Some(p), Some(first)) if p.t > first.t && first.value > 0.0 => (
                (first.value / p.value).ln() / (p.t - first.t),
                first.value,
                (first.t, p.t),
            ),
            _ => (f64::NAN, f64::NAN, (f64::NAN, f64::NAN)),
        };
        for p in points.iter_mut() {
            p.used = false;
        }
        return RateFit {
            c_hat: c,
            beta_hat: beta,
            beta_se: f64::NAN,
            r_squared: f64::NAN,
            time_window: window,
            points,
            degenerate: true,
        };
    }
    let all_exact = used.iter().all(|p| p.std_error <= 0.0);
    let w: Vec<f64> = used
        .iter()
        .map(|p| {
            if all_exact {
                1.0
            } else {
                let rel = p.std_error.max(1e-12 * p.value) / p.value;
                1.0 / (rel * rel)
            }
        })
        .collect();
    let y: Vec<f64> = used.iter().map(|p| p.value.ln()).collect();
    let t: Vec<f64> = used.iter().map(|p| p.t).collect();
    let sw: f64 = w.iter().sum();
    let tbar = w.iter().zip(&t).map(|(w, t)| w * t).sum::<f64>() / sw;
    let ybar = w.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(&t).map(|(w, t)| w * (t - tbar).powi(2)).sum();
    let sxy: f64 = w
        .iter()
        .zip(&t)
        .zip(&y)
        .map(|((w, t), y)| w * (t - tbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * tbar;
    let ss_res: f64 = w
        .iter()
        .zip(&t)
        .zip(&y)
        .map(|((w, t), y)| w * (y - intercept - slope * t).powi(2))
        .sum();
    let ss_tot: f64 = w.iter().zip(&y).map(|(w, y)| w * (y - ybar).powi(2)).sum();
    let n = used.len() as f64;
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let beta_se = if all_exact {
        if n > 2.0 {
            (ss_res / (n - 2.0) / sxx).sqrt()
        } else {
            0.0
        }
    } else {
        let birge = if n > 2.0 { (ss_res / (n - 2.0)).max(1.0) } else { 1.0 };
        (birge / sxx).sqrt()
    };
    let window = (
        t.iter().cloned().fold(f64::INFINITY, f64::min),
        t.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    RateFit {
        c_hat: intercept.exp(),
        beta_hat: -slope,
        beta_se,
        r_squared,
        time_window: window,
        points,
        degenerate: false,
    }
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic p-value of the two-sample KS statistic.
pub fn ks_p_value(d: f64, na: usize, nb: usize) -> f64 {
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powi(k as i32 - 1) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_exponential_recovered() {
        let t: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let fit = fit_exponential(&t, &v, &vec![0.0; t.len()]);
        assert_relative_eq!(fit.beta_hat, 0.7, epsilon = 1e-12);
        assert_relative_eq!(fit.c_hat, 3.0, epsilon = 1e-11);
        assert!(fit.r_squared > 0.999_999);
    }

    #[test]
    fn noisy_points_are_excluded() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let v = [1.0, 0.5, 0.25, 0.01];
        let se = [0.01, 0.01, 0.01, 0.01];
        let fit = fit_exponential(&t, &v, &se);
        assert!(!fit.points[3].used);
        assert_relative_eq!(fit.beta_hat, 2f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn single_point_is_degenerate() {
        let fit = fit_exponential(&[0.0, 1.0], &[1.0, 0.0], &[0.0, 0.0]);
        assert!(fit.degenerate);
    }

    #[test]
    fn ks_identical_samples() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(ks_statistic(&a, &a), 0.0);
        assert!(ks_p_value(0.0, 100, 100) > 0.99);
        assert!(ks_p_value(0.5, 100, 100) < 1e-4);
    }
}
