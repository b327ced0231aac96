//! Small statistics helpers shared by the diagnostics and the samplers.

use statrs::distribution::{ContinuousCDF, Normal};

/// Kendall tau-b between two equally long sequences; 0 when either is constant.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in i + 1..n {
            let a = (x[j] - x[i]).partial_cmp(&0.0).map_or(0, |o| o as i32);
            let b = (y[j] - y[i]).partial_cmp(&0.0).map_or(0, |o| o as i32);
            match (a, b) {
                (0, 0) => {}
                (0, _) => tx += 1.0,
                (_, 0) => ty += 1.0,
                _ if a == b => conc += 1.0,
                _ => disc += 1.0,
            }
        }
    }
    let denom = ((conc + disc + tx) * (conc + disc + ty)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (conc - disc) / denom
    }
}

/// Concordance of a sequence with "decreasing in its index": +1 for strictly decreasing.
pub fn decreasing_tau(values: &[f64]) -> f64 {
    let idx: Vec<f64> = (0..values.len()).map(|i| -(i as f64)).collect();
    kendall_tau(values, &idx)
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Linear-interpolation quantile (type 7).
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// `log sum exp(x_i)` without overflow.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// One-sample Kolmogorov-Smirnov test against `N(mean, sd^2)`: `(D, p)`.
pub fn ks_normal(xs: &[f64], mean: f64, sd: f64) -> (f64, f64) {
    let dist = Normal::new(mean, sd).expect("positive standard deviation");
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d = 0f64;
    for (i, x) in v.iter().enumerate() {
        let f = dist.cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sq = n.sqrt();
    (d, kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d))
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as i64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_extremes() {
        assert_eq!(decreasing_tau(&[5.0, 4.0, 1.0, 0.5]), 1.0);
        assert_eq!(decreasing_tau(&[1.0, 2.0, 3.0]), -1.0);
        assert_eq!(decreasing_tau(&[2.0, 2.0, 2.0]), 0.0);
    }

    #[test]
    fn tau_counts_one_swap() {
        // 5 concordant, 1 discordant pair.
        let t = kendall_tau(&[1.0, 2.0, 4.0, 3.0], &[1.0, 2.0, 3.0, 4.0]);
        assert!((t - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn logsumexp_is_stable() {
        assert!((logsumexp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Tabulated critical values: P(K > 1.3581) = 0.05, P(K > 1.6276) = 0.01.
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(quantile(&[0.0, 10.0], 0.25), 2.5);
    }
}
