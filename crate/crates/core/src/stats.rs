//! Small statistics toolkit for the estimators.

use serde::{Deserialize, Serialize};

/// z-quantile of a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Running mean and variance (Welford). Merging is exact up to rounding and
/// estimators always merge in replica order, so results do not depend on the
/// thread count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: u64,
    mean: f64,
    m2: f64,
}

impl Summary {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Summary) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.count == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.count as f64).sqrt()
    }

    /// Half-width of the normal-approximation 95% interval for the mean.
    pub fn ci95(&self) -> f64 {
        Z95 * self.std_err()
    }
}

impl FromIterator<f64> for Summary {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Summary::default();
        for x in iter {
            s.push(x);
        }
        s
    }
}

/// Half-width of the 95% interval of a proportion `k / n`.
pub fn proportion_ci95(k: u64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    let p = k as f64 / n as f64;
    Z95 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Standard error of a proportion `k / n`.
pub fn proportion_se(k: u64, n: u64) -> f64 {
    proportion_ci95(k, n) / Z95
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
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

/// One-sample Kolmogorov–Smirnov statistic against a continuous cdf.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of a KS statistic `d` with effective sample size
/// `n_eff` (`n` for one sample, `n m / (n + m)` for two), using the
/// Kolmogorov series with Stephens' small-sample correction.
pub fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sq = n_eff.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powi(k as i32 - 1) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Weighted least-squares line `y = a + b x`; returns `(slope, slope_se)`.
/// With unit weights the standard error comes from the residuals; otherwise
/// weights are read as inverse variances.
pub fn fit_line(x: &[f64], y: &[f64], w: Option<&[f64]>) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let ones = vec![1.0; x.len()];
    let w = w.unwrap_or(&ones);
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (a - mx) * (c - my)).sum();
    let slope = sxy / sxx;
    let se = if w.iter().all(|&v| v == 1.0) {
        let dof = x.len().saturating_sub(2).max(1) as f64;
        let rss: f64 = x.iter().zip(y).map(|(a, c)| (c - my - slope * (a - mx)).powi(2)).sum();
        (rss / dof / sxx).sqrt()
    } else {
        (1.0 / sxx).sqrt()
    };
    (slope, se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_matches_direct_formulas() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        let s: Summary = xs.iter().copied().collect();
        assert_eq!(s.mean(), 3.5);
        assert!((s.variance() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn merge_equals_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let whole: Summary = xs.iter().copied().collect();
        let mut left: Summary = xs[..40].iter().copied().collect();
        let right: Summary = xs[40..].iter().copied().collect();
        left.merge(&right);
        assert_eq!(left.count, whole.count);
        assert!((left.mean() - whole.mean()).abs() < 1e-14);
        assert!((left.variance() - whole.variance()).abs() < 1e-12);
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&a, &[10.0, 11.0]), 1.0);
        assert!((ks_p_value(0.0, 100.0) - 1.0).abs() < 1e-12);
        assert!(ks_p_value(0.5, 1000.0) < 1e-10);
    }

    #[test]
    fn ks_critical_value() {
        // the 5% critical value of the limiting distribution is 1.358
        let p = ks_p_value(1.358 / 1e6f64.sqrt(), 1e6);
        assert!((p - 0.05).abs() < 1e-3, "{p}");
    }

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (b, se) = fit_line(&x, &y, None);
        assert!((b - 2.0).abs() < 1e-12);
        assert!(se < 1e-12);
    }
}
