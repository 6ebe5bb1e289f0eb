use serde::{Deserialize, Serialize};

/// Probability mass function on a contiguous integer range `[min, min + len)`.
///
/// Truncated laws keep the dropped tail mass in `residual`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    min: i64,
    probs: Vec<f64>,
    residual: f64,
}

impl Pmf {
    pub fn new(min: i64, probs: Vec<f64>, residual: f64) -> Self {
        Self { min, probs, residual }
    }

    /// Builds a pmf from `f` evaluated on `[lo, hi]`.
    pub fn from_fn(lo: i64, hi: i64, residual: f64, f: impl Fn(i64) -> f64) -> Self {
        Self {
            min: lo,
            probs: (lo..=hi).map(f).collect(),
            residual,
        }
    }

    /// Empirical pmf of integer samples.
    pub fn empirical(samples: impl IntoIterator<Item = i64>) -> Self {
        let samples: Vec<i64> = samples.into_iter().collect();
        let Some(&lo) = samples.iter().min() else {
            return Self {
                min: 0,
                probs: Vec::new(),
                residual: 0.0,
            };
        };
        let hi = *samples.iter().max().unwrap();
        let mut counts = vec![0u64; (hi - lo + 1) as usize];
        for s in &samples {
            counts[(s - lo) as usize] += 1;
        }
        let n = samples.len() as f64;
        Self {
            min: lo,
            probs: counts.into_iter().map(|c| c as f64 / n).collect(),
            residual: 0.0,
        }
    }

    pub fn min(&self) -> i64 {
        self.min
    }

    pub fn max(&self) -> i64 {
        self.min + self.probs.len() as i64 - 1
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn get(&self, k: i64) -> f64 {
        if k < self.min {
            return 0.0;
        }
        self.probs.get((k - self.min) as usize).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (self.min + i as i64, p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.iter().map(|(k, p)| (k as f64).powi(2) * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.second_moment() - m * m
    }

    /// Total variation distance over the union of both supports.
    pub fn tv_distance(&self, other: &Pmf) -> f64 {
        let lo = self.min.min(other.min);
        let hi = self.max().max(other.max());
        0.5 * (lo..=hi).map(|k| (self.get(k) - other.get(k)).abs()).sum::<f64>()
    }

    /// Law of `scale * X`.
    pub fn scaled(&self, scale: i64) -> Pmf {
        assert!(scale != 0);
        let (lo, hi) = if scale > 0 {
            (self.min * scale, self.max() * scale)
        } else {
            (self.max() * scale, self.min * scale)
        };
        let mut probs = vec![0.0; (hi - lo + 1) as usize];
        for (k, p) in self.iter() {
            probs[(k * scale - lo) as usize] += p;
        }
        Pmf {
            min: lo,
            probs,
            residual: self.residual,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_a_fair_coin_on_pm1() {
        let pmf = Pmf::new(-1, vec![0.5, 0.0, 0.5], 0.0);
        assert_eq!(pmf.mean(), 0.0);
        assert_eq!(pmf.variance(), 1.0);
        assert_eq!(pmf.get(5), 0.0);
        assert_eq!(pmf.get(-7), 0.0);
    }

    #[test]
    fn tv_distance_disjoint_supports() {
        let a = Pmf::new(0, vec![1.0], 0.0);
        let b = Pmf::new(3, vec![1.0], 0.0);
        assert_eq!(a.tv_distance(&b), 1.0);
        assert_eq!(a.tv_distance(&a), 0.0);
    }

    #[test]
    fn empirical_counts() {
        let pmf = Pmf::empirical([1, 1, 2, 4]);
        assert_eq!(pmf.min(), 1);
        assert_eq!(pmf.max(), 4);
        assert_eq!(pmf.get(1), 0.5);
        assert_eq!(pmf.get(3), 0.0);
        assert_eq!(pmf.total(), 1.0);
    }

    #[test]
    fn negative_scaling_mirrors() {
        let pmf = Pmf::new(0, vec![0.25, 0.75], 0.0).scaled(-2);
        assert_eq!(pmf.min(), -2);
        assert_eq!(pmf.get(-2), 0.75);
        assert_eq!(pmf.get(0), 0.25);
    }
}
