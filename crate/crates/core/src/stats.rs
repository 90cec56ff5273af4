//! Sample statistics for Monte-Carlo aggregation and goodness of fit.

/// Running mean and variance (Welford), combined in a fixed order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeanAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; 0 for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for MeanAccumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        iter.into_iter().for_each(|x| acc.push(x));
        acc
    }
}

/// One-sample Kolmogorov–Smirnov statistic `sup |F_n − F|`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of a KS statistic `d` over `n` samples, with the
/// Stephens small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    kolmogorov_survival(lambda)
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn mean_and_stderr() {
        let acc: MeanAccumulator = [1.0, 2.0, 3.0, 4.0].into_iter().collect();
        assert_eq!(acc.mean(), 2.5);
        assert!((acc.variance() - 5.0 / 3.0).abs() < 1e-15);
        assert!((acc.stderr() - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        let one: MeanAccumulator = [7.0].into_iter().collect();
        assert_eq!((one.mean(), one.stderr()), (7.0, 0.0));
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Standard table: Q(1.36) ≈ 0.049, Q(1.63) ≈ 0.010.
        assert!((kolmogorov_survival(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_survival(1.6276) - 0.0100).abs() < 1e-3);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn ks_statistic_exact_small_case() {
        // Uniform cdf, samples {0.5}: sup = max(0.5, 0.5).
        assert!((ks_statistic(&[0.5], |x| x) - 0.5).abs() < 1e-15);
        assert!((ks_statistic(&[0.1, 0.2], |x| x) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn uniform_samples_pass_and_skewed_ones_fail() {
        let mut rng = crate::rng::stream(1, 0, 0);
        let u: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_p_value(ks_statistic(&u, |x| x), u.len()) > 0.01);
        let sq: Vec<f64> = u.iter().map(|x| x * x).collect();
        assert!(ks_p_value(ks_statistic(&sq, |x| x), sq.len()) < 1e-6);
    }
}
