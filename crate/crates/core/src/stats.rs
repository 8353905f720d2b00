//! Order statistics, nonparametric median confidence intervals and simple
//! linear regression.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("empty sample")]
    Empty,
    #[error("insufficient samples: {n} values cannot support a {level} interval")]
    InsufficientSamples { n: usize, level: f64 },
    #[error("singular design: all x values are equal")]
    SingularDesign,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Smallest sample for which a median interval is attempted.
pub const MIN_CI_SAMPLES: usize = 5;

/// A non-empty set of measurements with a cached sorted copy.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    values: Vec<f64>,
    sorted: Vec<f64>,
    unit: String,
}

impl SampleSet {
    pub fn new(values: Vec<f64>, unit: impl Into<String>) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::Empty);
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(StatsError::InvalidArgument("sample contains NaN".into()));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(SampleSet {
            values,
            sorted,
            unit: unit.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn median(&self) -> f64 {
        median_of_sorted(&self.sorted)
    }

    /// Nearest-rank percentile, `p` in [0, 1].
    pub fn percentile(&self, p: f64) -> Result<f64, StatsError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(StatsError::InvalidArgument(format!(
                "percentile {p} outside [0, 1]"
            )));
        }
        let n = self.sorted.len();
        let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
        Ok(self.sorted[rank - 1])
    }
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Median of an unsorted slice; `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(median_of_sorted(&sorted))
}

/// Nearest-rank percentile of `samples`.
pub fn percentile(samples: &SampleSet, p: f64) -> Result<f64, StatsError> {
    samples.percentile(p)
}

/// Two-sided standard normal quantile for a confidence `level`.
pub fn normal_quantile(level: f64) -> f64 {
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    std.inverse_cdf(0.5 + level / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianInterval {
    pub low: f64,
    pub high: f64,
    pub median: f64,
    pub level: f64,
}

impl MedianInterval {
    /// Half-width relative to the median.
    pub fn relative_half_width(&self) -> f64 {
        if self.median == 0.0 {
            if self.high == self.low {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.high - self.low) / 2.0 / self.median.abs()
        }
    }
}

/// Zero-based indices of the order statistics bounding the median at
/// `level`: `floor((n - z sqrt n) / 2)` and `ceil((n + z sqrt n) / 2)`.
///
/// The lower index must exist; the upper one is clamped to the last sample.
pub fn median_ci_indices(n: usize, level: f64) -> Result<(usize, usize), StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidArgument(format!(
            "confidence level {level} outside (0, 1)"
        )));
    }
    if n < MIN_CI_SAMPLES {
        return Err(StatsError::InsufficientSamples { n, level });
    }
    let z = normal_quantile(level);
    let spread = z * (n as f64).sqrt();
    let lower = ((n as f64 - spread) / 2.0).floor();
    if lower < 0.0 {
        return Err(StatsError::InsufficientSamples { n, level });
    }
    let upper = ((n as f64 + spread) / 2.0).ceil() as usize;
    Ok((lower as usize, upper.min(n - 1)))
}

/// Nonparametric confidence interval for the median from order statistics.
pub fn median_ci(samples: &SampleSet, level: f64) -> Result<MedianInterval, StatsError> {
    let (lo, hi) = median_ci_indices(samples.len(), level)?;
    let sorted = samples.sorted();
    Ok(MedianInterval {
        low: sorted[lo],
        high: sorted[hi],
        median: samples.median(),
        level,
    })
}

/// Least-squares line with goodness-of-fit measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub adjusted_r_squared: f64,
    pub n: usize,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares of `ys` on `xs`.
///
/// A constant response has zero total variance; R² is defined as 0 then.
pub fn ols_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::InvalidArgument(format!(
            "length mismatch: {} xs, {} ys",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < 3 {
        return Err(StatsError::InsufficientSamples { n, level: 0.0 });
    }
    let nf = n as f64;
    let mean_x = xs.iter().sum::<f64>() / nf;
    let mean_y = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::SingularDesign);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r_squared = if syy == 0.0 { 0.0 } else { 1.0 - ss_res / syy };
    let adjusted_r_squared = 1.0 - (1.0 - r_squared) * (nf - 1.0) / (nf - 2.0);
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        adjusted_r_squared,
        n,
    })
}

/// Five whisker percentiles used for box plots: 2nd, 25th, 50th, 75th, 98th.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Whiskers {
    pub p2: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p98: f64,
}

impl Whiskers {
    pub fn of(samples: &SampleSet) -> Whiskers {
        let p = |q| samples.percentile(q).expect("fixed percentile in range");
        Whiskers {
            p2: p(0.02),
            p25: p(0.25),
            p50: p(0.50),
            p75: p(0.75),
            p98: p(0.98),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(n: usize) -> SampleSet {
        SampleSet::new((1..=n).map(|v| v as f64).collect(), "x").unwrap()
    }

    #[test]
    fn ci_on_identical_values() {
        let s = SampleSet::new(vec![7.5; 100], "ms").unwrap();
        let ci = median_ci(&s, 0.95).unwrap();
        assert_eq!((ci.low, ci.high, ci.median), (7.5, 7.5, 7.5));
        assert_eq!(ci.relative_half_width(), 0.0);
    }

    #[test]
    fn ci_on_one_to_hundred() {
        let ci = median_ci(&seq(100), 0.95).unwrap();
        assert_eq!((ci.low, ci.high), (41.0, 61.0));
        assert_eq!(ci.median, 50.5);
    }

    #[test]
    fn higher_level_widens() {
        let s = seq(100);
        let a = median_ci(&s, 0.95).unwrap();
        let b = median_ci(&s, 0.99).unwrap();
        assert!(b.low < a.low && b.high > a.high);
    }

    #[test]
    fn ci_requires_enough_samples() {
        assert!(matches!(
            median_ci(&seq(4), 0.95),
            Err(StatsError::InsufficientSamples { .. })
        ));
        median_ci(&seq(5), 0.95).unwrap();
        // z = 2.576 pushes the lower rank below the first sample
        assert!(matches!(
            median_ci(&seq(5), 0.99),
            Err(StatsError::InsufficientSamples { .. })
        ));
        assert!(median_ci(&seq(10), 1.0).is_err());
    }

    #[test]
    fn percentile_examples() {
        let s = SampleSet::new(vec![3.0, 1.0, 2.0], "x").unwrap();
        assert_eq!(s.percentile(0.5).unwrap(), 2.0);
        assert_eq!(s.percentile(0.0).unwrap(), 1.0);
        assert_eq!(s.percentile(1.0).unwrap(), 3.0);
        assert_eq!(seq(100).percentile(0.98).unwrap(), 98.0);
        assert!(s.percentile(1.5).is_err());
        assert_eq!(SampleSet::new(vec![], "x"), Err(StatsError::Empty));
    }

    #[test]
    fn ols_exact_line() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 3.0).collect();
        let fit = ols_fit(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 3.0).abs() < 1e-12);
        assert_eq!(fit.r_squared, 1.0);
        assert_eq!(fit.adjusted_r_squared, 1.0);
    }

    #[test]
    fn ols_constant_response() {
        let fit = ols_fit(&[1.0, 2.0, 3.0, 4.0], &[5.0; 4]).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.intercept, 5.0);
        assert_eq!(fit.r_squared, 0.0);
    }

    #[test]
    fn ols_errors() {
        assert_eq!(ols_fit(&[2.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]), Err(StatsError::SingularDesign));
        assert!(ols_fit(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(ols_fit(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ols_noisy_slope_within_standard_error() {
        use rand::{Rng, SeedableRng};
        use rand_distr::{Distribution, Normal as Gauss};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let noise = Gauss::new(0.0, 0.5).unwrap();
        let xs: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..10.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 * x - 4.0 + noise.sample(&mut rng)).collect();
        let fit = ols_fit(&xs, &ys).unwrap();
        let n = xs.len() as f64;
        let mean_x = xs.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
        let resid: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - fit.predict(*x)).powi(2))
            .sum();
        let se_slope = (resid / (n - 2.0) / sxx).sqrt();
        assert!((fit.slope - 1.5).abs() <= 4.0 * se_slope);
        assert!(fit.adjusted_r_squared <= fit.r_squared);
    }

    proptest! {
        #[test]
        fn ci_brackets_median(values in prop::collection::vec(-1e6f64..1e6, 5..300)) {
            let s = SampleSet::new(values.clone(), "x").unwrap();
            let ci = median_ci(&s, 0.95).unwrap();
            prop_assert!(ci.low <= ci.median && ci.median <= ci.high);
            prop_assert!(values.contains(&ci.low) && values.contains(&ci.high));
        }

        #[test]
        fn percentile_monotone(values in prop::collection::vec(-1e6f64..1e6, 1..200), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let s = SampleSet::new(values, "x").unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(s.percentile(lo).unwrap() <= s.percentile(hi).unwrap());
        }

        #[test]
        fn ols_scales_with_response(
            pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..50),
            c in 0.1f64..50.0,
        ) {
            let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
            prop_assume!(xs.iter().any(|&x| (x - xs[0]).abs() > 1e-3));
            let base = ols_fit(&xs, &ys).unwrap();
            let scaled: Vec<f64> = ys.iter().map(|y| y * c).collect();
            let fit = ols_fit(&xs, &scaled).unwrap();
            let tol = 1e-8 * (1.0 + base.slope.abs() * c + base.intercept.abs() * c);
            prop_assert!((fit.slope - base.slope * c).abs() <= tol);
            prop_assert!((fit.intercept - base.intercept * c).abs() <= tol * 10.0);
            prop_assert!((fit.r_squared - base.r_squared).abs() <= 1e-9);
        }
    }
}
