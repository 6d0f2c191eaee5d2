//! Small statistical helpers shared by the checks and the acceptance suite.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

/// Two-sided standard-normal critical value at level `alpha`.
pub fn normal_critical(alpha: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareTest {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// Pearson goodness of fit. Categories with zero expected count must have
/// zero observed count and are dropped from the degrees of freedom.
pub fn chi_square(observed: &[f64], expected: &[f64]) -> ChiSquareTest {
    assert_eq!(observed.len(), expected.len());
    let mut stat = 0.0;
    let mut used = 0usize;
    for (&o, &e) in observed.iter().zip(expected) {
        if e > 0.0 {
            stat += (o - e) * (o - e) / e;
            used += 1;
        } else if o > 0.0 {
            return ChiSquareTest {
                statistic: f64::INFINITY,
                dof: used.max(1),
                p_value: 0.0,
            };
        }
    }
    let dof = used.saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).expect("dof > 0").sf(stat)
    };
    ChiSquareTest {
        statistic: stat,
        dof,
        p_value,
    }
}

/// Dvoretzky–Kiefer–Wolfowitz band half-width for `n` samples at level
/// `alpha`.
pub fn dkw_epsilon(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Empirical survival function `P(X > t)` of sorted samples.
pub fn survival(sorted: &[f64], t: f64) -> f64 {
    let above = sorted.len() - sorted.partition_point(|&x| x <= t);
    above as f64 / sorted.len() as f64
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Lag-1 sample autocorrelation and its null standard error `1/√n`.
pub fn lag1_autocorrelation(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let den: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    let num: f64 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    (num / den, 1.0 / (n as f64).sqrt())
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSlopeTest {
    /// Mean over batches of the fitted log-survival slope.
    pub slope: f64,
    pub std_err: f64,
    /// One-sided upper confidence bound on the slope.
    pub upper_bound: f64,
    pub confidence: f64,
    pub batches: usize,
    pub grid: Vec<f64>,
}

impl TailSlopeTest {
    pub fn strictly_negative(&self) -> bool {
        self.upper_bound < 0.0
    }
}

/// Fits `log P(X > t)` against `t` on a grid of pooled quantiles, separately
/// in `batches` consecutive batches, and bounds the mean slope from above
/// with a one-sided Student t interval.
pub fn tail_slope_test(samples: &[f64], batches: usize, confidence: f64) -> TailSlopeTest {
    assert!(batches >= 2 && samples.len() >= 10 * batches);
    let mut pooled = samples.to_vec();
    pooled.sort_by(f64::total_cmp);
    let levels: Vec<f64> = (0..=20).map(|i| 0.5 + 0.495 * i as f64 / 20.0).collect();
    let mut grid: Vec<f64> = levels
        .iter()
        .map(|q| pooled[((q * pooled.len() as f64) as usize).min(pooled.len() - 1)])
        .collect();
    grid.dedup();

    let size = samples.len() / batches;
    let slopes: Vec<f64> = samples
        .chunks(size)
        .take(batches)
        .map(|chunk| {
            let mut b = chunk.to_vec();
            b.sort_by(f64::total_cmp);
            let (xs, ys): (Vec<f64>, Vec<f64>) = grid
                .iter()
                .map(|&t| (t, survival(&b, t)))
                .filter(|&(_, s)| s > 0.0)
                .map(|(t, s)| (t, s.ln()))
                .unzip();
            ols_slope(&xs, &ys)
        })
        .collect();
    let (slope, std_err) = mean_se(&slopes);
    let t = StudentsT::new(0.0, 1.0, (batches - 1) as f64)
        .expect("dof > 0")
        .inverse_cdf(confidence);
    TailSlopeTest {
        slope,
        std_err,
        upper_bound: slope + t * std_err,
        confidence,
        batches,
        grid,
    }
}
