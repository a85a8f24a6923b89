//! Sample summaries and reference distributions used by the checks.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Number of batches for batch-means standard errors.
pub const BATCHES: usize = 100;

/// Mean and unbiased variance by Welford's update (exact for constant data).
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let d = x - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (x - mean);
    }
    let var = if xs.len() > 1 { m2 / (xs.len() - 1) as f64 } else { 0.0 };
    (mean, var)
}

pub fn mean(xs: &[f64]) -> f64 {
    mean_var(xs).0
}

/// Standard error of the sample mean from [`BATCHES`] contiguous batches.
pub fn batch_means_se(xs: &[f64]) -> Result<f64> {
    let n = xs.len();
    if n < BATCHES {
        return Err(Error::Sizing { needed: BATCHES, got: n });
    }
    let means: Vec<f64> = (0..BATCHES)
        .map(|b| mean(&xs[b * n / BATCHES..(b + 1) * n / BATCHES]))
        .collect();
    let (_, var) = mean_var(&means);
    Ok((var / BATCHES as f64).sqrt())
}

/// Fourth central moment (population normalization).
pub fn central_m4(xs: &[f64], mean: f64) -> f64 {
    xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / xs.len() as f64
}

/// Lower-median of the data.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

pub fn normal_quantile(p: f64) -> f64 {
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    Normal::standard().inverse_cdf(p)
}

/// `P(|Z| ≥ |z|)`.
pub fn two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return 0.0;
    }
    // 2·Φ(−|z|) keeps precision in the far tail
    (2.0 * Normal::standard().cdf(-z.abs())).min(1.0)
}

/// One-sided normal score of a p-value, floored at zero.
pub fn chi_square_z(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::INFINITY;
    }
    (-Normal::standard().inverse_cdf(p)).max(0.0)
}

/// `P(χ²_df ≥ x)`.
pub fn chi_square_sf(x: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::Degenerate("chi-square test with zero degrees of freedom".into()));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::Degenerate(e.to_string()))?;
    Ok(dist.sf(x))
}
