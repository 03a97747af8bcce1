use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::scalar::{Real, Scalar};

pub const SCALE_MIN: u8 = 1;
pub const SCALE_MAX: u8 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikertStats<T> {
    pub n: usize,
    pub mean: T,
    /// Sample standard deviation; 0 for a single rating.
    pub sd: T,
    pub percent: T,
}

/// Satisfaction as a percentage of the scale maximum.
pub fn likert_percent<T: Scalar>(mean: T) -> T {
    mean * T::from_count(100) / T::from_count(SCALE_MAX as usize)
}

pub fn likert_stats<T: Real>(samples: &[u8]) -> Result<LikertStats<T>, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptySamples);
    }
    if let Some(&bad) = samples.iter().find(|s| !(SCALE_MIN..=SCALE_MAX).contains(s)) {
        return Err(EvalError::LikertOutOfRange(bad));
    }
    let n = samples.len();
    let values: Vec<T> = samples.iter().map(|&s| T::from_count(s as usize)).collect();
    let mean = values.iter().fold(T::zero(), |a, &b| a + b) / T::from_count(n);
    let sd = if n > 1 {
        let ss = values.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean));
        (ss / T::from_count(n - 1)).sqrt()
    } else {
        T::zero()
    };
    Ok(LikertStats {
        n,
        mean,
        sd,
        percent: likert_percent(mean),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{decimal, Exact};

    #[test]
    fn all_sevens() {
        let s: LikertStats<f64> = likert_stats(&[7, 7, 7, 7]).unwrap();
        assert_eq!((s.mean, s.sd, s.percent), (7.0, 0.0, 100.0));
    }

    #[test]
    fn sample_sd() {
        let s: LikertStats<f64> = likert_stats(&[5, 6, 7]).unwrap();
        assert!((s.sd - 1.0).abs() < 1e-12);
        assert!((s.mean - 6.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert_eq!(likert_stats::<f64>(&[]), Err(EvalError::EmptySamples));
        assert_eq!(likert_stats::<f64>(&[3, 8]), Err(EvalError::LikertOutOfRange(8)));
        assert_eq!(likert_stats::<f64>(&[0]), Err(EvalError::LikertOutOfRange(0)));
    }

    #[test]
    fn exact_percent() {
        assert_eq!(likert_percent(decimal(642, 2)), Exact::new(642, 7));
    }
}
