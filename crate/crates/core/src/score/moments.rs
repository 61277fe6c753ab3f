//! Sample moment vectors: mean, std, skewness, excess kurtosis.

use serde::{Deserialize, Serialize};

/// The four summary statistics used by the moment kernel. Population
/// (1/N) central moments throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub mean: f64,
    pub std: f64,
    pub skew: f64,
    pub kurt: f64,
}

impl MomentVector {
    pub fn as_array(&self) -> [f64; 4] {
        [self.mean, self.std, self.skew, self.kurt]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    /// Euclidean distance between two moment vectors.
    pub fn distance(&self, other: &MomentVector) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Raised when a sample set cannot be summarized; the caller converts it
/// to a -inf score.
#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum MomentError {
    #[error("need at least 2 samples, got {0}")]
    TooFew(usize),
    #[error("non-finite sample present")]
    NonFinite,
}

/// Variance threshold below which skew and kurtosis are pinned to zero.
pub const DEGENERATE_M2: f64 = 1e-12;

/// Population central moments of a sample set. When m2 falls below
/// [`DEGENERATE_M2`] the skew and excess kurtosis are defined as zero so a
/// constant sampler still gets a finite score.
pub fn sample_moments(xs: &[f64]) -> Result<MomentVector, MomentError> {
    if xs.len() < 2 {
        return Err(MomentError::TooFew(xs.len()));
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(MomentError::NonFinite);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let std = m2.sqrt();
    let (skew, kurt) = if m2 < DEGENERATE_M2 {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };
    Ok(MomentVector {
        mean,
        std,
        skew,
        kurt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_two_point() {
        let m = sample_moments(&[-1.0, 1.0]).unwrap();
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.std, 1.0);
        assert_eq!(m.skew, 0.0);
        assert_eq!(m.kurt, -2.0);
    }

    #[test]
    fn one_two_three() {
        let m = sample_moments(&[1.0, 2.0, 3.0]).unwrap();
        assert!((m.mean - 2.0).abs() < 1e-15);
        assert!((m.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(m.skew, 0.0);
        assert!((m.kurt - (-1.5)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_convention() {
        let m = sample_moments(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(m.mean, 5.0);
        assert_eq!(m.std, 0.0);
        assert_eq!(m.skew, 0.0);
        assert_eq!(m.kurt, 0.0);
    }

    #[test]
    fn nonfinite_rejected() {
        assert_eq!(
            sample_moments(&[1.0, f64::NAN]),
            Err(MomentError::NonFinite)
        );
        assert_eq!(sample_moments(&[1.0]), Err(MomentError::TooFew(1)));
    }
}
