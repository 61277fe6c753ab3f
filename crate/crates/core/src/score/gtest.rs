//! G-test goodness-of-fit statistic and its chi-square p-value for
//! countable-support families.

use super::family::{family_bins, FamilyError, FamilyId};
use super::special::chi_square_sf;

/// G = 2 sum_i c_i ln(c_i / (p_i n)). Zero counts contribute nothing; a
/// nonzero count on a zero-probability bin yields +inf (an impossible
/// outcome under the null).
pub fn g_statistic(counts: &[u64], probs: &[f64]) -> f64 {
    assert_eq!(counts.len(), probs.len(), "counts/probs length mismatch");
    let n: u64 = counts.iter().sum();
    assert!(n >= 1, "need at least one observation");
    let n = n as f64;
    let mut g = 0.0;
    for (&c, &p) in counts.iter().zip(probs) {
        if c == 0 {
            continue;
        }
        if p <= 0.0 {
            return f64::INFINITY;
        }
        let c = c as f64;
        g += c * (c / (p * n)).ln();
    }
    2.0 * g
}

/// Tolerance for treating a real-valued sample as an integer.
const INT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum GTestError {
    #[error("empty sample set")]
    Empty,
    #[error(transparent)]
    Family(#[from] FamilyError),
}

/// P-value of falsely rejecting the null hypothesis that `samples` come
/// from the given family at fixed parameters. Samples off the family's
/// support (non-integers past the rounding tolerance, or impossible
/// values) give p = 0.
pub fn g_test_p_value(
    samples: &[f64],
    family: FamilyId,
    params: &[f64],
) -> Result<f64, GTestError> {
    if samples.is_empty() {
        return Err(GTestError::Empty);
    }
    let spec = family_bins(family, params)?;
    let n_bins = spec.probs.len();
    let mut counts = vec![0u64; n_bins];
    for &x in samples {
        if !x.is_finite() {
            return Ok(0.0);
        }
        let rounded = x.round();
        if (x - rounded).abs() > INT_TOL {
            return Ok(0.0);
        }
        let k = rounded as i64 - spec.first_value;
        if k < 0 {
            return Ok(0.0);
        }
        let k = k as usize;
        if k < n_bins - if spec.open_tail { 1 } else { 0 } {
            counts[k] += 1;
        } else if spec.open_tail {
            *counts.last_mut().unwrap() += 1;
        } else {
            // Closed support (Bernoulli): out-of-range integers are
            // impossible outcomes.
            return Ok(0.0);
        }
    }
    let g = g_statistic(&counts, &spec.probs);
    if g.is_infinite() {
        return Ok(0.0);
    }
    let df = (n_bins - 1).max(1) as u32;
    Ok(chi_square_sf(g, df))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_fit_is_zero() {
        assert_eq!(g_statistic(&[50, 50], &[0.5, 0.5]), 0.0);
    }

    /// 2(60 ln 1.2 + 40 ln 0.8) = 4.0271.
    #[test]
    fn sixty_forty() {
        let g = g_statistic(&[60, 40], &[0.5, 0.5]);
        assert!((g - 4.0271).abs() < 1e-4, "{g}");
    }

    /// 2 * 100 * ln(100/70) for the all-ones sample.
    #[test]
    fn one_sided() {
        let g = g_statistic(&[0, 100], &[0.3, 0.7]);
        assert!((g - 71.335).abs() < 5e-3, "{g}");
    }

    #[test]
    fn doubling_counts_doubles_g() {
        let g1 = g_statistic(&[60, 40], &[0.5, 0.5]);
        let g2 = g_statistic(&[120, 80], &[0.5, 0.5]);
        assert!((g2 - 2.0 * g1).abs() < 1e-12);
    }

    #[test]
    fn impossible_bin_is_infinite() {
        assert!(g_statistic(&[1, 99], &[0.0, 1.0]).is_infinite());
    }

    #[test]
    fn balanced_bernoulli_p_is_one() {
        let samples: Vec<f64> = (0..100).map(|i| if i < 50 { 1.0 } else { 0.0 }).collect();
        let p = g_test_p_value(&samples, FamilyId::Bernoulli, &[0.5]).unwrap();
        assert_eq!(p, 1.0);
    }

    /// chi_square_sf(4.0271, 1) = 0.0448.
    #[test]
    fn sixty_forty_p_value() {
        let samples: Vec<f64> = (0..100).map(|i| if i < 60 { 1.0 } else { 0.0 }).collect();
        let p = g_test_p_value(&samples, FamilyId::Bernoulli, &[0.5]).unwrap();
        assert!((p - 0.0448).abs() < 1e-4, "{p}");
    }

    #[test]
    fn off_support_sample_gives_zero() {
        let p = g_test_p_value(&[0.5, 1.0], FamilyId::Bernoulli, &[0.5]).unwrap();
        assert_eq!(p, 0.0);
        let p = g_test_p_value(&[2.0, 1.0], FamilyId::Bernoulli, &[0.5]).unwrap();
        assert_eq!(p, 0.0);
        let p = g_test_p_value(&[0.0, 1.0], FamilyId::Geometric, &[0.5]).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn geometric_tail_is_legal() {
        // Values past the 0.999 quantile land in the tail bin.
        let mut samples: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        samples.push(25.0);
        let p = g_test_p_value(&samples, FamilyId::Geometric, &[0.5]).unwrap();
        assert!(p > 0.0);
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(
            g_test_p_value(&[], FamilyId::Bernoulli, &[0.5]),
            Err(GTestError::Empty)
        );
    }
}
