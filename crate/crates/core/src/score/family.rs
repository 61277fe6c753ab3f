//! Analytic target families: closed-form moments and G-test binning for
//! the countable ones.

use super::moments::MomentVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyId {
    Bernoulli,
    /// Support {1, 2, ...}: the draw counts the first success.
    Geometric,
    Poisson,
    Normal,
    /// Gamma(a, 1).
    Gamma,
    Beta,
}

impl FamilyId {
    pub fn name(self) -> &'static str {
        match self {
            FamilyId::Bernoulli => "bernoulli",
            FamilyId::Geometric => "geometric",
            FamilyId::Poisson => "poisson",
            FamilyId::Normal => "normal",
            FamilyId::Gamma => "gamma",
            FamilyId::Beta => "beta",
        }
    }

    pub fn from_name(name: &str) -> Option<FamilyId> {
        Some(match name {
            "bernoulli" => FamilyId::Bernoulli,
            "geometric" => FamilyId::Geometric,
            "poisson" => FamilyId::Poisson,
            "normal" => FamilyId::Normal,
            "gamma" => FamilyId::Gamma,
            "beta" => FamilyId::Beta,
            _ => None,
        })
    }

    pub fn countable_support(self) -> bool {
        matches!(
            self,
            FamilyId::Bernoulli | FamilyId::Geometric | FamilyId::Poisson
        )
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum FamilyError {
    #[error("family `{family}` expects {expected} parameter(s), got {got}")]
    BadArity {
        family: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("parameter out of domain for `{0}`")]
    Domain(&'static str),
}

fn expect_params(family: FamilyId, params: &[f64], n: usize) -> Result<(), FamilyError> {
    if params.len() != n {
        return Err(FamilyError::BadArity {
            family: family.name(),
            expected: n,
            got: params.len(),
        });
    }
    Ok(())
}

/// Exact mean/std/skew/excess-kurtosis from closed forms.
pub fn analytic_moments(family: FamilyId, params: &[f64]) -> Result<MomentVector, FamilyError> {
    match family {
        FamilyId::Bernoulli => {
            expect_params(family, params, 1)?;
            let p = params[0];
            if !(0.0..=1.0).contains(&p) {
                return Err(FamilyError::Domain("bernoulli"));
            }
            let q = 1.0 - p;
            let var = p * q;
            let (skew, kurt) = if var == 0.0 {
                (0.0, 0.0)
            } else {
                ((q - p) / var.sqrt(), (1.0 - 6.0 * var) / var)
            };
            Ok(MomentVector {
                mean: p,
                std: var.sqrt(),
                skew,
                kurt,
            })
        }
        FamilyId::Geometric => {
            expect_params(family, params, 1)?;
            let p = params[0];
            if !(p > 0.0 && p <= 1.0) {
                return Err(FamilyError::Domain("geometric"));
            }
            let q = 1.0 - p;
            Ok(MomentVector {
                mean: 1.0 / p,
                std: (q / (p * p)).sqrt(),
                skew: if q == 0.0 { 0.0 } else { (2.0 - p) / q.sqrt() },
                kurt: if q == 0.0 { 0.0 } else { 6.0 + p * p / q },
            })
        }
        FamilyId::Poisson => {
            expect_params(family, params, 1)?;
            let l = params[0];
            if l <= 0.0 {
                return Err(FamilyError::Domain("poisson"));
            }
            Ok(MomentVector {
                mean: l,
                std: l.sqrt(),
                skew: 1.0 / l.sqrt(),
                kurt: 1.0 / l,
            })
        }
        FamilyId::Normal => {
            expect_params(family, params, 2)?;
            let (mu, sd) = (params[0], params[1]);
            if sd <= 0.0 {
                return Err(FamilyError::Domain("normal"));
            }
            Ok(MomentVector {
                mean: mu,
                std: sd,
                skew: 0.0,
                kurt: 0.0,
            })
        }
        FamilyId::Gamma => {
            expect_params(family, params, 1)?;
            let a = params[0];
            if a <= 0.0 {
                return Err(FamilyError::Domain("gamma"));
            }
            Ok(MomentVector {
                mean: a,
                std: a.sqrt(),
                skew: 2.0 / a.sqrt(),
                kurt: 6.0 / a,
            })
        }
        FamilyId::Beta => {
            expect_params(family, params, 2)?;
            let (a, b) = (params[0], params[1]);
            if a <= 0.0 || b <= 0.0 {
                return Err(FamilyError::Domain("beta"));
            }
            let s = a + b;
            let var = a * b / (s * s * (s + 1.0));
            let skew = 2.0 * (b - a) * (s + 1.0).sqrt() / ((s + 2.0) * (a * b).sqrt());
            let kurt = 6.0 * ((a - b) * (a - b) * (s + 1.0) - a * b * (s + 2.0))
                / (a * b * (s + 2.0) * (s + 3.0));
            Ok(MomentVector {
                mean: a / s,
                std: var.sqrt(),
                skew,
                kurt,
            })
        }
    }
}

/// Bins for the G-test on a countable-support family: per-bin null
/// probabilities, the integer value of the first bin, and whether the last
/// bin is an open tail. Individual-value bins run up to the 0.999 quantile.
#[derive(Debug, Clone)]
pub struct BinSpec {
    pub first_value: i64,
    pub probs: Vec<f64>,
    pub open_tail: bool,
}

pub fn family_bins(family: FamilyId, params: &[f64]) -> Result<BinSpec, FamilyError> {
    const QUANTILE: f64 = 0.999;
    match family {
        FamilyId::Bernoulli => {
            expect_params(family, params, 1)?;
            let p = params[0];
            if !(0.0 < p && p < 1.0) {
                return Err(FamilyError::Domain("bernoulli"));
            }
            Ok(BinSpec {
                first_value: 0,
                probs: vec![1.0 - p, p],
                open_tail: false,
            })
        }
        FamilyId::Geometric => {
            expect_params(family, params, 1)?;
            let p = params[0];
            if !(p > 0.0 && p < 1.0) {
                return Err(FamilyError::Domain("geometric"));
            }
            let mut probs = Vec::new();
            let mut cdf = 0.0;
            let mut k = 1u32;
            while cdf < QUANTILE && k < 10_000 {
                let pk = p * (1.0 - p).powi(k as i32 - 1);
                probs.push(pk);
                cdf += pk;
                k += 1;
            }
            probs.push(1.0 - cdf);
            Ok(BinSpec {
                first_value: 1,
                probs,
                open_tail: true,
            })
        }
        FamilyId::Poisson => {
            expect_params(family, params, 1)?;
            let l = params[0];
            if l <= 0.0 {
                return Err(FamilyError::Domain("poisson"));
            }
            let mut probs = Vec::new();
            let mut pk = (-l).exp();
            let mut cdf = 0.0;
            let mut k = 0u32;
            while cdf < QUANTILE && k < 10_000 {
                probs.push(pk);
                cdf += pk;
                k += 1;
                pk *= l / k as f64;
            }
            probs.push(1.0 - cdf);
            Ok(BinSpec {
                first_value: 0,
                probs,
                open_tail: true,
            })
        }
        _ => Err(FamilyError::Domain("continuous support has no bins")),
    }
}
