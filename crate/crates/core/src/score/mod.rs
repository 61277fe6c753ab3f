//! Scoring program candidates against a distribution of interest: summary
//! statistics on sample batches, noisy-ABC moment kernels, and G-test
//! likelihoods for parametrised families.

mod family;
mod gtest;
mod moments;
mod special;

pub use family::{analytic_moments, family_bins, BinSpec, FamilyError, FamilyId};
pub use gtest::{g_statistic, g_test_p_value, GTestError};
pub use moments::{sample_moments, MomentError, MomentVector, DEGENERATE_M2};
pub use special::{chi_square_sf, erf, gamma_p, gamma_q, ln_gamma, normal_log_pdf, std_normal_cdf};

use crate::expr::{draw_samples, Program, TypeTag, Value, DEFAULT_RECURSION_CAP};
use crate::rng::{derive_seed_f64s, rng_from_seed};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Floor applied to p-values before taking logs, so that hopeless
/// candidates stay finite-ordered instead of tying at -inf.
pub const P_VALUE_FLOOR: f64 = 1e-300;

/// Moment target with a per-statistic noise level.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MomentTarget {
    pub moments: MomentVector,
    /// Noise sd per statistic (mean, std, skew, kurt).
    pub noise: [f64; 4],
    /// Fixed argument values the program is invoked with.
    #[serde(default)]
    pub args: Vec<f64>,
}

/// The distribution of interest a candidate is scored against.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TargetSpec {
    Moment(MomentTarget),
    Family {
        family: FamilyId,
        /// Training parameter vectors, one per lambda.
        params: Vec<Vec<f64>>,
        /// Per-lambda argument vectors handed to the program.
        args: Vec<Vec<f64>>,
        /// Noise sd for the moment kernel on continuous-support families.
        noise: f64,
    },
    Empirical {
        data: Vec<f64>,
        noise: [f64; 4],
        #[serde(default)]
        args: Vec<f64>,
    },
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum TargetError {
    #[error("family target needs at least one lambda")]
    EmptyLambdas,
    #[error("family target params/args length mismatch")]
    LambdaMismatch,
    #[error("noise levels must be positive")]
    BadNoise,
    #[error("empirical target needs at least 2 data points")]
    TooLittleData,
    #[error(transparent)]
    Family(#[from] FamilyError),
}

impl TargetSpec {
    pub fn validate(&self) -> Result<(), TargetError> {
        match self {
            TargetSpec::Moment(t) => {
                if t.noise.iter().any(|s| *s <= 0.0) {
                    return Err(TargetError::BadNoise);
                }
            }
            TargetSpec::Family {
                params,
                args,
                noise,
                family,
            } => {
                if params.is_empty() {
                    return Err(TargetError::EmptyLambdas);
                }
                if params.len() != args.len() {
                    return Err(TargetError::LambdaMismatch);
                }
                if *noise <= 0.0 {
                    return Err(TargetError::BadNoise);
                }
                for p in params {
                    analytic_moments(*family, p)?;
                }
            }
            TargetSpec::Empirical { data, noise, .. } => {
                if data.len() < 2 {
                    return Err(TargetError::TooLittleData);
                }
                if noise.iter().any(|s| *s <= 0.0) {
                    return Err(TargetError::BadNoise);
                }
            }
        }
        Ok(())
    }

    /// The program interface this target scores: parameter types and
    /// output type. Countable families are sampled as ints.
    pub fn signature(&self) -> (Vec<TypeTag>, TypeTag) {
        match self {
            TargetSpec::Moment(t) => (vec![TypeTag::Real; t.args.len()], TypeTag::Real),
            TargetSpec::Empirical { args, .. } => (vec![TypeTag::Real; args.len()], TypeTag::Real),
            TargetSpec::Family { family, args, .. } => {
                let arity = args.first().map(|a| a.len()).unwrap_or(0);
                let ret = if family.countable_support() {
                    TypeTag::Int
                } else {
                    TypeTag::Real
                };
                (vec![TypeTag::Real; arity], ret)
            }
        }
    }
}

/// Knobs for one candidate evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreConfig {
    /// Samples drawn per evaluation (per lambda for family targets).
    pub n_samples: usize,
    /// Evaluator recursion cap.
    pub recursion_cap: u32,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            n_samples: 100,
            recursion_cap: DEFAULT_RECURSION_CAP,
        }
    }
}

/// Sum over the four statistics of the Normal log-density of the target
/// value under mean = observed statistic and sd = the noise level.
pub fn moment_log_kernel(observed: &MomentVector, target: &MomentVector, noise: &[f64; 4]) -> f64 {
    observed
        .as_array()
        .iter()
        .zip(target.as_array())
        .zip(noise)
        .map(|((obs, tgt), sd)| normal_log_pdf(tgt, *obs, *sd))
        .sum()
}

fn real_args(args: &[f64]) -> Vec<Value> {
    args.iter().map(|v| Value::RealV(*v)).collect()
}

/// Scores one sample batch against a moment target; -inf on any non-finite
/// sample or when more than half the draws hit the recursion cap.
fn score_batch_against_moments(
    program: &Program,
    args: &[f64],
    target: &MomentVector,
    noise: &[f64; 4],
    cfg: &ScoreConfig,
    seed: u64,
) -> f64 {
    let mut rng = rng_from_seed(seed);
    let batch = match draw_samples(
        program,
        cfg.n_samples,
        &real_args(args),
        cfg.recursion_cap,
        &mut rng,
    ) {
        Ok(b) => b,
        Err(_) => return f64::NEG_INFINITY,
    };
    if batch.nonfinite > 0 || 2 * batch.capped_draws > cfg.n_samples {
        return f64::NEG_INFINITY;
    }
    match sample_moments(&batch.values) {
        Ok(m) => moment_log_kernel(&m, target, noise),
        Err(_) => f64::NEG_INFINITY,
    }
}

fn score_family_lambda(
    program: &Program,
    family: FamilyId,
    params: &[f64],
    args: &[f64],
    noise: f64,
    cfg: &ScoreConfig,
    seed: u64,
) -> f64 {
    if family.countable_support() {
        let mut rng = rng_from_seed(seed);
        let batch = match draw_samples(
            program,
            cfg.n_samples,
            &real_args(args),
            cfg.recursion_cap,
            &mut rng,
        ) {
            Ok(b) => b,
            Err(_) => return f64::NEG_INFINITY,
        };
        if batch.nonfinite > 0 || 2 * batch.capped_draws > cfg.n_samples {
            return f64::NEG_INFINITY;
        }
        match g_test_p_value(&batch.values, family, params) {
            Ok(p) => p.max(P_VALUE_FLOOR).ln(),
            Err(_) => f64::NEG_INFINITY,
        }
    } else {
        match analytic_moments(family, params) {
            Ok(m) => score_batch_against_moments(
                program,
                args,
                &m,
                &[noise, noise, noise, noise],
                cfg,
                seed,
            ),
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

/// Total log-score of a candidate against a target (the kernel factor of
/// the ABC joint; the grammar prior is applied by the search engine).
///
/// Per-lambda streams are derived from the master seed and the lambda's
/// argument values, making family scores reproducible, order-independent,
/// and safe to evaluate in parallel.
pub fn score_program(program: &Program, target: &TargetSpec, cfg: &ScoreConfig, seed: u64) -> f64 {
    match target {
        TargetSpec::Moment(t) => {
            score_batch_against_moments(program, &t.args, &t.moments, &t.noise, cfg, seed)
        }
        TargetSpec::Empirical { data, noise, args } => match sample_moments(data) {
            Ok(m) => score_batch_against_moments(program, args, &m, noise, cfg, seed),
            Err(_) => f64::NEG_INFINITY,
        },
        TargetSpec::Family {
            family,
            params,
            args,
            noise,
        } => {
            let scores: Vec<f64> = params
                .par_iter()
                .zip(args.par_iter())
                .map(|(p, a)| {
                    let lambda_seed = derive_seed_f64s(seed, a);
                    score_family_lambda(program, *family, p, a, *noise, cfg, lambda_seed)
                })
                .collect();
            // Fixed lambda-index order for a scheduling-independent sum.
            scores.iter().sum()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_program, Expr, Program};

    fn const_zero() -> Program {
        Program {
            params: vec![],
            ret: TypeTag::Real,
            body: Expr::real(0.0),
        }
    }

    fn std_normal_target(noise: f64) -> TargetSpec {
        TargetSpec::Moment(MomentTarget {
            moments: MomentVector {
                mean: 0.0,
                std: 1.0,
                skew: 0.0,
                kurt: 0.0,
            },
            noise: [noise; 4],
            args: vec![],
        })
    }

    #[test]
    fn zero_residual_kernel() {
        let m = MomentVector {
            mean: 0.5,
            std: 2.0,
            skew: 0.1,
            kurt: -0.3,
        };
        let sd = 0.25;
        let got = moment_log_kernel(&m, &m, &[sd; 4]);
        let want = 4.0 * (1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt())).ln();
        assert!((got - want).abs() < 1e-12);
    }

    /// Doubling the noise at zero residual costs exactly 4 ln 2.
    #[test]
    fn noise_doubling_normalizer() {
        let m = MomentVector {
            mean: 1.0,
            std: 1.0,
            skew: 0.0,
            kurt: 0.0,
        };
        let a = moment_log_kernel(&m, &m, &[0.1; 4]);
        let b = moment_log_kernel(&m, &m, &[0.2; 4]);
        assert!((a - b - 4.0 * 2f64.ln()).abs() < 1e-12);
    }

    /// Constant-0 program against Normal(0,1) at noise 0.001: the std
    /// residual dominates, roughly -5e5. Oracle: Gaussian log-density.
    #[test]
    fn constant_zero_against_standard_normal() {
        let score = score_program(&const_zero(), &std_normal_target(0.001), &ScoreConfig::default(), 7);
        let normalizer = 4.0 * (1.0 / (0.001 * (2.0 * std::f64::consts::PI).sqrt())).ln();
        let want = normalizer - 1.0 / (2.0 * 1e-6);
        assert!((score - want).abs() < 1e-6, "{score} vs {want}");
        assert!((score - (-499976.0)).abs() < 1.0);
    }

    #[test]
    fn nan_program_scores_neg_inf() {
        // safe primitives never make NaN, so build one via 0 * exp(exp(700)).
        let prog = parse_program("(fn [] (* 0.0 (exp (exp 700.0))))").unwrap();
        let score = score_program(&prog, &std_normal_target(0.1), &ScoreConfig::default(), 3);
        assert_eq!(score, f64::NEG_INFINITY);
    }

    #[test]
    fn family_score_is_lambda_order_invariant() {
        let prog = parse_program("(fn [p] :int (if (< (safe-uc 0.0 1.0) p) 1.0 0.0))").unwrap();
        let fwd = TargetSpec::Family {
            family: FamilyId::Bernoulli,
            params: vec![vec![0.2], vec![0.5], vec![0.8]],
            args: vec![vec![0.2], vec![0.5], vec![0.8]],
            noise: 0.1,
        };
        let rev = TargetSpec::Family {
            family: FamilyId::Bernoulli,
            params: vec![vec![0.8], vec![0.5], vec![0.2]],
            args: vec![vec![0.8], vec![0.5], vec![0.2]],
            noise: 0.1,
        };
        let cfg = ScoreConfig::default();
        let a = score_program(&prog, &fwd, &cfg, 42);
        let b = score_program(&prog, &rev, &cfg, 42);
        assert_eq!(a, b);
        assert!(a.is_finite());
    }

    #[test]
    fn true_bernoulli_scores_well() {
        let prog = parse_program("(fn [p] :int (if (< (safe-uc 0.0 1.0) p) 1.0 0.0))").unwrap();
        let target = TargetSpec::Family {
            family: FamilyId::Bernoulli,
            params: vec![vec![0.3], vec![0.7]],
            args: vec![vec![0.3], vec![0.7]],
            noise: 0.1,
        };
        let score = score_program(&prog, &target, &ScoreConfig::default(), 11);
        // Under the null, E[ln p] is about -1 per lambda.
        assert!(score > -10.0 && score <= 0.0, "{score}");
    }

    #[test]
    fn target_validation() {
        let bad = TargetSpec::Family {
            family: FamilyId::Bernoulli,
            params: vec![],
            args: vec![],
            noise: 0.1,
        };
        assert_eq!(bad.validate(), Err(TargetError::EmptyLambdas));
        let ok = std_normal_target(0.001);
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn signatures() {
        let t = TargetSpec::Family {
            family: FamilyId::Bernoulli,
            params: vec![vec![0.5]],
            args: vec![vec![0.5]],
            noise: 0.1,
        };
        assert_eq!(t.signature(), (vec![TypeTag::Real], TypeTag::Int));
        assert_eq!(std_normal_target(0.1).signature(), (vec![], TypeTag::Real));
    }
}
