//! Learning one-dimensional sampler programs by ABC-scored search over a
//! typed grammar prior, plus sequential Monte Carlo with a trainable
//! data-driven proposal on a linear Gaussian model.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`expr`]: the sampler DSL (AST, `.psmp` surface syntax, evaluator with
//!   safe primitives and a recursion cap).
//! - [`grammar`]: type-directed stochastic generation from production
//!   rules, exact log-prior replay, and corpus-estimated rule weights.
//! - [`score`]: summary statistics, noisy-ABC kernels, and G-test scoring
//!   of program candidates against targets.
//! - [`synth`]: pseudo-marginal Metropolis-Hastings over program text, a
//!   strongly-typed GP baseline, and a rejection-ABC oracle for toy grammars.
//! - [`smc`]: particle filtering on the linear Gaussian model with a prior
//!   or mixture proposal whose parameters come from a small feedforward
//!   network trained on smoothing draws.
//! - [`corpus`]: the bundled sampler corpus and analytic target families.

pub mod corpus;
pub mod expr;
pub mod grammar;
pub mod rng;
pub mod score;
pub mod selftest;
pub mod smc;
pub mod synth;
