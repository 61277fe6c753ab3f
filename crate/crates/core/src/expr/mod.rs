//! The typed sampler DSL: AST, surface syntax, and evaluator.

mod ast;
mod eval;
mod text;

pub use ast::{typecheck, Expr, FnSig, Literal, Prim, Program, TypeError, TypeTag, REAL_PRIMS};
pub use eval::{
    draw_samples, env_bind, env_lookup, eval, round_int_boundary, run_program, DepthBudget,
    DrawBatch, EnvRef, EvalFault, RunOutcome, Value, DEFAULT_RECURSION_CAP,
};
pub use text::{parse_program, print_program, ParseError};
