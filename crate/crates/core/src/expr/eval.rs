//! Evaluator for the sampler DSL.
//!
//! Evaluation is deterministic given the RNG stream. Safe primitives keep
//! every finite input finite; overflow from `exp` chains is representable
//! and flows through to the scorer, which treats it as a rejection, never
//! as an evaluator fault.

use super::ast::{Expr, FnSig, Literal, Prim, Program, TypeTag};
use rand::Rng;
use std::rc::Rc;

/// Runtime values.
#[derive(Debug, Clone)]
pub enum Value {
    RealV(f64),
    BoolV(bool),
    Closure(Rc<ClosureData>),
}

#[derive(Debug)]
pub struct ClosureData {
    pub params: Vec<(String, TypeTag)>,
    pub ret: TypeTag,
    pub body: Expr,
    pub env: EnvRef,
}

impl Value {
    fn as_real(&self) -> Result<f64, EvalFault> {
        match self {
            Value::RealV(v) => Ok(*v),
            _ => Err(EvalFault::NotAReal),
        }
    }

    fn as_bool(&self) -> Result<bool, EvalFault> {
        match self {
            Value::BoolV(b) => Ok(*b),
            _ => Err(EvalFault::NotABool),
        }
    }
}

/// Lexically scoped environment, shared structurally between closures.
pub type EnvRef = Option<Rc<EnvNode>>;

#[derive(Debug)]
pub struct EnvNode {
    pub name: String,
    pub ty: TypeTag,
    pub value: Value,
    pub parent: EnvRef,
}

/// Innermost-first lookup; shadowing is permitted.
pub fn env_lookup<'a>(env: &'a EnvRef, name: &str) -> Option<&'a EnvNode> {
    let mut cur = env;
    while let Some(node) = cur {
        if node.name == name {
            return Some(node);
        }
        cur = &node.parent;
    }
    None
}

pub fn env_bind(env: &EnvRef, name: &str, ty: TypeTag, value: Value) -> EnvRef {
    // Rounding at the variable-binding boundary realizes the `int` type.
    let value = match (ty, value) {
        (TypeTag::Int, Value::RealV(v)) => Value::RealV(round_int_boundary(v)),
        (_, v) => v,
    };
    Some(Rc::new(EnvNode {
        name: name.to_string(),
        ty,
        value,
        parent: env.clone(),
    }))
}

/// Round half-to-even; non-finite values pass through for the scorer to see.
pub fn round_int_boundary(v: f64) -> f64 {
    if v.is_finite() {
        v.round_ties_even()
    } else {
        v
    }
}

/// Evaluation faults signal grammar or typing bugs; a scored program never
/// produces one.
#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum EvalFault {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("unknown procedure `{0}`")]
    UnknownProcedure(String),
    #[error("arity mismatch calling `{0}`")]
    ArityMismatch(String),
    #[error("expected a real value")]
    NotAReal,
    #[error("expected a bool value")]
    NotABool,
    #[error("expected a procedure")]
    NotAProcedure,
    #[error("recur outside of any procedure")]
    RecurOutsideProcedure,
}

/// Self-recursion budget. The top-level invocation of a procedure runs at
/// depth 0; a `recur` whose resulting depth would reach the cap returns the
/// zero value of the procedure's type instead of re-entering the body, and
/// the short-circuit is counted in `cap_hits`.
#[derive(Debug, Clone)]
pub struct DepthBudget {
    pub cap: u32,
    pub cap_hits: u32,
}

impl DepthBudget {
    pub fn new(cap: u32) -> DepthBudget {
        DepthBudget { cap, cap_hits: 0 }
    }
}

pub const DEFAULT_RECURSION_CAP: u32 = 10;

/// The procedure activation a `recur` re-enters.
struct Activation<'a> {
    params: &'a [(String, TypeTag)],
    ret: TypeTag,
    body: &'a Expr,
    env: EnvRef,
    depth: u32,
}

fn zero_value(ty: TypeTag) -> Value {
    match ty.structural() {
        TypeTag::Bool => Value::BoolV(false),
        _ => Value::RealV(0.0),
    }
}

fn apply_prim<R: Rng>(p: Prim, args: &[Value], rng: &mut R) -> Result<Value, EvalFault> {
    let a = args[0].as_real()?;
    match p {
        Prim::Cos => Ok(Value::RealV(a.cos())),
        Prim::Exp => Ok(Value::RealV(a.exp())),
        Prim::Inc => Ok(Value::RealV(a + 1.0)),
        Prim::Dec => Ok(Value::RealV(a - 1.0)),
        Prim::SafeSqrt => Ok(Value::RealV(if a < 0.0 { 0.0 } else { a.sqrt() })),
        Prim::SafeLog => Ok(Value::RealV(if a <= 0.0 { 0.0 } else { a.ln() })),
        _ => {
            let b = args[1].as_real()?;
            match p {
                Prim::Add => Ok(Value::RealV(a + b)),
                Prim::Sub => Ok(Value::RealV(a - b)),
                Prim::Mul => Ok(Value::RealV(a * b)),
                Prim::SafeDiv => Ok(Value::RealV(if b == 0.0 { 0.0 } else { a / b })),
                Prim::SafeUc => {
                    if a == b {
                        Ok(Value::RealV(a))
                    } else {
                        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                        let u: f64 = rng.gen();
                        Ok(Value::RealV(lo + u * (hi - lo)))
                    }
                }
                Prim::Lt => Ok(Value::BoolV(a < b)),
                _ => unreachable!("unary handled above"),
            }
        }
    }
}

fn eval_in<R: Rng>(
    expr: &Expr,
    env: &EnvRef,
    act: &Activation<'_>,
    budget: &mut DepthBudget,
    rng: &mut R,
) -> Result<Value, EvalFault> {
    match expr {
        Expr::Const(Literal::Real(v)) => Ok(Value::RealV(*v)),
        Expr::Const(Literal::Bool(b)) => Ok(Value::BoolV(*b)),
        Expr::Var(name) => match env_lookup(env, name) {
            Some(node) => Ok(node.value.clone()),
            None => Err(EvalFault::UnboundVariable(name.clone())),
        },
        Expr::Prim(p, args) => {
            if args.len() != p.arity() {
                return Err(EvalFault::ArityMismatch(p.name().to_string()));
            }
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval_in(a, env, act, budget, rng)?);
            }
            apply_prim(*p, &vals, rng)
        }
        Expr::Call(name, args) => {
            let closure = match env_lookup(env, name) {
                Some(node) => match &node.value {
                    Value::Closure(c) => Rc::clone(c),
                    _ => return Err(EvalFault::NotAProcedure),
                },
                None => return Err(EvalFault::UnknownProcedure(name.clone())),
            };
            if args.len() != closure.params.len() {
                return Err(EvalFault::ArityMismatch(name.clone()));
            }
            let mut call_env = closure.env.clone();
            for (arg, (pname, pty)) in args.iter().zip(&closure.params) {
                let v = eval_in(arg, env, act, budget, rng)?;
                call_env = env_bind(&call_env, pname, *pty, v);
            }
            // A fresh activation chain: by-name calls restart the depth count.
            let inner = Activation {
                params: &closure.params,
                ret: closure.ret,
                body: &closure.body,
                env: closure.env.clone(),
                depth: 0,
            };
            eval_in(&closure.body, &call_env, &inner, budget, rng)
        }
        Expr::Recur(args) => {
            if args.len() != act.params.len() {
                return Err(EvalFault::ArityMismatch("recur".to_string()));
            }
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval_in(a, env, act, budget, rng)?);
            }
            if act.depth + 1 >= budget.cap {
                budget.cap_hits += 1;
                return Ok(zero_value(act.ret));
            }
            let mut call_env = act.env.clone();
            for (v, (pname, pty)) in vals.into_iter().zip(act.params) {
                call_env = env_bind(&call_env, pname, *pty, v);
            }
            let inner = Activation {
                params: act.params,
                ret: act.ret,
                body: act.body,
                env: act.env.clone(),
                depth: act.depth + 1,
            };
            eval_in(act.body, &call_env, &inner, budget, rng)
        }
        Expr::LetVal {
            name,
            ty,
            bound,
            body,
        } => {
            let v = eval_in(bound, env, act, budget, rng)?;
            let env2 = env_bind(env, name, *ty, v);
            eval_in(body, &env2, act, budget, rng)
        }
        Expr::LetFn {
            name,
            params,
            ret,
            fn_body,
            body,
        } => {
            let closure = Value::Closure(Rc::new(ClosureData {
                params: params.clone(),
                ret: *ret,
                body: (**fn_body).clone(),
                env: env.clone(),
            }));
            let env2 = env_bind(env, name, *ret, closure);
            eval_in(body, &env2, act, budget, rng)
        }
        Expr::If { cond, then, els } => {
            if eval_in(cond, env, act, budget, rng)?.as_bool()? {
                eval_in(then, env, act, budget, rng)
            } else {
                eval_in(els, env, act, budget, rng)
            }
        }
    }
}

/// Evaluates an expression under an environment, treating `sig` as the
/// enclosing procedure for any `recur` inside.
pub fn eval<R: Rng>(
    expr: &Expr,
    env: &EnvRef,
    sig: &FnSig,
    params: &[(String, TypeTag)],
    budget: &mut DepthBudget,
    rng: &mut R,
) -> Result<Value, EvalFault> {
    let act = Activation {
        params,
        ret: sig.ret,
        body: expr,
        env: env.clone(),
        depth: 0,
    };
    eval_in(expr, env, &act, budget, rng)
}

/// Outcome of one program invocation.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub value: Value,
    /// Number of recursion-cap short-circuits during the run.
    pub cap_hits: u32,
}

/// Runs a program on argument values with a fresh depth budget.
pub fn run_program<R: Rng>(
    program: &Program,
    args: &[Value],
    cap: u32,
    rng: &mut R,
) -> Result<RunOutcome, EvalFault> {
    if args.len() != program.params.len() {
        return Err(EvalFault::ArityMismatch("fn".to_string()));
    }
    let mut env: EnvRef = None;
    for (v, (name, ty)) in args.iter().zip(&program.params) {
        env = env_bind(&env, name, *ty, v.clone());
    }
    let mut budget = DepthBudget::new(cap);
    let act = Activation {
        params: &program.params,
        ret: program.ret,
        body: &program.body,
        env: env.clone(),
        depth: 0,
    };
    let mut value = eval_in(&program.body, &env, &act, &mut budget, rng)?;
    if program.ret == TypeTag::Int {
        if let Value::RealV(v) = value {
            value = Value::RealV(round_int_boundary(v));
        }
    }
    Ok(RunOutcome {
        value,
        cap_hits: budget.cap_hits,
    })
}

/// A batch of real-valued draws, with non-finite values preserved and
/// flagged and recursion-cap hits counted per draw.
#[derive(Debug, Clone)]
pub struct DrawBatch {
    pub values: Vec<f64>,
    pub nonfinite: usize,
    pub capped_draws: usize,
}

/// Draws `n` independent samples from a real- or int-valued program.
pub fn draw_samples<R: Rng>(
    program: &Program,
    n: usize,
    args: &[Value],
    cap: u32,
    rng: &mut R,
) -> Result<DrawBatch, EvalFault> {
    let mut values = Vec::with_capacity(n);
    let mut nonfinite = 0;
    let mut capped = 0;
    for _ in 0..n {
        let out = run_program(program, args, cap, rng)?;
        let v = out.value.as_real()?;
        if !v.is_finite() {
            nonfinite += 1;
        }
        if out.cap_hits > 0 {
            capped += 1;
        }
        values.push(v);
    }
    Ok(DrawBatch {
        values,
        nonfinite,
        capped_draws: capped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn const_prog(v: f64) -> Program {
        Program {
            params: vec![],
            ret: TypeTag::Real,
            body: Expr::real(v),
        }
    }

    #[test]
    fn constant_program() {
        let mut r = rng(0);
        let out = run_program(&const_prog(0.0), &[], 10, &mut r).unwrap();
        assert_eq!(out.value.as_real().unwrap(), 0.0);
        assert_eq!(out.cap_hits, 0);
    }

    #[test]
    fn identity_program() {
        let prog = Program {
            params: vec![("x".into(), TypeTag::Real)],
            ret: TypeTag::Real,
            body: Expr::Var("x".into()),
        };
        let mut r = rng(1);
        let out = run_program(&prog, &[Value::RealV(0.3)], 10, &mut r).unwrap();
        assert_eq!(out.value.as_real().unwrap(), 0.3);
    }

    /// `(fn [] (+ 1.0 (recur)))` with cap 10: ten increments, the
    /// eleventh activation short-circuits to 0.0.
    #[test]
    fn recursion_cap_counts_ten() {
        let prog = Program {
            params: vec![],
            ret: TypeTag::Real,
            body: Expr::Prim(Prim::Add, vec![Expr::real(1.0), Expr::Recur(vec![])]),
        };
        let mut r = rng(2);
        let out = run_program(&prog, &[], 10, &mut r).unwrap();
        assert_eq!(out.value.as_real().unwrap(), 10.0);
        assert!(out.cap_hits > 0);
    }

    #[test]
    fn safe_primitives() {
        let mut r = rng(3);
        let cases: Vec<(Prim, Vec<f64>, f64)> = vec![
            (Prim::SafeDiv, vec![1.0, 0.0], 0.0),
            (Prim::SafeDiv, vec![1.0, 2.0], 0.5),
            (Prim::SafeLog, vec![0.0, f64::NAN], 0.0),
            (Prim::SafeLog, vec![-3.0, f64::NAN], 0.0),
            (Prim::SafeSqrt, vec![-1.0, f64::NAN], 0.0),
            (Prim::SafeSqrt, vec![4.0, f64::NAN], 2.0),
            (Prim::Inc, vec![1.5, f64::NAN], 2.5),
            (Prim::Dec, vec![1.5, f64::NAN], 0.5),
        ];
        for (p, args, want) in cases {
            let vals: Vec<Value> = args.iter().take(p.arity()).map(|v| Value::RealV(*v)).collect();
            let got = apply_prim(p, &vals, &mut r).unwrap().as_real().unwrap();
            assert_eq!(got, want, "{:?}", p);
        }
    }

    #[test]
    fn safe_uc_swaps_and_degenerates() {
        let mut r = rng(4);
        for _ in 0..100 {
            let v = apply_prim(Prim::SafeUc, &[Value::RealV(3.0), Value::RealV(-1.0)], &mut r)
                .unwrap()
                .as_real()
                .unwrap();
            assert!((-1.0..3.0).contains(&v));
        }
        let v = apply_prim(Prim::SafeUc, &[Value::RealV(2.0), Value::RealV(2.0)], &mut r)
            .unwrap()
            .as_real()
            .unwrap();
        assert_eq!(v, 2.0);
    }

    #[test]
    fn int_output_boundary_rounds_half_even() {
        for (raw, want) in [(0.5, 0.0), (1.5, 2.0), (2.5, 2.0), (1.2, 1.0), (-0.5, -0.0)] {
            let prog = Program {
                params: vec![],
                ret: TypeTag::Int,
                body: Expr::real(raw),
            };
            let mut r = rng(5);
            let out = run_program(&prog, &[], 10, &mut r).unwrap();
            assert_eq!(out.value.as_real().unwrap(), want, "raw {raw}");
        }
    }

    #[test]
    fn int_binding_boundary_rounds() {
        let prog = Program {
            params: vec![("n".into(), TypeTag::Int)],
            ret: TypeTag::Real,
            body: Expr::Var("n".into()),
        };
        let mut r = rng(6);
        let out = run_program(&prog, &[Value::RealV(1.6)], 10, &mut r).unwrap();
        assert_eq!(out.value.as_real().unwrap(), 2.0);
    }

    #[test]
    fn determinism_same_seed_same_draws() {
        let prog = Program {
            params: vec![],
            ret: TypeTag::Real,
            body: Expr::Prim(Prim::SafeUc, vec![Expr::real(0.0), Expr::real(1.0)]),
        };
        let a = draw_samples(&prog, 50, &[], 10, &mut rng(7)).unwrap();
        let b = draw_samples(&prog, 50, &[], 10, &mut rng(7)).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn draw_zero_is_empty() {
        let batch = draw_samples(&const_prog(0.0), 0, &[], 10, &mut rng(8)).unwrap();
        assert!(batch.values.is_empty());
    }

    #[test]
    fn constant_draws() {
        let batch = draw_samples(&const_prog(0.0), 5, &[], 10, &mut rng(9)).unwrap();
        assert_eq!(batch.values, vec![0.0; 5]);
    }

    #[test]
    fn nonfinite_flagged_not_faulted() {
        // exp(exp(exp(700))) overflows to +inf.
        let prog = Program {
            params: vec![],
            ret: TypeTag::Real,
            body: Expr::Prim(
                Prim::Exp,
                vec![Expr::Prim(Prim::Exp, vec![Expr::real(700.0)])],
            ),
        };
        let batch = draw_samples(&prog, 3, &[], 10, &mut rng(10)).unwrap();
        assert_eq!(batch.nonfinite, 3);
    }

    #[test]
    fn shadowing_is_innermost_first() {
        let prog = Program {
            params: vec![("x".into(), TypeTag::Real)],
            ret: TypeTag::Real,
            body: Expr::LetVal {
                name: "x".into(),
                ty: TypeTag::Real,
                bound: Box::new(Expr::real(7.0)),
                body: Box::new(Expr::Var("x".into())),
            },
        };
        let mut r = rng(11);
        let out = run_program(&prog, &[Value::RealV(1.0)], 10, &mut r).unwrap();
        assert_eq!(out.value.as_real().unwrap(), 7.0);
    }
}
