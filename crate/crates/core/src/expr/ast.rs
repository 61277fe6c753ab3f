//! AST for the sampler DSL.
//!
//! Programs are top-level lambdas over a small typed expression language.
//! `int` is a derivative of `real`: structurally the two are interchangeable,
//! with rounding applied where a value crosses an `int` binding or the
//! program's output boundary.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Types of the DSL. `Int` behaves as `Real` everywhere except at binding
/// and output boundaries, where values are rounded half-to-even.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypeTag {
    Real,
    Bool,
    Int,
}

impl TypeTag {
    /// Structural type used for grammar tables and type checking: `Int`
    /// collapses to `Real`.
    pub fn structural(self) -> TypeTag {
        match self {
            TypeTag::Int => TypeTag::Real,
            t => t,
        }
    }

    /// Two types are compatible if they agree structurally.
    pub fn compatible(self, other: TypeTag) -> bool {
        self.structural() == other.structural()
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeTag::Real => write!(f, "real"),
            TypeTag::Bool => write!(f, "bool"),
            TypeTag::Int => write!(f, "int"),
        }
    }
}

/// Builtin primitives. All take and return reals except `Lt`, which
/// compares two reals to a bool. `SafeUc` is the only stochastic one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Prim {
    Add,
    Sub,
    Mul,
    SafeDiv,
    SafeUc,
    Cos,
    Exp,
    SafeSqrt,
    SafeLog,
    Inc,
    Dec,
    Lt,
}

/// Real-returning primitives, in the fixed order used by weight tables.
pub const REAL_PRIMS: [Prim; 11] = [
    Prim::Add,
    Prim::Sub,
    Prim::Mul,
    Prim::SafeDiv,
    Prim::SafeUc,
    Prim::Cos,
    Prim::Exp,
    Prim::SafeSqrt,
    Prim::SafeLog,
    Prim::Inc,
    Prim::Dec,
];

impl Prim {
    pub fn name(self) -> &'static str {
        match self {
            Prim::Add => "+",
            Prim::Sub => "-",
            Prim::Mul => "*",
            Prim::SafeDiv => "safe-div",
            Prim::SafeUc => "safe-uc",
            Prim::Cos => "cos",
            Prim::Exp => "exp",
            Prim::SafeSqrt => "safe-sqrt",
            Prim::SafeLog => "safe-log",
            Prim::Inc => "inc",
            Prim::Dec => "dec",
            Prim::Lt => "<",
        }
    }

    pub fn from_name(name: &str) -> Option<Prim> {
        Some(match name {
            "+" => Prim::Add,
            "-" => Prim::Sub,
            "*" => Prim::Mul,
            "safe-div" => Prim::SafeDiv,
            "safe-uc" => Prim::SafeUc,
            "cos" => Prim::Cos,
            "exp" => Prim::Exp,
            "safe-sqrt" => Prim::SafeSqrt,
            "safe-log" => Prim::SafeLog,
            "inc" => Prim::Inc,
            "dec" => Prim::Dec,
            "<" => Prim::Lt,
            _ => None,
        })
    }

    pub fn arity(self) -> usize {
        match self {
            Prim::Add | Prim::Sub | Prim::Mul | Prim::SafeDiv | Prim::SafeUc | Prim::Lt => 2,
            _ => 1,
        }
    }

    pub fn ret_type(self) -> TypeTag {
        match self {
            Prim::Lt => TypeTag::Bool,
            _ => TypeTag::Real,
        }
    }
}

/// Literal constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Literal {
    Real(f64),
    Bool(bool),
}

impl Literal {
    pub fn type_tag(self) -> TypeTag {
        match self {
            Literal::Real(_) => TypeTag::Real,
            Literal::Bool(_) => TypeTag::Bool,
        }
    }
}

/// Signature of a procedure, used for `recur` checking and call typing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FnSig {
    pub params: Vec<TypeTag>,
    pub ret: TypeTag,
}

/// Expression nodes. `Call` invokes a `let`-bound compound procedure by
/// name; `Recur` re-enters the innermost enclosing procedure.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Literal),
    Var(String),
    Prim(Prim, Vec<Expr>),
    Call(String, Vec<Expr>),
    LetVal {
        name: String,
        ty: TypeTag,
        bound: Box<Expr>,
        body: Box<Expr>,
    },
    LetFn {
        name: String,
        params: Vec<(String, TypeTag)>,
        ret: TypeTag,
        fn_body: Box<Expr>,
        body: Box<Expr>,
    },
    If {
        cond: Box<Expr>,
        then: Box<Expr>,
        els: Box<Expr>,
    },
    Recur(Vec<Expr>),
}

impl Expr {
    pub fn real(v: f64) -> Expr {
        Expr::Const(Literal::Real(v))
    }

    /// Children in site order; the same order is used by `typed_sites`
    /// and `splice`.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Const(_) | Expr::Var(_) => vec![],
            Expr::Prim(_, args) | Expr::Call(_, args) | Expr::Recur(args) => args.iter().collect(),
            Expr::LetVal { bound, body, .. } => vec![bound, body],
            Expr::LetFn { fn_body, body, .. } => vec![fn_body, body],
            Expr::If { cond, then, els } => vec![cond, then, els],
        }
    }

    /// Node count of the subtree.
    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
    }

    /// Height of the subtree: a leaf has height 0.
    pub fn height(&self) -> usize {
        self.children()
            .iter()
            .map(|c| c.height() + 1)
            .max()
            .unwrap_or(0)
    }
}

/// A top-level program: `(fn [args...] body)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub params: Vec<(String, TypeTag)>,
    pub ret: TypeTag,
    pub body: Expr,
}

impl Program {
    pub fn sig(&self) -> FnSig {
        FnSig {
            params: self.params.iter().map(|(_, t)| *t).collect(),
            ret: self.ret,
        }
    }
}

/// Structured fault raised by the type checker.
#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum TypeError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("unknown procedure `{0}`")]
    UnknownProcedure(String),
    #[error("arity mismatch for `{name}`: expected {expected}, got {got}")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("type mismatch: expected {expected}, got {got}")]
    Mismatch { expected: TypeTag, got: TypeTag },
    #[error("recur outside of any procedure")]
    RecurOutsideProcedure,
    #[error("if branches disagree: {0} vs {1}")]
    BranchMismatch(TypeTag, TypeTag),
}

#[derive(Clone)]
enum ScopeBinding {
    Var(TypeTag),
    Fn(FnSig),
}

/// Lexical scope used during type checking.
struct TypeScope {
    entries: Vec<(String, ScopeBinding)>,
}

impl TypeScope {
    fn lookup(&self, name: &str) -> Option<&ScopeBinding> {
        self.entries
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b)
    }
}

/// Infers the structural type of an expression, verifying every rule of
/// the signature table on the way down.
fn check_expr(
    expr: &Expr,
    scope: &mut TypeScope,
    enclosing: Option<&FnSig>,
) -> Result<TypeTag, TypeError> {
    match expr {
        Expr::Const(lit) => Ok(lit.type_tag()),
        Expr::Var(name) => match scope.lookup(name) {
            Some(ScopeBinding::Var(t)) => Ok(t.structural()),
            _ => Err(TypeError::UnboundVariable(name.clone())),
        },
        Expr::Prim(p, args) => {
            if args.len() != p.arity() {
                return Err(TypeError::ArityMismatch {
                    name: p.name().to_string(),
                    expected: p.arity(),
                    got: args.len(),
                });
            }
            for arg in args {
                let t = check_expr(arg, scope, enclosing)?;
                if !t.compatible(TypeTag::Real) {
                    return Err(TypeError::Mismatch {
                        expected: TypeTag::Real,
                        got: t,
                    });
                }
            }
            Ok(p.ret_type())
        }
        Expr::Call(name, args) => {
            let sig = match scope.lookup(name) {
                Some(ScopeBinding::Fn(sig)) => sig.clone(),
                _ => return Err(TypeError::UnknownProcedure(name.clone())),
            };
            check_call_args(name, &sig, args, scope, enclosing)?;
            Ok(sig.ret.structural())
        }
        Expr::Recur(args) => {
            let sig = enclosing.ok_or(TypeError::RecurOutsideProcedure)?.clone();
            check_call_args("recur", &sig, args, scope, enclosing)?;
            Ok(sig.ret.structural())
        }
        Expr::LetVal {
            name,
            ty,
            bound,
            body,
        } => {
            let bt = check_expr(bound, scope, enclosing)?;
            if !bt.compatible(*ty) {
                return Err(TypeError::Mismatch {
                    expected: *ty,
                    got: bt,
                });
            }
            scope.entries.push((name.clone(), ScopeBinding::Var(*ty)));
            let out = check_expr(body, scope, enclosing);
            scope.entries.pop();
            out
        }
        Expr::LetFn {
            name,
            params,
            ret,
            fn_body,
            body,
        } => {
            let sig = FnSig {
                params: params.iter().map(|(_, t)| *t).collect(),
                ret: *ret,
            };
            let depth = scope.entries.len();
            for (n, t) in params {
                scope.entries.push((n.clone(), ScopeBinding::Var(*t)));
            }
            let bt = check_expr(fn_body, scope, Some(&sig))?;
            scope.entries.truncate(depth);
            if !bt.compatible(*ret) {
                return Err(TypeError::Mismatch {
                    expected: *ret,
                    got: bt,
                });
            }
            scope
                .entries
                .push((name.clone(), ScopeBinding::Fn(sig)));
            let out = check_expr(body, scope, enclosing);
            scope.entries.pop();
            out
        }
        Expr::If { cond, then, els } => {
            let ct = check_expr(cond, scope, enclosing)?;
            if ct != TypeTag::Bool {
                return Err(TypeError::Mismatch {
                    expected: TypeTag::Bool,
                    got: ct,
                });
            }
            let tt = check_expr(then, scope, enclosing)?;
            let et = check_expr(els, scope, enclosing)?;
            if !tt.compatible(et) {
                return Err(TypeError::BranchMismatch(tt, et));
            }
            Ok(tt)
        }
    }
}

fn check_call_args(
    name: &str,
    sig: &FnSig,
    args: &[Expr],
    scope: &mut TypeScope,
    enclosing: Option<&FnSig>,
) -> Result<(), TypeError> {
    if args.len() != sig.params.len() {
        return Err(TypeError::ArityMismatch {
            name: name.to_string(),
            expected: sig.params.len(),
            got: args.len(),
        });
    }
    for (arg, want) in args.iter().zip(&sig.params) {
        let t = check_expr(arg, scope, enclosing)?;
        if !t.compatible(*want) {
            return Err(TypeError::Mismatch {
                expected: *want,
                got: t,
            });
        }
    }
    Ok(())
}

/// Type-checks a whole program.
pub fn typecheck(program: &Program) -> Result<(), TypeError> {
    let mut scope = TypeScope {
        entries: program
            .params
            .iter()
            .map(|(n, t)| (n.clone(), ScopeBinding::Var(*t)))
            .collect(),
    };
    let sig = program.sig();
    let bt = check_expr(&program.body, &mut scope, Some(&sig))?;
    if !bt.compatible(program.ret) {
        return Err(TypeError::Mismatch {
            expected: program.ret,
            got: bt,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bernoulli_body() -> Expr {
        Expr::If {
            cond: Box::new(Expr::Prim(
                Prim::Lt,
                vec![
                    Expr::Prim(Prim::SafeUc, vec![Expr::real(0.0), Expr::real(1.0)]),
                    Expr::Var("p".into()),
                ],
            )),
            then: Box::new(Expr::real(1.0)),
            els: Box::new(Expr::real(0.0)),
        }
    }

    #[test]
    fn bernoulli_typechecks() {
        let prog = Program {
            params: vec![("p".into(), TypeTag::Real)],
            ret: TypeTag::Real,
            body: bernoulli_body(),
        };
        assert!(typecheck(&prog).is_ok());
    }

    #[test]
    fn unbound_variable_rejected() {
        let prog = Program {
            params: vec![],
            ret: TypeTag::Real,
            body: Expr::Var("ghost".into()),
        };
        assert_eq!(
            typecheck(&prog),
            Err(TypeError::UnboundVariable("ghost".into()))
        );
    }

    #[test]
    fn int_and_real_are_compatible() {
        let prog = Program {
            params: vec![("n".into(), TypeTag::Int)],
            ret: TypeTag::Real,
            body: Expr::Prim(Prim::Inc, vec![Expr::Var("n".into())]),
        };
        assert!(typecheck(&prog).is_ok());
    }

    #[test]
    fn bool_cond_required() {
        let prog = Program {
            params: vec![],
            ret: TypeTag::Real,
            body: Expr::If {
                cond: Box::new(Expr::real(1.0)),
                then: Box::new(Expr::real(0.0)),
                els: Box::new(Expr::real(0.0)),
            },
        };
        assert!(matches!(typecheck(&prog), Err(TypeError::Mismatch { .. })));
    }

    #[test]
    fn recur_arity_checked() {
        let prog = Program {
            params: vec![("x".into(), TypeTag::Real)],
            ret: TypeTag::Real,
            body: Expr::Recur(vec![]),
        };
        assert!(matches!(
            typecheck(&prog),
            Err(TypeError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn node_count_and_height() {
        let body = bernoulli_body();
        assert_eq!(body.node_count(), 7);
        assert_eq!(body.height(), 3);
    }
}
