//! Enumeration of regeneration sites and subtree splicing for MH and GP.

use super::{GenContext, ScopeEntry};
use crate::expr::{Expr, FnSig, Program, TypeTag};

/// One AST node in deterministic pre-order, with the type and context it
/// was (or could be) generated under.
#[derive(Debug, Clone)]
pub struct Site {
    pub path: Vec<usize>,
    pub target: TypeTag,
    pub ctx: GenContext,
}

/// Visits every node of the program body in pre-order, handing the visitor
/// the node, the generation target at that position, its context, and its
/// path from the body root.
pub fn visit_typed<F>(program: &Program, mut f: F)
where
    F: FnMut(&Expr, TypeTag, &GenContext, &[usize]),
{
    let ctx = GenContext::for_program(&program.params, program.ret);
    let mut path = Vec::new();
    visit(&program.body, program.ret.structural(), &ctx, &mut path, &mut f);
}

fn visit<F>(expr: &Expr, target: TypeTag, ctx: &GenContext, path: &mut Vec<usize>, f: &mut F)
where
    F: FnMut(&Expr, TypeTag, &GenContext, &[usize]),
{
    f(expr, target, ctx, path);
    let deeper = |ctx: &GenContext| {
        let mut c = ctx.clone();
        c.depth += 1;
        c
    };
    match expr {
        Expr::Const(_) | Expr::Var(_) => {}
        Expr::Prim(_, args) => {
            let child = deeper(ctx);
            for (i, a) in args.iter().enumerate() {
                path.push(i);
                visit(a, TypeTag::Real, &child, path, f);
                path.pop();
            }
        }
        Expr::Call(name, args) => {
            let child = deeper(ctx);
            let sig = ctx
                .lookup_fn(name)
                .cloned()
                .unwrap_or(FnSig {
                    params: vec![TypeTag::Real; args.len()],
                    ret: TypeTag::Real,
                });
            for (i, (a, pty)) in args.iter().zip(&sig.params).enumerate() {
                path.push(i);
                visit(a, pty.structural(), &child, path, f);
                path.pop();
            }
        }
        Expr::Recur(args) => {
            let child = deeper(ctx);
            let ptys: Vec<TypeTag> = ctx
                .enclosing
                .as_ref()
                .map(|s| s.params.clone())
                .unwrap_or_else(|| vec![TypeTag::Real; args.len()]);
            for (i, (a, pty)) in args.iter().zip(&ptys).enumerate() {
                path.push(i);
                visit(a, pty.structural(), &child, path, f);
                path.pop();
            }
        }
        Expr::LetVal {
            name,
            ty,
            bound,
            body,
        } => {
            let child = deeper(ctx);
            path.push(0);
            visit(bound, ty.structural(), &child, path, f);
            path.pop();
            let mut body_ctx = child;
            body_ctx.scope.push(ScopeEntry::Var {
                name: name.clone(),
                ty: *ty,
            });
            path.push(1);
            visit(body, target, &body_ctx, path, f);
            path.pop();
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
            let mut fn_ctx = deeper(ctx);
            for (n, t) in params {
                fn_ctx.scope.push(ScopeEntry::Var {
                    name: n.clone(),
                    ty: *t,
                });
            }
            fn_ctx.enclosing = Some(sig.clone());
            path.push(0);
            visit(fn_body, ret.structural(), &fn_ctx, path, f);
            path.pop();
            let mut body_ctx = deeper(ctx);
            body_ctx.scope.push(ScopeEntry::Fn {
                name: name.clone(),
                sig,
            });
            path.push(1);
            visit(body, target, &body_ctx, path, f);
            path.pop();
        }
        Expr::If { cond, then, els } => {
            let child = deeper(ctx);
            path.push(0);
            visit(cond, TypeTag::Bool, &child, path, f);
            path.pop();
            path.push(1);
            visit(then, target, &child, path, f);
            path.pop();
            path.push(2);
            visit(els, target, &child, path, f);
            path.pop();
        }
    }
}

/// All regeneration sites of a program, one per AST node in pre-order.
pub fn typed_sites(program: &Program) -> Vec<Site> {
    let mut sites = Vec::new();
    visit_typed(program, |_, target, ctx, path| {
        sites.push(Site {
            path: path.to_vec(),
            target,
            ctx: ctx.clone(),
        });
    });
    sites
}

fn child_mut(expr: &mut Expr, idx: usize) -> &mut Expr {
    match expr {
        Expr::Prim(_, args) | Expr::Call(_, args) | Expr::Recur(args) => &mut args[idx],
        Expr::LetVal { bound, body, .. } => match idx {
            0 => bound,
            _ => body,
        },
        Expr::LetFn { fn_body, body, .. } => match idx {
            0 => fn_body,
            _ => body,
        },
        Expr::If { cond, then, els } => match idx {
            0 => cond,
            1 => then,
            _ => els,
        },
        _ => panic!("leaf node has no children"),
    }
}

/// Returns a copy of the program with the subtree at `path` replaced.
pub fn splice(program: &Program, path: &[usize], subtree: Expr) -> Program {
    let mut out = program.clone();
    let mut node = &mut out.body;
    for &idx in path {
        node = child_mut(node, idx);
    }
    *node = subtree;
    out
}

/// Reads the subtree at `path`.
pub fn subtree_at<'a>(program: &'a Program, path: &[usize]) -> &'a Expr {
    let mut node = &program.body;
    for &idx in path {
        node = node.children()[idx];
    }
    node
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_program, typecheck};
    use crate::grammar::{generate, RuleWeights};
    use crate::rng::rng_from_seed;

    #[test]
    fn constant_body_has_one_site() {
        let prog = parse_program("(fn [] 0.0)").unwrap();
        assert_eq!(typed_sites(&prog).len(), 1);
    }

    /// Site count equals node count by an independent traversal.
    #[test]
    fn site_count_is_node_count() {
        let prog =
            parse_program("(fn [p] (if (< (safe-uc 0.0 1.0) p) 1.0 0.0))").unwrap();
        assert_eq!(typed_sites(&prog).len(), prog.body.node_count());
        assert_eq!(prog.body.node_count(), 7);
    }

    #[test]
    fn contexts_reconstruct_scope_and_recur() {
        let prog = parse_program(
            "(fn [p] (let [loop (fn [k] (if (< (safe-uc 0.0 1.0) p) k (recur (inc k))))] (loop 1.0)))",
        )
        .unwrap();
        let sites = typed_sites(&prog);
        // Find the site for `k` (a Var inside the fn body).
        let k_site = sites
            .iter()
            .find(|s| matches!(subtree_at(&prog, &s.path), Expr::Var(n) if n == "k"))
            .unwrap();
        assert!(k_site.ctx.matching_vars(TypeTag::Real).contains(&"k"));
        assert!(k_site.ctx.enclosing.is_some());
        assert_eq!(k_site.ctx.enclosing.as_ref().unwrap().params.len(), 1);
        // The call site sees the procedure in scope.
        let call_site = sites
            .iter()
            .find(|s| matches!(subtree_at(&prog, &s.path), Expr::Call(n, _) if n == "loop"))
            .unwrap();
        assert_eq!(call_site.ctx.matching_fns(TypeTag::Real).len(), 1);
    }

    /// Regenerating any site with its own context yields a well-typed
    /// program; exercised over many random programs and sites.
    #[test]
    fn regeneration_preserves_typing() {
        let w = RuleWeights::uniform();
        let mut rng = rng_from_seed(11);
        for _ in 0..100 {
            let (prog, _) = crate::grammar::generate_program(
                &[("x".into(), TypeTag::Real)],
                TypeTag::Real,
                &w,
                &mut rng,
            );
            let sites = typed_sites(&prog);
            let pick = (rand::Rng::gen::<u64>(&mut rng) as usize) % sites.len();
            let site = &sites[pick];
            let (sub, _) = generate(site.target, &site.ctx, &w, &mut rng);
            let new_prog = splice(&prog, &site.path, sub);
            assert!(
                typecheck(&new_prog).is_ok(),
                "site {pick} in {:?}",
                crate::expr::print_program(&prog)
            );
        }
    }
}
