//! Stochastic generation and its deterministic replay.
//!
//! `generate` and `log_prior` share every probability computation, in the
//! same order, so the log-probability reported at generation time equals
//! the replayed log-prior bit for bit.

use super::{
    ConstModel, GenContext, Rule, RuleWeights, ScopeEntry, ALL_RULES, CONST_ATOMS, LOCAL_FN_IDX,
};
use crate::expr::{Expr, FnSig, Literal, Prim, Program, TypeTag, REAL_PRIMS};
use rand::Rng;
use rand_distr::StandardNormal;

/// Renormalized rule distribution at a site. At or beyond the depth cap
/// only variable lookups and constants survive; rule 1 drops out when no
/// in-scope symbol matches and rule 7 when there is nothing to recur into.
fn available_rules(target: TypeTag, ctx: &GenContext, w: &RuleWeights) -> Vec<(Rule, f64)> {
    let at_cap = ctx.depth >= w.depth_cap;
    let has_var = !ctx.matching_vars(target).is_empty();
    let can_recur = !at_cap
        && ctx
            .enclosing
            .as_ref()
            .is_some_and(|sig| sig.ret.compatible(target));
    let weights = w.rules_for(target);
    let mut items: Vec<(Rule, f64)> = Vec::with_capacity(7);
    for rule in ALL_RULES {
        let available = match rule {
            Rule::VarLookup => has_var,
            Rule::Constant => true,
            Rule::PrimApp | Rule::LetFn | Rule::LetVal | Rule::If => !at_cap,
            Rule::Recur => can_recur,
        };
        if available {
            items.push((rule, weights[rule as usize]));
        }
    }
    normalize(&mut items);
    items
}

/// Procedure selection at a real-typed site: the builtin table plus one
/// entry for calling an in-scope compound procedure, dropped when none
/// matches. Bool sites offer only `<`.
fn real_proc_choices(ctx: &GenContext, w: &RuleWeights) -> Vec<(Option<Prim>, f64)> {
    let mut items: Vec<(Option<Prim>, f64)> = REAL_PRIMS
        .iter()
        .enumerate()
        .map(|(i, p)| (Some(*p), w.real_procs[i]))
        .collect();
    if !ctx.matching_fns(TypeTag::Real).is_empty() {
        items.push((None, w.real_procs[LOCAL_FN_IDX]));
    }
    normalize(&mut items);
    items
}

fn normalize<T>(items: &mut [(T, f64)]) {
    let total: f64 = items.iter().map(|(_, w)| *w).sum();
    if total > 0.0 {
        for (_, w) in items.iter_mut() {
            *w /= total;
        }
    } else {
        // Degenerate hand-built weight tables: fall back to uniform over
        // whatever is available so generation always makes progress.
        let u = 1.0 / items.len() as f64;
        for (_, w) in items.iter_mut() {
            *w = u;
        }
    }
}

fn sample_categorical<'a, T, R: Rng>(items: &'a [(T, f64)], rng: &mut R) -> &'a (T, f64) {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for item in items {
        acc += item.1;
        if u < acc {
            return item;
        }
    }
    items.last().expect("non-empty categorical")
}

fn prob_of<T: PartialEq>(items: &[(T, f64)], wanted: &T) -> Option<f64> {
    items
        .iter()
        .find(|(t, _)| t == wanted)
        .map(|(_, p)| *p)
        .filter(|p| *p > 0.0)
}

fn normal_pdf(v: f64) -> f64 {
    (-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn atom_index(v: f64) -> Option<usize> {
    CONST_ATOMS.iter().position(|a| *a == v)
}

/// Log-probability of a real constant under the constant model: atoms get
/// their point mass, everything else the marginal density of the two
/// continuous components (natural log).
fn const_log_prob(model: &ConstModel, v: f64) -> f64 {
    if let Some(i) = atom_index(v) {
        (model.components[0] * model.atoms[i]).ln()
    } else {
        let uniform = if (-10.0..10.0).contains(&v) { 0.05 } else { 0.0 };
        (model.components[1] * normal_pdf(v) + model.components[2] * uniform).ln()
    }
}

const LETFN_ARITIES: [usize; 3] = [1, 2, 3];
const LETFN_ARITY_LP: f64 = -1.0986122886681098; // ln(1/3)
const BINARY_TYPE_LP: f64 = -std::f64::consts::LN_2; // ln(1/2)

/// Generates a well-typed expression of the target type together with the
/// exact log-probability of the stochastic choices made.
pub fn generate<R: Rng>(
    target: TypeTag,
    ctx: &GenContext,
    w: &RuleWeights,
    rng: &mut R,
) -> (Expr, f64) {
    let target = target.structural();
    let rules = available_rules(target, ctx, w);
    let &(rule, p_rule) = sample_categorical(&rules, rng);
    let mut lp = p_rule.ln();
    let expr = match rule {
        Rule::VarLookup => {
            let vars = ctx.matching_vars(target);
            let idx = rng.gen_range(0..vars.len());
            lp += (1.0 / vars.len() as f64).ln();
            Expr::Var(vars[idx].to_string())
        }
        Rule::Constant => match target {
            TypeTag::Bool => {
                let items = [(true, w.bool_consts[0]), (false, w.bool_consts[1])];
                let mut items = items.to_vec();
                normalize(&mut items);
                let &(b, p) = sample_categorical(&items, rng);
                lp += p.ln();
                Expr::Const(Literal::Bool(b))
            }
            _ => {
                let mut comps = vec![(0usize, w.constants.components[0])];
                comps.push((1, w.constants.components[1]));
                comps.push((2, w.constants.components[2]));
                normalize(&mut comps);
                let &(comp, _) = sample_categorical(&comps, rng);
                let v = match comp {
                    0 => {
                        let mut atoms: Vec<(usize, f64)> = w
                            .constants
                            .atoms
                            .iter()
                            .enumerate()
                            .map(|(i, a)| (i, *a))
                            .collect();
                        normalize(&mut atoms);
                        let &(i, _) = sample_categorical(&atoms, rng);
                        CONST_ATOMS[i]
                    }
                    1 => rng.sample::<f64, _>(StandardNormal),
                    _ => rng.gen::<f64>() * 20.0 - 10.0,
                };
                // Marginal convention shared with replay.
                lp += const_log_prob(&w.constants, v);
                Expr::Const(Literal::Real(v))
            }
        },
        Rule::PrimApp => match target {
            TypeTag::Bool => {
                let mut args = Vec::with_capacity(2);
                for _ in 0..2 {
                    let (a, alp) = generate(TypeTag::Real, &child_ctx(ctx), w, rng);
                    lp += alp;
                    args.push(a);
                }
                Expr::Prim(Prim::Lt, args)
            }
            _ => {
                let choices = real_proc_choices(ctx, w);
                let &(choice, p_proc) = sample_categorical(&choices, rng);
                lp += p_proc.ln();
                match choice {
                    Some(p) => {
                        let mut args = Vec::with_capacity(p.arity());
                        for _ in 0..p.arity() {
                            let (a, alp) = generate(TypeTag::Real, &child_ctx(ctx), w, rng);
                            lp += alp;
                            args.push(a);
                        }
                        Expr::Prim(p, args)
                    }
                    None => {
                        let fns = ctx.matching_fns(TypeTag::Real);
                        let idx = rng.gen_range(0..fns.len());
                        lp += (1.0 / fns.len() as f64).ln();
                        let (name, sig) = (fns[idx].0.to_string(), fns[idx].1.clone());
                        let mut args = Vec::with_capacity(sig.params.len());
                        for pty in &sig.params {
                            let (a, alp) = generate(*pty, &child_ctx(ctx), w, rng);
                            lp += alp;
                            args.push(a);
                        }
                        Expr::Call(name, args)
                    }
                }
            }
        },
        Rule::LetFn => {
            let arity = LETFN_ARITIES[rng.gen_range(0..3)];
            lp += LETFN_ARITY_LP;
            let mut params = Vec::with_capacity(arity);
            for i in 0..arity {
                let ty = if rng.gen::<bool>() {
                    TypeTag::Real
                } else {
                    TypeTag::Bool
                };
                lp += BINARY_TYPE_LP;
                params.push((ctx.fresh_name(i + 1), ty));
            }
            let name = ctx.fresh_name(0);
            let sig = FnSig {
                params: params.iter().map(|(_, t)| *t).collect(),
                ret: TypeTag::Real,
            };
            let mut fn_ctx = child_ctx(ctx);
            for (n, t) in &params {
                fn_ctx.scope.push(ScopeEntry::Var {
                    name: n.clone(),
                    ty: *t,
                });
            }
            fn_ctx.enclosing = Some(sig.clone());
            let (fn_body, blp) = generate(TypeTag::Real, &fn_ctx, w, rng);
            lp += blp;
            let mut body_ctx = child_ctx(ctx);
            body_ctx.scope.push(ScopeEntry::Fn {
                name: name.clone(),
                sig,
            });
            let (body, clp) = generate(target, &body_ctx, w, rng);
            lp += clp;
            Expr::LetFn {
                name,
                params,
                ret: TypeTag::Real,
                fn_body: Box::new(fn_body),
                body: Box::new(body),
            }
        }
        Rule::LetVal => {
            let ty = if rng.gen::<bool>() {
                TypeTag::Real
            } else {
                TypeTag::Bool
            };
            lp += BINARY_TYPE_LP;
            let name = ctx.fresh_name(0);
            let (bound, blp) = generate(ty, &child_ctx(ctx), w, rng);
            lp += blp;
            let mut body_ctx = child_ctx(ctx);
            body_ctx.scope.push(ScopeEntry::Var {
                name: name.clone(),
                ty,
            });
            let (body, clp) = generate(target, &body_ctx, w, rng);
            lp += clp;
            Expr::LetVal {
                name,
                ty,
                bound: Box::new(bound),
                body: Box::new(body),
            }
        }
        Rule::If => {
            let (cond, clp) = generate(TypeTag::Bool, &child_ctx(ctx), w, rng);
            lp += clp;
            let (then, tlp) = generate(target, &child_ctx(ctx), w, rng);
            lp += tlp;
            let (els, elp) = generate(target, &child_ctx(ctx), w, rng);
            lp += elp;
            Expr::If {
                cond: Box::new(cond),
                then: Box::new(then),
                els: Box::new(els),
            }
        }
        Rule::Recur => {
            let sig = ctx.enclosing.clone().expect("recur availability checked");
            let mut args = Vec::with_capacity(sig.params.len());
            for pty in &sig.params {
                let (a, alp) = generate(*pty, &child_ctx(ctx), w, rng);
                lp += alp;
                args.push(a);
            }
            Expr::Recur(args)
        }
    };
    (expr, lp)
}

fn child_ctx(ctx: &GenContext) -> GenContext {
    let mut c = ctx.clone();
    c.depth += 1;
    c
}

/// Generates a whole program for the given interface.
pub fn generate_program<R: Rng>(
    params: &[(String, TypeTag)],
    ret: TypeTag,
    w: &RuleWeights,
    rng: &mut R,
) -> (Program, f64) {
    let ctx = GenContext::for_program(params, ret);
    let (body, lp) = generate(ret, &ctx, w, rng);
    (
        Program {
            params: params.to_vec(),
            ret,
            body,
        },
        lp,
    )
}

fn rule_of(expr: &Expr) -> Rule {
    match expr {
        Expr::Var(_) => Rule::VarLookup,
        Expr::Const(_) => Rule::Constant,
        Expr::Prim(_, _) | Expr::Call(_, _) => Rule::PrimApp,
        Expr::LetFn { .. } => Rule::LetFn,
        Expr::LetVal { .. } => Rule::LetVal,
        Expr::If { .. } => Rule::If,
        Expr::Recur(_) => Rule::Recur,
    }
}

/// Exact log-prior of a subtree generated at `target` in context `ctx`:
/// the deterministic replay of `generate`'s choice sequence. Returns
/// -inf for programs outside the grammar's support.
pub fn subtree_log_prior(expr: &Expr, target: TypeTag, ctx: &GenContext, w: &RuleWeights) -> f64 {
    let target = target.structural();
    let rules = available_rules(target, ctx, w);
    let rule = rule_of(expr);
    let Some(p_rule) = prob_of(&rules, &rule) else {
        return f64::NEG_INFINITY;
    };
    let mut lp = p_rule.ln();
    match expr {
        Expr::Var(name) => {
            let vars = ctx.matching_vars(target);
            if !vars.contains(&name.as_str()) {
                return f64::NEG_INFINITY;
            }
            lp += (1.0 / vars.len() as f64).ln();
        }
        Expr::Const(Literal::Bool(b)) => {
            if target != TypeTag::Bool {
                return f64::NEG_INFINITY;
            }
            let mut items = vec![(true, w.bool_consts[0]), (false, w.bool_consts[1])];
            normalize(&mut items);
            match prob_of(&items, b) {
                Some(p) => lp += p.ln(),
                None => return f64::NEG_INFINITY,
            }
        }
        Expr::Const(Literal::Real(v)) => {
            if target == TypeTag::Bool {
                return f64::NEG_INFINITY;
            }
            let clp = const_log_prob(&w.constants, *v);
            if clp == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            lp += clp;
        }
        Expr::Prim(p, args) => {
            if target == TypeTag::Bool {
                if *p != Prim::Lt || args.len() != 2 {
                    return f64::NEG_INFINITY;
                }
            } else {
                if p.ret_type() != TypeTag::Real || args.len() != p.arity() {
                    return f64::NEG_INFINITY;
                }
                let choices = real_proc_choices(ctx, w);
                match prob_of(&choices, &Some(*p)) {
                    Some(pp) => lp += pp.ln(),
                    None => return f64::NEG_INFINITY,
                }
            }
            for a in args {
                lp += subtree_log_prior(a, TypeTag::Real, &child_ctx(ctx), w);
            }
        }
        Expr::Call(name, args) => {
            if target == TypeTag::Bool {
                return f64::NEG_INFINITY;
            }
            let choices = real_proc_choices(ctx, w);
            match prob_of(&choices, &None) {
                Some(pp) => lp += pp.ln(),
                None => return f64::NEG_INFINITY,
            }
            let fns = ctx.matching_fns(TypeTag::Real);
            if !fns.iter().any(|(n, _)| n == name) {
                return f64::NEG_INFINITY;
            }
            lp += (1.0 / fns.len() as f64).ln();
            let Some(sig) = ctx.lookup_fn(name).cloned() else {
                return f64::NEG_INFINITY;
            };
            if args.len() != sig.params.len() {
                return f64::NEG_INFINITY;
            }
            for (a, pty) in args.iter().zip(&sig.params) {
                lp += subtree_log_prior(a, *pty, &child_ctx(ctx), w);
            }
        }
        Expr::LetFn {
            params,
            ret,
            fn_body,
            body,
            name,
        } => {
            // The generator draws arity from {1,2,3}, argument types from
            // {real, bool}, and always returns real.
            if !LETFN_ARITIES.contains(&params.len()) || *ret != TypeTag::Real {
                return f64::NEG_INFINITY;
            }
            lp += LETFN_ARITY_LP;
            for (_, t) in params {
                if !matches!(t, TypeTag::Real | TypeTag::Bool) {
                    return f64::NEG_INFINITY;
                }
                lp += BINARY_TYPE_LP;
            }
            let sig = FnSig {
                params: params.iter().map(|(_, t)| *t).collect(),
                ret: *ret,
            };
            let mut fn_ctx = child_ctx(ctx);
            for (n, t) in params {
                fn_ctx.scope.push(ScopeEntry::Var {
                    name: n.clone(),
                    ty: *t,
                });
            }
            fn_ctx.enclosing = Some(sig.clone());
            lp += subtree_log_prior(fn_body, TypeTag::Real, &fn_ctx, w);
            let mut body_ctx = child_ctx(ctx);
            body_ctx.scope.push(ScopeEntry::Fn {
                name: name.clone(),
                sig,
            });
            lp += subtree_log_prior(body, target, &body_ctx, w);
        }
        Expr::LetVal {
            name,
            ty,
            bound,
            body,
        } => {
            if !matches!(ty, TypeTag::Real | TypeTag::Bool) {
                return f64::NEG_INFINITY;
            }
            lp += BINARY_TYPE_LP;
            lp += subtree_log_prior(bound, *ty, &child_ctx(ctx), w);
            let mut body_ctx = child_ctx(ctx);
            body_ctx.scope.push(ScopeEntry::Var {
                name: name.clone(),
                ty: *ty,
            });
            lp += subtree_log_prior(body, target, &body_ctx, w);
        }
        Expr::If { cond, then, els } => {
            lp += subtree_log_prior(cond, TypeTag::Bool, &child_ctx(ctx), w);
            lp += subtree_log_prior(then, target, &child_ctx(ctx), w);
            lp += subtree_log_prior(els, target, &child_ctx(ctx), w);
        }
        Expr::Recur(args) => {
            let sig = ctx.enclosing.clone().expect("recur availability checked");
            if args.len() != sig.params.len() {
                return f64::NEG_INFINITY;
            }
            for (a, pty) in args.iter().zip(&sig.params) {
                lp += subtree_log_prior(a, *pty, &child_ctx(ctx), w);
            }
        }
    }
    lp
}

/// Log-prior of a whole program under the grammar.
pub fn log_prior(program: &Program, w: &RuleWeights) -> f64 {
    let ctx = GenContext::for_program(&program.params, program.ret);
    subtree_log_prior(&program.body, program.ret, &ctx, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_program, typecheck};
    use crate::rng::rng_from_seed;

    #[test]
    fn depth_zero_context_forces_constants() {
        let mut w = RuleWeights::uniform();
        w.depth_cap = 1;
        let ctx = GenContext {
            scope: vec![],
            depth: 1,
            enclosing: None,
        };
        let mut rng = rng_from_seed(1);
        for _ in 0..50 {
            let (e, lp) = generate(TypeTag::Real, &ctx, &w, &mut rng);
            assert!(matches!(e, Expr::Const(_)), "{e:?}");
            assert!(lp.is_finite());
        }
    }

    #[test]
    fn const_log_prob_example() {
        // p2 = 0.5 with the remaining rule mass on rule 3, constant 0.0 at
        // weight 0.1 in a pure-atom model: lp = ln(0.5 * 0.1).
        let mut w = RuleWeights::uniform();
        w.rules.real = [0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0];
        w.constants = ConstModel {
            components: [1.0, 0.0, 0.0],
            atoms: [0.1, 0.225, 0.225, 0.225, 0.225],
        };
        let prog = parse_program("(fn [] 0.0)").unwrap();
        let lp = log_prior(&prog, &w);
        assert!((lp - 0.05f64.ln()).abs() < 1e-12, "{lp}");
    }

    #[test]
    fn replay_matches_generation_exactly() {
        let w = RuleWeights::uniform();
        let mut rng = rng_from_seed(42);
        for i in 0..500 {
            let (prog, lp) = generate_program(&[("x".into(), TypeTag::Real)], TypeTag::Real, &w, &mut rng);
            assert!(typecheck(&prog).is_ok(), "iteration {i}: {prog:?}");
            let replayed = log_prior(&prog, &w);
            assert!(
                (replayed - lp).abs() < 1e-12,
                "iteration {i}: {replayed} vs {lp}"
            );
        }
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let w = RuleWeights::uniform();
        let (a, la) = generate_program(&[], TypeTag::Real, &w, &mut rng_from_seed(7));
        let (b, lb) = generate_program(&[], TypeTag::Real, &w, &mut rng_from_seed(7));
        assert_eq!(a, b);
        assert_eq!(la, lb);
    }

    #[test]
    fn too_deep_program_is_outside_support() {
        // Build inc(inc(...inc(0)...)) one level past the cap.
        let mut w = RuleWeights::uniform();
        w.depth_cap = 4;
        let mut body = Expr::real(0.0);
        for _ in 0..5 {
            body = Expr::Prim(Prim::Inc, vec![body]);
        }
        let prog = Program {
            params: vec![],
            ret: TypeTag::Real,
            body,
        };
        assert_eq!(log_prior(&prog, &w), f64::NEG_INFINITY);
        // One less nesting level fits.
        let mut body = Expr::real(0.0);
        for _ in 0..4 {
            body = Expr::Prim(Prim::Inc, vec![body]);
        }
        let prog = Program {
            params: vec![],
            ret: TypeTag::Real,
            body,
        };
        assert!(log_prior(&prog, &w).is_finite());
    }

    #[test]
    fn toy_grammar_emits_two_programs() {
        let w = RuleWeights::toy_two_constants();
        let mut rng = rng_from_seed(3);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..100 {
            let (p, lp) = generate_program(&[], TypeTag::Real, &w, &mut rng);
            match p.body {
                Expr::Const(Literal::Real(v)) => {
                    seen.insert(v as i64);
                }
                other => panic!("unexpected body {other:?}"),
            }
            assert!((lp - 0.5f64.ln()).abs() < 1e-12);
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn generated_programs_respect_depth_cap() {
        let mut w = RuleWeights::uniform();
        w.depth_cap = 5;
        let mut rng = rng_from_seed(9);
        for _ in 0..200 {
            let (p, _) = generate_program(&[], TypeTag::Real, &w, &mut rng);
            assert!(p.body.height() <= 5, "height {}", p.body.height());
        }
    }
}
