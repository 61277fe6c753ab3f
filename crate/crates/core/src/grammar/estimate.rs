//! Corpus-based estimation of rule weights with Dirichlet smoothing.

use super::sites::visit_typed;
use super::{ConstModel, RuleWeights, RulesPerType, DEFAULT_DEPTH_CAP, LOCAL_FN_IDX};
use crate::expr::{Expr, Literal, Program, TypeTag, REAL_PRIMS};

fn dirichlet_mean(counts: &[f64], alpha: f64) -> Vec<f64> {
    let k = counts.len() as f64;
    let total: f64 = counts.iter().sum();
    counts
        .iter()
        .map(|c| (c + alpha) / (total + alpha * k))
        .collect()
}

/// Posterior-mean rule weights from a corpus: for each categorical,
/// (count_i + alpha) / (sum + alpha K). The continuous constant mass is
/// estimated from the fraction of corpus constants outside the finite set,
/// split evenly between the Normal and Uniform components. An empty corpus
/// yields uniform weights (pure smoothing).
pub fn estimate_weights(corpus: &[&Program], alpha: f64) -> RuleWeights {
    assert!(alpha > 0.0, "dirichlet alpha must be positive");
    let mut rule_counts = [[0.0f64; 7]; 2];
    let mut proc_counts = vec![0.0f64; 12];
    let mut atom_counts = [0.0f64; 5];
    let mut finite_count = 0.0f64;
    let mut continuous_count = 0.0f64;
    let mut bool_counts = [0.0f64; 2];

    for program in corpus {
        visit_typed(program, |expr, target, _ctx, _path| {
            let tyix = match target.structural() {
                TypeTag::Bool => 1,
                _ => 0,
            };
            let rule = match expr {
                Expr::Var(_) => 0,
                Expr::Const(_) => 1,
                Expr::Prim(_, _) | Expr::Call(_, _) => 2,
                Expr::LetFn { .. } => 3,
                Expr::LetVal { .. } => 4,
                Expr::If { .. } => 5,
                Expr::Recur(_) => 6,
            };
            rule_counts[tyix][rule] += 1.0;
            match expr {
                Expr::Prim(p, _) if tyix == 0 => {
                    if let Some(i) = REAL_PRIMS.iter().position(|q| q == p) {
                        proc_counts[i] += 1.0;
                    }
                }
                Expr::Call(_, _) if tyix == 0 => proc_counts[LOCAL_FN_IDX] += 1.0,
                Expr::Const(Literal::Real(v)) => {
                    if let Some(i) = super::CONST_ATOMS.iter().position(|a| a == v) {
                        finite_count += 1.0;
                        atom_counts[i] += 1.0;
                    } else {
                        continuous_count += 1.0;
                    }
                }
                Expr::Const(Literal::Bool(b)) => {
                    bool_counts[if *b { 0 } else { 1 }] += 1.0;
                }
                _ => {}
            }
        });
    }

    let to7 = |v: Vec<f64>| -> [f64; 7] { v.try_into().unwrap() };
    let component_counts = [
        finite_count,
        continuous_count * 0.5,
        continuous_count * 0.5,
    ];
    RuleWeights {
        depth_cap: DEFAULT_DEPTH_CAP,
        rules: RulesPerType {
            real: to7(dirichlet_mean(&rule_counts[0], alpha)),
            bool: to7(dirichlet_mean(&rule_counts[1], alpha)),
        },
        real_procs: dirichlet_mean(&proc_counts, alpha),
        constants: ConstModel {
            components: dirichlet_mean(&component_counts, alpha)
                .try_into()
                .unwrap(),
            atoms: dirichlet_mean(&atom_counts, alpha).try_into().unwrap(),
        },
        bool_consts: dirichlet_mean(&bool_counts, alpha).try_into().unwrap(),
    }
}
