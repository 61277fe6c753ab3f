//! Type-directed stochastic generation of programs from production rules,
//! exact log-prior computation by replay, and corpus-estimated weights.

mod engine;
mod estimate;
mod sites;

pub use engine::{generate, generate_program, log_prior, subtree_log_prior};
pub use estimate::estimate_weights;
pub use sites::{splice, typed_sites, visit_typed, Site};

use crate::expr::{FnSig, TypeTag};
use serde::{Deserialize, Serialize};

/// The seven production rules, in weight-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    VarLookup = 0,
    Constant = 1,
    PrimApp = 2,
    LetFn = 3,
    LetVal = 4,
    If = 5,
    Recur = 6,
}

pub const ALL_RULES: [Rule; 7] = [
    Rule::VarLookup,
    Rule::Constant,
    Rule::PrimApp,
    Rule::LetFn,
    Rule::LetVal,
    Rule::If,
    Rule::Recur,
];

/// The predefined real constant set; anything else is drawn from the
/// continuous mixture of Normal(0,1) and Uniform(-10,10).
pub const CONST_ATOMS: [f64; 5] = [0.0, 1.0, -1.0, 2.0, std::f64::consts::PI];

/// Index of the call-a-local-procedure entry in the real procedure table,
/// after the eleven builtins.
pub const LOCAL_FN_IDX: usize = 11;

/// Hard depth cap for generated expressions. Deep corpus programs
/// (general-Normal nests to depth 11) must stay inside the support.
pub const DEFAULT_DEPTH_CAP: u32 = 12;

/// Constant model: mixture of the finite atom set and two continuous
/// components.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConstModel {
    /// Mixture weights: [finite set, Normal(0,1), Uniform(-10,10)].
    pub components: [f64; 3],
    /// Weights over [`CONST_ATOMS`].
    pub atoms: [f64; 5],
}

/// Production-rule probabilities and selection tables defining the
/// grammar prior p(T).
///
/// Rule vectors are indexed by [`Rule`]; `real_procs` by the order of
/// [`crate::expr::REAL_PRIMS`] with the local-procedure entry last; int
/// shares the real tables.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RuleWeights {
    pub depth_cap: u32,
    /// Rule vectors for {real, bool}.
    pub rules: RulesPerType,
    /// Procedure selection at real: 11 builtins + local-fn.
    pub real_procs: Vec<f64>,
    pub constants: ConstModel,
    /// Weights for the bool constants [true, false].
    pub bool_consts: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RulesPerType {
    pub real: [f64; 7],
    pub bool: [f64; 7],
}

impl RuleWeights {
    /// Uniform weights at the default depth cap.
    pub fn uniform() -> RuleWeights {
        RuleWeights {
            depth_cap: DEFAULT_DEPTH_CAP,
            rules: RulesPerType {
                real: [1.0 / 7.0; 7],
                bool: [1.0 / 7.0; 7],
            },
            real_procs: vec![1.0 / 12.0; 12],
            constants: ConstModel {
                components: [1.0 / 3.0; 3],
                atoms: [0.2; 5],
            },
            bool_consts: [0.5, 0.5],
        }
    }

    /// A two-program toy grammar over the constants {0.0, 1.0}: every
    /// generated body is `0.0` or `1.0` with equal probability. Used as an
    /// enumerable ground truth for search correctness.
    pub fn toy_two_constants() -> RuleWeights {
        RuleWeights {
            depth_cap: 1,
            rules: RulesPerType {
                real: [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                bool: [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            },
            real_procs: vec![1.0 / 12.0; 12],
            constants: ConstModel {
                components: [1.0, 0.0, 0.0],
                atoms: [0.5, 0.5, 0.0, 0.0, 0.0],
            },
            bool_consts: [0.5, 0.5],
        }
    }

    pub fn rules_for(&self, ty: TypeTag) -> &[f64; 7] {
        match ty.structural() {
            TypeTag::Bool => &self.rules.bool,
            _ => &self.rules.real,
        }
    }

    /// Checks the categorical-sums-to-one invariants.
    pub fn validate(&self) -> Result<(), String> {
        let close = |v: f64| (v - 1.0).abs() < 1e-12;
        for (name, vec) in [
            ("rules.real", &self.rules.real[..]),
            ("rules.bool", &self.rules.bool[..]),
            ("real_procs", &self.real_procs[..]),
            ("constants.components", &self.constants.components[..]),
            ("constants.atoms", &self.constants.atoms[..]),
            ("bool_consts", &self.bool_consts[..]),
        ] {
            if vec.iter().any(|w| *w < 0.0) {
                return Err(format!("{name}: negative weight"));
            }
            if !close(vec.iter().sum::<f64>()) {
                return Err(format!("{name}: weights sum to {}", vec.iter().sum::<f64>()));
            }
        }
        if self.real_procs.len() != 12 {
            return Err("real_procs must have 12 entries".into());
        }
        if self.depth_cap < 1 {
            return Err("depth_cap must be >= 1".into());
        }
        Ok(())
    }
}

/// Entries of the lexical scope during generation and replay, innermost
/// last.
#[derive(Debug, Clone, PartialEq)]
pub enum ScopeEntry {
    Var { name: String, ty: TypeTag },
    Fn { name: String, sig: FnSig },
}

/// Generation context: the typed symbol table in scope, the current depth,
/// and the enclosing procedure signature `recur` would re-enter.
#[derive(Debug, Clone, PartialEq)]
pub struct GenContext {
    pub scope: Vec<ScopeEntry>,
    pub depth: u32,
    pub enclosing: Option<FnSig>,
}

impl GenContext {
    /// Context for the body of a program with the given interface.
    pub fn for_program(params: &[(String, TypeTag)], ret: TypeTag) -> GenContext {
        GenContext {
            scope: params
                .iter()
                .map(|(n, t)| ScopeEntry::Var {
                    name: n.clone(),
                    ty: *t,
                })
                .collect(),
            depth: 0,
            enclosing: Some(FnSig {
                params: params.iter().map(|(_, t)| *t).collect(),
                ret,
            }),
        }
    }

    pub fn matching_vars(&self, target: TypeTag) -> Vec<&str> {
        self.scope
            .iter()
            .filter_map(|e| match e {
                ScopeEntry::Var { name, ty } if ty.compatible(target) => Some(name.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn matching_fns(&self, target: TypeTag) -> Vec<(&str, &FnSig)> {
        self.scope
            .iter()
            .filter_map(|e| match e {
                ScopeEntry::Fn { name, sig } if sig.ret.compatible(target) => {
                    Some((name.as_str(), sig))
                }
                _ => None,
            })
            .collect()
    }

    pub fn lookup_fn(&self, name: &str) -> Option<&FnSig> {
        self.scope.iter().rev().find_map(|e| match e {
            ScopeEntry::Fn { name: n, sig } if n == name => Some(sig),
            _ => None,
        })
    }

    /// Fresh binder name; scope length makes it unique along any path.
    pub fn fresh_name(&self, offset: usize) -> String {
        format!("g{}", self.scope.len() + offset)
    }
}
