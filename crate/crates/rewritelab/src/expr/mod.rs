//! Algebraic expression trees and the structural rewrite oracle: pattern
//! matching with rule variables, substitution, and single-site rewriting.
//!
//! Matching is purely structural — `(2*x)+5` does not match `5+(2*x)` — and
//! rewrites target the first match in leftmost-outermost (pre-order)
//! traversal. Rule variables (`a`, `b`, ...) live in a namespace disjoint
//! from expression variables, so instantiation cannot capture.

mod gen;
mod parse;

pub use gen::{
    gen_generalist_dataset, gen_random_tree, gen_specialist_dataset,
    gen_specialist_dataset_from_config, ground_and_embed, ExprGenConfig, GeneralistConfig,
    GroundedInstance, OpWeights, RuleSampler, SpecialistDatasetConfig, SpecialistMixtureConfig,
};
pub use parse::{parse, parse_rule, render, render_pretty};

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Names reserved for rule variables, in binding order.
pub const RULE_VAR_NAMES: [&str; 4] = ["a", "b", "c", "d"];

#[derive(Debug, Error, PartialEq)]
pub enum ExprError {
    #[error("substitution does not bind rule variable '{name}'")]
    UnboundVariable { name: String },
    #[error("rule variable '{name}' appears on the rhs but not the lhs")]
    RuleVarNotInLhs { name: String },
    #[error("rule lhs must not be a bare variable")]
    BareVariableLhs,
    #[error("parse error at offset {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("could not generate a distinct rule after {attempts} attempts")]
    RuleCapacity { attempts: usize },
    #[error("could not embed the pattern cleanly after {attempts} host regenerations")]
    EmbedRetries { attempts: usize },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnaryOp {
    Log,
    Cos,
    Sin,
    Neg,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Log => "log",
            UnaryOp::Cos => "cos",
            UnaryOp::Sin => "sin",
            UnaryOp::Neg => "neg",
        }
    }
}

/// An expression tree. `Pow` carries its integer exponent directly; generated
/// exponents are >= 2 but any integer is accepted on parse.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Bin { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Pow { base: Box<Expr>, exp: i64 },
    Unary { op: UnaryOp, arg: Box<Expr> },
    Var(String),
    RuleVar(String),
    Const(i64),
}

pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
    Expr::Bin { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
}

pub fn pow(base: Expr, exp: i64) -> Expr {
    Expr::Pow { base: Box::new(base), exp }
}

pub fn unary(op: UnaryOp, arg: Expr) -> Expr {
    Expr::Unary { op, arg: Box::new(arg) }
}

pub fn var(name: &str) -> Expr {
    Expr::Var(name.to_string())
}

pub fn rule_var(name: &str) -> Expr {
    Expr::RuleVar(name.to_string())
}

impl Expr {
    pub fn depth(&self) -> usize {
        match self {
            Expr::Bin { lhs, rhs, .. } => 1 + lhs.depth().max(rhs.depth()),
            Expr::Pow { base, .. } => 1 + base.depth(),
            Expr::Unary { arg, .. } => 1 + arg.depth(),
            _ => 0,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Bin { lhs, rhs, .. } => 1 + lhs.node_count() + rhs.node_count(),
            Expr::Pow { base, .. } => 1 + base.node_count(),
            Expr::Unary { arg, .. } => 1 + arg.node_count(),
            _ => 1,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Expr::Var(_) | Expr::RuleVar(_) | Expr::Const(_))
    }

    fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Bin { lhs, rhs, .. } => vec![lhs, rhs],
            Expr::Pow { base, .. } => vec![base],
            Expr::Unary { arg, .. } => vec![arg],
            _ => Vec::new(),
        }
    }

    /// Subtree at a pre-order path of child indices.
    pub fn get_at(&self, path: &[u8]) -> Option<&Expr> {
        let mut node = self;
        for &step in path {
            node = *node.children().get(step as usize)?;
        }
        Some(node)
    }

    /// Returns a copy with the subtree at `path` replaced.
    pub fn replace_at(&self, path: &[u8], replacement: &Expr) -> Expr {
        if path.is_empty() {
            return replacement.clone();
        }
        let step = path[0];
        let rest = &path[1..];
        match self {
            Expr::Bin { op, lhs, rhs } => {
                if step == 0 {
                    bin(*op, lhs.replace_at(rest, replacement), (**rhs).clone())
                } else {
                    bin(*op, (**lhs).clone(), rhs.replace_at(rest, replacement))
                }
            }
            Expr::Pow { base, exp } => pow(base.replace_at(rest, replacement), *exp),
            Expr::Unary { op, arg } => unary(*op, arg.replace_at(rest, replacement)),
            leaf => leaf.clone(),
        }
    }

    /// Pre-order paths of every leaf (Var, RuleVar or Const node).
    pub fn leaf_paths(&self) -> Vec<Vec<u8>> {
        fn walk(node: &Expr, path: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
            if node.is_leaf() {
                out.push(path.clone());
                return;
            }
            for (i, child) in node.children().into_iter().enumerate() {
                path.push(i as u8);
                walk(child, path, out);
                path.pop();
            }
        }
        let mut out = Vec::new();
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    /// Rule variables occurring in this tree, in name order.
    pub fn rule_vars(&self) -> BTreeSet<String> {
        fn walk(node: &Expr, out: &mut BTreeSet<String>) {
            if let Expr::RuleVar(name) = node {
                out.insert(name.clone());
            }
            for child in node.children() {
                walk(child, out);
            }
        }
        let mut out = BTreeSet::new();
        walk(self, &mut out);
        out
    }

    pub fn structural_hash(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        self.hash(&mut hasher);
        hasher.finish()
    }
}

/// A binding of rule variables to concrete subtrees.
pub type Substitution = BTreeMap<String, Expr>;

/// An equational rewrite rule `lhs = rhs` over rule variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AbstractRule {
    pub id: String,
    pub lhs: Expr,
    pub rhs: Expr,
}

impl AbstractRule {
    pub fn new(id: &str, lhs: Expr, rhs: Expr) -> Result<AbstractRule, ExprError> {
        if matches!(lhs, Expr::RuleVar(_)) {
            return Err(ExprError::BareVariableLhs);
        }
        let lhs_vars = lhs.rule_vars();
        for name in rhs.rule_vars() {
            if !lhs_vars.contains(&name) {
                return Err(ExprError::RuleVarNotInLhs { name });
            }
        }
        Ok(AbstractRule { id: id.to_string(), lhs, rhs })
    }

    /// The instruction form, `lhs=rhs`, in canonical rendering.
    pub fn render(&self) -> String {
        format!("{}={}", render(&self.lhs), render(&self.rhs))
    }

    pub fn structural_hash(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        self.lhs.hash(&mut hasher);
        self.rhs.hash(&mut hasher);
        hasher.finish()
    }
}

// Rules serialize as their rendered equation so manifests stay readable.
impl Serialize for AbstractRule {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Shadow<'a> {
            id: &'a str,
            rule: String,
        }
        Shadow { id: &self.id, rule: self.render() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AbstractRule {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Shadow {
            id: String,
            rule: String,
        }
        let shadow = Shadow::deserialize(deserializer)?;
        parse_rule(&shadow.id, &shadow.rule).map_err(serde::de::Error::custom)
    }
}

/// Tries to extend `binding` so that `instantiate(pattern, binding) == expr`.
fn unify(expr: &Expr, pattern: &Expr, binding: &Substitution) -> Option<Substitution> {
    match pattern {
        Expr::RuleVar(name) => match binding.get(name) {
            Some(bound) => (bound == expr).then(|| binding.clone()),
            None => {
                let mut extended = binding.clone();
                extended.insert(name.clone(), expr.clone());
                Some(extended)
            }
        },
        Expr::Bin { op, lhs, rhs } => match expr {
            Expr::Bin { op: eo, lhs: el, rhs: er } if eo == op => {
                let after_lhs = unify(el, lhs, binding)?;
                unify(er, rhs, &after_lhs)
            }
            _ => None,
        },
        Expr::Pow { base, exp } => match expr {
            Expr::Pow { base: eb, exp: ee } if ee == exp => unify(eb, base, binding),
            _ => None,
        },
        Expr::Unary { op, arg } => match expr {
            Expr::Unary { op: eo, arg: ea } if eo == op => unify(ea, arg, binding),
            _ => None,
        },
        Expr::Var(_) | Expr::Const(_) => (expr == pattern).then(|| binding.clone()),
    }
}

/// Location and binding of a successful match.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSite {
    pub path: Vec<u8>,
    pub subst: Substitution,
}

/// Finds the first subtree (in pre-order) that matches `pattern`.
pub fn find_match(expr: &Expr, pattern: &Expr) -> Option<MatchSite> {
    fn walk(node: &Expr, pattern: &Expr, path: &mut Vec<u8>) -> Option<MatchSite> {
        if let Some(subst) = unify(node, pattern, &Substitution::new()) {
            return Some(MatchSite { path: path.clone(), subst });
        }
        for (i, child) in node.children().into_iter().enumerate() {
            path.push(i as u8);
            if let Some(site) = walk(child, pattern, path) {
                path.pop();
                return Some(site);
            }
            path.pop();
        }
        None
    }
    walk(expr, pattern, &mut Vec::new())
}

/// Substitution for the first match of `pattern` in `expr`, if any. Repeated
/// pattern variables must bind to structurally identical subtrees.
pub fn match_pattern(expr: &Expr, pattern: &Expr) -> Option<Substitution> {
    find_match(expr, pattern).map(|site| site.subst)
}

/// Replaces every rule-variable leaf with its binding (deep copy).
pub fn instantiate(rule_side: &Expr, subst: &Substitution) -> Result<Expr, ExprError> {
    Ok(match rule_side {
        Expr::RuleVar(name) => subst
            .get(name)
            .cloned()
            .ok_or_else(|| ExprError::UnboundVariable { name: name.clone() })?,
        Expr::Bin { op, lhs, rhs } => {
            bin(*op, instantiate(lhs, subst)?, instantiate(rhs, subst)?)
        }
        Expr::Pow { base, exp } => pow(instantiate(base, subst)?, *exp),
        Expr::Unary { op, arg } => unary(*op, instantiate(arg, subst)?),
        leaf => leaf.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExprRewriteOutcome {
    pub output: Expr,
    pub applied: bool,
}

/// Rewrites the first match of `rule.lhs` in `expr` (exactly one site); if
/// nothing matches the input is returned unchanged.
pub fn apply_abstract_rule(expr: &Expr, rule: &AbstractRule) -> ExprRewriteOutcome {
    match find_match(expr, &rule.lhs) {
        Some(site) => {
            let replacement = instantiate(&rule.rhs, &site.subst)
                .expect("rule invariant: rhs variables are bound by any lhs match");
            ExprRewriteOutcome {
                output: expr.replace_at(&site.path, &replacement),
                applied: true,
            }
        }
        None => ExprRewriteOutcome { output: expr.clone(), applied: false },
    }
}
