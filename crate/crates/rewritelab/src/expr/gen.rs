//! Random expression generation and the math-deduction dataset builders:
//! random trees of a given depth, distinct abstract rules, grounding of rule
//! variables at pattern depth d_p, and leaf embedding into host expressions.

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Example, Meta, SplitDataset, TaskKind};
use crate::rng::{derive_seed, stream_rng, stream_rng2};

use super::{
    apply_abstract_rule, bin, find_match, instantiate, is_valid_var_name, pow, render, unary,
    AbstractRule, BinOp, Expr, ExprError, Substitution, UnaryOp, RULE_VAR_NAMES,
};

const STREAM_RULES: u64 = 0x11;
const STREAM_TRAIN: u64 = 0x12;
const STREAM_TEST: u64 = 0x13;

/// Sampling weights for node kinds. Interior nodes draw from the binary
/// operators, pow, and the unary wrappers; leaves draw variables vs
/// constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpWeights {
    pub add: f64,
    pub sub: f64,
    pub mul: f64,
    pub div: f64,
    pub pow: f64,
    pub log: f64,
    pub cos: f64,
    pub sin: f64,
    pub neg: f64,
    pub leaf_var: f64,
    pub leaf_const: f64,
}

impl Default for OpWeights {
    fn default() -> Self {
        OpWeights {
            add: 1.0,
            sub: 1.0,
            mul: 1.0,
            div: 1.0,
            pow: 0.5,
            log: 0.125,
            cos: 0.125,
            sin: 0.125,
            neg: 0.125,
            leaf_var: 1.0,
            leaf_const: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExprGenConfig {
    /// Host tree depth d.
    pub depth: usize,
    /// Pattern-carrying subtree depth d_p used when grounding rule variables.
    pub pattern_depth: usize,
    pub leaf_var_names: Vec<String>,
    /// Inclusive constant range for leaves.
    pub const_range: (i64, i64),
    /// Inclusive exponent range for generated pow nodes (>= 2).
    pub pow_exp_range: (i64, i64),
    pub weights: OpWeights,
    pub seed: u64,
}

impl Default for ExprGenConfig {
    fn default() -> Self {
        ExprGenConfig {
            depth: 3,
            pattern_depth: 1,
            leaf_var_names: ["x", "y", "z", "t", "u", "k"].map(String::from).to_vec(),
            const_range: (0, 9),
            pow_exp_range: (2, 3),
            weights: OpWeights::default(),
            seed: 0,
        }
    }
}

impl ExprGenConfig {
    pub fn validate(&self) -> Result<(), ExprError> {
        if self.leaf_var_names.is_empty() {
            return Err(ExprError::Invalid("leaf_var_names is empty".into()));
        }
        for name in &self.leaf_var_names {
            if !is_valid_var_name(name) {
                return Err(ExprError::Invalid(format!("bad variable name {name:?}")));
            }
            if RULE_VAR_NAMES.contains(&name.as_str()) {
                return Err(ExprError::Invalid(format!(
                    "variable {name:?} collides with a reserved rule-variable name"
                )));
            }
            if matches!(name.as_str(), "log" | "cos" | "sin" | "neg") {
                return Err(ExprError::Invalid(format!(
                    "variable {name:?} collides with a function name"
                )));
            }
        }
        if self.const_range.0 > self.const_range.1 {
            return Err(ExprError::Invalid("empty const_range".into()));
        }
        if self.pow_exp_range.0 < 2 || self.pow_exp_range.0 > self.pow_exp_range.1 {
            return Err(ExprError::Invalid("pow exponents must satisfy 2 <= lo <= hi".into()));
        }
        let w = &self.weights;
        let all = [w.add, w.sub, w.mul, w.div, w.pow, w.log, w.cos, w.sin, w.neg, w.leaf_var, w.leaf_const];
        if all.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(ExprError::Invalid("weights must be finite and nonnegative".into()));
        }
        if w.leaf_var + w.leaf_const <= 0.0 {
            return Err(ExprError::Invalid("leaf weights sum to zero".into()));
        }
        let interior = w.add + w.sub + w.mul + w.div + w.pow + w.log + w.cos + w.sin + w.neg;
        if interior <= 0.0 {
            return Err(ExprError::Invalid("interior weights sum to zero".into()));
        }
        Ok(())
    }
}

fn pick_weighted(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut draw = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        draw -= w;
        if draw < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

enum LeafKind<'a> {
    ExprVars(&'a [String]),
    RuleVars(&'a [&'static str]),
}

fn gen_leaf(cfg: &ExprGenConfig, leaves: &LeafKind<'_>, rng: &mut impl Rng) -> Expr {
    let w = &cfg.weights;
    let use_var = pick_weighted(&[w.leaf_var, w.leaf_const], rng) == 0;
    if use_var {
        match leaves {
            LeafKind::ExprVars(names) => Expr::Var(names[rng.gen_range(0..names.len())].clone()),
            LeafKind::RuleVars(names) => {
                Expr::RuleVar(names[rng.gen_range(0..names.len())].to_string())
            }
        }
    } else {
        Expr::Const(rng.gen_range(cfg.const_range.0..=cfg.const_range.1))
    }
}

fn gen_tree(cfg: &ExprGenConfig, depth: usize, leaves: &LeafKind<'_>, rng: &mut impl Rng) -> Expr {
    if depth == 0 {
        return gen_leaf(cfg, leaves, rng);
    }
    let w = &cfg.weights;
    let kinds = [w.add, w.sub, w.mul, w.div, w.pow, w.log, w.cos, w.sin, w.neg];
    match pick_weighted(&kinds, rng) {
        k @ 0..=3 => {
            let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][k];
            // One child carries the exact depth; the other is shallower or equal.
            let deep_left = rng.gen_bool(0.5);
            let other_depth = rng.gen_range(0..depth);
            let (ld, rd) = if deep_left { (depth - 1, other_depth) } else { (other_depth, depth - 1) };
            let lhs = gen_tree(cfg, ld, leaves, rng);
            let rhs = gen_tree(cfg, rd, leaves, rng);
            bin(op, lhs, rhs)
        }
        4 => {
            let exp = rng.gen_range(cfg.pow_exp_range.0..=cfg.pow_exp_range.1);
            pow(gen_tree(cfg, depth - 1, leaves, rng), exp)
        }
        k => {
            let op = [UnaryOp::Log, UnaryOp::Cos, UnaryOp::Sin, UnaryOp::Neg][k - 5];
            unary(op, gen_tree(cfg, depth - 1, leaves, rng))
        }
    }
}

/// Generates a random concrete expression whose depth is exactly `depth`
/// along at least one root-to-leaf path and never more.
pub fn gen_random_tree(cfg: &ExprGenConfig, depth: usize, rng: &mut impl Rng) -> Expr {
    gen_tree(cfg, depth, &LeafKind::ExprVars(&cfg.leaf_var_names), rng)
}

/// Samples distinct abstract rules, tracking structural hashes of every rule
/// it has handed out so train and test rules never collide.
#[derive(Debug, Default)]
pub struct RuleSampler {
    seen: HashSet<u64>,
    next_id: usize,
}

impl RuleSampler {
    pub fn new() -> RuleSampler {
        RuleSampler::default()
    }

    /// Generates one abstract rule with `num_vars` distinct rule variables,
    /// all of which occur in the lhs. Retries until the (lhs, rhs) pair is
    /// new; errors when attempts run out (tiny grammars).
    pub fn gen_abstract_rule(
        &mut self,
        num_vars: usize,
        lhs_depth: usize,
        rhs_depth: usize,
        cfg: &ExprGenConfig,
        rng: &mut impl Rng,
    ) -> Result<AbstractRule, ExprError> {
        if num_vars == 0 || num_vars > RULE_VAR_NAMES.len() {
            return Err(ExprError::Invalid(format!(
                "num_vars must be 1..={}, got {num_vars}",
                RULE_VAR_NAMES.len()
            )));
        }
        if lhs_depth == 0 {
            return Err(ExprError::Invalid("lhs_depth must be at least 1".into()));
        }
        let vars = &RULE_VAR_NAMES[..num_vars];
        let max_attempts = 1000;
        for _ in 0..max_attempts {
            let Some(lhs) = gen_lhs_with_all_vars(cfg, lhs_depth, vars, rng) else {
                continue;
            };
            let rhs = gen_tree(cfg, rhs_depth, &LeafKind::RuleVars(vars), rng);
            let rhs_vars = rhs.rule_vars();
            let lhs_vars = lhs.rule_vars();
            if !rhs_vars.is_subset(&lhs_vars) {
                continue;
            }
            let rule = AbstractRule::new(&format!("r{}", self.next_id), lhs, rhs)?;
            if self.seen.insert(rule.structural_hash()) {
                self.next_id += 1;
                return Ok(rule);
            }
        }
        Err(ExprError::RuleCapacity { attempts: max_attempts })
    }
}

/// Generates an lhs tree and patches leaves until every variable occurs.
fn gen_lhs_with_all_vars(
    cfg: &ExprGenConfig,
    depth: usize,
    vars: &[&'static str],
    rng: &mut impl Rng,
) -> Option<Expr> {
    let mut tree = gen_tree(cfg, depth, &LeafKind::RuleVars(vars), rng);
    loop {
        let present = tree.rule_vars();
        let missing: Vec<&&str> =
            vars.iter().filter(|v| !present.contains(**v)).collect();
        if missing.is_empty() {
            return Some(tree);
        }
        // Patch a leaf that is a constant or a duplicate variable occurrence.
        let mut occurrences: std::collections::HashMap<String, usize> =
            std::collections::HashMap::new();
        for path in tree.leaf_paths() {
            if let Some(Expr::RuleVar(name)) = tree.get_at(&path) {
                *occurrences.entry(name.clone()).or_insert(0) += 1;
            }
        }
        let candidates: Vec<Vec<u8>> = tree
            .leaf_paths()
            .into_iter()
            .filter(|path| match tree.get_at(path) {
                Some(Expr::Const(_)) => true,
                Some(Expr::RuleVar(name)) => occurrences[name] > 1,
                _ => false,
            })
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let path = &candidates[rng.gen_range(0..candidates.len())];
        tree = tree.replace_at(path, &Expr::RuleVar(missing[0].to_string()));
    }
}

/// A grounded instance: the host expression with the concrete lhs embedded at
/// a leaf, the oracle rewrite of it, and the grounding that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundedInstance {
    pub instance: Expr,
    pub target: Expr,
    pub grounding: Substitution,
}

/// Grounds each rule variable with a fresh random tree of depth `d_p`,
/// instantiates the concrete lhs, and swaps it into a uniformly chosen leaf
/// of the host. Guarantees that the embedded site is the one the oracle
/// rewrites; if an earlier pre-order match appears by accident the host is
/// regenerated (bounded retries).
pub fn ground_and_embed(
    rule: &AbstractRule,
    host: &Expr,
    d_p: usize,
    cfg: &ExprGenConfig,
    rng: &mut impl Rng,
) -> Result<GroundedInstance, ExprError> {
    let host_depth = host.depth();
    let mut grounding = Substitution::new();
    for name in rule.lhs.rule_vars() {
        grounding.insert(name, gen_random_tree(cfg, d_p, rng));
    }
    let concrete_lhs = instantiate(&rule.lhs, &grounding)?;

    let max_attempts = 50;
    let mut current = host.clone();
    for attempt in 0..max_attempts {
        if attempt > 0 {
            current = gen_random_tree(cfg, host_depth, rng);
        }
        let leaves = current.leaf_paths();
        let path = leaves[rng.gen_range(0..leaves.len())].clone();
        let instance = current.replace_at(&path, &concrete_lhs);
        let site = find_match(&instance, &rule.lhs)
            .expect("embedded lhs must match somewhere");
        if site.path == path {
            let target = instance.replace_at(&path, &instantiate(&rule.rhs, &site.subst)?);
            return Ok(GroundedInstance { instance, target, grounding });
        }
    }
    Err(ExprError::EmbedRetries { attempts: max_attempts })
}

/// Generalist setting: a fixed instance budget spread evenly over `num_rules`
/// abstract rules, tested on instances of fresh rules never seen in training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralistConfig {
    pub num_rules: usize,
    pub instances_total: usize,
    pub test_rules: usize,
    pub test_per_rule: usize,
    /// Inclusive range of rule-variable counts per generated rule.
    pub rule_num_vars: (usize, usize),
    pub rule_lhs_depth: usize,
    pub rule_rhs_depth: usize,
    pub gen: ExprGenConfig,
}

impl Default for GeneralistConfig {
    fn default() -> Self {
        GeneralistConfig {
            num_rules: 10,
            instances_total: 1000,
            test_rules: 5,
            test_per_rule: 20,
            rule_num_vars: (1, 3),
            rule_lhs_depth: 2,
            rule_rhs_depth: 2,
            gen: ExprGenConfig::default(),
        }
    }
}

fn sample_rules(
    sampler: &mut RuleSampler,
    n: usize,
    num_vars_range: (usize, usize),
    lhs_depth: usize,
    rhs_depth: usize,
    cfg: &ExprGenConfig,
    rng: &mut impl Rng,
) -> Result<Vec<AbstractRule>, ExprError> {
    (0..n)
        .map(|_| {
            let nv = rng.gen_range(num_vars_range.0..=num_vars_range.1);
            sampler.gen_abstract_rule(nv, lhs_depth, rhs_depth, cfg, rng)
        })
        .collect()
}

fn build_instances(
    rules: &[(u64, &AbstractRule)],
    counts: &[usize],
    d_p: usize,
    cfg: &ExprGenConfig,
    stream_seed: u64,
) -> Result<Vec<Example>, ExprError> {
    let mut specs = Vec::new();
    for ((rule_id, rule), &count) in rules.iter().zip(counts) {
        for ex in 0..count {
            specs.push((*rule_id, *rule, ex as u64));
        }
    }
    specs
        .par_iter()
        .map(|&(rule_id, rule, ex)| {
            let mut rng = stream_rng2(stream_seed, rule_id, ex);
            let host = gen_random_tree(cfg, cfg.depth, &mut rng);
            let grounded = ground_and_embed(rule, &host, d_p, cfg, &mut rng)?;
            Ok(Example {
                task_kind: TaskKind::ExprRewrite,
                instruction_text: rule.render(),
                input_text: render(&grounded.instance),
                target_text: render(&grounded.target),
                meta: Meta {
                    rule_id,
                    d: Some(cfg.depth),
                    d_p: Some(d_p),
                    ..Meta::default()
                },
            })
        })
        .collect()
}

pub fn gen_generalist_dataset(cfg: &GeneralistConfig) -> Result<SplitDataset, ExprError> {
    cfg.gen.validate()?;
    if cfg.num_rules == 0 || cfg.instances_total == 0 {
        return Err(ExprError::Invalid("num_rules and instances_total must be positive".into()));
    }
    let mut sampler = RuleSampler::new();
    let mut rule_rng = stream_rng(cfg.gen.seed, STREAM_RULES);
    let train_rules = sample_rules(
        &mut sampler,
        cfg.num_rules,
        cfg.rule_num_vars,
        cfg.rule_lhs_depth,
        cfg.rule_rhs_depth,
        &cfg.gen,
        &mut rule_rng,
    )?;
    let test_rules = sample_rules(
        &mut sampler,
        cfg.test_rules,
        cfg.rule_num_vars,
        cfg.rule_lhs_depth,
        cfg.rule_rhs_depth,
        &cfg.gen,
        &mut rule_rng,
    )?;

    let counts = crate::string_tasks::spread_evenly(cfg.instances_total, cfg.num_rules);
    let train_pairs: Vec<(u64, &AbstractRule)> =
        train_rules.iter().enumerate().map(|(i, r)| (i as u64, r)).collect();
    let train = build_instances(
        &train_pairs,
        &counts,
        cfg.gen.pattern_depth,
        &cfg.gen,
        derive_seed(cfg.gen.seed, STREAM_TRAIN),
    )?;

    let test_pairs: Vec<(u64, &AbstractRule)> = test_rules
        .iter()
        .enumerate()
        .map(|(i, r)| ((cfg.num_rules + i) as u64, r))
        .collect();
    let test_counts = vec![cfg.test_per_rule; cfg.test_rules];
    let test = build_instances(
        &test_pairs,
        &test_counts,
        cfg.gen.pattern_depth,
        &cfg.gen,
        derive_seed(cfg.gen.seed, STREAM_TEST),
    )?;
    Ok(SplitDataset::new(train, test))
}

/// Specialist setting: train on R_spec at a shallow pattern depth mixed with
/// R_diver instances, test on R_spec only at a deeper (out-of-distribution)
/// pattern depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialistMixtureConfig {
    pub spec_rules: Vec<AbstractRule>,
    pub diver_rules: Vec<AbstractRule>,
    pub spec_count: usize,
    pub diver_count: usize,
    pub d_p_train: usize,
    pub d_p_test: usize,
    pub test_count: usize,
}

pub fn gen_specialist_dataset(
    cfg: &SpecialistMixtureConfig,
    gen_cfg: &ExprGenConfig,
) -> Result<SplitDataset, ExprError> {
    gen_cfg.validate()?;
    if cfg.spec_rules.is_empty() {
        return Err(ExprError::Invalid("spec_rules is empty".into()));
    }
    if cfg.diver_count > 0 && cfg.diver_rules.is_empty() {
        return Err(ExprError::Invalid("diver_count > 0 but diver_rules is empty".into()));
    }
    if cfg.d_p_train >= cfg.d_p_test {
        return Err(ExprError::Invalid(format!(
            "d_p_train ({}) must be smaller than d_p_test ({})",
            cfg.d_p_train, cfg.d_p_test
        )));
    }
    let spec_hashes: HashSet<u64> =
        cfg.spec_rules.iter().map(|r| r.structural_hash()).collect();
    if cfg.diver_rules.iter().any(|r| spec_hashes.contains(&r.structural_hash())) {
        return Err(ExprError::Invalid("spec_rules and diver_rules overlap".into()));
    }

    let spec_pairs: Vec<(u64, &AbstractRule)> =
        cfg.spec_rules.iter().enumerate().map(|(i, r)| (i as u64, r)).collect();
    let diver_pairs: Vec<(u64, &AbstractRule)> = cfg
        .diver_rules
        .iter()
        .enumerate()
        .map(|(i, r)| ((cfg.spec_rules.len() + i) as u64, r))
        .collect();

    let spec_counts = crate::string_tasks::spread_evenly(cfg.spec_count, cfg.spec_rules.len());
    let mut train = build_instances(
        &spec_pairs,
        &spec_counts,
        cfg.d_p_train,
        gen_cfg,
        derive_seed(gen_cfg.seed, STREAM_TRAIN),
    )?;
    if cfg.diver_count > 0 {
        let diver_counts =
            crate::string_tasks::spread_evenly(cfg.diver_count, cfg.diver_rules.len());
        train.extend(build_instances(
            &diver_pairs,
            &diver_counts,
            cfg.d_p_train,
            gen_cfg,
            derive_seed(gen_cfg.seed, STREAM_TRAIN ^ 0xD1),
        )?);
    }

    let test_counts = crate::string_tasks::spread_evenly(cfg.test_count, cfg.spec_rules.len());
    let test = build_instances(
        &spec_pairs,
        &test_counts,
        cfg.d_p_test,
        gen_cfg,
        derive_seed(gen_cfg.seed, STREAM_TEST),
    )?;
    Ok(SplitDataset::new(train, test))
}

/// Fully self-contained specialist config (rules sampled, not supplied), used
/// by manifests so the dataset is regenerable from config + seed alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialistDatasetConfig {
    pub num_spec_rules: usize,
    pub num_diver_rules: usize,
    pub spec_count: usize,
    pub diver_count: usize,
    pub d_p_train: usize,
    pub d_p_test: usize,
    pub test_count: usize,
    pub rule_num_vars: (usize, usize),
    pub rule_lhs_depth: usize,
    pub rule_rhs_depth: usize,
    pub gen: ExprGenConfig,
}

pub fn gen_specialist_dataset_from_config(
    cfg: &SpecialistDatasetConfig,
) -> Result<SplitDataset, ExprError> {
    cfg.gen.validate()?;
    let mut sampler = RuleSampler::new();
    let mut rule_rng = stream_rng(cfg.gen.seed, STREAM_RULES);
    let spec_rules = sample_rules(
        &mut sampler,
        cfg.num_spec_rules,
        cfg.rule_num_vars,
        cfg.rule_lhs_depth,
        cfg.rule_rhs_depth,
        &cfg.gen,
        &mut rule_rng,
    )?;
    let diver_rules = sample_rules(
        &mut sampler,
        cfg.num_diver_rules,
        cfg.rule_num_vars,
        cfg.rule_lhs_depth,
        cfg.rule_rhs_depth,
        &cfg.gen,
        &mut rule_rng,
    )?;
    gen_specialist_dataset(
        &SpecialistMixtureConfig {
            spec_rules,
            diver_rules,
            spec_count: cfg.spec_count,
            diver_count: cfg.diver_count,
            d_p_train: cfg.d_p_train,
            d_p_test: cfg.d_p_test,
            test_count: cfg.test_count,
        },
        &cfg.gen,
    )
}

#[cfg(test)]
mod tests {
    use super::super::{parse, parse_rule};
    use super::*;
    use crate::dataset::SplitDataset as DS;

    fn cfg() -> ExprGenConfig {
        ExprGenConfig::default()
    }

    #[test]
    fn depth_zero_trees_are_leaves() {
        let c = cfg();
        let mut rng = stream_rng(0, 0);
        for _ in 0..100 {
            let e = gen_random_tree(&c, 0, &mut rng);
            assert!(matches!(e, Expr::Var(_) | Expr::Const(_)));
        }
    }

    #[test]
    fn trees_hit_their_requested_depth_exactly() {
        let c = cfg();
        let mut rng = stream_rng(0, 1);
        for depth in 0..=5 {
            for _ in 0..200 {
                let e = gen_random_tree(&c, depth, &mut rng);
                assert_eq!(e.depth(), depth);
            }
        }
    }

    #[test]
    fn depth_three_node_counts_stay_in_bounds() {
        let c = cfg();
        let mut rng = stream_rng(0, 2);
        for _ in 0..500 {
            let e = gen_random_tree(&c, 3, &mut rng);
            let n = e.node_count();
            assert!((4..=15).contains(&n), "node count {n}");
        }
    }

    #[test]
    fn operator_frequencies_match_weights() {
        let mut c = cfg();
        c.weights = OpWeights { pow: 1.0, log: 0.5, cos: 0.5, sin: 0.5, neg: 0.5, ..OpWeights::default() };
        let mut rng = stream_rng(0, 3);
        let mut counts = [0usize; 9];
        let mut total = 0usize;
        fn tally(e: &Expr, counts: &mut [usize; 9], total: &mut usize) {
            let idx = match e {
                Expr::Bin { op: BinOp::Add, .. } => Some(0),
                Expr::Bin { op: BinOp::Sub, .. } => Some(1),
                Expr::Bin { op: BinOp::Mul, .. } => Some(2),
                Expr::Bin { op: BinOp::Div, .. } => Some(3),
                Expr::Pow { .. } => Some(4),
                Expr::Unary { op: UnaryOp::Log, .. } => Some(5),
                Expr::Unary { op: UnaryOp::Cos, .. } => Some(6),
                Expr::Unary { op: UnaryOp::Sin, .. } => Some(7),
                Expr::Unary { op: UnaryOp::Neg, .. } => Some(8),
                _ => None,
            };
            if let Some(i) = idx {
                counts[i] += 1;
                *total += 1;
            }
            match e {
                Expr::Bin { lhs, rhs, .. } => {
                    tally(lhs, counts, total);
                    tally(rhs, counts, total);
                }
                Expr::Pow { base, .. } => tally(base, counts, total),
                Expr::Unary { arg, .. } => tally(arg, counts, total),
                _ => {}
            }
        }
        for _ in 0..10_000 {
            let e = gen_random_tree(&c, 2, &mut rng);
            tally(&e, &mut counts, &mut total);
        }
        let w = [1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.5];
        let wsum: f64 = w.iter().sum();
        for i in 0..9 {
            let p = w[i] / wsum;
            let freq = counts[i] as f64 / total as f64;
            let sigma = (p * (1.0 - p) / total as f64).sqrt();
            assert!(
                (freq - p).abs() < 3.0 * sigma,
                "kind {i}: freq {freq:.4} expected {p:.4} (n = {total})"
            );
        }
    }

    #[test]
    fn difference_of_squares_is_representable_and_roundtrips() {
        let rule = parse_rule("dos", "((a^2)-(b^2))=((a+b)*(a-b))").unwrap();
        let text = rule.render();
        let back = parse_rule("dos", &text).unwrap();
        assert_eq!(back.lhs, rule.lhs);
        assert_eq!(back.rhs, rule.rhs);
    }

    #[test]
    fn abstract_rules_use_all_their_variables() {
        let c = cfg();
        let mut sampler = RuleSampler::new();
        let mut rng = stream_rng(1, 0);
        for i in 0..200 {
            let nv = 1 + (i % 3);
            let rule = sampler.gen_abstract_rule(nv, 2, 2, &c, &mut rng).unwrap();
            assert_eq!(rule.lhs.rule_vars().len(), nv, "rule {}", rule.render());
            assert!(rule.rhs.rule_vars().is_subset(&rule.lhs.rule_vars()));
        }
    }

    #[test]
    fn smallest_rule_shape_generates() {
        let c = cfg();
        let mut sampler = RuleSampler::new();
        let mut rng = stream_rng(1, 1);
        let rule = sampler.gen_abstract_rule(1, 1, 1, &c, &mut rng).unwrap();
        assert_eq!(rule.lhs.rule_vars().len(), 1);
    }

    #[test]
    fn generated_rules_are_pairwise_distinct() {
        let c = cfg();
        let mut sampler = RuleSampler::new();
        let mut rng = stream_rng(1, 2);
        let mut hashes = HashSet::new();
        for _ in 0..1000 {
            let rule = sampler.gen_abstract_rule(2, 2, 2, &c, &mut rng).unwrap();
            assert!(hashes.insert(rule.structural_hash()));
        }
    }

    #[test]
    fn rule_capacity_error_on_tiny_grammar() {
        // Depth-1 lhs and rhs over one variable and a single constant admit
        // only a handful of distinct rules.
        let mut c = cfg();
        c.const_range = (1, 1);
        c.weights = OpWeights {
            add: 1.0,
            sub: 0.0,
            mul: 0.0,
            div: 0.0,
            pow: 0.0,
            log: 0.0,
            cos: 0.0,
            sin: 0.0,
            neg: 0.0,
            leaf_var: 1.0,
            leaf_const: 1.0,
        };
        let mut sampler = RuleSampler::new();
        let mut rng = stream_rng(1, 3);
        let mut failed = false;
        for _ in 0..100 {
            if sampler.gen_abstract_rule(1, 1, 1, &c, &mut rng).is_err() {
                failed = true;
                break;
            }
        }
        assert!(failed, "expected the sampler to exhaust the tiny grammar");
    }

    #[test]
    fn ground_and_embed_depth_zero_binds_leaves() {
        let c = cfg();
        let rule = parse_rule("dos", "((a^2)-(b^2))=((a+b)*(a-b))").unwrap();
        let mut rng = stream_rng(2, 0);
        let host = gen_random_tree(&c, 2, &mut rng);
        let grounded = ground_and_embed(&rule, &host, 0, &c, &mut rng).unwrap();
        for binding in grounded.grounding.values() {
            assert_eq!(binding.depth(), 0);
        }
        let out = apply_abstract_rule(&grounded.instance, &rule);
        assert!(out.applied);
        assert_eq!(out.output, grounded.target);
    }

    #[test]
    fn ground_and_embed_is_oracle_consistent_at_scale() {
        let c = cfg();
        let mut sampler = RuleSampler::new();
        let mut rng = stream_rng(2, 1);
        for i in 0..1000 {
            let rule = sampler.gen_abstract_rule(1 + (i % 2), 2, 1, &c, &mut rng).unwrap();
            let host = gen_random_tree(&c, 3, &mut rng);
            let grounded = ground_and_embed(&rule, &host, 1, &c, &mut rng).unwrap();
            let out = apply_abstract_rule(&grounded.instance, &rule);
            assert!(out.applied);
            assert_eq!(out.output, grounded.target, "rule {}", rule.render());
        }
    }

    #[test]
    fn render_parse_roundtrip_on_random_trees() {
        let c = cfg();
        let mut rng = stream_rng(2, 2);
        for _ in 0..10_000 {
            let depth = rng.gen_range(0..=6);
            let e = gen_random_tree(&c, depth, &mut rng);
            let text = render(&e);
            assert_eq!(parse(&text).unwrap(), e, "text {text}");
        }
    }

    fn generalist_cfg() -> GeneralistConfig {
        GeneralistConfig {
            num_rules: 7,
            instances_total: 50,
            test_rules: 3,
            test_per_rule: 4,
            gen: ExprGenConfig { depth: 2, pattern_depth: 1, ..ExprGenConfig::default() },
            ..GeneralistConfig::default()
        }
    }

    #[test]
    fn generalist_dataset_shape_and_self_consistency() {
        let data = gen_generalist_dataset(&generalist_cfg()).unwrap();
        assert_eq!(data.train.len(), 50);
        assert_eq!(data.test.len(), 12);
        // Even spread with remainder on the lowest rule ids: 50 over 7.
        let mut by_rule = std::collections::BTreeMap::new();
        for ex in &data.train {
            *by_rule.entry(ex.meta.rule_id).or_insert(0usize) += 1;
        }
        assert_eq!(by_rule.values().copied().collect::<Vec<_>>(), vec![8, 7, 7, 7, 7, 7, 7]);
        assert!(DS::rule_ids(&data.train).is_disjoint(&DS::rule_ids(&data.test)));
        // Re-run the oracle from the serialized texts alone.
        for ex in data.train.iter().chain(&data.test) {
            let rule = parse_rule("x", &ex.instruction_text).unwrap();
            let instance = parse(&ex.input_text).unwrap();
            let out = apply_abstract_rule(&instance, &rule);
            assert!(out.applied);
            assert_eq!(render(&out.output), ex.target_text);
        }
    }

    #[test]
    fn generalist_single_rule_puts_all_instances_on_it() {
        let mut c = generalist_cfg();
        c.num_rules = 1;
        c.instances_total = 20;
        let data = gen_generalist_dataset(&c).unwrap();
        assert!(data.train.iter().all(|e| e.meta.rule_id == 0));
        assert_eq!(data.train.len(), 20);
    }

    fn specialist_cfg() -> SpecialistDatasetConfig {
        SpecialistDatasetConfig {
            num_spec_rules: 3,
            num_diver_rules: 4,
            spec_count: 30,
            diver_count: 20,
            d_p_train: 1,
            d_p_test: 2,
            test_count: 12,
            rule_num_vars: (1, 2),
            rule_lhs_depth: 2,
            rule_rhs_depth: 1,
            gen: ExprGenConfig { depth: 2, ..ExprGenConfig::default() },
        }
    }

    #[test]
    fn specialist_dataset_structure() {
        let data = gen_specialist_dataset_from_config(&specialist_cfg()).unwrap();
        assert_eq!(data.train.len(), 50);
        assert_eq!(data.test.len(), 12);
        let spec_ids: HashSet<u64> = (0..3).collect();
        for ex in &data.train {
            assert_eq!(ex.meta.d_p, Some(1));
        }
        for ex in &data.test {
            assert_eq!(ex.meta.d_p, Some(2));
            assert!(spec_ids.contains(&ex.meta.rule_id), "test must stay on spec rules");
        }
        // Diver rules appear in training.
        assert!(data.train.iter().any(|e| e.meta.rule_id >= 3));
    }

    #[test]
    fn specialist_pure_baseline_has_no_diver_instances() {
        let mut c = specialist_cfg();
        c.diver_count = 0;
        c.num_diver_rules = 0;
        let data = gen_specialist_dataset_from_config(&c).unwrap();
        assert!(data.train.iter().all(|e| e.meta.rule_id < 3));
    }

    #[test]
    fn specialist_rejects_bad_depth_ordering() {
        let mut c = specialist_cfg();
        c.d_p_train = 2;
        c.d_p_test = 2;
        assert!(matches!(
            gen_specialist_dataset_from_config(&c),
            Err(ExprError::Invalid(_))
        ));
    }
}
