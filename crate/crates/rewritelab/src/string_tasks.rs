//! Ground-truth oracle and dataset generators for the string-replacement
//! experiments: basic replacement, conditional (no-op) replacement, power-law
//! instruction frequencies, and constrained semantic pattern families.
//!
//! All generators are pure functions of `(config, seed)`. Randomness is
//! derived per `(rule index, example index)` via [`crate::rng`], so example
//! generation parallelizes over the index space without changing output.

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Example, Meta, SplitDataset, TaskKind};
use crate::rng::{derive_seed, stream_rng, stream_rng2};

/// Rejection-sampling budget for [`gen_input_without_pattern`].
pub const DEFAULT_MAX_TRIES: usize = 1000;

// Stream tags for seed derivation.
const STREAM_RULES: u64 = 0x01;
const STREAM_TRAIN: u64 = 0x02;
const STREAM_TEST: u64 = 0x03;
const STREAM_COUNTS: u64 = 0x04;

#[derive(Debug, Error, PartialEq)]
pub enum StringTaskError {
    #[error("replacement rule src must be non-empty")]
    EmptySrc,
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("input_len {input_len} is shorter than the pattern ({pattern_len} symbols)")]
    PatternTooLong { pattern_len: usize, input_len: usize },
    #[error("cannot generate a length-{input_len} string avoiding pattern {pattern:?}")]
    Unsatisfiable { pattern: String, input_len: usize },
    #[error(
        "alphabet of size {alphabet} cannot supply {needed} distinct patterns of length {pattern_len}"
    )]
    Capacity { needed: usize, alphabet: usize, pattern_len: usize },
}

/// A single rewrite instruction `src -> dst`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReplaceRule {
    pub src: String,
    pub dst: String,
}

impl ReplaceRule {
    pub fn new(src: &str, dst: &str) -> Result<ReplaceRule, StringTaskError> {
        if src.is_empty() {
            return Err(StringTaskError::EmptySrc);
        }
        Ok(ReplaceRule { src: src.to_string(), dst: dst.to_string() })
    }

    /// The serialized instruction form, `SRC->DST`. The arrow characters are
    /// excluded from data alphabets so this is unambiguous.
    pub fn render(&self) -> String {
        format!("{}->{}", self.src, self.dst)
    }

    pub fn parse(text: &str) -> Result<ReplaceRule, StringTaskError> {
        let at = text
            .find("->")
            .ok_or_else(|| StringTaskError::Invalid(format!("rule {text:?} lacks '->'")))?;
        ReplaceRule::new(&text[..at], &text[at + 2..])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteOutcome {
    pub output: String,
    pub applied: bool,
}

/// Replaces the leftmost occurrence of `rule.src` in `input` with `rule.dst`.
/// If the pattern does not occur the input is returned unchanged with
/// `applied = false`.
pub fn apply_replace(input: &str, rule: &ReplaceRule) -> Result<RewriteOutcome, StringTaskError> {
    if rule.src.is_empty() {
        return Err(StringTaskError::EmptySrc);
    }
    match input.find(&rule.src) {
        Some(at) => {
            let mut output = String::with_capacity(input.len() + rule.dst.len());
            output.push_str(&input[..at]);
            output.push_str(&rule.dst);
            output.push_str(&input[at + rule.src.len()..]);
            Ok(RewriteOutcome { output, applied: true })
        }
        None => Ok(RewriteOutcome { output: input.to_string(), applied: false }),
    }
}

fn validate_alphabet(alphabet: &[char]) -> Result<(), StringTaskError> {
    if alphabet.is_empty() {
        return Err(StringTaskError::Invalid("alphabet is empty".into()));
    }
    let mut seen = HashSet::new();
    for &c in alphabet {
        if c == '-' || c == '>' || c.is_whitespace() || c.is_control() {
            return Err(StringTaskError::Invalid(format!(
                "alphabet symbol {c:?} collides with the rule/template syntax"
            )));
        }
        if !seen.insert(c) {
            return Err(StringTaskError::Invalid(format!("alphabet repeats symbol {c:?}")));
        }
    }
    Ok(())
}

fn random_string(len: usize, alphabet: &[char], rng: &mut impl Rng) -> String {
    (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
}

/// Number of distinct strings of `len` symbols over the alphabet, saturating.
fn string_capacity(alphabet_len: usize, len: usize) -> usize {
    (alphabet_len as u128)
        .checked_pow(len as u32)
        .map_or(usize::MAX, |n| usize::try_from(n).unwrap_or(usize::MAX))
}

/// Generates a uniformly random string of `input_len` symbols, then
/// overwrites a uniformly chosen window with `pattern`, so the result always
/// contains the pattern. Accidental extra occurrences are permitted; the
/// oracle rewrites the leftmost one.
pub fn gen_input_with_pattern(
    pattern: &str,
    input_len: usize,
    alphabet: &[char],
    rng: &mut impl Rng,
) -> Result<String, StringTaskError> {
    let plen = pattern.chars().count();
    if input_len < plen {
        return Err(StringTaskError::PatternTooLong { pattern_len: plen, input_len });
    }
    let mut chars: Vec<char> = (0..input_len)
        .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
        .collect();
    let start = rng.gen_range(0..=input_len - plen);
    for (i, c) in pattern.chars().enumerate() {
        chars[start + i] = c;
    }
    Ok(chars.into_iter().collect())
}

/// Generates a length-`input_len` string that does not contain `pattern`.
/// Rejection-samples up to `max_tries`, then falls back to corrupting one
/// symbol inside each remaining occurrence. Errors once the constraint is
/// unsatisfiable (e.g. single-letter alphabet with a pattern over it).
pub fn gen_input_without_pattern(
    pattern: &str,
    input_len: usize,
    alphabet: &[char],
    rng: &mut impl Rng,
    max_tries: usize,
) -> Result<String, StringTaskError> {
    let plen = pattern.chars().count();
    if input_len < plen {
        // Too short to contain the pattern at all.
        return Ok(random_string(input_len, alphabet, rng));
    }
    let mut candidate = String::new();
    for _ in 0..max_tries.max(1) {
        candidate = random_string(input_len, alphabet, rng);
        if !candidate.contains(pattern) {
            return Ok(candidate);
        }
    }
    let unsat = || StringTaskError::Unsatisfiable { pattern: pattern.to_string(), input_len };
    let mut chars: Vec<char> = candidate.chars().collect();
    for _ in 0..4 * input_len.max(1) {
        let s: String = chars.iter().collect();
        let Some(at) = s.find(pattern) else {
            return Ok(s);
        };
        let at = s[..at].chars().count();
        let idx = at + rng.gen_range(0..plen);
        let others: Vec<char> =
            alphabet.iter().copied().filter(|&c| c != chars[idx]).collect();
        if others.is_empty() {
            return Err(unsat());
        }
        chars[idx] = others[rng.gen_range(0..others.len())];
    }
    Err(unsat())
}

/// Shape parameters shared by the string-task generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringTaskBase {
    pub input_len: usize,
    pub pattern_len: usize,
    /// Inclusive range the replacement length is drawn from. The default is
    /// length-preserving, `(pattern_len, pattern_len)`.
    pub dst_len_range: (usize, usize),
    pub alphabet: Vec<char>,
    /// Number of fresh rules held out for the test split.
    pub test_instructions: usize,
    /// Examples generated per held-out rule.
    pub test_per_instruction: usize,
}

pub fn default_alphabet() -> Vec<char> {
    ('a'..='z').collect()
}

impl Default for StringTaskBase {
    fn default() -> Self {
        StringTaskBase::with_lens(50, 20)
    }
}

impl StringTaskBase {
    pub fn with_lens(input_len: usize, pattern_len: usize) -> StringTaskBase {
        StringTaskBase {
            input_len,
            pattern_len,
            dst_len_range: (pattern_len, pattern_len),
            alphabet: default_alphabet(),
            test_instructions: 100,
            test_per_instruction: 10,
        }
    }

    fn validate(&self) -> Result<(), StringTaskError> {
        validate_alphabet(&self.alphabet)?;
        if self.pattern_len == 0 {
            return Err(StringTaskError::Invalid("pattern_len must be positive".into()));
        }
        if self.pattern_len >= self.input_len {
            return Err(StringTaskError::Invalid(format!(
                "pattern_len {} must be smaller than input_len {}",
                self.pattern_len, self.input_len
            )));
        }
        if self.dst_len_range.0 > self.dst_len_range.1 || self.dst_len_range.0 == 0 {
            return Err(StringTaskError::Invalid(format!(
                "bad dst_len_range {:?}",
                self.dst_len_range
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasicTaskConfig {
    /// I: number of distinct training rules.
    pub num_instructions: usize,
    /// S: examples per training rule.
    pub examples_per_instruction: usize,
    #[serde(flatten)]
    pub base: StringTaskBase,
    pub seed: u64,
}

impl BasicTaskConfig {
    fn validate(&self) -> Result<(), StringTaskError> {
        self.base.validate()?;
        if self.num_instructions == 0 || self.examples_per_instruction == 0 {
            return Err(StringTaskError::Invalid(
                "num_instructions and examples_per_instruction must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoOpConfig {
    #[serde(flatten)]
    pub base: BasicTaskConfig,
    /// Fraction of examples whose instruction cannot be satisfied. The paper
    /// sweeps 0.1..=0.5; 0.0 degenerates to the basic task.
    pub no_op_frac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawConfig {
    /// Shape parameter of the density f(x) = alpha * x^(alpha - 1) on (0, 1].
    pub alpha: f64,
    pub num_instructions: usize,
    pub total_examples: usize,
}

/// Manifest-level bundle for power-law datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawDatasetConfig {
    pub power_law: PowerLawConfig,
    pub base: StringTaskBase,
    pub seed: u64,
}

/// Draws one raw power-law weight per instruction via the inverse CDF
/// x = u^(1/alpha); the weights are distributed with CDF x^alpha on (0, 1].
pub fn powerlaw_raw_weights(
    alpha: f64,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<f64>, StringTaskError> {
    if !(alpha > 0.0) {
        return Err(StringTaskError::Invalid(format!("alpha must be positive, got {alpha}")));
    }
    Ok((0..n)
        .map(|_| {
            let u: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
            u.powf(1.0 / alpha)
        })
        .collect())
}

/// Converts nonnegative weights to integer counts summing exactly to `total`
/// by the largest-remainder method. Ties go to the lower index.
pub fn largest_remainder_counts(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 || weights.is_empty() {
        let mut counts = vec![0; weights.len()];
        for i in 0..total.min(weights.len()) {
            counts[i] = total / weights.len() + usize::from(i < total % weights.len());
        }
        return counts;
    }
    let mut counts: Vec<usize> = Vec::with_capacity(weights.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(weights.len());
    let mut assigned = 0usize;
    for (i, &w) in weights.iter().enumerate() {
        let share = w / sum * total as f64;
        let floor = share.floor() as usize;
        counts.push(floor);
        assigned += floor;
        remainders.push((i, share - floor as f64));
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for &(i, _) in remainders.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Per-instruction example counts under a power-law weight draw; the counts
/// sum exactly to `cfg.total_examples`.
pub fn sample_powerlaw_counts(
    cfg: &PowerLawConfig,
    rng: &mut impl Rng,
) -> Result<Vec<usize>, StringTaskError> {
    if cfg.num_instructions == 0 || cfg.total_examples == 0 {
        return Err(StringTaskError::Invalid(
            "num_instructions and total_examples must be positive".into(),
        ));
    }
    let weights = powerlaw_raw_weights(cfg.alpha, cfg.num_instructions, rng)?;
    Ok(largest_remainder_counts(&weights, cfg.total_examples))
}

/// Two-sided Kolmogorov–Smirnov statistic of `sorted` against `cdf`.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(((i + 1) as f64 / n - f).abs());
        d = d.max((f - i as f64 / n).abs());
    }
    d
}

/// Asymptotic two-sided KS critical value at significance 0.01.
pub fn ks_critical_001(n: usize) -> f64 {
    1.62762 / (n as f64).sqrt()
}

/// Spreads `total` items over `bins`, remainder to the lowest indices.
pub fn spread_evenly(total: usize, bins: usize) -> Vec<usize> {
    (0..bins).map(|i| total / bins + usize::from(i < total % bins)).collect()
}

/// Samples `n` rules with pairwise-distinct src patterns. Replacement lengths
/// are drawn uniformly from `dst_len_range`.
fn sample_rules(
    n: usize,
    base: &StringTaskBase,
    rng: &mut impl Rng,
) -> Result<Vec<ReplaceRule>, StringTaskError> {
    let capacity = string_capacity(base.alphabet.len(), base.pattern_len);
    if n > capacity {
        return Err(StringTaskError::Capacity {
            needed: n,
            alphabet: base.alphabet.len(),
            pattern_len: base.pattern_len,
        });
    }
    let mut seen: HashSet<String> = HashSet::with_capacity(n);
    let mut rules = Vec::with_capacity(n);
    let max_attempts = 50 * n + 1000;
    let mut attempts = 0;
    while rules.len() < n {
        attempts += 1;
        if attempts > max_attempts {
            return Err(StringTaskError::Capacity {
                needed: n,
                alphabet: base.alphabet.len(),
                pattern_len: base.pattern_len,
            });
        }
        let src = random_string(base.pattern_len, &base.alphabet, rng);
        if !seen.insert(src.clone()) {
            continue;
        }
        let dst_len = rng.gen_range(base.dst_len_range.0..=base.dst_len_range.1);
        let dst = random_string(dst_len, &base.alphabet, rng);
        rules.push(ReplaceRule { src, dst });
    }
    Ok(rules)
}

struct ExampleSpec<'a> {
    task_kind: TaskKind,
    rule_id: u64,
    rule: &'a ReplaceRule,
    example_index: u64,
    noop: bool,
    meta_extra: Meta,
}

fn build_example(
    spec: &ExampleSpec<'_>,
    base: &StringTaskBase,
    stream_seed: u64,
) -> Result<Example, StringTaskError> {
    let mut rng = stream_rng2(stream_seed, spec.rule_id, spec.example_index);
    let input = if spec.noop {
        gen_input_without_pattern(
            &spec.rule.src,
            base.input_len,
            &base.alphabet,
            &mut rng,
            DEFAULT_MAX_TRIES,
        )?
    } else {
        gen_input_with_pattern(&spec.rule.src, base.input_len, &base.alphabet, &mut rng)?
    };
    let outcome = apply_replace(&input, spec.rule)?;
    debug_assert_eq!(outcome.applied, !spec.noop);
    let mut meta = spec.meta_extra.clone();
    meta.rule_id = spec.rule_id;
    Ok(Example {
        task_kind: spec.task_kind,
        instruction_text: spec.rule.render(),
        input_text: input,
        target_text: outcome.output,
        meta,
    })
}

fn build_examples(
    specs: Vec<ExampleSpec<'_>>,
    base: &StringTaskBase,
    stream_seed: u64,
) -> Result<Vec<Example>, StringTaskError> {
    specs
        .par_iter()
        .map(|spec| build_example(spec, base, stream_seed))
        .collect()
}

/// Generates the basic replacement dataset: `I x S` training examples whose
/// inputs always contain the rule pattern, plus a test split built from fresh
/// rules whose src strings never occur among the training rules.
pub fn gen_basic_dataset(cfg: &BasicTaskConfig) -> Result<SplitDataset, StringTaskError> {
    gen_fixed_presence_dataset(cfg, TaskKind::BasicReplace, None)
}

/// Generates the conditional-replacement dataset: exactly
/// `round(no_op_frac * total)` examples per split are no-ops (the pattern is
/// absent and the target equals the input), spread as evenly as possible
/// across rules. Every example carries `meta.is_noop`.
pub fn gen_noop_dataset(cfg: &NoOpConfig) -> Result<SplitDataset, StringTaskError> {
    if !(0.0..=1.0).contains(&cfg.no_op_frac) {
        return Err(StringTaskError::Invalid(format!(
            "no_op_frac must be in [0, 1], got {}",
            cfg.no_op_frac
        )));
    }
    gen_fixed_presence_dataset(&cfg.base, TaskKind::CondReplace, Some(cfg.no_op_frac))
}

fn gen_fixed_presence_dataset(
    cfg: &BasicTaskConfig,
    task_kind: TaskKind,
    noop_frac: Option<f64>,
) -> Result<SplitDataset, StringTaskError> {
    cfg.validate()?;
    let base = &cfg.base;
    let n_train_rules = cfg.num_instructions;
    let n_test_rules = base.test_instructions;
    let mut rule_rng = stream_rng(cfg.seed, STREAM_RULES);
    let rules = sample_rules(n_train_rules + n_test_rules, base, &mut rule_rng)?;

    let make_split = |rule_ids: std::ops::Range<usize>,
                      per_rule: usize,
                      stream: u64|
     -> Result<Vec<Example>, StringTaskError> {
        let n_rules = rule_ids.len();
        let total = n_rules * per_rule;
        let noop_quota = match noop_frac {
            Some(frac) => {
                let noops = (frac * total as f64).round() as usize;
                spread_evenly(noops, n_rules)
            }
            None => vec![0; n_rules],
        };
        let mut specs = Vec::with_capacity(total);
        for (slot, rule_id) in rule_ids.enumerate() {
            for ex in 0..per_rule {
                specs.push(ExampleSpec {
                    task_kind,
                    rule_id: rule_id as u64,
                    rule: &rules[rule_id],
                    example_index: ex as u64,
                    noop: ex < noop_quota[slot],
                    meta_extra: Meta {
                        is_noop: noop_frac.map(|_| ex < noop_quota[slot]),
                        ..Meta::default()
                    },
                });
            }
        }
        build_examples(specs, base, derive_seed(cfg.seed, stream))
    };

    let train = make_split(0..n_train_rules, cfg.examples_per_instruction, STREAM_TRAIN)?;
    let test = make_split(
        n_train_rules..n_train_rules + n_test_rules,
        base.test_per_instruction,
        STREAM_TEST,
    )?;
    Ok(SplitDataset::new(train, test))
}

/// Power-law dataset: per-rule training counts come from
/// [`sample_powerlaw_counts`]; everything else matches the basic generator.
/// `meta.rule_count` records each rule's planned count.
pub fn gen_powerlaw_dataset(
    plc: &PowerLawConfig,
    base: &StringTaskBase,
    seed: u64,
) -> Result<SplitDataset, StringTaskError> {
    base.validate()?;
    let mut count_rng = stream_rng(seed, STREAM_COUNTS);
    let counts = sample_powerlaw_counts(plc, &mut count_rng)?;

    let n_train_rules = plc.num_instructions;
    let n_test_rules = base.test_instructions;
    let mut rule_rng = stream_rng(seed, STREAM_RULES);
    let rules = sample_rules(n_train_rules + n_test_rules, base, &mut rule_rng)?;

    let mut specs = Vec::with_capacity(plc.total_examples);
    for (rule_id, &count) in counts.iter().enumerate() {
        for ex in 0..count {
            specs.push(ExampleSpec {
                task_kind: TaskKind::BasicReplace,
                rule_id: rule_id as u64,
                rule: &rules[rule_id],
                example_index: ex as u64,
                noop: false,
                meta_extra: Meta {
                    alpha: Some(plc.alpha),
                    rule_count: Some(count),
                    ..Meta::default()
                },
            });
        }
    }
    let train = build_examples(specs, base, derive_seed(seed, STREAM_TRAIN))?;

    let mut test_specs = Vec::new();
    for rule_id in n_train_rules..n_train_rules + n_test_rules {
        for ex in 0..base.test_per_instruction {
            test_specs.push(ExampleSpec {
                task_kind: TaskKind::BasicReplace,
                rule_id: rule_id as u64,
                rule: &rules[rule_id],
                example_index: ex as u64,
                noop: false,
                meta_extra: Meta { alpha: Some(plc.alpha), ..Meta::default() },
            });
        }
    }
    let test = build_examples(test_specs, base, derive_seed(seed, STREAM_TEST))?;
    Ok(SplitDataset::new(train, test))
}

/// Constrained pattern families and their constraint level k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticKind {
    RepeatedChars,
    Periodic,
    Mirrored,
}

impl SemanticKind {
    pub fn name(self) -> &'static str {
        match self {
            SemanticKind::RepeatedChars => "repeated_chars",
            SemanticKind::Periodic => "periodic",
            SemanticKind::Mirrored => "mirrored",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticFamily {
    pub kind: SemanticKind,
    pub k: usize,
}

/// Builds the family pattern for a given unit string:
/// repeated characters (`abc`, k=3 -> `aaabbbccc`), periodic (`abc`, k=2 ->
/// `abcabc`), mirrored (`abc`, k=3 -> `abccbaabc`, alternating the unit with
/// its reverse).
pub fn pattern_from_unit(kind: SemanticKind, unit: &str, k: usize) -> String {
    match kind {
        SemanticKind::RepeatedChars => {
            let mut out = String::with_capacity(unit.len() * k);
            for c in unit.chars() {
                for _ in 0..k {
                    out.push(c);
                }
            }
            out
        }
        SemanticKind::Periodic => unit.repeat(k),
        SemanticKind::Mirrored => {
            let rev: String = unit.chars().rev().collect();
            let mut out = String::with_capacity(unit.len() * k);
            for segment in 0..k {
                out.push_str(if segment % 2 == 0 { unit } else { &rev });
            }
            out
        }
    }
}

/// Draws a random unit of `unit_len` symbols and expands it per the family
/// law. `RepeatedChars` units have distinct adjacent symbols so the emitted
/// pattern's maximal runs all have length exactly k.
pub fn gen_constrained_pattern(
    family: SemanticFamily,
    unit_len: usize,
    alphabet: &[char],
    rng: &mut impl Rng,
) -> Result<String, StringTaskError> {
    if unit_len == 0 || family.k == 0 {
        return Err(StringTaskError::Invalid("unit_len and k must be positive".into()));
    }
    let unit = match family.kind {
        SemanticKind::RepeatedChars => {
            if unit_len > 1 && alphabet.len() < 2 {
                return Err(StringTaskError::Invalid(
                    "repeated-chars units need at least two symbols".into(),
                ));
            }
            let mut unit = String::with_capacity(unit_len);
            let mut prev: Option<char> = None;
            for _ in 0..unit_len {
                let choices: Vec<char> =
                    alphabet.iter().copied().filter(|&c| Some(c) != prev).collect();
                let c = choices[rng.gen_range(0..choices.len())];
                unit.push(c);
                prev = Some(c);
            }
            unit
        }
        _ => random_string(unit_len, alphabet, rng),
    };
    Ok(pattern_from_unit(family.kind, &unit, family.k))
}

/// True iff `p` consists of maximal runs of length exactly `k`.
pub fn is_repeated_chars(p: &str, k: usize) -> bool {
    let chars: Vec<char> = p.chars().collect();
    if chars.is_empty() || k == 0 {
        return false;
    }
    let mut i = 0;
    while i < chars.len() {
        let mut run = 1;
        while i + run < chars.len() && chars[i + run] == chars[i] {
            run += 1;
        }
        if run != k {
            return false;
        }
        i += run;
    }
    true
}

/// True iff `p` is some unit repeated exactly `k` times.
pub fn is_periodic(p: &str, k: usize) -> bool {
    let chars: Vec<char> = p.chars().collect();
    if k == 0 || chars.is_empty() || chars.len() % k != 0 {
        return false;
    }
    let u = chars.len() / k;
    chars.chunks(u).all(|chunk| chunk == &chars[..u])
}

/// True iff `p` is k alternating segments `unit, reverse(unit), unit, ...`.
pub fn is_mirrored(p: &str, k: usize) -> bool {
    let chars: Vec<char> = p.chars().collect();
    if k == 0 || chars.is_empty() || chars.len() % k != 0 {
        return false;
    }
    let u = chars.len() / k;
    let unit = &chars[..u];
    let rev: Vec<char> = unit.iter().rev().copied().collect();
    chars
        .chunks(u)
        .enumerate()
        .all(|(i, chunk)| chunk == if i % 2 == 0 { unit } else { &rev[..] })
}

pub fn family_predicate(kind: SemanticKind, p: &str, k: usize) -> bool {
    match kind {
        SemanticKind::RepeatedChars => is_repeated_chars(p, k),
        SemanticKind::Periodic => is_periodic(p, k),
        SemanticKind::Mirrored => is_mirrored(p, k),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: SemanticFamily,
    pub instructions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticConfig {
    pub train_families: Vec<FamilySpec>,
    pub test_families: Vec<FamilySpec>,
    pub examples_per_instruction: usize,
    pub test_per_instruction: usize,
    pub input_len: usize,
    pub pattern_len: usize,
    pub alphabet: Vec<char>,
    /// Apply the family constraint to the replacement string too (with a
    /// freshly drawn unit). When false the replacement is unconstrained
    /// uniform of the same length.
    pub constrain_dst: bool,
    pub seed: u64,
}

struct SemanticRule {
    rule: ReplaceRule,
    family: SemanticFamily,
    unit: String,
}

fn sample_semantic_rules(
    cfg: &SemanticConfig,
    specs: &[FamilySpec],
    seen_src: &mut HashSet<String>,
    forbidden_dst: &HashSet<String>,
    rng: &mut impl Rng,
) -> Result<Vec<SemanticRule>, StringTaskError> {
    let mut out = Vec::new();
    for spec in specs {
        let SemanticFamily { kind, k } = spec.family;
        if k == 0 || cfg.pattern_len % k != 0 {
            return Err(StringTaskError::Invalid(format!(
                "pattern_len {} is not divisible by k={k}",
                cfg.pattern_len
            )));
        }
        let unit_len = cfg.pattern_len / k;
        for _ in 0..spec.instructions {
            let mut attempts = 0;
            let (pattern, unit) = loop {
                attempts += 1;
                if attempts > 10_000 {
                    return Err(StringTaskError::Capacity {
                        needed: spec.instructions,
                        alphabet: cfg.alphabet.len(),
                        pattern_len: cfg.pattern_len,
                    });
                }
                let p = gen_constrained_pattern(spec.family, unit_len, &cfg.alphabet, rng)?;
                if seen_src.insert(p.clone()) {
                    let unit: String = p.chars().take(unit_len).collect();
                    break (p, unit);
                }
            };
            let dst = {
                let mut attempts = 0;
                loop {
                    attempts += 1;
                    if attempts > 10_000 {
                        return Err(StringTaskError::Capacity {
                            needed: spec.instructions,
                            alphabet: cfg.alphabet.len(),
                            pattern_len: cfg.pattern_len,
                        });
                    }
                    let d = if cfg.constrain_dst {
                        gen_constrained_pattern(spec.family, unit_len, &cfg.alphabet, rng)?
                    } else {
                        random_string(cfg.pattern_len, &cfg.alphabet, rng)
                    };
                    if !forbidden_dst.contains(&d) {
                        break d;
                    }
                }
            };
            out.push(SemanticRule {
                rule: ReplaceRule { src: pattern, dst },
                family: spec.family,
                unit,
            });
        }
    }
    Ok(out)
}

/// Semantic-family dataset. Train and test draw rule patterns from their own
/// family specs (typically different k), with test src and dst strings both
/// unseen during training.
pub fn gen_constrained_dataset(cfg: &SemanticConfig) -> Result<SplitDataset, StringTaskError> {
    validate_alphabet(&cfg.alphabet)?;
    if cfg.pattern_len == 0 || cfg.pattern_len >= cfg.input_len {
        return Err(StringTaskError::Invalid(format!(
            "need 0 < pattern_len ({}) < input_len ({})",
            cfg.pattern_len, cfg.input_len
        )));
    }
    if cfg.train_families.is_empty() || cfg.test_families.is_empty() {
        return Err(StringTaskError::Invalid("family lists must be non-empty".into()));
    }
    if cfg.examples_per_instruction == 0 || cfg.test_per_instruction == 0 {
        return Err(StringTaskError::Invalid("per-instruction counts must be positive".into()));
    }

    let mut rule_rng = stream_rng(cfg.seed, STREAM_RULES);
    let mut seen_src = HashSet::new();
    let train_rules = sample_semantic_rules(
        cfg,
        &cfg.train_families,
        &mut seen_src,
        &HashSet::new(),
        &mut rule_rng,
    )?;
    let train_dsts: HashSet<String> =
        train_rules.iter().map(|r| r.rule.dst.clone()).collect();
    let test_rules =
        sample_semantic_rules(cfg, &cfg.test_families, &mut seen_src, &train_dsts, &mut rule_rng)?;

    let base = StringTaskBase {
        input_len: cfg.input_len,
        pattern_len: cfg.pattern_len,
        dst_len_range: (cfg.pattern_len, cfg.pattern_len),
        alphabet: cfg.alphabet.clone(),
        test_instructions: test_rules.len(),
        test_per_instruction: cfg.test_per_instruction,
    };

    let make_split = |rules: &[SemanticRule],
                      id_offset: usize,
                      per_rule: usize,
                      stream: u64|
     -> Result<Vec<Example>, StringTaskError> {
        let mut specs = Vec::with_capacity(rules.len() * per_rule);
        for (i, sr) in rules.iter().enumerate() {
            for ex in 0..per_rule {
                specs.push(ExampleSpec {
                    task_kind: TaskKind::BasicReplace,
                    rule_id: (id_offset + i) as u64,
                    rule: &sr.rule,
                    example_index: ex as u64,
                    noop: false,
                    meta_extra: Meta {
                        family: Some(sr.family.kind.name().to_string()),
                        k: Some(sr.family.k),
                        unit: Some(sr.unit.clone()),
                        ..Meta::default()
                    },
                });
            }
        }
        build_examples(specs, &base, derive_seed(cfg.seed, stream))
    };

    let train = make_split(&train_rules, 0, cfg.examples_per_instruction, STREAM_TRAIN)?;
    let test = make_split(&test_rules, train_rules.len(), cfg.test_per_instruction, STREAM_TEST)?;
    Ok(SplitDataset::new(train, test))
}
