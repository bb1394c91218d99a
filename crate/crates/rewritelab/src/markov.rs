//! Interpreter for Markov algorithms: ordered rewrite rules over a symbol
//! alphabet, applied leftmost-first until a stop rule fires, no rule matches
//! (blocked), or a step limit is hit.
//!
//! Symbols are single `char`s. An algorithm owns a base alphabet (the symbols
//! input sequences are written in) and a disjoint set of work symbols that
//! rules may introduce and remove. Rules with schema variables ("x and y
//! stand for any letter") are expanded to concrete rules before execution;
//! see [`expand_schema`].

use std::fmt;

use thiserror::Error;

/// Default step budget for [`run`].
pub const DEFAULT_MAX_STEPS: usize = 10_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MarkovError {
    #[error("symbol '{symbol}' in rule {rule_index} is not declared in the alphabet")]
    UndeclaredSymbol { symbol: char, rule_index: usize },
    #[error("symbol '{symbol}' is declared both as a base and a work symbol")]
    AlphabetOverlap { symbol: char },
    #[error("symbol '{symbol}' is declared twice")]
    DuplicateSymbol { symbol: char },
    #[error("rule {rule_index} has an empty left-hand side but is not the last rule")]
    EmptyLhsNotLast { rule_index: usize },
    #[error("more than one rule has an empty left-hand side")]
    MultipleEmptyLhs,
    #[error("schema variable '{variable}' appears in a right-hand side but not in the left-hand side")]
    UnboundSchemaVariable { variable: char },
    #[error("schema variable '{variable}' is also declared as an alphabet symbol")]
    VariableShadowsSymbol { variable: char },
    #[error("base alphabet is empty")]
    EmptyBaseAlphabet,
    #[error("algorithm has no rules")]
    NoRules,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("input symbol '{symbol}' is not in the algorithm's alphabet")]
    InputSymbol { symbol: char },
}

/// One concrete rewrite rule. `terminal` marks a stop rule: applying it ends
/// the run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkovRule {
    pub lhs: Vec<char>,
    pub rhs: Vec<char>,
    pub terminal: bool,
}

impl MarkovRule {
    pub fn new(lhs: &str, rhs: &str, terminal: bool) -> Self {
        MarkovRule {
            lhs: lhs.chars().collect(),
            rhs: rhs.chars().collect(),
            terminal,
        }
    }
}

impl fmt::Display for MarkovRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lhs: String = self.lhs.iter().collect();
        let rhs: String = self.rhs.iter().collect();
        let arrow = if self.terminal { "->." } else { "->" };
        write!(f, "{} {} {}", if lhs.is_empty() { "_" } else { &lhs }, arrow, rhs)
    }
}

/// A rule whose sides may contain schema variables standing for any base
/// letter. All occurrences of the same variable bind to the same letter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaRule {
    pub lhs: Vec<char>,
    pub rhs: Vec<char>,
    pub terminal: bool,
}

impl SchemaRule {
    pub fn new(lhs: &str, rhs: &str, terminal: bool) -> Self {
        SchemaRule {
            lhs: lhs.chars().collect(),
            rhs: rhs.chars().collect(),
            terminal,
        }
    }
}

/// An ordered rewrite system over `base_alphabet ∪ work_symbols`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkovAlgorithm {
    base_alphabet: Vec<char>,
    work_symbols: Vec<char>,
    rules: Vec<MarkovRule>,
}

impl MarkovAlgorithm {
    /// Validates alphabets and rule placement. Rule order is significant and
    /// preserved. An empty-lhs rule always matches, so it may only appear
    /// once and must come last; otherwise it would shadow every rule after it.
    pub fn new(
        base_alphabet: &[char],
        work_symbols: &[char],
        rules: Vec<MarkovRule>,
    ) -> Result<Self, MarkovError> {
        if base_alphabet.is_empty() {
            return Err(MarkovError::EmptyBaseAlphabet);
        }
        if rules.is_empty() {
            return Err(MarkovError::NoRules);
        }
        let mut seen = Vec::new();
        for &s in base_alphabet.iter().chain(work_symbols) {
            if seen.contains(&s) {
                return Err(if base_alphabet.contains(&s) && work_symbols.contains(&s) {
                    MarkovError::AlphabetOverlap { symbol: s }
                } else {
                    MarkovError::DuplicateSymbol { symbol: s }
                });
            }
            seen.push(s);
        }
        let mut empty_seen = false;
        for (i, rule) in rules.iter().enumerate() {
            if rule.lhs.is_empty() {
                if empty_seen {
                    return Err(MarkovError::MultipleEmptyLhs);
                }
                empty_seen = true;
                if i + 1 != rules.len() {
                    return Err(MarkovError::EmptyLhsNotLast { rule_index: i });
                }
            }
            for &s in rule.lhs.iter().chain(&rule.rhs) {
                if !seen.contains(&s) {
                    return Err(MarkovError::UndeclaredSymbol { symbol: s, rule_index: i });
                }
            }
        }
        Ok(MarkovAlgorithm {
            base_alphabet: base_alphabet.to_vec(),
            work_symbols: work_symbols.to_vec(),
            rules,
        })
    }

    pub fn base_alphabet(&self) -> &[char] {
        &self.base_alphabet
    }

    pub fn work_symbols(&self) -> &[char] {
        &self.work_symbols
    }

    pub fn rules(&self) -> &[MarkovRule] {
        &self.rules
    }

    /// True iff every symbol of `seq` is declared in this algorithm's
    /// alphabet (base or work).
    pub fn accepts(&self, seq: &[char]) -> Result<(), MarkovError> {
        for &s in seq {
            if !self.base_alphabet.contains(&s) && !self.work_symbols.contains(&s) {
                return Err(MarkovError::InputSymbol { symbol: s });
            }
        }
        Ok(())
    }

    /// The reversal-and-concatenation algorithm over {a, b}: maps any
    /// sequence s to s followed by reverse(s). Built from the schema rules
    ///   αx -> xαβx,  βxy -> yβx,  αβx -> xα,  α ->. ,  _ -> α
    /// with x, y ranging over {a, b}.
    pub fn reversal_concat() -> MarkovAlgorithm {
        let base = ['a', 'b'];
        let schema = vec![
            SchemaRule::new("αx", "xαβx", false),
            SchemaRule::new("βxy", "yβx", false),
            SchemaRule::new("αβx", "xα", false),
            SchemaRule::new("α", "", true),
            SchemaRule::new("", "α", false),
        ];
        let rules = expand_schema(&schema, &base, &['x', 'y']).expect("schema is well-formed");
        MarkovAlgorithm::new(&base, &['α', 'β'], rules).expect("algorithm is well-formed")
    }
}

/// Expands schema rules to concrete rules: one rule per assignment of the
/// rule's variables to base-alphabet letters. Assignments are enumerated
/// lexicographically, variables in declared order, letters in alphabet order,
/// and the expansion replaces the schema in place so overall rule order is
/// preserved. Rules without variables pass through unchanged.
pub fn expand_schema(
    rules: &[SchemaRule],
    base_alphabet: &[char],
    variables: &[char],
) -> Result<Vec<MarkovRule>, MarkovError> {
    if base_alphabet.is_empty() {
        return Err(MarkovError::EmptyBaseAlphabet);
    }
    for &v in variables {
        if base_alphabet.contains(&v) {
            return Err(MarkovError::VariableShadowsSymbol { variable: v });
        }
    }
    let mut out = Vec::new();
    for rule in rules {
        for &s in &rule.rhs {
            if variables.contains(&s) && !rule.lhs.contains(&s) {
                return Err(MarkovError::UnboundSchemaVariable { variable: s });
            }
        }
        let used: Vec<char> = variables
            .iter()
            .copied()
            .filter(|v| rule.lhs.contains(v))
            .collect();
        if used.is_empty() {
            out.push(MarkovRule {
                lhs: rule.lhs.clone(),
                rhs: rule.rhs.clone(),
                terminal: rule.terminal,
            });
            continue;
        }
        // Odometer over letter indices, first variable most significant.
        let n = used.len();
        let mut idx = vec![0usize; n];
        loop {
            let subst = |side: &[char]| -> Vec<char> {
                side.iter()
                    .map(|&s| match used.iter().position(|&v| v == s) {
                        Some(k) => base_alphabet[idx[k]],
                        None => s,
                    })
                    .collect()
            };
            out.push(MarkovRule {
                lhs: subst(&rule.lhs),
                rhs: subst(&rule.rhs),
                terminal: rule.terminal,
            });
            let mut k = n;
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < base_alphabet.len() {
                    break;
                }
                idx[k] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    Ok(out)
}

/// Outcome of a single rewrite step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Applied {
        next_seq: Vec<char>,
        rule_index: usize,
        position: usize,
        terminal_applied: bool,
    },
    /// No rule matches the sequence.
    Blocked,
}

/// Applies the first applicable rule at its leftmost match. An empty lhs
/// matches at position 0 (the rhs is prepended).
pub fn step(seq: &[char], algo: &MarkovAlgorithm) -> StepOutcome {
    for (rule_index, rule) in algo.rules.iter().enumerate() {
        if let Some(position) = find_leftmost(seq, &rule.lhs) {
            let mut next_seq = Vec::with_capacity(seq.len() + rule.rhs.len());
            next_seq.extend_from_slice(&seq[..position]);
            next_seq.extend_from_slice(&rule.rhs);
            next_seq.extend_from_slice(&seq[position + rule.lhs.len()..]);
            return StepOutcome::Applied {
                next_seq,
                rule_index,
                position,
                terminal_applied: rule.terminal,
            };
        }
    }
    StepOutcome::Blocked
}

fn find_leftmost(seq: &[char], lhs: &[char]) -> Option<usize> {
    if lhs.is_empty() {
        return Some(0);
    }
    if lhs.len() > seq.len() {
        return None;
    }
    (0..=seq.len() - lhs.len()).find(|&p| seq[p..p + lhs.len()] == *lhs)
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// A stop rule fired.
    Terminated,
    /// No rule matched.
    Blocked,
    /// The step budget ran out before either of the above.
    StepLimit,
}

/// One trace entry per applied rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub rule_index: usize,
    pub position: usize,
    pub seq_after: Vec<char>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub final_seq: Vec<char>,
    pub status: RunStatus,
    pub trace: Vec<TraceEntry>,
}

impl RunResult {
    pub fn final_string(&self) -> String {
        self.final_seq.iter().collect()
    }
}

/// Iterates [`step`] until a stop rule fires, no rule matches, or `max_steps`
/// applications have been made. The final sequence is whatever the rules
/// left behind; work symbols are not cleaned up implicitly.
pub fn run(seq: &[char], algo: &MarkovAlgorithm, max_steps: usize) -> RunResult {
    assert!(max_steps >= 1, "max_steps must be at least 1");
    let mut cur = seq.to_vec();
    let mut trace = Vec::new();
    while trace.len() < max_steps {
        match step(&cur, algo) {
            StepOutcome::Blocked => {
                return RunResult {
                    final_seq: cur,
                    status: RunStatus::Blocked,
                    trace,
                };
            }
            StepOutcome::Applied {
                next_seq,
                rule_index,
                position,
                terminal_applied,
            } => {
                trace.push(TraceEntry {
                    rule_index,
                    position,
                    seq_after: next_seq.clone(),
                });
                cur = next_seq;
                if terminal_applied {
                    return RunResult {
                        final_seq: cur,
                        status: RunStatus::Terminated,
                        trace,
                    };
                }
            }
        }
    }
    RunResult {
        final_seq: cur,
        status: RunStatus::StepLimit,
        trace,
    }
}

/// Parses the rule-file format:
///
/// ```text
/// # reversal and concatenation
/// alphabet: ab
/// work: αβ
/// vars: xy
/// αx -> xαβx
/// βxy -> yβx
/// αβx -> xα
/// α ->.
/// _ -> α
/// ```
///
/// `->.` marks a stop rule, `_` is the empty left-hand side, `#` starts a
/// comment, and whitespace between symbols is ignored. Rules mentioning a
/// symbol from the `vars:` header are schema rules and are expanded against
/// the base alphabet at load time.
pub fn parse_program(text: &str) -> Result<MarkovAlgorithm, MarkovError> {
    let mut base: Vec<char> = Vec::new();
    let mut work: Vec<char> = Vec::new();
    let mut vars: Vec<char> = Vec::new();
    let mut schema: Vec<SchemaRule> = Vec::new();

    let reserved = ['-', '>', '_', '#', ':'];
    let symbols_of = |s: &str| -> Vec<char> { s.chars().filter(|c| !c.is_whitespace()).collect() };

    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        if let Some(rest) = line.strip_prefix("alphabet:") {
            base = symbols_of(rest);
        } else if let Some(rest) = line.strip_prefix("work:") {
            work = symbols_of(rest);
        } else if let Some(rest) = line.strip_prefix("vars:") {
            vars = symbols_of(rest);
        } else {
            let arrow = line.find("->").ok_or_else(|| MarkovError::Parse {
                line: lineno,
                msg: "expected 'LHS -> RHS'".into(),
            })?;
            let lhs_text = line[..arrow].trim();
            let mut rhs_text = &line[arrow + 2..];
            let terminal = rhs_text.starts_with('.');
            if terminal {
                rhs_text = &rhs_text[1..];
            }
            let lhs = if lhs_text == "_" { Vec::new() } else { symbols_of(lhs_text) };
            let rhs = symbols_of(rhs_text);
            if lhs_text.is_empty() {
                return Err(MarkovError::Parse {
                    line: lineno,
                    msg: "empty left-hand side must be written as '_'".into(),
                });
            }
            schema.push(SchemaRule { lhs, rhs, terminal });
        }
    }
    for &s in base.iter().chain(&work).chain(&vars) {
        if reserved.contains(&s) {
            return Err(MarkovError::Parse {
                line: 0,
                msg: format!("symbol '{s}' is reserved by the file format"),
            });
        }
    }
    let rules = expand_schema(&schema, &base, &vars)?;
    MarkovAlgorithm::new(&base, &work, rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    /// Test-only reference interpreter that binds schema variables on the
    /// fly instead of expanding them up front. Variables range over the base
    /// alphabet only.
    mod reference {
        use super::super::*;

        fn match_at(
            seq: &[char],
            pos: usize,
            lhs: &[char],
            vars: &[char],
            base: &[char],
        ) -> Option<Vec<(char, char)>> {
            if pos + lhs.len() > seq.len() {
                return None;
            }
            let mut binding: Vec<(char, char)> = Vec::new();
            for (i, &sym) in lhs.iter().enumerate() {
                let actual = seq[pos + i];
                if vars.contains(&sym) {
                    match binding.iter().find(|(v, _)| *v == sym) {
                        Some(&(_, bound)) => {
                            if bound != actual {
                                return None;
                            }
                        }
                        None => {
                            if !base.contains(&actual) {
                                return None;
                            }
                            binding.push((sym, actual));
                        }
                    }
                } else if sym != actual {
                    return None;
                }
            }
            Some(binding)
        }

        pub fn run_schema(
            seq: &[char],
            schema: &[SchemaRule],
            vars: &[char],
            base: &[char],
            max_steps: usize,
        ) -> (Vec<char>, RunStatus, usize) {
            let mut cur = seq.to_vec();
            let mut steps = 0;
            while steps < max_steps {
                let mut applied = false;
                'rules: for rule in schema {
                    let limit = cur.len().saturating_sub(rule.lhs.len());
                    for pos in 0..=limit {
                        if let Some(binding) = match_at(&cur, pos, &rule.lhs, vars, base) {
                            let rhs: Vec<char> = rule
                                .rhs
                                .iter()
                                .map(|&s| {
                                    binding
                                        .iter()
                                        .find(|(v, _)| *v == s)
                                        .map(|&(_, b)| b)
                                        .unwrap_or(s)
                                })
                                .collect();
                            let mut next = Vec::new();
                            next.extend_from_slice(&cur[..pos]);
                            next.extend_from_slice(&rhs);
                            next.extend_from_slice(&cur[pos + rule.lhs.len()..]);
                            cur = next;
                            steps += 1;
                            if rule.terminal {
                                return (cur, RunStatus::Terminated, steps);
                            }
                            applied = true;
                            break 'rules;
                        }
                    }
                }
                if !applied {
                    return (cur, RunStatus::Blocked, steps);
                }
            }
            (cur, RunStatus::StepLimit, steps)
        }
    }

    #[test]
    fn step_replaces_leftmost_occurrence() {
        let algo = MarkovAlgorithm::new(
            &['m', 'i', 's', 'p', 't', 'r'],
            &[],
            vec![MarkovRule::new("ss", "tr", false)],
        )
        .unwrap();
        match step(&chars("mississipi"), &algo) {
            StepOutcome::Applied {
                next_seq,
                rule_index,
                position,
                terminal_applied,
            } => {
                assert_eq!(next_seq, chars("mitrissipi"));
                assert_eq!(rule_index, 0);
                assert_eq!(position, 2);
                assert!(!terminal_applied);
            }
            StepOutcome::Blocked => panic!("expected a match"),
        }
    }

    #[test]
    fn step_bootstraps_via_empty_lhs() {
        let algo = MarkovAlgorithm::reversal_concat();
        match step(&chars("abb"), &algo) {
            StepOutcome::Applied {
                next_seq,
                rule_index,
                position,
                ..
            } => {
                assert_eq!(next_seq, chars("αabb"));
                // 2 + 4 + 2 + 1 concrete rules precede the bootstrap rule.
                assert_eq!(rule_index, 9);
                assert_eq!(position, 0);
            }
            StepOutcome::Blocked => panic!("expected the empty-lhs rule to fire"),
        }
    }

    #[test]
    fn step_blocks_when_nothing_matches() {
        let algo = MarkovAlgorithm::new(
            &['z', 'q'],
            &[],
            vec![MarkovRule::new("q", "z", false)],
        )
        .unwrap();
        assert_eq!(step(&chars("zzz"), &algo), StepOutcome::Blocked);
    }

    #[test]
    fn expand_schema_orders_assignments_lexicographically() {
        let rules = expand_schema(
            &[SchemaRule::new("βxy", "yβx", false)],
            &['a', 'b'],
            &['x', 'y'],
        )
        .unwrap();
        let expected = vec![
            MarkovRule::new("βaa", "aβa", false),
            MarkovRule::new("βab", "bβa", false),
            MarkovRule::new("βba", "aβb", false),
            MarkovRule::new("βbb", "bβb", false),
        ];
        assert_eq!(rules, expected);
    }

    #[test]
    fn expand_schema_passes_concrete_rules_through() {
        let rule = SchemaRule::new("ab", "ba", true);
        let rules = expand_schema(&[rule], &['a', 'b'], &['x', 'y']).unwrap();
        assert_eq!(rules, vec![MarkovRule::new("ab", "ba", true)]);
    }

    #[test]
    fn expand_schema_single_letter_alphabet() {
        let rules =
            expand_schema(&[SchemaRule::new("αx", "xαβx", false)], &['a'], &['x']).unwrap();
        assert_eq!(rules, vec![MarkovRule::new("αa", "aαβa", false)]);
    }

    #[test]
    fn expand_schema_rejects_unbound_rhs_variable() {
        let err = expand_schema(&[SchemaRule::new("αx", "xy", false)], &['a', 'b'], &['x', 'y'])
            .unwrap_err();
        assert_eq!(err, MarkovError::UnboundSchemaVariable { variable: 'y' });
    }

    #[test]
    fn run_reversal_concat_on_abb() {
        let algo = MarkovAlgorithm::reversal_concat();
        let result = run(&chars("abb"), &algo, DEFAULT_MAX_STEPS);
        assert_eq!(result.final_string(), "abbbba");
        assert_eq!(result.status, RunStatus::Terminated);
        // Eleven rule applications, recounted by hand from the rules.
        assert_eq!(result.trace.len(), 11);
    }

    #[test]
    fn run_empty_input_through_bootstrap() {
        let algo = MarkovAlgorithm::new(
            &['a'],
            &['α'],
            vec![MarkovRule::new("α", "", true), MarkovRule::new("", "α", false)],
        )
        .unwrap();
        let result = run(&[], &algo, 10);
        assert_eq!(result.status, RunStatus::Terminated);
        assert_eq!(result.final_seq, Vec::<char>::new());
        assert_eq!(result.trace.len(), 2);
        assert_eq!(result.trace[0].rule_index, 1);
        assert_eq!(result.trace[0].seq_after, chars("α"));
    }

    #[test]
    fn run_hits_step_limit_on_nonterminating_program() {
        let algo = MarkovAlgorithm::new(
            &['a'],
            &[],
            vec![MarkovRule::new("a", "aa", false)],
        )
        .unwrap();
        let result = run(&chars("a"), &algo, 17);
        assert_eq!(result.status, RunStatus::StepLimit);
        assert_eq!(result.trace.len(), 17);
    }

    #[test]
    fn run_is_deterministic() {
        let algo = MarkovAlgorithm::reversal_concat();
        let a = run(&chars("babab"), &algo, DEFAULT_MAX_STEPS);
        let b = run(&chars("babab"), &algo, DEFAULT_MAX_STEPS);
        assert_eq!(a, b);
    }

    #[test]
    fn new_rejects_misplaced_empty_lhs() {
        let err = MarkovAlgorithm::new(
            &['a'],
            &[],
            vec![MarkovRule::new("", "a", false), MarkovRule::new("a", "", true)],
        )
        .unwrap_err();
        assert_eq!(err, MarkovError::EmptyLhsNotLast { rule_index: 0 });
    }

    #[test]
    fn new_rejects_alphabet_overlap_and_undeclared_symbols() {
        let err = MarkovAlgorithm::new(
            &['a'],
            &['a'],
            vec![MarkovRule::new("a", "a", false)],
        )
        .unwrap_err();
        assert_eq!(err, MarkovError::AlphabetOverlap { symbol: 'a' });

        let err = MarkovAlgorithm::new(&['a'], &[], vec![MarkovRule::new("ab", "a", false)])
            .unwrap_err();
        assert_eq!(err, MarkovError::UndeclaredSymbol { symbol: 'b', rule_index: 0 });
    }

    /// Every trace entry applies the lowest-indexed matching rule at its
    /// leftmost match, verified by brute-force scan of the pre-step sequence.
    #[test]
    fn leftmost_first_invariant_holds_on_traces() {
        let algo = MarkovAlgorithm::reversal_concat();
        let mut rng = crate::rng::stream_rng(20_240_101, 1);
        for _ in 0..50 {
            let len = rng.gen_range(0..=8);
            let input: Vec<char> =
                (0..len).map(|_| if rng.gen_bool(0.5) { 'a' } else { 'b' }).collect();
            let result = run(&input, &algo, DEFAULT_MAX_STEPS);
            let mut pre = input.clone();
            for entry in &result.trace {
                // No lower-indexed rule matches, and the recorded position is
                // the minimal match position of the applied rule.
                for (i, rule) in algo.rules().iter().enumerate() {
                    match find_leftmost(&pre, &rule.lhs) {
                        Some(pos) => {
                            if i < entry.rule_index {
                                panic!("rule {i} matches before applied rule {}", entry.rule_index);
                            }
                            if i == entry.rule_index {
                                assert_eq!(pos, entry.position);
                                break;
                            }
                        }
                        None => assert_ne!(i, entry.rule_index, "applied rule does not match"),
                    }
                }
                pre = entry.seq_after.clone();
            }
        }
    }

    /// Expanded execution agrees with the on-the-fly binding interpreter on
    /// every {a,b} string of length at most 6.
    #[test]
    fn schema_expansion_matches_reference_interpreter_exhaustively() {
        let base = ['a', 'b'];
        let vars = ['x', 'y'];
        let schema = vec![
            SchemaRule::new("αx", "xαβx", false),
            SchemaRule::new("βxy", "yβx", false),
            SchemaRule::new("αβx", "xα", false),
            SchemaRule::new("α", "", true),
            SchemaRule::new("", "α", false),
        ];
        let algo = MarkovAlgorithm::reversal_concat();
        for len in 0..=6usize {
            for bits in 0..(1u32 << len) {
                let input: Vec<char> = (0..len)
                    .map(|i| if bits >> i & 1 == 0 { 'a' } else { 'b' })
                    .collect();
                let expanded = run(&input, &algo, 2_000);
                let (ref_final, ref_status, ref_steps) =
                    reference::run_schema(&input, &schema, &vars, &base, 2_000);
                assert_eq!(expanded.final_seq, ref_final, "input {input:?}");
                assert_eq!(expanded.status, ref_status, "input {input:?}");
                assert_eq!(expanded.trace.len(), ref_steps, "input {input:?}");
            }
        }
    }

    /// The appendix algorithm computes s ++ reverse(s).
    #[test]
    fn reversal_concat_is_correct_on_random_strings() {
        let algo = MarkovAlgorithm::reversal_concat();
        let mut rng = crate::rng::stream_rng(20_240_101, 2);
        for _ in 0..200 {
            let len = rng.gen_range(0..=8);
            let s: Vec<char> =
                (0..len).map(|_| if rng.gen_bool(0.5) { 'a' } else { 'b' }).collect();
            let mut expected = s.clone();
            expected.extend(s.iter().rev());
            let result = run(&s, &algo, DEFAULT_MAX_STEPS);
            assert_eq!(result.status, RunStatus::Terminated);
            assert_eq!(result.final_seq, expected);
        }
    }

    #[test]
    fn parse_program_roundtrips_the_reversal_algorithm() {
        let text = "\
# reversal and concatenation
alphabet: ab
work: αβ
vars: xy
αx -> xαβx
βxy -> yβx
αβx -> xα
α ->.
_ -> α
";
        let parsed = parse_program(text).unwrap();
        assert_eq!(parsed, MarkovAlgorithm::reversal_concat());
        assert!(parsed.accepts(&chars("abba")).is_ok());
        assert!(parsed.accepts(&chars("abc")).is_err());
    }

    #[test]
    fn parse_program_reports_bad_lines() {
        let err = parse_program("alphabet: ab\nab = ba\n").unwrap_err();
        assert_eq!(
            err,
            MarkovError::Parse { line: 2, msg: "expected 'LHS -> RHS'".into() }
        );
    }
}
