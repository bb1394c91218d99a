//! Exact-match evaluation over in-process adapters, the ground-truth oracle,
//! or external models speaking a batch file protocol.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::dataset::{format_prompt, parse_prompt, Example, PromptTemplate, TaskKind, END_MARKER};
use crate::expr;
use crate::rng::stream_rng;
use crate::string_tasks::{apply_replace, ReplaceRule};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("adapter returned {got} completions for {expected} prompts")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{file}:{line}: {msg}")]
    Protocol { file: String, line: usize, msg: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("prompt error: {0}")]
    Prompt(#[from] crate::dataset::DatasetError),
    #[error("oracle could not interpret prompt: {0}")]
    Oracle(String),
    #[error("test set is empty")]
    EmptySet,
}

/// A model behind a batch interface: one completion per prompt, in order.
pub trait ModelAdapter {
    fn complete(&mut self, prompts: &[String]) -> Result<Vec<String>, EvalError>;
}

/// Normalizes a prediction for comparison: strips leading/trailing
/// whitespace and at most one trailing end marker. Nothing else.
pub fn normalize(s: &str) -> &str {
    let s = s.trim();
    let s = s.strip_suffix(END_MARKER).unwrap_or(s);
    s.trim()
}

/// True iff prediction and target agree after normalization.
pub fn exact_match(prediction: &str, target: &str) -> bool {
    normalize(prediction) == normalize(target)
}

/// Per-bucket exact-match accounting. Buckets partition the test set (one
/// composite key per example), so counts sum to the set size and the weighted
/// bucket mean equals the overall score.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BucketStat {
    pub count: usize,
    pub matches: usize,
}

impl BucketStat {
    pub fn exact_match(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.matches as f64 / self.count as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub total: usize,
    pub matched: usize,
    pub buckets: BTreeMap<String, BucketStat>,
    pub warnings: Vec<String>,
}

impl Metrics {
    pub fn overall_exact_match(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.matched as f64 / self.total as f64
        }
    }
}

/// Composite bucket key from example metadata; `train_rule_ids` enables the
/// seen/unseen dimension.
fn bucket_key(ex: &Example, train_rule_ids: Option<&BTreeSet<u64>>) -> String {
    let mut parts: Vec<String> = Vec::new();
    if let Some(train) = train_rule_ids {
        let seen = if train.contains(&ex.meta.rule_id) { "seen" } else { "unseen" };
        parts.push(format!("rule={seen}"));
    }
    if let Some(noop) = ex.meta.is_noop {
        parts.push(format!("noop={noop}"));
    }
    if let Some(family) = &ex.meta.family {
        parts.push(format!("family={family}"));
    }
    if let Some(k) = ex.meta.k {
        parts.push(format!("k={k}"));
    }
    if let Some(d_p) = ex.meta.d_p {
        parts.push(format!("d_p={d_p}"));
    }
    if parts.is_empty() {
        "all".to_string()
    } else {
        parts.join(",")
    }
}

fn score(
    test_set: &[Example],
    completions: &[String],
    train_rule_ids: Option<&BTreeSet<u64>>,
) -> Metrics {
    let mut metrics = Metrics { total: test_set.len(), ..Metrics::default() };
    for (ex, completion) in test_set.iter().zip(completions) {
        let hit = exact_match(completion, &ex.target_text);
        metrics.matched += usize::from(hit);
        let bucket = metrics.buckets.entry(bucket_key(ex, train_rule_ids)).or_default();
        bucket.count += 1;
        bucket.matches += usize::from(hit);
    }
    // Order-sensitivity heuristic: completions that are the right multiset in
    // the wrong order usually mean a shuffled file.
    if metrics.matched < metrics.total {
        let mut got: Vec<&str> = completions.iter().map(|c| normalize(c)).collect();
        let mut want: Vec<&str> = test_set.iter().map(|e| normalize(&e.target_text)).collect();
        got.sort_unstable();
        want.sort_unstable();
        if got == want {
            metrics.warnings.push(
                "completions match the targets as a multiset but not in order; \
                 the completions file may be shuffled"
                    .to_string(),
            );
        }
    }
    metrics
}

/// Renders prompts, queries the adapter, and scores by exact match.
pub fn evaluate(
    adapter: &mut dyn ModelAdapter,
    test_set: &[Example],
    tpl: &PromptTemplate,
    train_rule_ids: Option<&BTreeSet<u64>>,
) -> Result<Metrics, EvalError> {
    if test_set.is_empty() {
        return Err(EvalError::EmptySet);
    }
    let prompts: Vec<String> = test_set
        .iter()
        .map(|ex| format_prompt(ex, tpl))
        .collect::<Result<_, _>>()?;
    let completions = adapter.complete(&prompts)?;
    if completions.len() != prompts.len() {
        return Err(EvalError::LengthMismatch {
            expected: prompts.len(),
            got: completions.len(),
        });
    }
    Ok(score(test_set, &completions, train_rule_ids))
}

/// The ground-truth rewriter behind the adapter interface. It re-derives the
/// answer from the prompt text alone: `SRC->DST` rules run the string oracle,
/// `LHS=RHS` equations run the expression oracle.
pub struct OracleAdapter {
    tpl: PromptTemplate,
}

impl OracleAdapter {
    pub fn new(tpl: PromptTemplate) -> OracleAdapter {
        OracleAdapter { tpl }
    }

    fn answer(&self, prompt: &str) -> Result<String, EvalError> {
        let (rule_text, input) = parse_prompt(prompt, &self.tpl)
            .ok_or_else(|| EvalError::Oracle(format!("unrecognized prompt {prompt:?}")))?;
        if rule_text.contains("->") {
            let rule = ReplaceRule::parse(rule_text)
                .map_err(|e| EvalError::Oracle(e.to_string()))?;
            let out = apply_replace(input, &rule).map_err(|e| EvalError::Oracle(e.to_string()))?;
            Ok(out.output)
        } else {
            let rule = expr::parse_rule("oracle", rule_text)
                .map_err(|e| EvalError::Oracle(e.to_string()))?;
            let instance =
                expr::parse(input).map_err(|e| EvalError::Oracle(e.to_string()))?;
            Ok(expr::render(&expr::apply_abstract_rule(&instance, &rule).output))
        }
    }
}

impl ModelAdapter for OracleAdapter {
    fn complete(&mut self, prompts: &[String]) -> Result<Vec<String>, EvalError> {
        prompts.iter().map(|p| self.answer(p)).collect()
    }
}

/// Wraps an adapter and corrupts one character in a deterministic fraction of
/// its outputs. Used to calibrate the harness (a 10% corruption rate must
/// score 0.9).
pub struct CorruptingAdapter<A: ModelAdapter> {
    pub inner: A,
    pub frac: f64,
    pub seed: u64,
}

impl<A: ModelAdapter> ModelAdapter for CorruptingAdapter<A> {
    fn complete(&mut self, prompts: &[String]) -> Result<Vec<String>, EvalError> {
        use rand::Rng;
        let mut completions = self.inner.complete(prompts)?;
        let mut rng = stream_rng(self.seed, 0xC0);
        for completion in completions.iter_mut() {
            if rng.gen::<f64>() >= self.frac {
                continue;
            }
            let mut chars: Vec<char> = completion.chars().collect();
            if chars.is_empty() {
                completion.push('?');
                continue;
            }
            let at = rng.gen_range(0..chars.len());
            chars[at] = if chars[at] == 'z' { 'q' } else { 'z' };
            *completion = chars.into_iter().collect();
        }
        Ok(completions)
    }
}

fn escape_line(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\n', "\\n")
}

fn unescape_line(s: &str, file: &str, line_no: usize) -> Result<String, EvalError> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('\\') => out.push('\\'),
                other => {
                    return Err(EvalError::Protocol {
                        file: file.to_string(),
                        line: line_no,
                        msg: format!("bad escape sequence '\\{}'", other.unwrap_or(' ')),
                    });
                }
            }
        } else if c.is_control() {
            return Err(EvalError::Protocol {
                file: file.to_string(),
                line: line_no,
                msg: format!("unescaped control character {:?}", c),
            });
        } else {
            out.push(c);
        }
    }
    Ok(out)
}

/// Writes one escaped prompt per line for an external model to fill in.
pub fn write_prompts(
    path: &Path,
    test_set: &[Example],
    tpl: &PromptTemplate,
) -> Result<(), EvalError> {
    let mut file = fs::File::create(path)
        .map_err(|e| EvalError::Io { path: path.display().to_string(), source: e })?;
    for ex in test_set {
        let prompt = format_prompt(ex, tpl)?;
        writeln!(file, "{}", escape_line(&prompt))
            .map_err(|e| EvalError::Io { path: path.display().to_string(), source: e })?;
    }
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>, EvalError> {
    let text = fs::read_to_string(path)
        .map_err(|e| EvalError::Io { path: path.display().to_string(), source: e })?;
    let mut lines: Vec<&str> = text.split('\n').collect();
    if lines.last() == Some(&"") {
        lines.pop();
    }
    let name = path.display().to_string();
    lines
        .iter()
        .enumerate()
        .map(|(i, line)| unescape_line(line, &name, i + 1))
        .collect()
}

/// Scores an externally produced completions file against the test set. The
/// prompts file must match the rendered test prompts line for line; the
/// completions file must have exactly one line per prompt.
pub fn run_external(
    prompts_path: &Path,
    completions_path: &Path,
    test_set: &[Example],
    tpl: &PromptTemplate,
    train_rule_ids: Option<&BTreeSet<u64>>,
) -> Result<Metrics, EvalError> {
    if test_set.is_empty() {
        return Err(EvalError::EmptySet);
    }
    let prompts = read_lines(prompts_path)?;
    let completions = read_lines(completions_path)?;
    let pfile = prompts_path.display().to_string();
    let cfile = completions_path.display().to_string();
    if prompts.len() != test_set.len() {
        return Err(EvalError::Protocol {
            file: pfile,
            line: prompts.len().min(test_set.len()) + 1,
            msg: format!("{} prompts for {} test examples", prompts.len(), test_set.len()),
        });
    }
    for (i, (prompt, ex)) in prompts.iter().zip(test_set).enumerate() {
        let expected = format_prompt(ex, tpl)?;
        if *prompt != expected {
            return Err(EvalError::Protocol {
                file: pfile,
                line: i + 1,
                msg: "prompt does not match the test set at this line".to_string(),
            });
        }
    }
    if completions.len() != prompts.len() {
        return Err(EvalError::Protocol {
            file: cfile,
            line: completions.len().min(prompts.len()) + 1,
            msg: format!("{} completions for {} prompts", completions.len(), prompts.len()),
        });
    }
    Ok(score(test_set, &completions, train_rule_ids))
}

/// Writes the per-bucket report CSV: `bucket_key,count,exact_match`.
pub fn write_report_csv(path: &Path, metrics: &Metrics) -> Result<(), EvalError> {
    let mut out = String::from("bucket_key,count,exact_match\n");
    for (key, stat) in &metrics.buckets {
        out.push_str(&format!("{key},{},{:.6}\n", stat.count, stat.exact_match()));
    }
    out.push_str(&format!("overall,{},{:.6}\n", metrics.total, metrics.overall_exact_match()));
    fs::write(path, out).map_err(|e| EvalError::Io { path: path.display().to_string(), source: e })
}

/// The oracle answer for one example, via the adapter path (used by tests and
/// the echo-oracle round trip).
pub fn oracle_completions(
    test_set: &[Example],
    tpl: &PromptTemplate,
) -> Result<Vec<String>, EvalError> {
    let mut oracle = OracleAdapter::new(tpl.clone());
    let prompts: Vec<String> = test_set
        .iter()
        .map(|ex| format_prompt(ex, tpl))
        .collect::<Result<_, _>>()?;
    oracle.complete(&prompts)
}

/// Checks the bucket bookkeeping: counts partition the set and the weighted
/// bucket mean reproduces the overall score.
pub fn check_bucket_consistency(metrics: &Metrics) -> bool {
    let count_sum: usize = metrics.buckets.values().map(|b| b.count).sum();
    if count_sum != metrics.total {
        return false;
    }
    let weighted: f64 = metrics
        .buckets
        .values()
        .map(|b| b.count as f64 * b.exact_match())
        .sum::<f64>()
        / metrics.total.max(1) as f64;
    (weighted - metrics.overall_exact_match()).abs() < 1e-12
}
