//! Canonical example records, prompt templating, and dataset serialization.
//!
//! Every generator in the crate emits [`Example`] records grouped into a
//! [`SplitDataset`]. On disk a dataset is a directory holding `train.jsonl`,
//! `test.jsonl` (one JSON object per line) and a `manifest.json` carrying the
//! full generator config and seed, so any dataset can be regenerated
//! byte-for-byte from its manifest.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr;
use crate::string_tasks;

/// Version stamp for `manifest.json`.
pub const FORMAT_VERSION: u32 = 1;

/// Textual end-of-output marker used by training strings and tolerated (once,
/// trailing) by exact-match normalization.
pub const END_MARKER: &str = "<eos>";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{file}:{line}: malformed record: {source}")]
    Malformed {
        file: String,
        line: usize,
        source: serde_json::Error,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("unsupported format version {found} (expected {FORMAT_VERSION})")]
    FormatVersion { found: u32 },
    #[error("field contains a template delimiter: {0:?}")]
    DelimiterCollision(String),
    #[error("invalid prompt template: {0}")]
    BadTemplate(String),
    #[error("rule id {0} not present in the example set")]
    RuleNotFound(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    BasicReplace,
    CondReplace,
    Markov,
    ExprRewrite,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TaskKind::BasicReplace => "basic_replace",
            TaskKind::CondReplace => "cond_replace",
            TaskKind::Markov => "markov",
            TaskKind::ExprRewrite => "expr_rewrite",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Per-example metadata. Optional fields are emitted only when meaningful for
/// the owning task, which keeps the JSONL records compact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Meta {
    pub rule_id: u64,
    pub split: Option<Split>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub is_noop: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub unit: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub d_p: Option<usize>,
    /// Planned number of examples for this example's rule (power-law sets).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rule_count: Option<usize>,
}

impl Meta {
    pub fn for_rule(rule_id: u64) -> Meta {
        Meta { rule_id, ..Meta::default() }
    }
}

/// One (instruction, input, target) record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub task_kind: TaskKind,
    #[serde(rename = "instruction")]
    pub instruction_text: String,
    #[serde(rename = "input")]
    pub input_text: String,
    #[serde(rename = "target")]
    pub target_text: String,
    pub meta: Meta,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplitDataset {
    pub train: Vec<Example>,
    pub test: Vec<Example>,
}

impl SplitDataset {
    /// Stamps each example's `meta.split` to match its placement.
    pub fn new(mut train: Vec<Example>, mut test: Vec<Example>) -> SplitDataset {
        for ex in &mut train {
            ex.meta.split = Some(Split::Train);
        }
        for ex in &mut test {
            ex.meta.split = Some(Split::Test);
        }
        SplitDataset { train, test }
    }

    pub fn rule_ids(examples: &[Example]) -> BTreeSet<u64> {
        examples.iter().map(|e| e.meta.rule_id).collect()
    }
}

/// Prompt template with `{rule}` and `{input}` placeholders and a fixed
/// output cue as its tail. Rendering is injective as long as fields contain
/// no newline, which [`format_prompt`] enforces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    format: String,
}

pub const DEFAULT_TEMPLATE: &str = "Rule: {rule}\nInput: {input}\nOutput:";

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate { format: DEFAULT_TEMPLATE.to_string() }
    }
}

impl PromptTemplate {
    /// Builds a custom template. An empty format string falls back to the
    /// default. The format must contain `{rule}` followed by `{input}`, the
    /// literal between and after them must contain a newline, and the tail
    /// after `{input}` is the output cue.
    pub fn new(format: &str) -> Result<PromptTemplate, DatasetError> {
        if format.is_empty() {
            return Ok(PromptTemplate::default());
        }
        let rule_at = format
            .find("{rule}")
            .ok_or_else(|| DatasetError::BadTemplate("missing {rule} placeholder".into()))?;
        let input_at = format
            .find("{input}")
            .ok_or_else(|| DatasetError::BadTemplate("missing {input} placeholder".into()))?;
        if input_at < rule_at {
            return Err(DatasetError::BadTemplate("{rule} must precede {input}".into()));
        }
        let mid = &format[rule_at + 6..input_at];
        let tail = &format[input_at + 7..];
        if !mid.contains('\n') || !tail.contains('\n') {
            return Err(DatasetError::BadTemplate(
                "literals between and after placeholders must contain a newline".into(),
            ));
        }
        Ok(PromptTemplate { format: format.to_string() })
    }

    /// The literal after `{input}` — the eval prompt ends exactly here.
    pub fn cue(&self) -> &str {
        let input_at = self.format.find("{input}").expect("validated template");
        &self.format[input_at + 7..]
    }

    fn pieces(&self) -> (&str, &str, &str) {
        let rule_at = self.format.find("{rule}").expect("validated template");
        let input_at = self.format.find("{input}").expect("validated template");
        (
            &self.format[..rule_at],
            &self.format[rule_at + 6..input_at],
            &self.format[input_at + 7..],
        )
    }
}

fn check_field(field: &str) -> Result<(), DatasetError> {
    if field.contains('\n') {
        return Err(DatasetError::DelimiterCollision(field.to_string()));
    }
    Ok(())
}

/// Renders the eval prompt; it ends exactly at the output cue.
pub fn format_prompt(ex: &Example, tpl: &PromptTemplate) -> Result<String, DatasetError> {
    check_field(&ex.instruction_text)?;
    check_field(&ex.input_text)?;
    let (head, mid, tail) = tpl.pieces();
    Ok(format!("{head}{}{mid}{}{tail}", ex.instruction_text, ex.input_text))
}

/// Renders the training string: prompt, then target, then the end marker.
pub fn format_training_string(ex: &Example, tpl: &PromptTemplate) -> Result<String, DatasetError> {
    check_field(&ex.target_text)?;
    let mut s = format_prompt(ex, tpl)?;
    s.push_str(&ex.target_text);
    s.push_str(END_MARKER);
    Ok(s)
}

/// Splits a training string back into (prompt, target). Exact inverse of
/// [`format_training_string`] for valid fields.
pub fn split_training_string<'a>(s: &'a str, tpl: &PromptTemplate) -> Option<(&'a str, &'a str)> {
    let cue = tpl.cue();
    let at = s.find(cue)? + cue.len();
    let target = s[at..].strip_suffix(END_MARKER)?;
    Some((&s[..at], target))
}

/// Recovers (rule, input) from a rendered prompt. Inverse of
/// [`format_prompt`] for valid fields.
pub fn parse_prompt<'a>(prompt: &'a str, tpl: &PromptTemplate) -> Option<(&'a str, &'a str)> {
    let (head, mid, tail) = tpl.pieces();
    let rest = prompt.strip_prefix(head)?;
    let mid_at = rest.find(mid)?;
    let rule = &rest[..mid_at];
    let input = rest[mid_at + mid.len()..].strip_suffix(tail)?;
    Some((rule, input))
}

/// Full generator configuration, stored in the manifest so the dataset can be
/// regenerated from it alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum GeneratorConfig {
    Basic(string_tasks::BasicTaskConfig),
    NoOp(string_tasks::NoOpConfig),
    PowerLaw(string_tasks::PowerLawDatasetConfig),
    Semantic(string_tasks::SemanticConfig),
    MathGeneralist(expr::GeneralistConfig),
    MathSpecialist(expr::SpecialistDatasetConfig),
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error(transparent)]
    StringTask(#[from] string_tasks::StringTaskError),
    #[error(transparent)]
    Expr(#[from] expr::ExprError),
}

impl GeneratorConfig {
    pub fn seed(&self) -> u64 {
        match self {
            GeneratorConfig::Basic(c) => c.seed,
            GeneratorConfig::NoOp(c) => c.base.seed,
            GeneratorConfig::PowerLaw(c) => c.seed,
            GeneratorConfig::Semantic(c) => c.seed,
            GeneratorConfig::MathGeneralist(c) => c.gen.seed,
            GeneratorConfig::MathSpecialist(c) => c.gen.seed,
        }
    }

    pub fn task_kind(&self) -> TaskKind {
        match self {
            GeneratorConfig::NoOp(_) => TaskKind::CondReplace,
            GeneratorConfig::MathGeneralist(_) | GeneratorConfig::MathSpecialist(_) => {
                TaskKind::ExprRewrite
            }
            _ => TaskKind::BasicReplace,
        }
    }

    /// Runs the generator this config describes.
    pub fn generate(&self) -> Result<SplitDataset, GenerateError> {
        Ok(match self {
            GeneratorConfig::Basic(c) => string_tasks::gen_basic_dataset(c)?,
            GeneratorConfig::NoOp(c) => string_tasks::gen_noop_dataset(c)?,
            GeneratorConfig::PowerLaw(c) => {
                string_tasks::gen_powerlaw_dataset(&c.power_law, &c.base, c.seed)?
            }
            GeneratorConfig::Semantic(c) => string_tasks::gen_constrained_dataset(c)?,
            GeneratorConfig::MathGeneralist(c) => expr::gen_generalist_dataset(c)?,
            GeneratorConfig::MathSpecialist(c) => expr::gen_specialist_dataset_from_config(c)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub task_kind: TaskKind,
    pub seed: u64,
    pub train_examples: usize,
    pub test_examples: usize,
    pub config: GeneratorConfig,
}

impl Manifest {
    pub fn new(config: GeneratorConfig, data: &SplitDataset) -> Manifest {
        Manifest {
            format_version: FORMAT_VERSION,
            task_kind: config.task_kind(),
            seed: config.seed(),
            train_examples: data.train.len(),
            test_examples: data.test.len(),
            config,
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> DatasetError {
    DatasetError::Io { path: path.display().to_string(), source }
}

/// Serializes examples to JSONL bytes (one compact object per line).
pub fn examples_to_jsonl(examples: &[Example]) -> Vec<u8> {
    let mut out = Vec::new();
    for ex in examples {
        serde_json::to_writer(&mut out, ex).expect("serialization cannot fail");
        out.push(b'\n');
    }
    out
}

pub fn write_jsonl(path: &Path, examples: &[Example]) -> Result<(), DatasetError> {
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(&examples_to_jsonl(examples)).map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<Example>, DatasetError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.is_empty() {
            continue;
        }
        let ex: Example = serde_json::from_str(&line).map_err(|e| DatasetError::Malformed {
            file: path.display().to_string(),
            line: i + 1,
            source: e,
        })?;
        out.push(ex);
    }
    Ok(out)
}

/// Writes `train.jsonl`, `test.jsonl` and `manifest.json` under `dir`.
pub fn write_dataset(dir: &Path, data: &SplitDataset, manifest: &Manifest) -> Result<(), DatasetError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_jsonl(&dir.join("train.jsonl"), &data.train)?;
    write_jsonl(&dir.join("test.jsonl"), &data.test)?;
    let path = dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(manifest).expect("serialization cannot fail");
    bytes.push(b'\n');
    fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, DatasetError> {
    let path = dir.join("manifest.json");
    let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
    let manifest: Manifest =
        serde_json::from_slice(&bytes).map_err(|e| DatasetError::Manifest(e.to_string()))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(DatasetError::FormatVersion { found: manifest.format_version });
    }
    Ok(manifest)
}

pub fn read_dataset(dir: &Path) -> Result<(SplitDataset, Manifest), DatasetError> {
    let manifest = read_manifest(dir)?;
    let train = read_jsonl(&dir.join("train.jsonl"))?;
    let test = read_jsonl(&dir.join("test.jsonl"))?;
    Ok((SplitDataset { train, test }, manifest))
}

/// Partitions examples by rule id: rules in `test_rule_ids` go to test,
/// everything else to train. Errors if a requested rule id never occurs.
pub fn split_by_rule(
    examples: Vec<Example>,
    test_rule_ids: &BTreeSet<u64>,
) -> Result<SplitDataset, DatasetError> {
    let present = SplitDataset::rule_ids(&examples);
    for &id in test_rule_ids {
        if !present.contains(&id) {
            return Err(DatasetError::RuleNotFound(id));
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for ex in examples {
        if test_rule_ids.contains(&ex.meta.rule_id) {
            test.push(ex);
        } else {
            train.push(ex);
        }
    }
    Ok(SplitDataset::new(train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(rule: &str, input: &str, target: &str, rule_id: u64) -> Example {
        Example {
            task_kind: TaskKind::BasicReplace,
            instruction_text: rule.to_string(),
            input_text: input.to_string(),
            target_text: target.to_string(),
            meta: Meta::for_rule(rule_id),
        }
    }

    #[test]
    fn default_template_matches_the_documented_layout() {
        let ex = example("iss->art", "mississippi", "martissippi", 0);
        let prompt = format_prompt(&ex, &PromptTemplate::default()).unwrap();
        assert_eq!(prompt, "Rule: iss->art\nInput: mississippi\nOutput:");
    }

    #[test]
    fn empty_template_falls_back_to_default() {
        assert_eq!(PromptTemplate::new("").unwrap(), PromptTemplate::default());
    }

    #[test]
    fn template_validation_rejects_bad_formats() {
        assert!(PromptTemplate::new("{input} then {rule}\n\n").is_err());
        assert!(PromptTemplate::new("{rule} and {input} with no newlines").is_err());
        assert!(PromptTemplate::new("R {rule}\nI {input} tail-without-newline").is_err());
    }

    #[test]
    fn fields_with_newlines_are_rejected() {
        let ex = example("a->b\nc", "x", "x", 0);
        assert!(matches!(
            format_prompt(&ex, &PromptTemplate::default()),
            Err(DatasetError::DelimiterCollision(_))
        ));
    }

    #[test]
    fn training_string_roundtrips_through_split_at_cue() {
        let tpl = PromptTemplate::default();
        let mut rng = crate::rng::stream_rng(99, 0);
        use rand::Rng;
        for i in 0..10_000 {
            let rule: String = (0..5).map(|_| (b'a' + rng.gen_range(0..26)) as char).collect();
            let input: String = (0..12).map(|_| (b'a' + rng.gen_range(0..26)) as char).collect();
            let target: String = (0..12).map(|_| (b'a' + rng.gen_range(0..26)) as char).collect();
            let ex = example(&rule, &input, &target, i);
            let s = format_training_string(&ex, &tpl).unwrap();
            let (prompt, target_back) = split_training_string(&s, &tpl).unwrap();
            assert_eq!(prompt, format_prompt(&ex, &tpl).unwrap());
            assert_eq!(target_back, ex.target_text);
            let (rule_back, input_back) = parse_prompt(prompt, &tpl).unwrap();
            assert_eq!(rule_back, ex.instruction_text);
            assert_eq!(input_back, ex.input_text);
        }
    }

    #[test]
    fn jsonl_roundtrip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let examples: Vec<Example> = (0..500)
            .map(|i| {
                let mut ex = example("ab->cd", "zzabzz", "zzcdzz", i % 7);
                ex.meta.split = Some(Split::Train);
                ex.meta.is_noop = Some(i % 3 == 0);
                ex
            })
            .collect();
        let path = dir.path().join("train.jsonl");
        write_jsonl(&path, &examples).unwrap();
        let back = read_jsonl(&path).unwrap();
        assert_eq!(examples, back);
        assert_eq!(examples_to_jsonl(&examples), examples_to_jsonl(&back));
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let good = examples_to_jsonl(&[example("a->b", "a", "b", 0)]);
        let mut bytes = good.clone();
        bytes.extend_from_slice(b"{not json}\n");
        std::fs::write(&path, bytes).unwrap();
        match read_jsonl(&path) {
            Err(DatasetError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed-line error, got {other:?}"),
        }
    }

    #[test]
    fn empty_dataset_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let data = SplitDataset::new(Vec::new(), Vec::new());
        let cfg = GeneratorConfig::Basic(string_tasks::BasicTaskConfig {
            num_instructions: 1,
            examples_per_instruction: 1,
            base: string_tasks::StringTaskBase::default(),
            seed: 0,
        });
        let manifest = Manifest::new(cfg, &data);
        write_dataset(dir.path(), &data, &manifest).unwrap();
        let (back, manifest_back) = read_dataset(dir.path()).unwrap();
        assert_eq!(back, data);
        assert_eq!(manifest_back, manifest);
    }

    #[test]
    fn split_by_rule_is_disjoint_and_total() {
        let examples: Vec<Example> =
            (0..1000).map(|i| example("a->b", "a", "b", i % 10)).collect();
        let test_ids: BTreeSet<u64> = [3u64, 7].into_iter().collect();
        let split = split_by_rule(examples, &test_ids).unwrap();
        assert_eq!(split.train.len() + split.test.len(), 1000);
        let train_ids = SplitDataset::rule_ids(&split.train);
        let test_found = SplitDataset::rule_ids(&split.test);
        assert_eq!(test_found, test_ids);
        assert!(train_ids.is_disjoint(&test_found));
        assert!(split.test.iter().all(|e| e.meta.split == Some(Split::Test)));
    }

    #[test]
    fn split_by_rule_moving_all_rules_empties_train() {
        let examples: Vec<Example> = (0..10).map(|i| example("a->b", "a", "b", i)).collect();
        let all: BTreeSet<u64> = (0..10).collect();
        let split = split_by_rule(examples, &all).unwrap();
        assert!(split.train.is_empty());
        assert_eq!(split.test.len(), 10);
    }

    #[test]
    fn split_by_rule_rejects_absent_rule() {
        let examples: Vec<Example> = (0..10).map(|i| example("a->b", "a", "b", i)).collect();
        let missing: BTreeSet<u64> = [99u64].into_iter().collect();
        assert!(matches!(
            split_by_rule(examples, &missing),
            Err(DatasetError::RuleNotFound(99))
        ));
    }
}
