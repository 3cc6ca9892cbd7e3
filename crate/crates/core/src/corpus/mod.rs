//! Quadruple corpora: parsing, validation, train/test splitting and
//! descriptive statistics.

mod record;
mod split;
mod stats;

pub use record::{
    parse_line, parse_quads, parse_quads_str, to_line, write_quads, QuadRecord, Subject, FIELDS,
    TEXT_FIELDS,
};
pub use split::{split, write_split, Split, SplitManifest, SplitSpec};
pub use stats::{stats, BigramShare, DatasetStats, MeanWords};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize_phrase;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {0}: not a JSON object")]
    MalformedLine(usize),
    #[error("line {1}: missing field `{0}`")]
    MissingField(String, usize),
    #[error("line {1}: field `{0}` is empty")]
    EmptyField(String, usize),
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    InvalidRatio(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IssueCode {
    EmptyField,
    ShortPromptNotInContextHead,
    QuestionNotInterrogative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub code: IssueCode,
    pub message: String,
}

/// First half of `text` by character count (rounded up).
fn leading_half(text: &str) -> &str {
    let n = text.chars().count();
    let cut = text
        .char_indices()
        .nth(n.div_ceil(2))
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    &text[..cut]
}

/// Checks a record against the schema rules. Empty text fields are errors;
/// a short prompt that does not occur in the first half of the context, or a
/// question without a trailing `?`, are warnings.
pub fn validate(record: &QuadRecord) -> Vec<Issue> {
    let mut issues: Vec<Issue> = record
        .empty_fields()
        .into_iter()
        .map(|field| Issue {
            severity: Severity::Error,
            code: IssueCode::EmptyField,
            message: format!("{}: `{field}` is empty", record.id),
        })
        .collect();

    let short = normalize_phrase(&record.short_prompt);
    if !short.is_empty() {
        let head = normalize_phrase(leading_half(&record.context));
        // match on token boundaries so "power" does not hit "powerful"
        if !format!(" {head} ").contains(&format!(" {short} ")) {
            issues.push(Issue {
                severity: Severity::Warning,
                code: IssueCode::ShortPromptNotInContextHead,
                message: format!(
                    "{}: short prompt `{}` not found in the first half of the context",
                    record.id,
                    record.short_prompt.trim()
                ),
            });
        }
    }

    let question = record.question.trim();
    if !question.is_empty() && !question.ends_with('?') {
        issues.push(Issue {
            severity: Severity::Warning,
            code: IssueCode::QuestionNotInterrogative,
            message: format!("{}: question does not end with `?`", record.id),
        });
    }
    issues
}
