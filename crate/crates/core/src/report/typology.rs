use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuestionType {
    Procedural,
    Cause,
    Verification,
    Consequence,
    Other,
}

impl QuestionType {
    pub const ALL: [QuestionType; 5] = [
        QuestionType::Procedural,
        QuestionType::Cause,
        QuestionType::Verification,
        QuestionType::Consequence,
        QuestionType::Other,
    ];

    /// Procedural, cause and consequence questions call for deep reasoning.
    pub fn is_deep(self) -> bool {
        matches!(
            self,
            QuestionType::Procedural | QuestionType::Cause | QuestionType::Consequence
        )
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionKind {
    pub kind: QuestionType,
    pub deep: bool,
}

impl From<QuestionType> for QuestionKind {
    fn from(kind: QuestionType) -> Self {
        Self {
            kind,
            deep: kind.is_deep(),
        }
    }
}

const PROCEDURAL_NEXT: &[&str] = &["did", "do", "does", "can", "could", "should", "would", "to"];
const CAUSE_NEXT: &[&str] = &[
    "is", "are", "was", "were", "did", "do", "does", "isn't", "aren't", "wasn't", "weren't",
    "didn't", "don't", "doesn't", "can", "could", "should", "would", "can't", "couldn't",
    "shouldn't", "wouldn't",
];
const VERIFICATION_LEAD: &[&str] = &[
    "does", "do", "did", "is", "are", "was", "were", "can", "could", "should", "would", "has",
    "have",
];

/// Heuristic rule cascade over the normalized leading tokens.
///
/// Consequence patterns ("what happens", "how does ... affect") are checked
/// first, then procedural ("how" + auxiliary/modal/"to"), cause ("why" +
/// auxiliary/modal or a negation), and verification (leading auxiliary or
/// modal).
pub fn classify_question(question: &str) -> QuestionKind {
    let tokens = normalize_tokens(question);
    let first = tokens.first().map(String::as_str).unwrap_or("");
    let second = tokens.get(1).map(String::as_str).unwrap_or("");

    let kind = if (first == "what" && (second == "happens" || second == "happened"))
        || (first == "how"
            && matches!(second, "does" | "do" | "did")
            && tokens[2..].iter().any(|t| t == "affect" || t == "affects"))
    {
        QuestionType::Consequence
    } else if first == "how" && PROCEDURAL_NEXT.contains(&second) {
        QuestionType::Procedural
    } else if first == "why" && CAUSE_NEXT.contains(&second) {
        QuestionType::Cause
    } else if VERIFICATION_LEAD.contains(&first) {
        QuestionType::Verification
    } else {
        QuestionType::Other
    };
    kind.into()
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no questions given")]
pub struct EmptyInput;

/// Fraction of questions classified as deep.
pub fn deep_ratio<S: AsRef<str>>(questions: &[S]) -> Result<f64, EmptyInput> {
    if questions.is_empty() {
        return Err(EmptyInput);
    }
    let deep = questions
        .iter()
        .filter(|q| classify_question(q.as_ref()).deep)
        .count();
    Ok(deep as f64 / questions.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypologySummary {
    pub counts: BTreeMap<QuestionType, usize>,
    pub total: usize,
    pub deep_ratio: f64,
}

pub fn typology<S: AsRef<str>>(questions: &[S]) -> Result<TypologySummary, EmptyInput> {
    let mut counts: BTreeMap<QuestionType, usize> =
        QuestionType::ALL.iter().map(|k| (*k, 0)).collect();
    for q in questions {
        *counts.entry(classify_question(q.as_ref()).kind).or_insert(0) += 1;
    }
    Ok(TypologySummary {
        deep_ratio: deep_ratio(questions)?,
        total: questions.len(),
        counts,
    })
}
