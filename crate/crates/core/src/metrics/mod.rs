//! Automatic evaluation metrics for generated questions.
//!
//! All scores are kept in `[0, 1]`. Zero denominators yield zero rather
//! than NaN, so every value is totally ordered.

mod bertscore;
mod bleu;
mod chrf;
mod evaluate;
mod meteor;
mod rouge;
pub mod stem;

pub use bertscore::{
    bert_score, EmbeddingError, EmbeddingProvider, OneHotEmbeddings, VectorFileEmbeddings,
};
pub use bleu::{bleu, corpus_bleu, BLEU_EPSILON};
pub use chrf::{chrf, chrf_default, CHRF_BETA, CHRF_MAX_N};
pub use evaluate::{evaluate_run, score_pair, MetricsError, PairScores, ScoreMeans, ScoreReport};
pub use meteor::{meteor, meteor_alignment, Alignment, METEOR_ALPHA, METEOR_BETA, METEOR_GAMMA};
pub use rouge::{lcs_len, rouge_l, rouge_n};

use std::collections::HashMap;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::text::normalize_tokens;

/// Normalized tokens; never contains an empty string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    /// Wraps already-normalized tokens, dropping empties.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(
            tokens
                .into_iter()
                .map(Into::into)
                .filter(|t: &String| !t.is_empty())
                .collect(),
        )
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    /// Tokens joined with single spaces.
    pub fn joined(&self) -> String {
        self.0.join(" ")
    }
}

impl Deref for TokenSeq {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

/// Lowercase, split on whitespace, strip edge punctuation, drop empties.
pub fn tokenize(text: &str) -> TokenSeq {
    TokenSeq(normalize_tokens(text))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub const ZERO: Prf = Prf {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
        }
    }

    /// `overlap / candidate_total` and `overlap / reference_total`.
    pub fn from_counts(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        Self::new(ratio(overlap, candidate_total), ratio(overlap, reference_total))
    }
}

pub(crate) fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Multiset of contiguous n-grams.
pub(crate) fn ngram_counts<T: Eq + std::hash::Hash>(items: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if n == 0 || items.len() < n {
        return counts;
    }
    for window in items.windows(n) {
        *counts.entry(window).or_insert(0) += 1;
    }
    counts
}

/// Sum over shared n-grams of the smaller count.
pub(crate) fn clipped_overlap<K: Eq + std::hash::Hash>(
    candidate: &HashMap<K, usize>,
    reference: &HashMap<K, usize>,
) -> usize {
    candidate
        .iter()
        .map(|(gram, &c)| reference.get(gram).map_or(0, |&r| c.min(r)))
        .sum()
}
