use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{QuadRecord, Subject};
use crate::text::{normalize_tokens, word_count};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanWords {
    pub context: f64,
    pub long_prompt: f64,
    pub short_prompt: f64,
    pub question: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigramShare {
    pub bigram: String,
    pub count: usize,
    /// Percentage of all questions in the corpus.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total: usize,
    pub per_subject: BTreeMap<Subject, usize>,
    /// Absent for an empty corpus.
    pub mean_words: Option<MeanWords>,
    /// Sorted by share descending, ties broken alphabetically.
    pub leading_bigrams: Vec<BigramShare>,
}

impl DatasetStats {
    pub fn subject_count(&self, subject: &Subject) -> usize {
        self.per_subject.get(subject).copied().unwrap_or(0)
    }

    pub fn bigram_share(&self, bigram: &str) -> f64 {
        self.leading_bigrams
            .iter()
            .find(|b| b.bigram == bigram)
            .map_or(0.0, |b| b.share)
    }
}

pub fn stats(records: &[QuadRecord]) -> DatasetStats {
    let total = records.len();
    let mut per_subject = BTreeMap::new();
    let mut sums = [0usize; 4];
    let mut bigrams: HashMap<String, usize> = HashMap::new();

    for r in records {
        *per_subject.entry(r.subject.clone()).or_insert(0) += 1;
        sums[0] += word_count(&r.context);
        sums[1] += word_count(&r.long_prompt);
        sums[2] += word_count(&r.short_prompt);
        sums[3] += word_count(&r.question);
        let tokens = normalize_tokens(&r.question);
        if let [first, second, ..] = tokens.as_slice() {
            *bigrams.entry(format!("{first} {second}")).or_insert(0) += 1;
        }
    }

    let mean_words = (total > 0).then(|| {
        let n = total as f64;
        MeanWords {
            context: sums[0] as f64 / n,
            long_prompt: sums[1] as f64 / n,
            short_prompt: sums[2] as f64 / n,
            question: sums[3] as f64 / n,
        }
    });

    let mut leading_bigrams: Vec<BigramShare> = bigrams
        .into_iter()
        .map(|(bigram, count)| BigramShare {
            share: 100.0 * count as f64 / total as f64,
            bigram,
            count,
        })
        .collect();
    leading_bigrams.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.bigram.cmp(&b.bigram)));

    DatasetStats {
        total,
        per_subject,
        mean_words,
        leading_bigrams,
    }
}
