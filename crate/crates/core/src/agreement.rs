//! Human-evaluation ratings and inter-annotator agreement.
//!
//! Each rating scores one generated question on five criteria from 1
//! (worst) to 5 (best). Agreement is Fleiss' kappa per criterion over a
//! complete design: every rater rates every target.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::promptkit::PromptSetting;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Criterion {
    Grammaticality,
    Appropriateness,
    Relevance,
    Complexity,
    Novelty,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::Grammaticality,
        Criterion::Appropriateness,
        Criterion::Relevance,
        Criterion::Complexity,
        Criterion::Novelty,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Grammaticality => "Grammaticality",
            Criterion::Appropriateness => "Appropriateness",
            Criterion::Relevance => "Relevance",
            Criterion::Complexity => "Complexity",
            Criterion::Novelty => "Novelty",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const MIN_SCORE: u8 = 1;
pub const MAX_SCORE: u8 = 5;
const CATEGORIES: usize = (MAX_SCORE - MIN_SCORE + 1) as usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub rater_id: String,
    pub target_id: String,
    pub scores: BTreeMap<Criterion, u8>,
    pub submitted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RatingError {
    #[error("missing criterion {0}")]
    MissingCriterion(Criterion),
    #[error("{0} score {1} outside 1..=5")]
    OutOfRange(Criterion, u8),
    #[error("empty {0}")]
    EmptyId(&'static str),
}

impl RatingRecord {
    pub fn validate(&self) -> Result<(), RatingError> {
        if self.rater_id.trim().is_empty() {
            return Err(RatingError::EmptyId("rater_id"));
        }
        if self.target_id.trim().is_empty() {
            return Err(RatingError::EmptyId("target_id"));
        }
        for criterion in Criterion::ALL {
            match self.scores.get(&criterion) {
                None => return Err(RatingError::MissingCriterion(criterion)),
                Some(&s) if !(MIN_SCORE..=MAX_SCORE).contains(&s) => {
                    return Err(RatingError::OutOfRange(criterion, s))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgreementError {
    #[error("need at least 2 raters, got {0}")]
    TooFewRaters(usize),
    #[error("no items to compare")]
    NoItems,
    #[error("row {row} sums to {sum}, expected {expected} ratings per item")]
    RaggedMatrix { row: usize, sum: u64, expected: u64 },
    #[error("incomplete coverage: {} (rater, target) pairs missing", .0.len())]
    UnevenCoverage(Vec<(String, String)>),
    #[error("invalid rating: {0}")]
    InvalidRating(#[from] RatingError),
}

/// Fleiss' kappa for an items-by-categories matrix of rater counts.
///
/// Every row must sum to `n_raters`. When all ratings fall into a single
/// category the expected agreement is 1 and the result is defined as 1.
pub fn fleiss_kappa(counts: &[Vec<u32>], n_raters: usize) -> Result<f64, AgreementError> {
    if n_raters < 2 {
        return Err(AgreementError::TooFewRaters(n_raters));
    }
    if counts.is_empty() {
        return Err(AgreementError::NoItems);
    }
    let categories = counts[0].len();
    let n = n_raters as u64;
    for (row, values) in counts.iter().enumerate() {
        let sum: u64 = values.iter().map(|&c| c as u64).sum();
        if values.len() != categories || sum != n {
            return Err(AgreementError::RaggedMatrix {
                row,
                sum,
                expected: n,
            });
        }
    }

    let items = counts.len() as f64;
    let nf = n as f64;
    let p_bar = counts
        .iter()
        .map(|row| {
            let sq: u64 = row.iter().map(|&c| (c as u64) * (c as u64)).sum();
            (sq - n) as f64 / (nf * (nf - 1.0))
        })
        .sum::<f64>()
        / items;

    let column_totals: Vec<u64> = (0..categories)
        .map(|j| counts.iter().map(|row| row[j] as u64).sum())
        .collect();
    if column_totals.iter().filter(|&&t| t > 0).count() <= 1 {
        return Ok(1.0);
    }
    let grand = items * nf;
    let p_e: f64 = column_totals
        .iter()
        .map(|&t| {
            let p = t as f64 / grand;
            p * p
        })
        .sum();
    Ok((p_bar - p_e) / (1.0 - p_e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub kappa: BTreeMap<Criterion, f64>,
    pub n_items: usize,
    pub n_raters: usize,
}

/// Keeps the latest submission per (rater, target). Ties on the timestamp
/// go to the later entry in the input.
pub fn latest_per_pair(ratings: &[RatingRecord]) -> Vec<&RatingRecord> {
    let mut latest: HashMap<(&str, &str), (usize, &RatingRecord)> = HashMap::new();
    for (idx, r) in ratings.iter().enumerate() {
        let key = (r.rater_id.as_str(), r.target_id.as_str());
        match latest.get(&key) {
            Some((_, prev)) if prev.submitted_at > r.submitted_at => {}
            _ => {
                latest.insert(key, (idx, r));
            }
        }
    }
    let mut kept: Vec<(usize, &RatingRecord)> = latest.into_values().collect();
    kept.sort_by_key(|(idx, _)| *idx);
    kept.into_iter().map(|(_, r)| r).collect()
}

/// Builds the per-criterion count matrices (targets by score 1..=5) and
/// applies [`fleiss_kappa`] to each.
pub fn kappa_per_criterion(ratings: &[RatingRecord]) -> Result<AgreementReport, AgreementError> {
    let ratings = latest_per_pair(ratings);
    for r in &ratings {
        r.validate()?;
    }
    let raters: BTreeSet<&str> = ratings.iter().map(|r| r.rater_id.as_str()).collect();
    let targets: BTreeSet<&str> = ratings.iter().map(|r| r.target_id.as_str()).collect();
    let by_pair: HashMap<(&str, &str), &RatingRecord> = ratings
        .iter()
        .map(|r| ((r.rater_id.as_str(), r.target_id.as_str()), *r))
        .collect();

    let missing: Vec<(String, String)> = raters
        .iter()
        .flat_map(|rater| targets.iter().map(move |target| (*rater, *target)))
        .filter(|pair| !by_pair.contains_key(pair))
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    if !missing.is_empty() {
        return Err(AgreementError::UnevenCoverage(missing));
    }
    if targets.is_empty() {
        return Err(AgreementError::NoItems);
    }

    let mut kappa = BTreeMap::new();
    for criterion in Criterion::ALL {
        let matrix: Vec<Vec<u32>> = targets
            .iter()
            .map(|target| {
                let mut row = vec![0u32; CATEGORIES];
                for rater in &raters {
                    let score = by_pair[&(*rater, *target)].scores[&criterion];
                    row[(score - MIN_SCORE) as usize] += 1;
                }
                row
            })
            .collect();
        kappa.insert(criterion, fleiss_kappa(&matrix, raters.len())?);
    }
    Ok(AgreementReport {
        kappa,
        n_items: targets.len(),
        n_raters: raters.len(),
    })
}

/// What a target id refers to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetInfo {
    pub model_id: String,
    pub setting: PromptSetting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub model_id: String,
    pub setting: PromptSetting,
    pub n_ratings: usize,
    pub means: BTreeMap<Criterion, f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AggregateTable {
    /// Sorted by setting, then model id.
    pub rows: Vec<AggregateRow>,
    /// Ratings whose target is not in the metadata map.
    pub unmatched: usize,
}

/// Mean score per (model, setting, criterion) over the latest rating of
/// each (rater, target).
pub fn aggregate_ratings(
    ratings: &[RatingRecord],
    targets: &HashMap<String, TargetInfo>,
) -> AggregateTable {
    let mut cells: BTreeMap<(PromptSetting, String), (usize, BTreeMap<Criterion, u64>)> =
        BTreeMap::new();
    let mut unmatched = 0;
    for r in latest_per_pair(ratings) {
        let Some(info) = targets.get(&r.target_id) else {
            unmatched += 1;
            continue;
        };
        let cell = cells
            .entry((info.setting, info.model_id.clone()))
            .or_default();
        cell.0 += 1;
        for (criterion, score) in &r.scores {
            *cell.1.entry(*criterion).or_insert(0) += *score as u64;
        }
    }
    let rows = cells
        .into_iter()
        .map(|((setting, model_id), (n, sums))| AggregateRow {
            model_id,
            setting,
            n_ratings: n,
            means: sums
                .into_iter()
                .map(|(c, s)| (c, s as f64 / n as f64))
                .collect(),
        })
        .collect();
    AggregateTable { rows, unmatched }
}

/// Reads newline-delimited ratings; blank lines are skipped.
pub fn read_ratings<R: BufRead>(reader: R) -> Result<Vec<RatingRecord>, std::io::Error> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rating = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("ratings line {}: {e}", idx + 1),
            )
        })?;
        out.push(rating);
    }
    Ok(out)
}
