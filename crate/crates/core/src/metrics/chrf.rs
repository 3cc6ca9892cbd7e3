use super::{clipped_overlap, ngram_counts, ratio};

pub const CHRF_MAX_N: usize = 6;
pub const CHRF_BETA: f64 = 2.0;

/// Character n-gram F-score.
///
/// Whitespace is removed before n-grams are taken; case is kept. Precision
/// and recall are averaged over orders `1..=max_n`, skipping orders for
/// which the reference has no n-grams, and then combined as F-beta.
pub fn chrf(candidate: &str, reference: &str, max_n: usize, beta: f64) -> f64 {
    let cand: Vec<char> = candidate.chars().filter(|c| !c.is_whitespace()).collect();
    let refs: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();

    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut orders = 0usize;
    for n in 1..=max_n {
        let ref_total = refs.len().saturating_sub(n - 1);
        if ref_total == 0 {
            continue;
        }
        let cand_total = cand.len().saturating_sub(n - 1);
        let overlap = clipped_overlap(&ngram_counts(&cand, n), &ngram_counts(&refs, n));
        precision_sum += ratio(overlap, cand_total);
        recall_sum += ratio(overlap, ref_total);
        orders += 1;
    }
    if orders == 0 {
        return 0.0;
    }
    let p = precision_sum / orders as f64;
    let r = recall_sum / orders as f64;
    let b2 = beta * beta;
    let denom = b2 * p + r;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * p * r / denom
    }
}

/// chrF with six character orders and beta = 2.
pub fn chrf_default(candidate: &str, reference: &str) -> f64 {
    chrf(candidate, reference, CHRF_MAX_N, CHRF_BETA)
}
