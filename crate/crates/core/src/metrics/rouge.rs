use super::{clipped_overlap, ngram_counts, Prf, TokenSeq};

/// ROUGE-N: clipped n-gram overlap divided by the candidate's n-gram count
/// (precision) and the reference's (recall).
pub fn rouge_n(candidate: &TokenSeq, reference: &TokenSeq, n: usize) -> Prf {
    assert!(n >= 1, "rouge_n needs n >= 1");
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let overlap = clipped_overlap(&cand, &refs);
    Prf::from_counts(
        overlap,
        candidate.len().saturating_sub(n - 1),
        reference.len().saturating_sub(n - 1),
    )
}

/// Length of the longest common subsequence, two-row DP.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut prev = vec![0usize; short.len() + 1];
    let mut curr = vec![0usize; short.len() + 1];
    for x in long {
        for (j, y) in short.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                curr[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[short.len()]
}

/// ROUGE-L: LCS length over candidate and reference lengths.
pub fn rouge_l(candidate: &TokenSeq, reference: &TokenSeq) -> Prf {
    let lcs = lcs_len(candidate, reference);
    Prf::from_counts(lcs, candidate.len(), reference.len())
}
