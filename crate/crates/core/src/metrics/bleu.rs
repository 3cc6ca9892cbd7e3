use super::{clipped_overlap, ngram_counts, TokenSeq};

/// Stand-in numerator for an n-gram order with no matches.
pub const BLEU_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Default)]
struct BleuStats {
    matches: Vec<usize>,
    totals: Vec<usize>,
    candidate_len: usize,
    reference_len: usize,
}

impl BleuStats {
    fn new(max_n: usize) -> Self {
        Self {
            matches: vec![0; max_n],
            totals: vec![0; max_n],
            ..Self::default()
        }
    }

    fn add(&mut self, candidate: &TokenSeq, reference: &TokenSeq) {
        for n in 1..=self.matches.len() {
            let cand = ngram_counts(candidate, n);
            let refs = ngram_counts(reference, n);
            self.matches[n - 1] += clipped_overlap(&cand, &refs);
            self.totals[n - 1] += candidate.len().saturating_sub(n - 1);
        }
        self.candidate_len += candidate.len();
        self.reference_len += reference.len();
    }

    /// Geometric mean over the orders the candidate side actually has
    /// n-grams for, times the brevity penalty.
    fn score(&self) -> f64 {
        if self.candidate_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        let mut orders = 0usize;
        for (&m, &t) in self.matches.iter().zip(&self.totals) {
            if t == 0 {
                continue;
            }
            let numerator = if m == 0 { BLEU_EPSILON } else { m as f64 };
            log_sum += (numerator / t as f64).ln();
            orders += 1;
        }
        let precision = (log_sum / orders as f64).exp();
        let brevity = if self.candidate_len < self.reference_len {
            (1.0 - self.reference_len as f64 / self.candidate_len as f64).exp()
        } else {
            1.0
        };
        (precision * brevity).clamp(0.0, 1.0)
    }
}

/// Sentence-level BLEU with clipped modified precisions for orders
/// `1..=max_n`, epsilon smoothing of zero counts and the usual brevity
/// penalty. Orders longer than the candidate are left out of the mean.
pub fn bleu(candidate: &TokenSeq, reference: &TokenSeq, max_n: usize) -> f64 {
    assert!(max_n >= 1, "bleu needs max_n >= 1");
    let mut stats = BleuStats::new(max_n);
    stats.add(candidate, reference);
    stats.score()
}

/// Corpus-level BLEU: n-gram counts and lengths are pooled over all pairs
/// before the precisions and brevity penalty are formed.
pub fn corpus_bleu<'a, I>(pairs: I, max_n: usize) -> f64
where
    I: IntoIterator<Item = (&'a TokenSeq, &'a TokenSeq)>,
{
    assert!(max_n >= 1, "bleu needs max_n >= 1");
    let mut stats = BleuStats::new(max_n);
    for (candidate, reference) in pairs {
        stats.add(candidate, reference);
    }
    stats.score()
}
