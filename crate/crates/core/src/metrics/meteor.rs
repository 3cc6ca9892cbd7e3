use std::collections::HashMap;

use super::stem::porter_stem;
use super::TokenSeq;

pub const METEOR_ALPHA: f64 = 0.9;
pub const METEOR_BETA: f64 = 3.0;
pub const METEOR_GAMMA: f64 = 0.5;

/// Upper bound on search nodes per alignment stage. Past it the best
/// alignment found so far is kept; the first one found is already the
/// greedy in-order alignment.
const SEARCH_BUDGET: usize = 200_000;

/// One-to-one token alignment between candidate and reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// `links[i]` is the reference position matched to candidate token `i`.
    pub links: Vec<Option<usize>>,
    pub matches: usize,
    pub chunks: usize,
}

fn count_chunks(links: &[Option<usize>]) -> usize {
    let mut chunks = 0;
    let mut prev: Option<usize> = None;
    for link in links {
        match (*link, prev) {
            (Some(r), Some(p)) if r == p + 1 => {}
            (Some(_), _) => chunks += 1,
            (None, _) => {}
        }
        prev = *link;
    }
    chunks
}

struct Stage {
    links: Vec<Option<usize>>,
    ref_used: Vec<bool>,
    /// Key id per candidate position, `None` when the token is already
    /// aligned or has no partner with the same key.
    cand_key: Vec<Option<usize>>,
    /// Unused reference positions per key id, ascending.
    ref_positions: Vec<Vec<usize>>,
    /// Matches still owed per key id.
    quota: Vec<usize>,
    /// `remaining[i][k]`: open candidate positions `>= i` with key `k`.
    remaining: Vec<Vec<usize>>,
    best: Option<(usize, Vec<Option<usize>>)>,
    nodes: usize,
}

impl Stage {
    fn new(
        links: Vec<Option<usize>>,
        ref_used: Vec<bool>,
        cand_keys: &[String],
        ref_keys: &[String],
    ) -> Self {
        let mut ids: HashMap<&str, usize> = HashMap::new();
        let mut ref_positions: Vec<Vec<usize>> = Vec::new();
        for (j, key) in ref_keys.iter().enumerate() {
            if ref_used[j] {
                continue;
            }
            let next = ids.len();
            let id = *ids.entry(key.as_str()).or_insert(next);
            if id == ref_positions.len() {
                ref_positions.push(Vec::new());
            }
            ref_positions[id].push(j);
        }
        let cand_key: Vec<Option<usize>> = cand_keys
            .iter()
            .enumerate()
            .map(|(i, key)| {
                if links[i].is_some() {
                    None
                } else {
                    ids.get(key.as_str()).copied()
                }
            })
            .collect();
        let n_keys = ref_positions.len();
        let mut cand_count = vec![0usize; n_keys];
        for id in cand_key.iter().flatten() {
            cand_count[*id] += 1;
        }
        let quota = (0..n_keys)
            .map(|k| cand_count[k].min(ref_positions[k].len()))
            .collect();
        let mut remaining = vec![vec![0usize; n_keys]; cand_key.len() + 1];
        for i in (0..cand_key.len()).rev() {
            remaining[i] = remaining[i + 1].clone();
            if let Some(id) = cand_key[i] {
                remaining[i][id] += 1;
            }
        }
        Self {
            links,
            ref_used,
            cand_key,
            ref_positions,
            quota,
            remaining,
            best: None,
            nodes: 0,
        }
    }

    fn solve(mut self) -> Vec<Option<usize>> {
        self.search(0, 0, None);
        self.best.map(|(_, links)| links).unwrap_or(self.links)
    }

    /// Depth-first over candidate positions. `chunks` counts chunks closed
    /// or open among positions `< i`; `prev` is the link at `i - 1`.
    fn search(&mut self, i: usize, chunks: usize, prev: Option<usize>) {
        self.nodes += 1;
        if let Some((best, _)) = &self.best {
            if chunks >= *best || self.nodes > SEARCH_BUDGET {
                return;
            }
        }
        if i == self.links.len() {
            self.best = Some((chunks, self.links.clone()));
            return;
        }
        let step = |link: Option<usize>| match (link, prev) {
            (Some(r), Some(p)) if r == p + 1 => 0,
            (Some(_), _) => 1,
            (None, _) => 0,
        };

        let Some(key) = self.cand_key[i] else {
            let link = self.links[i];
            self.search(i + 1, chunks + step(link), link);
            return;
        };

        let mut options: Vec<usize> = self.ref_positions[key]
            .iter()
            .copied()
            .filter(|&j| !self.ref_used[j])
            .collect();
        if self.quota[key] > 0 {
            // continuing the current chunk first makes the first leaf the
            // greedy alignment
            if let Some(p) = prev {
                if let Some(pos) = options.iter().position(|&j| j == p + 1) {
                    let j = options.remove(pos);
                    options.insert(0, j);
                }
            }
            for j in options {
                self.ref_used[j] = true;
                self.quota[key] -= 1;
                self.links[i] = Some(j);
                self.search(i + 1, chunks + step(Some(j)), Some(j));
                self.links[i] = None;
                self.quota[key] += 1;
                self.ref_used[j] = false;
            }
        }
        // leaving this token open is allowed only if later tokens with the
        // same key can still fill the quota
        if self.remaining[i + 1][key] >= self.quota[key] {
            self.search(i + 1, chunks, None);
        }
    }
}

/// Exact matches first, then Porter-stem matches among the leftovers. Each
/// stage takes the maximum number of matches and, among those, the fewest
/// chunks for the combined alignment.
pub fn meteor_alignment(candidate: &TokenSeq, reference: &TokenSeq) -> Alignment {
    let links = vec![None; candidate.len()];
    let ref_used = vec![false; reference.len()];
    let exact = Stage::new(links, ref_used, candidate, reference).solve();

    let mut ref_used = vec![false; reference.len()];
    for j in exact.iter().flatten() {
        ref_used[*j] = true;
    }
    let cand_stems: Vec<String> = candidate.iter().map(|t| porter_stem(t)).collect();
    let ref_stems: Vec<String> = reference.iter().map(|t| porter_stem(t)).collect();
    let links = Stage::new(exact, ref_used, &cand_stems, &ref_stems).solve();

    Alignment {
        matches: links.iter().flatten().count(),
        chunks: count_chunks(&links),
        links,
    }
}

/// METEOR with exact and stem matching: `F_mean = P R / (a P + (1 - a) R)`
/// with `a = 0.9`, fragmentation penalty `0.5 (chunks / matches)^3`.
pub fn meteor(candidate: &TokenSeq, reference: &TokenSeq) -> f64 {
    let alignment = meteor_alignment(candidate, reference);
    let m = alignment.matches;
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / candidate.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let f_mean = p * r / (METEOR_ALPHA * p + (1.0 - METEOR_ALPHA) * r);
    let penalty = METEOR_GAMMA * (alignment.chunks as f64 / m as f64).powf(METEOR_BETA);
    f_mean * (1.0 - penalty)
}
