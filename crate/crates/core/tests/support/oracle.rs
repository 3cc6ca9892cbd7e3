//! Brute-force reference implementations of the n-gram and subsequence
//! metrics. They enumerate everything explicitly and share no code with the
//! library.

#![allow(dead_code)]

pub fn grams<T: Clone>(seq: &[T], n: usize) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut start = 0;
    while start + n <= seq.len() {
        out.push(seq[start..start + n].to_vec());
        start += 1;
    }
    out
}

fn occurrences<T: PartialEq>(list: &[Vec<T>], gram: &[T]) -> usize {
    list.iter().filter(|g| g.as_slice() == gram).count()
}

/// Sum over distinct candidate n-grams of min(count in candidate, count in reference).
pub fn clipped<T: PartialEq + Clone>(cand: &[Vec<T>], reference: &[Vec<T>]) -> usize {
    let mut seen: Vec<Vec<T>> = Vec::new();
    let mut total = 0;
    for g in cand {
        if seen.contains(g) {
            continue;
        }
        seen.push(g.clone());
        total += occurrences(cand, g).min(occurrences(reference, g));
    }
    total
}

fn div(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// (precision, recall, f1)
pub fn rouge_n(cand: &[String], reference: &[String], n: usize) -> (f64, f64, f64) {
    let c = grams(cand, n);
    let r = grams(reference, n);
    let overlap = clipped(&c, &r);
    let (p, rc) = (div(overlap, c.len()), div(overlap, r.len()));
    (p, rc, f1(p, rc))
}

fn is_subsequence(needle: &[&String], hay: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|x| it.any(|h| h == *x))
}

/// Longest common subsequence by trying every subset of candidate positions.
pub fn lcs(cand: &[String], reference: &[String]) -> usize {
    assert!(cand.len() < 20, "exhaustive oracle only for short inputs");
    let mut best = 0;
    for mask in 0u32..(1 << cand.len()) {
        let picked: Vec<&String> = (0..cand.len()).filter(|i| mask & (1 << i) != 0).map(|i| &cand[i]).collect();
        if picked.len() > best && is_subsequence(&picked, reference) {
            best = picked.len();
        }
    }
    best
}

pub fn rouge_l(cand: &[String], reference: &[String]) -> (f64, f64, f64) {
    let l = lcs(cand, reference);
    let (p, r) = (div(l, cand.len()), div(l, reference.len()));
    (p, r, f1(p, r))
}

/// Sentence BLEU: geometric mean over orders with candidate n-grams, zero
/// matches replaced by `epsilon`, times the brevity penalty.
pub fn bleu(cand: &[String], reference: &[String], max_n: usize, epsilon: f64) -> f64 {
    if cand.is_empty() {
        return 0.0;
    }
    let mut product = 1.0f64;
    let mut orders = 0;
    for n in 1..=max_n {
        let c = grams(cand, n);
        if c.is_empty() {
            continue;
        }
        let m = clipped(&c, &grams(reference, n));
        let num = if m == 0 { epsilon } else { m as f64 };
        product *= num / c.len() as f64;
        orders += 1;
    }
    let geo = product.powf(1.0 / orders as f64);
    let (c, r) = (cand.len() as f64, reference.len() as f64);
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    (geo * bp).min(1.0)
}

/// Character n-gram F-beta over whitespace-free text, averaging precision
/// and recall over orders for which the reference has n-grams.
pub fn chrf(cand: &str, reference: &str, max_n: usize, beta: f64) -> f64 {
    let c: Vec<char> = cand.chars().filter(|ch| !ch.is_whitespace()).collect();
    let r: Vec<char> = reference.chars().filter(|ch| !ch.is_whitespace()).collect();
    let (mut ps, mut rs, mut k) = (0.0, 0.0, 0);
    for n in 1..=max_n {
        let rg = grams(&r, n);
        if rg.is_empty() {
            continue;
        }
        let cg = grams(&c, n);
        let m = clipped(&cg, &rg);
        ps += div(m, cg.len());
        rs += div(m, rg.len());
        k += 1;
    }
    if k == 0 {
        return 0.0;
    }
    let (p, rc) = (ps / k as f64, rs / k as f64);
    let b2 = beta * beta;
    if b2 * p + rc == 0.0 {
        0.0
    } else {
        (1.0 + b2) * p * rc / (b2 * p + rc)
    }
}

/// Every sequence of length 0..=max_len over `alphabet`.
pub fn all_sequences(alphabet: &[&str], max_len: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for a in alphabet {
                let mut t = s.clone();
                t.push(a.to_string());
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}
