use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use sha2::{Digest, Sha256};

use super::{tokenize, Prf};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("no embeddings available for text `{0}`")]
    Missing(String),
    #[error("embedding file line {0}: {1}")]
    Malformed(usize, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Source of per-token contextual embeddings for a piece of text.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<Vec<f64>>, EmbeddingError>;
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Mean over `from` of the best cosine against any vector in `to`.
/// Per-token maxima are clamped to `[0, 1]`.
fn greedy_mean(from: &[Vec<f64>], to: &[Vec<f64>]) -> f64 {
    let total: f64 = from
        .iter()
        .map(|u| {
            to.iter()
                .map(|v| cosine(u, v))
                .fold(f64::NEG_INFINITY, f64::max)
                .clamp(0.0, 1.0)
        })
        .sum();
    total / from.len() as f64
}

/// Greedy-matching embedding similarity: precision averages each candidate
/// token's best match in the reference, recall the other way round. No
/// baseline rescaling. An empty side scores zero.
pub fn bert_score(cand_vecs: &[Vec<f64>], ref_vecs: &[Vec<f64>]) -> Result<Prf, EmbeddingError> {
    let dim = cand_vecs
        .first()
        .or(ref_vecs.first())
        .map_or(0, |v| v.len());
    if let Some(bad) = cand_vecs.iter().chain(ref_vecs).find(|v| v.len() != dim) {
        return Err(EmbeddingError::DimensionMismatch(dim, bad.len()));
    }
    if cand_vecs.is_empty() || ref_vecs.is_empty() {
        return Ok(Prf::ZERO);
    }
    Ok(Prf::new(
        greedy_mean(cand_vecs, ref_vecs),
        greedy_mean(ref_vecs, cand_vecs),
    ))
}

#[derive(Deserialize)]
struct VectorLine {
    text: String,
    vectors: Vec<Vec<f64>>,
}

/// Precomputed embeddings read from a newline-delimited file of
/// `{"text": ..., "vectors": [[...], ...]}` objects, looked up by exact text.
#[derive(Debug, Default)]
pub struct VectorFileEmbeddings {
    table: HashMap<String, Vec<Vec<f64>>>,
}

impl VectorFileEmbeddings {
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, EmbeddingError> {
        let mut table = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: VectorLine = serde_json::from_str(&line)
                .map_err(|e| EmbeddingError::Malformed(idx + 1, e.to_string()))?;
            table.insert(parsed.text, parsed.vectors);
        }
        Ok(Self { table })
    }

    pub fn open(path: &Path) -> Result<Self, EmbeddingError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }
}

impl EmbeddingProvider for VectorFileEmbeddings {
    fn embed(&self, text: &str) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        self.table
            .get(text)
            .cloned()
            .ok_or_else(|| EmbeddingError::Missing(text.to_string()))
    }
}

/// Context-free stand-in: each normalized token is hashed to a one-hot
/// vector. Useful offline; reduces the metric to soft unigram overlap.
#[derive(Debug, Clone)]
pub struct OneHotEmbeddings {
    pub dim: usize,
}

impl Default for OneHotEmbeddings {
    fn default() -> Self {
        Self { dim: 4096 }
    }
}

impl EmbeddingProvider for OneHotEmbeddings {
    fn embed(&self, text: &str) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        Ok(tokenize(text)
            .iter()
            .map(|token| {
                let digest = Sha256::digest(token.as_bytes());
                let bucket = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
                let mut v = vec![0.0; self.dim];
                v[(bucket % self.dim as u64) as usize] = 1.0;
                v
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: usize, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    }

    #[test]
    fn identity_and_orthogonal() {
        let side = vec![e(0, 3), e(1, 3)];
        assert_eq!(bert_score(&side, &side).unwrap(), Prf::new(1.0, 1.0));
        assert_eq!(bert_score(&[e(0, 3)], &[e(1, 3), e(2, 3)]).unwrap(), Prf::ZERO);
    }

    #[test]
    fn subset_side() {
        let p = bert_score(&[e(0, 2)], &[e(0, 2), e(1, 2)]).unwrap();
        assert_eq!(p.precision, 1.0);
        assert_eq!(p.recall, 0.5);
        assert!((p.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn errors_and_empty() {
        assert!(matches!(
            bert_score(&[e(0, 2)], &[e(0, 3)]),
            Err(EmbeddingError::DimensionMismatch(2, 3))
        ));
        assert_eq!(bert_score(&[], &[e(0, 2)]).unwrap(), Prf::ZERO);
    }

    #[test]
    fn vector_file_lookup() {
        let data = r#"{"text":"hi there","vectors":[[1.0,0.0],[0.0,1.0]]}"#;
        let provider = VectorFileEmbeddings::from_reader(data.as_bytes()).unwrap();
        assert_eq!(provider.embed("hi there").unwrap().len(), 2);
        assert!(matches!(provider.embed("nope"), Err(EmbeddingError::Missing(_))));
    }

    #[test]
    fn one_hot_identity() {
        let p = OneHotEmbeddings::default();
        let v = p.embed("What is PPP?").unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(bert_score(&v, &v).unwrap(), Prf::new(1.0, 1.0));
    }
}
