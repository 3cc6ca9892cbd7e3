use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{write_quads, CorpusError, QuadRecord};
use crate::digest::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratio: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(ratio: f64, seed: u64) -> Result<Self, CorpusError> {
        if ratio > 0.0 && ratio < 1.0 {
            Ok(Self { ratio, seed })
        } else {
            Err(CorpusError::InvalidRatio(ratio))
        }
    }

    /// `floor(ratio * n)`. The product is nudged by a relative 1e-12 so that
    /// ratios like 0.29 with n = 100 land on 29 rather than 28.
    pub fn train_size(&self, n: usize) -> usize {
        let exact = self.ratio * n as f64;
        ((exact * (1.0 + 1e-12)).floor() as usize).min(n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<QuadRecord>,
    pub test: Vec<QuadRecord>,
}

/// Random train/test partition.
///
/// Indices `0..n` are shuffled with a Fisher-Yates pass driven by ChaCha8
/// seeded from `spec.seed`; the first `floor(ratio * n)` shuffled indices go
/// to the training side. Both sides keep the input's relative order.
pub fn split(records: &[QuadRecord], spec: SplitSpec) -> Result<Split, CorpusError> {
    if records.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let spec = SplitSpec::new(spec.ratio, spec.seed)?;
    let n = records.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let cut = spec.train_size(n);
    let mut in_train = vec![false; n];
    for &idx in &order[..cut] {
        in_train[idx] = true;
    }
    let (train, test): (Vec<_>, Vec<_>) = records
        .iter()
        .zip(in_train)
        .partition(|(_, train)| *train);
    Ok(Split {
        train: train.into_iter().map(|(r, _)| r.clone()).collect(),
        test: test.into_iter().map(|(r, _)| r.clone()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub ratio: f64,
    pub seed: u64,
    pub input_digest: String,
    pub train_file: PathBuf,
    pub test_file: PathBuf,
    pub train_count: usize,
    pub test_count: usize,
}

/// Writes `train.ndjson`, `test.ndjson` and `split_manifest.json` into
/// `out_dir`. `input_bytes` is the raw corpus file, used for the digest.
pub fn write_split(
    out_dir: &Path,
    input_bytes: &[u8],
    spec: SplitSpec,
    parts: &Split,
) -> Result<SplitManifest, CorpusError> {
    std::fs::create_dir_all(out_dir)?;
    let train_file = out_dir.join("train.ndjson");
    let test_file = out_dir.join("test.ndjson");
    write_quads(BufWriter::new(File::create(&train_file)?), &parts.train)?;
    write_quads(BufWriter::new(File::create(&test_file)?), &parts.test)?;
    let manifest = SplitManifest {
        ratio: spec.ratio,
        seed: spec.seed,
        input_digest: sha256_hex(input_bytes),
        train_file,
        test_file,
        train_count: parts.train.len(),
        test_count: parts.test.len(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(out_dir.join("split_manifest.json"), json + "\n")?;
    Ok(manifest)
}
