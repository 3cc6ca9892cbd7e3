//! Driving generation endpoints over a corpus.
//!
//! A [`Generator`] wraps one [`GenerationAdapter`] with a response cache and
//! a retry policy. Failures never abort a batch; they are recorded in the
//! per-record [`GenerationResult`].

mod adapter;
mod cache;
mod http;

pub use adapter::{context_of, postprocess, AdapterError, GenParams, GenerationAdapter, MockAdapter};
pub use cache::ResponseCache;
pub use http::{ApiStyle, HttpAdapter, HttpAdapterConfig};

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::QuadRecord;
use crate::digest::{sha256_hex, sha256_parts};
use crate::promptkit::{render, InputStyle, PromptSetting, RenderedInput};

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("no records to generate for")]
    EmptyCorpus,
    #[error("parallelism must be at least 1")]
    InvalidParallelism,
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("run file {0}: {1}")]
    CorruptRun(PathBuf, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub record_id: String,
    pub setting: PromptSetting,
    pub model_id: String,
    pub input_digest: String,
    pub output_question: String,
    pub status: GenerationStatus,
    pub latency_ms: u64,
}

impl GenerationResult {
    pub fn is_ok(&self) -> bool {
        self.status == GenerationStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRun {
    pub run_id: String,
    pub model_id: String,
    pub setting: PromptSetting,
    #[serde(default)]
    pub input_style: InputStyle,
    pub params: GenParams,
    pub results: Vec<GenerationResult>,
    pub created_at: DateTime<Utc>,
}

impl GenerationRun {
    pub fn ok_count(&self) -> usize {
        self.results.iter().filter(|r| r.is_ok()).count()
    }

    /// Identifier of the generated question for `record_id` in this run.
    pub fn target_id(&self, record_id: &str) -> String {
        target_id(&self.run_id, record_id)
    }
}

/// Generated-question identity used by ratings: `<run_id>:<record_id>`.
pub fn target_id(run_id: &str, record_id: &str) -> String {
    format!("{run_id}:{record_id}")
}

/// Retries after the first attempt, with delays `base_delay * 2^k`. A
/// server-supplied retry-after takes the place of the computed delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    #[serde(with = "millis")]
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_retries: u32) -> Self {
        Self {
            max_retries,
            base_delay: Duration::ZERO,
        }
    }

    pub fn delay(&self, retry: u32, error: &AdapterError) -> Duration {
        if let AdapterError::RateLimited {
            retry_after: Some(after),
        } = error
        {
            return *after;
        }
        self.base_delay * 2u32.saturating_pow(retry)
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

pub struct Generator<'a> {
    adapter: &'a dyn GenerationAdapter,
    cache: Option<&'a ResponseCache>,
    retry: RetryPolicy,
}

impl<'a> Generator<'a> {
    pub fn new(adapter: &'a dyn GenerationAdapter) -> Self {
        Self {
            adapter,
            cache: None,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_cache(mut self, cache: &'a ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// One generation, served from the cache when this model, parameter set
    /// and input were generated before.
    pub fn generate(
        &self,
        record_id: &str,
        setting: PromptSetting,
        input: &RenderedInput,
        params: &GenParams,
    ) -> GenerationResult {
        let model_id = self.adapter.model_id();
        let input_digest = sha256_hex(input.flatten().as_bytes());
        let key = ResponseCache::key(model_id, params, &input_digest);

        if let Some(mut hit) = self.cache.and_then(|c| c.get(&key)) {
            hit.record_id = record_id.to_string();
            hit.setting = setting;
            return hit;
        }

        let mut retry = 0;
        let (status, output, latency_ms) = loop {
            let started = Instant::now();
            let outcome = self.adapter.complete(input, params).and_then(|raw| {
                let cleaned = postprocess(&raw);
                if cleaned.is_empty() {
                    Err(AdapterError::MalformedResponse("empty output".into()))
                } else {
                    Ok(cleaned)
                }
            });
            let latency_ms = started.elapsed().as_millis() as u64;
            match outcome {
                Ok(text) => break (GenerationStatus::Ok, text, latency_ms),
                Err(err) if err.is_retryable() && retry < self.retry.max_retries => {
                    let wait = self.retry.delay(retry, &err);
                    tracing::debug!(record_id, %err, retry, ?wait, "retrying");
                    std::thread::sleep(wait);
                    retry += 1;
                }
                Err(err) => break (GenerationStatus::Failed(err.to_string()), String::new(), latency_ms),
            }
        };

        let result = GenerationResult {
            record_id: record_id.to_string(),
            setting,
            model_id: model_id.to_string(),
            input_digest,
            output_question: output,
            status,
            latency_ms,
        };
        if result.is_ok() {
            if let Some(cache) = self.cache {
                if let Err(err) = cache.put(&key, &result) {
                    tracing::warn!(%err, "could not write cache entry");
                }
            }
        }
        result
    }

    /// Generates for every record with up to `parallelism` requests in
    /// flight. Results follow input order.
    pub fn run_batch(
        &self,
        records: &[QuadRecord],
        setting: PromptSetting,
        style: InputStyle,
        params: &GenParams,
        parallelism: usize,
    ) -> Result<GenerationRun, GenerationError> {
        if records.is_empty() {
            return Err(GenerationError::EmptyCorpus);
        }
        if parallelism == 0 {
            return Err(GenerationError::InvalidParallelism);
        }
        params.validate().map_err(GenerationError::InvalidParams)?;

        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<GenerationResult>>> =
            records.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..parallelism.min(records.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(record) = records.get(i) else { break };
                    let input = render(record, setting, style);
                    let result = self.generate(&record.id, setting, &input, params);
                    *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(result);
                });
            }
        });
        let results: Vec<GenerationResult> = slots
            .into_iter()
            .map(|slot| {
                slot.into_inner()
                    .unwrap_or_else(|e| e.into_inner())
                    .expect("every slot filled")
            })
            .collect();

        Ok(GenerationRun {
            run_id: run_id(self.adapter.model_id(), setting, style, params, records),
            model_id: self.adapter.model_id().to_string(),
            setting,
            input_style: style,
            params: params.clone(),
            results,
            created_at: Utc::now(),
        })
    }
}

/// Deterministic run id from everything that determines the run's outputs.
pub fn run_id(
    model_id: &str,
    setting: PromptSetting,
    style: InputStyle,
    params: &GenParams,
    records: &[QuadRecord],
) -> String {
    let params_json = serde_json::to_string(params).expect("params serialize");
    let style_json = serde_json::to_string(&style).expect("style serializes");
    let ids = records.iter().map(|r| r.id.as_str()).collect::<Vec<_>>().join("\n");
    let digest = sha256_parts([
        model_id.as_bytes(),
        setting.slug().as_bytes(),
        style_json.as_bytes(),
        params_json.as_bytes(),
        ids.as_bytes(),
    ]);
    let model_slug: String = model_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '-' })
        .collect();
    format!("{model_slug}-{}-{}", setting.slug(), &digest[..10])
}

/// Run metadata written next to the results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub model_id: String,
    pub setting: PromptSetting,
    pub input_style: InputStyle,
    pub params: GenParams,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    /// Relative to the run directory.
    pub results_file: PathBuf,
    pub results_digest: String,
    pub n_results: usize,
    pub n_ok: usize,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESULTS_FILE: &str = "results.ndjson";

/// Writes `<dir>/<run_id>/results.ndjson` and `manifest.json`.
pub fn write_run(
    run: &GenerationRun,
    dir: &Path,
    corpus_digest: Option<String>,
    split_seed: Option<u64>,
) -> Result<RunManifest, GenerationError> {
    let run_dir = dir.join(&run.run_id);
    fs::create_dir_all(&run_dir)?;
    let mut body = Vec::new();
    for result in &run.results {
        serde_json::to_writer(&mut body, result).expect("result serializes");
        body.push(b'\n');
    }
    write_atomic(&run_dir.join(RESULTS_FILE), &body)?;
    let manifest = RunManifest {
        run_id: run.run_id.clone(),
        model_id: run.model_id.clone(),
        setting: run.setting,
        input_style: run.input_style,
        params: run.params.clone(),
        created_at: run.created_at,
        corpus_digest,
        split_seed,
        results_file: PathBuf::from(RESULTS_FILE),
        results_digest: sha256_hex(&body),
        n_results: run.results.len(),
        n_ok: run.ok_count(),
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_atomic(&run_dir.join(MANIFEST_FILE), &json)?;
    Ok(manifest)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        w.write_all(bytes)?;
        w.flush()?;
        w.get_ref().sync_all()?;
    }
    fs::rename(tmp, path)
}

/// Loads a run directory written by [`write_run`], checking the results
/// digest against the manifest.
pub fn read_run(run_dir: &Path) -> Result<(RunManifest, GenerationRun), GenerationError> {
    let manifest_path = run_dir.join(MANIFEST_FILE);
    let manifest: RunManifest = serde_json::from_slice(&fs::read(&manifest_path)?)
        .map_err(|e| GenerationError::CorruptRun(manifest_path.clone(), e.to_string()))?;
    let results_path = run_dir.join(&manifest.results_file);
    let body = fs::read(&results_path)?;
    if sha256_hex(&body) != manifest.results_digest {
        return Err(GenerationError::CorruptRun(results_path, "digest mismatch".into()));
    }
    let mut results = Vec::with_capacity(manifest.n_results);
    for (idx, line) in BufReader::new(body.as_slice()).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let result = serde_json::from_str(&line).map_err(|e| {
            GenerationError::CorruptRun(results_path.clone(), format!("line {}: {e}", idx + 1))
        })?;
        results.push(result);
    }
    let run = GenerationRun {
        run_id: manifest.run_id.clone(),
        model_id: manifest.model_id.clone(),
        setting: manifest.setting,
        input_style: manifest.input_style,
        params: manifest.params.clone(),
        results,
        created_at: manifest.created_at,
    };
    Ok((manifest, run))
}

/// Every run directory under `dir` (directories holding a manifest), sorted
/// by run id.
pub fn list_runs(dir: &Path) -> Result<Vec<(RunManifest, GenerationRun)>, GenerationError> {
    let mut runs = Vec::new();
    let Ok(entries) = fs::read_dir(dir) else {
        return Ok(runs);
    };
    for entry in entries.flatten() {
        let path = entry.path();
        if path.join(MANIFEST_FILE).is_file() {
            runs.push(read_run(&path)?);
        }
    }
    runs.sort_by(|a, b| a.0.run_id.cmp(&b.0.run_id));
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{ppp_record, synthetic};
    use crate::promptkit::render_instruction;
    use std::sync::atomic::AtomicUsize;

    struct Counting<A> {
        inner: A,
        calls: AtomicUsize,
    }

    impl<A: GenerationAdapter> GenerationAdapter for Counting<A> {
        fn model_id(&self) -> &str {
            self.inner.model_id()
        }
        fn complete(&self, input: &RenderedInput, params: &GenParams) -> Result<String, AdapterError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.complete(input, params)
        }
    }

    /// Fails with `error` for the first `failures` calls, then echoes.
    struct Flaky {
        failures: usize,
        error: AdapterError,
        calls: AtomicUsize,
    }

    impl GenerationAdapter for Flaky {
        fn model_id(&self) -> &str {
            "flaky"
        }
        fn complete(&self, input: &RenderedInput, _: &GenParams) -> Result<String, AdapterError> {
            if self.calls.fetch_add(1, Ordering::SeqCst) < self.failures {
                Err(self.error.clone())
            } else {
                Ok(MockAdapter::answer(input))
            }
        }
    }

    #[test]
    fn mock_generation_is_ok() {
        let mock = MockAdapter::default();
        let input = render_instruction(&ppp_record(), PromptSetting::WithoutPrompt);
        let result = Generator::new(&mock).generate("ppp-1", PromptSetting::WithoutPrompt, &input, &GenParams::chat());
        assert!(result.is_ok());
        assert_eq!(result.output_question, "What is Purchasing power parity (PPP) is?");
        assert_eq!(result.input_digest, sha256_hex(input.flatten().as_bytes()));
    }

    #[test]
    fn cache_hit_makes_no_call() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let adapter = Counting { inner: MockAdapter::default(), calls: AtomicUsize::new(0) };
        let gen = Generator::new(&adapter).with_cache(&cache);
        let input = render_instruction(&ppp_record(), PromptSetting::WithLongPrompt);
        let params = GenParams::chat();
        let first = gen.generate("ppp-1", PromptSetting::WithLongPrompt, &input, &params);
        let second = gen.generate("ppp-1", PromptSetting::WithLongPrompt, &input, &params);
        assert_eq!(adapter.calls.load(Ordering::SeqCst), 1);
        assert_eq!(serde_json::to_vec(&first).unwrap(), serde_json::to_vec(&second).unwrap());
        assert_eq!(cache.len(), 1);

        // a different parameter set is a different cache entry
        gen.generate("ppp-1", PromptSetting::WithLongPrompt, &input, &GenParams::completion());
        assert_eq!(adapter.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn retries_then_succeeds() {
        let flaky = Flaky { failures: 2, error: AdapterError::Server(503), calls: AtomicUsize::new(0) };
        let gen = Generator::new(&flaky).with_retry(RetryPolicy::no_delay(3));
        let input = render_instruction(&ppp_record(), PromptSetting::WithLongPrompt);
        let r = gen.generate("x", PromptSetting::WithLongPrompt, &input, &GenParams::chat());
        assert!(r.is_ok());
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn exhausted_retries_fold_into_failed() {
        let flaky = Flaky {
            failures: usize::MAX,
            error: AdapterError::RateLimited { retry_after: Some(Duration::ZERO) },
            calls: AtomicUsize::new(0),
        };
        let gen = Generator::new(&flaky).with_retry(RetryPolicy::no_delay(3));
        let input = render_instruction(&ppp_record(), PromptSetting::WithLongPrompt);
        let r = gen.generate("x", PromptSetting::WithLongPrompt, &input, &GenParams::chat());
        assert!(matches!(r.status, GenerationStatus::Failed(_)));
        assert!(r.output_question.is_empty());
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn rejected_requests_are_not_retried() {
        let flaky = Flaky {
            failures: usize::MAX,
            error: AdapterError::Rejected(401, "bad key".into()),
            calls: AtomicUsize::new(0),
        };
        let gen = Generator::new(&flaky).with_retry(RetryPolicy::no_delay(3));
        let input = render_instruction(&ppp_record(), PromptSetting::WithLongPrompt);
        gen.generate("x", PromptSetting::WithLongPrompt, &input, &GenParams::chat());
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn backoff_schedule() {
        let policy = RetryPolicy::default();
        let err = AdapterError::Server(500);
        let delays: Vec<_> = (0..3).map(|k| policy.delay(k, &err).as_secs()).collect();
        assert_eq!(delays, [1, 2, 4]);
        let limited = AdapterError::RateLimited { retry_after: Some(Duration::from_secs(9)) };
        assert_eq!(policy.delay(0, &limited), Duration::from_secs(9));
    }

    #[test]
    fn batch_shape() {
        let mock = MockAdapter::default();
        let records = synthetic(700);
        let run = Generator::new(&mock)
            .run_batch(&records, PromptSetting::WithShortPrompt, InputStyle::Instruction, &GenParams::chat(), 8)
            .unwrap();
        assert_eq!(run.results.len(), 700);
        assert_eq!(run.ok_count(), 700);
        for (r, res) in records.iter().zip(&run.results) {
            assert_eq!(r.id, res.record_id);
            assert_eq!(res.setting, PromptSetting::WithShortPrompt);
        }
    }

    #[test]
    fn batch_errors() {
        let mock = MockAdapter::default();
        let gen = Generator::new(&mock);
        let p = GenParams::chat();
        assert!(matches!(
            gen.run_batch(&[], PromptSetting::WithoutPrompt, InputStyle::Instruction, &p, 1),
            Err(GenerationError::EmptyCorpus)
        ));
        assert!(matches!(
            gen.run_batch(&synthetic(2), PromptSetting::WithoutPrompt, InputStyle::Instruction, &p, 0),
            Err(GenerationError::InvalidParallelism)
        ));
    }

    #[test]
    fn run_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let mock = MockAdapter::default();
        let run = Generator::new(&mock)
            .run_batch(&synthetic(5), PromptSetting::WithLongPrompt, InputStyle::Segmented, &GenParams::chat(), 2)
            .unwrap();
        let manifest = write_run(&run, dir.path(), Some("abc".into()), Some(7)).unwrap();
        assert_eq!(manifest.n_ok, 5);
        let (m2, back) = read_run(&dir.path().join(&run.run_id)).unwrap();
        assert_eq!(m2, manifest);
        assert_eq!(back, run);
        assert_eq!(list_runs(dir.path()).unwrap().len(), 1);

        // tampering is detected
        let results = dir.path().join(&run.run_id).join(RESULTS_FILE);
        fs::write(&results, "{}\n").unwrap();
        assert!(matches!(read_run(&dir.path().join(&run.run_id)), Err(GenerationError::CorruptRun(..))));
    }
}
