//! HTTP service for human rating: hands out batches of generated questions,
//! accepts ratings, and exposes agreement, runs and scores.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use qgbench_core::agreement::{kappa_per_criterion, AgreementError, Criterion, RatingRecord};
use qgbench_core::corpus::{parse_quads, QuadRecord};
use qgbench_core::digest::sha256_parts;
use qgbench_core::generation::{list_runs, GenerationRun, RunManifest};
use qgbench_core::metrics::{evaluate_run, ScoreReport};
use qgbench_core::promptkit::PromptSetting;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::ServerConfig;
use crate::store::RatingLog;
use crate::SCORES_FILE;

/// One generated question open for rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub target_id: String,
    pub run_id: String,
    pub record_id: String,
    pub context: String,
    pub generated_question: String,
    pub gold_question: String,
    pub setting: PromptSetting,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchItem {
    pub target_id: String,
    pub context: String,
    pub generated_question: String,
    pub setting: PromptSetting,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_question: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationBatch {
    pub batch_id: String,
    pub rater_id: String,
    pub items: Vec<BatchItem>,
    /// Targets this rater has not rated yet, including the ones in `items`.
    pub remaining: usize,
}

/// Everything the service reads; loaded once at start-up.
#[derive(Debug, Default)]
pub struct Catalog {
    /// Sorted by target id.
    pub targets: Vec<Target>,
    pub runs: Vec<RunManifest>,
    pub scores: HashMap<String, ScoreReport>,
}

impl Catalog {
    /// Builds the catalog from a corpus and a set of runs. Runs whose
    /// records are missing from the corpus are skipped with a warning.
    pub fn build(
        corpus: &[QuadRecord],
        runs: Vec<(RunManifest, GenerationRun)>,
        stored_scores: HashMap<String, ScoreReport>,
    ) -> Self {
        let by_id: HashMap<&str, &QuadRecord> = corpus.iter().map(|r| (r.id.as_str(), r)).collect();
        let gold: HashMap<String, String> =
            corpus.iter().map(|r| (r.id.clone(), r.question.clone())).collect();
        let mut catalog = Catalog::default();
        for (manifest, run) in runs {
            if let Some(missing) = run.results.iter().find(|r| !by_id.contains_key(r.record_id.as_str())) {
                tracing::warn!(run = %run.run_id, record = %missing.record_id, "record not in corpus; run skipped");
                continue;
            }
            for result in run.results.iter().filter(|r| r.is_ok()) {
                let record = by_id[result.record_id.as_str()];
                catalog.targets.push(Target {
                    target_id: run.target_id(&result.record_id),
                    run_id: run.run_id.clone(),
                    record_id: result.record_id.clone(),
                    context: record.context.clone(),
                    generated_question: result.output_question.clone(),
                    gold_question: record.question.clone(),
                    setting: run.setting,
                    model_id: run.model_id.clone(),
                });
            }
            let scores = match stored_scores.get(&run.run_id) {
                Some(s) => Some(s.clone()),
                None => evaluate_run(&run, &gold, None)
                    .map_err(|e| tracing::warn!(run = %run.run_id, error = %e, "scoring failed"))
                    .ok(),
            };
            if let Some(s) = scores {
                catalog.scores.insert(run.run_id.clone(), s);
            }
            catalog.runs.push(manifest);
        }
        catalog.targets.sort_by(|a, b| a.target_id.cmp(&b.target_id));
        catalog
    }

    /// Reads the corpus and every run under `runs_dir`, preferring stored
    /// score files over recomputation.
    pub fn load(corpus_path: &Path, runs_dir: &Path) -> anyhow::Result<Self> {
        let file = std::fs::File::open(corpus_path)
            .with_context(|| format!("opening corpus {}", corpus_path.display()))?;
        let corpus = parse_quads(std::io::BufReader::new(file))
            .with_context(|| format!("parsing corpus {}", corpus_path.display()))?;
        let runs = list_runs(runs_dir).with_context(|| format!("reading runs in {}", runs_dir.display()))?;
        let mut stored = HashMap::new();
        for (manifest, _) in &runs {
            let path: PathBuf = runs_dir.join(&manifest.run_id).join(SCORES_FILE);
            if let Ok(bytes) = std::fs::read(&path) {
                let report: ScoreReport = serde_json::from_slice(&bytes)
                    .with_context(|| format!("parsing {}", path.display()))?;
                stored.insert(manifest.run_id.clone(), report);
            }
        }
        Ok(Self::build(&corpus, runs, stored))
    }
}

pub struct AppState {
    pub catalog: Catalog,
    pub ratings: RatingLog,
    pub page_size: usize,
    pub show_gold: bool,
    pub show_model: bool,
    pub shuffle_seed: u64,
}

impl AppState {
    pub fn new(catalog: Catalog, ratings: RatingLog, config: &ServerConfig) -> Self {
        Self {
            catalog,
            ratings,
            page_size: config.page_size.max(1),
            show_gold: config.show_gold,
            show_model: config.show_model,
            shuffle_seed: config.shuffle_seed,
        }
    }

    /// The rater's unrated targets in the rater's own shuffled order, with
    /// the first page as the batch.
    pub fn next_batch(&self, rater_id: &str) -> AnnotationBatch {
        let rated: HashSet<String> = self
            .ratings
            .snapshot()
            .into_iter()
            .filter(|r| r.rater_id == rater_id)
            .map(|r| r.target_id)
            .collect();
        let seed_hex = sha256_parts([self.shuffle_seed.to_le_bytes().as_slice(), rater_id.as_bytes()]);
        let seed = u64::from_str_radix(&seed_hex[..16], 16).expect("hex digest");
        let mut order: Vec<&Target> = self.catalog.targets.iter().collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let open: Vec<&Target> = order
            .into_iter()
            .filter(|t| !rated.contains(&t.target_id))
            .collect();
        let items: Vec<BatchItem> = open
            .iter()
            .take(self.page_size)
            .map(|t| BatchItem {
                target_id: t.target_id.clone(),
                context: t.context.clone(),
                generated_question: t.generated_question.clone(),
                setting: t.setting,
                model_id: self.show_model.then(|| t.model_id.clone()),
                gold_question: self.show_gold.then(|| t.gold_question.clone()),
            })
            .collect();
        let ids: Vec<&[u8]> = items.iter().map(|i| i.target_id.as_bytes()).collect();
        let batch_id = sha256_parts(std::iter::once(rater_id.as_bytes()).chain(ids))[..16].to_string();
        AnnotationBatch {
            batch_id,
            rater_id: rater_id.to_string(),
            items,
            remaining: open.len(),
        }
    }

    fn knows_target(&self, target_id: &str) -> bool {
        self.catalog
            .targets
            .binary_search_by(|t| t.target_id.as_str().cmp(target_id))
            .is_ok()
    }
}

/// Body of `POST /api/ratings`; the timestamp defaults to arrival time.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RatingSubmission {
    rater_id: String,
    target_id: String,
    scores: std::collections::BTreeMap<Criterion, u8>,
    #[serde(default)]
    submitted_at: Option<DateTime<Utc>>,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

#[derive(Deserialize)]
struct BatchQuery {
    rater: Option<String>,
}

async fn next_batch(State(state): State<Arc<AppState>>, Query(q): Query<BatchQuery>) -> Response {
    match q.rater.filter(|r| !r.trim().is_empty()) {
        Some(rater) => Json(state.next_batch(&rater)).into_response(),
        None => error(StatusCode::BAD_REQUEST, "query parameter `rater` is required"),
    }
}

async fn post_rating(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let submission: RatingSubmission = match serde_json::from_slice(&body) {
        Ok(s) => s,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed rating: {e}")),
    };
    let record = RatingRecord {
        rater_id: submission.rater_id,
        target_id: submission.target_id,
        scores: submission.scores,
        submitted_at: submission.submitted_at.unwrap_or_else(Utc::now),
    };
    if let Err(e) = record.validate() {
        return error(StatusCode::BAD_REQUEST, e.to_string());
    }
    if !state.knows_target(&record.target_id) {
        return error(StatusCode::BAD_REQUEST, format!("unknown target `{}`", record.target_id));
    }
    let appended = {
        let state = state.clone();
        let record = record.clone();
        tokio::task::spawn_blocking(move || state.ratings.append(&record)).await
    };
    match appended {
        Ok(Ok(())) => (StatusCode::CREATED, Json(record)).into_response(),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn agreement(State(state): State<Arc<AppState>>) -> Response {
    let ratings = state.ratings.snapshot();
    match kappa_per_criterion(&ratings) {
        Ok(report) => Json(report).into_response(),
        Err(AgreementError::UnevenCoverage(missing)) => (
            StatusCode::CONFLICT,
            Json(json!({
                "error": "uneven coverage",
                "missing": missing
                    .iter()
                    .map(|(rater, target)| json!({ "rater_id": rater, "target_id": target }))
                    .collect::<Vec<_>>(),
            })),
        )
            .into_response(),
        Err(e) => error(StatusCode::CONFLICT, e.to_string()),
    }
}

async fn runs(State(state): State<Arc<AppState>>) -> Json<Vec<RunManifest>> {
    Json(state.catalog.runs.clone())
}

async fn run_scores(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    match state.catalog.scores.get(&id) {
        Some(report) => Json(report).into_response(),
        None if state.catalog.runs.iter().any(|m| m.run_id == id) => {
            error(StatusCode::NOT_FOUND, format!("run `{id}` has no scores"))
        }
        None => error(StatusCode::NOT_FOUND, format!("unknown run `{id}`")),
    }
}

async fn healthz() -> &'static str {
    "ok"
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/batches/next", get(next_batch))
        .route("/api/ratings", post(post_rating))
        .route("/api/agreement", get(agreement))
        .route("/api/runs", get(runs))
        .route("/api/runs/{id}/scores", get(run_scores))
        .route("/healthz", get(healthz))
        .with_state(state)
}

/// Binds the configured address and serves until ctrl-c.
pub async fn serve(config: &ServerConfig) -> anyhow::Result<()> {
    let catalog = Catalog::load(&config.corpus, &config.runs_dir)?;
    let ratings = RatingLog::open(&config.ratings_file)?;
    tracing::info!(
        targets = catalog.targets.len(),
        runs = catalog.runs.len(),
        ratings = ratings.len(),
        "catalog loaded"
    );
    let state = Arc::new(AppState::new(catalog, ratings, config));
    let listener = tokio::net::TcpListener::bind((config.bind.as_str(), config.port))
        .await
        .with_context(|| format!("binding {}:{}", config.bind, config.port))?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
